#include <cstdlib>
#include <string_view>

#include "dsae/kernels.hpp"

namespace dsae::kernels {
namespace {

const KernelTable& select() noexcept {
  const char* forced = std::getenv("DSAE_SIMD");
  if (forced != nullptr && std::string_view(forced) == "scalar") return scalar_table();
  if (const KernelTable* t = avx2_table(); t != nullptr && cpu_has_avx2()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& active() noexcept {
  static const KernelTable& table = select();
  return table;
}

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace dsae::kernels
