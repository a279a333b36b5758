#include <cstdlib>
#include <string_view>

#include "filterlens/kernels/kernels.hpp"

namespace filterlens::kernels {

#ifndef FILTERLENS_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

namespace {

const KernelTable& select() {
  if (const char* env = std::getenv("FILTERLENS_SIMD")) {
    if (std::string_view(env) == "scalar") return scalar_table();
  }
  if (const KernelTable* t = avx2_table()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace filterlens::kernels
