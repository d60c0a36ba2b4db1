#include <cstdlib>
#include <stdexcept>
#include <string>

#include "shellvp/simd/kernels.hpp"

namespace shellvp::simd {

std::string_view to_string(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(SHELLVP_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const KernelSet& kernels_for(Isa isa) {
  if (!isa_available(isa)) throw std::runtime_error("instruction set not available: " + std::string(to_string(isa)));
#if defined(SHELLVP_HAVE_AVX2)
  if (isa == Isa::Avx2) return detail::kAvx2Kernels;
#endif
  return detail::kScalarKernels;
}

namespace {

const KernelSet& select() {
  if (const char* env = std::getenv("SHELLVP_ISA")) {
    const std::string want(env);
    if (want == "scalar") return detail::kScalarKernels;
    if (want == "avx2") return kernels_for(Isa::Avx2);
    throw std::runtime_error("SHELLVP_ISA must be 'scalar' or 'avx2', got '" + want + "'");
  }
  return isa_available(Isa::Avx2) ? kernels_for(Isa::Avx2) : detail::kScalarKernels;
}

}  // namespace

const KernelSet& kernels() {
  static const KernelSet& chosen = select();
  return chosen;
}

}  // namespace shellvp::simd
