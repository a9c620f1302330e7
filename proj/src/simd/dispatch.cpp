#include "corshape/simd/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <string>

namespace corshape::simd {
namespace {

bool cpu_has_avx2() {
#if defined(CORSHAPE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() { return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar; }

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

const KernelTable& table() {
  switch (current().load(std::memory_order_relaxed)) {
#if defined(CORSHAPE_HAVE_AVX2)
    case Backend::kAvx2:
      return detail::avx2_table();
#endif
    default:
      return detail::scalar_table();
  }
}

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": size mismatch (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out{Backend::kScalar};
  if (cpu_has_avx2()) out.push_back(Backend::kAvx2);
  return out;
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  const auto avail = available_backends();
  if (std::find(avail.begin(), avail.end(), backend) == avail.end()) {
    throw std::invalid_argument("SIMD backend '" + std::string(backend_name(backend)) +
                                "' is not available on this machine");
  }
  current().store(backend, std::memory_order_relaxed);
}

void reset_backend() { current().store(detect(), std::memory_order_relaxed); }

double dot(std::span<const double> x, std::span<const double> y) {
  require_same_size(x.size(), y.size(), "dot");
  return table().dot(x.data(), y.data(), x.size());
}

double sum(std::span<const double> x) { return table().sum(x.data(), x.size()); }

void axpy(double a, std::span<const double> x, std::span<double> y) {
  require_same_size(x.size(), y.size(), "axpy");
  table().axpy(a, x.data(), y.data(), x.size());
}

void xpby(std::span<const double> x, double b, std::span<double> y) {
  require_same_size(x.size(), y.size(), "xpby");
  table().xpby(x.data(), b, y.data(), x.size());
}

void hadamard(std::span<const double> x, std::span<const double> y, std::span<double> z) {
  require_same_size(x.size(), y.size(), "hadamard");
  require_same_size(x.size(), z.size(), "hadamard");
  table().hadamard(x.data(), y.data(), z.data(), x.size());
}

void spmv(const CsrView& a, std::span<const double> x, std::span<double> y) {
  require_same_size(a.rows, y.size(), "spmv");
  table().spmv(a, x.data(), y.data());
}

double downdate_diagonal(std::span<double> d, std::span<const double> l) {
  require_same_size(d.size(), l.size(), "downdate_diagonal");
  return table().downdate_diagonal(d.data(), l.data(), d.size());
}

}  // namespace corshape::simd
