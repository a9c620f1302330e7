#pragma once

// Data-parallel inner loops shared by the solvers and the low-rank
// factorization. Every kernel has a scalar reference version; vectorized
// variants are picked once at runtime from the CPU feature set and can be
// overridden (tests compare all available backends against the reference).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace corshape::simd {

enum class Backend { kScalar, kAvx2 };

std::string_view backend_name(Backend backend);

/// Backends compiled into this binary and supported by the running CPU.
std::vector<Backend> available_backends();

Backend active_backend();

/// Forces a backend. Throws std::invalid_argument if it is unavailable.
void set_backend(Backend backend);

/// Restores the automatically detected backend.
void reset_backend();

// Compressed sparse row view; indices are 32-bit to halve index bandwidth.
struct CsrView {
  std::size_t rows = 0;
  const std::uint32_t* row_ptr = nullptr;
  const std::uint32_t* col = nullptr;
  const double* val = nullptr;
};

double dot(std::span<const double> x, std::span<const double> y);
double sum(std::span<const double> x);
/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
/// y = x + b * y
void xpby(std::span<const double> x, double b, std::span<double> y);
/// z = x * y (elementwise)
void hadamard(std::span<const double> x, std::span<const double> y,
              std::span<double> z);
/// y = A x
void spmv(const CsrView& a, std::span<const double> x, std::span<double> y);
/// d -= l * l; returns the sum of the updated d.
double downdate_diagonal(std::span<double> d, std::span<const double> l);

// Function table implemented by each backend translation unit.
struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*xpby)(const double*, double, double*, std::size_t);
  void (*hadamard)(const double*, const double*, double*, std::size_t);
  void (*spmv)(const CsrView&, const double*, double*);
  double (*downdate_diagonal)(double*, const double*, std::size_t);
};

namespace detail {
const KernelTable& scalar_table();
#if defined(CORSHAPE_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
}  // namespace detail

}  // namespace corshape::simd
