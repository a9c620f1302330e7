#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "corshape/simd/kernels.hpp"

namespace corshape {

/// Square matrix in compressed sparse row layout. Explicit zeros are never
/// stored; `symmetric()` is a promise made by the producer and checked by
/// `is_symmetric()`.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  explicit CsrMatrix(std::size_t n) : n_(n), row_ptr_(n + 1, 0) {}

  std::size_t size() const { return n_; }
  std::size_t nonzeros() const { return val_.size(); }
  bool symmetric() const { return symmetric_; }
  void set_symmetric(bool s) { symmetric_ = s; }

  std::span<const std::uint32_t> row_ptr() const { return row_ptr_; }
  std::span<const std::uint32_t> col() const { return col_; }
  std::span<const double> values() const { return val_; }
  std::span<double> values() { return val_; }

  /// Entry (i, j), zero when not stored.
  double at(std::size_t i, std::size_t j) const;
  std::vector<double> diagonal() const;

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;

  /// Exact (bitwise) symmetry check.
  bool is_symmetric() const;

  simd::CsrView view() const { return {n_, row_ptr_.data(), col_.data(), val_.data()}; }

 private:
  friend class TripletBuilder;
  friend CsrMatrix scaled(const CsrMatrix&, double);

  std::size_t n_ = 0;
  std::vector<std::uint32_t> row_ptr_{0};
  std::vector<std::uint32_t> col_;
  std::vector<double> val_;
  bool symmetric_ = false;
};

/// Accumulates (row, col, value) contributions. Duplicate entries are summed
/// in insertion order, so two builders fed the same contributions in the
/// same order produce bitwise identical matrices, and a symmetric element
/// loop yields an exactly symmetric matrix.
class TripletBuilder {
 public:
  explicit TripletBuilder(std::size_t n) : n_(n) {}

  void add(std::size_t i, std::size_t j, double v);
  void reserve(std::size_t count) { entries_.reserve(count); }
  CsrMatrix build(bool symmetric) const;

 private:
  struct Entry {
    std::uint32_t row;
    std::uint32_t col;
    double value;
  };
  std::size_t n_;
  std::vector<Entry> entries_;
};

CsrMatrix scaled(const CsrMatrix& a, double factor);

/// a + factor * b, entries summed row by row.
CsrMatrix add(const CsrMatrix& a, const CsrMatrix& b, double factor = 1.0);

}  // namespace corshape
