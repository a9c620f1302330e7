#include "corshape/sparse.hpp"

#include <algorithm>
#include <numeric>

#include "corshape/error.hpp"

namespace corshape {

double CsrMatrix::at(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) throw InvalidInput("CsrMatrix::at: index out of range");
  const auto first = col_.begin() + row_ptr_[i];
  const auto last = col_.begin() + row_ptr_[i + 1];
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(j));
  if (it == last || *it != j) return 0.0;
  return val_[static_cast<std::size_t>(it - col_.begin())];
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) d[i] = at(i, i);
  return d;
}

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != n_ || y.size() != n_) throw InvalidInput("CsrMatrix::multiply: size mismatch");
  simd::spmv(view(), x, y);
}

std::vector<double> CsrMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(n_);
  multiply(x, y);
  return y;
}

bool CsrMatrix::is_symmetric() const {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::uint32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (at(col_[k], i) != val_[k]) return false;
    }
  }
  return true;
}

void TripletBuilder::add(std::size_t i, std::size_t j, double v) {
  if (i >= n_ || j >= n_) throw InvalidInput("TripletBuilder::add: index out of range");
  entries_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), v});
}

CsrMatrix TripletBuilder::build(bool symmetric) const {
  // Counting sort by row, then a stable sort by column inside each row keeps
  // insertion order among duplicates.
  std::vector<std::uint32_t> count(n_ + 1, 0);
  for (const auto& e : entries_) ++count[e.row + 1];
  std::partial_sum(count.begin(), count.end(), count.begin());
  std::vector<Entry> sorted(entries_.size());
  {
    std::vector<std::uint32_t> next(count.begin(), count.end() - 1);
    for (const auto& e : entries_) sorted[next[e.row]++] = e;
  }

  CsrMatrix m(n_);
  m.symmetric_ = symmetric;
  m.col_.reserve(entries_.size());
  m.val_.reserve(entries_.size());
  for (std::size_t r = 0; r < n_; ++r) {
    auto first = sorted.begin() + count[r];
    auto last = sorted.begin() + count[r + 1];
    std::stable_sort(first, last, [](const Entry& a, const Entry& b) { return a.col < b.col; });
    for (auto it = first; it != last;) {
      double s = 0.0;
      const std::uint32_t c = it->col;
      for (; it != last && it->col == c; ++it) s += it->value;
      if (s != 0.0) {
        m.col_.push_back(c);
        m.val_.push_back(s);
      }
    }
    m.row_ptr_[r + 1] = static_cast<std::uint32_t>(m.col_.size());
  }
  return m;
}

CsrMatrix scaled(const CsrMatrix& a, double factor) {
  CsrMatrix out = a;
  if (factor == 0.0) return CsrMatrix(a.size());
  for (double& v : out.val_) v *= factor;
  return out;
}

CsrMatrix add(const CsrMatrix& a, const CsrMatrix& b, double factor) {
  if (a.size() != b.size()) throw InvalidInput("add: matrix size mismatch");
  TripletBuilder builder(a.size());
  builder.reserve(a.nonzeros() + b.nonzeros());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::uint32_t k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
      builder.add(i, a.col()[k], a.values()[k]);
    }
    for (std::uint32_t k = b.row_ptr()[i]; k < b.row_ptr()[i + 1]; ++k) {
      builder.add(i, b.col()[k], factor * b.values()[k]);
    }
  }
  return builder.build(a.symmetric() && b.symmetric());
}

}  // namespace corshape
