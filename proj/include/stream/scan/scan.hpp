#pragma once

// Associative-pair form of the diagonal recurrence h_k = a_k (.) h_{k-1} + b_k.
//
// A pair c = [a, b] holds an accumulated transition factor and an accumulated
// driven state. The operator
//
//   [a_i, b_i] . [a_j, b_j] = [a_i a_j, a_j b_i + b_j]
//
// is associative with two-sided identity [1, 0], so an inclusive prefix
// combine over leaves [exp(A delta_k), B_k u_k] yields h_k in the b component.
// All products are elementwise because A is diagonal.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stream/common/errors.hpp"
#include "stream/common/worker_pool.hpp"

namespace stream::scan {

/// Dense row-major rows x cols matrix of complex numbers.
template <class Real>
class BasicComplexRows {
 public:
  using Complex = std::complex<Real>;

  BasicComplexRows() = default;
  BasicComplexRows(std::size_t rows, std::size_t cols, Complex fill = Complex(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::span<Complex> row(std::size_t k) { return {data_.data() + k * cols_, cols_}; }
  std::span<const Complex> row(std::size_t k) const { return {data_.data() + k * cols_, cols_}; }

  std::span<Complex> data() noexcept { return data_; }
  std::span<const Complex> data() const noexcept { return data_; }

  bool operator==(const BasicComplexRows&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> data_;
};

/// A single pair [a, b] of width m.
template <class Real>
struct BasicScanPair {
  using Complex = std::complex<Real>;
  std::vector<Complex> a;
  std::vector<Complex> b;

  static BasicScanPair identity(std::size_t m) {
    return {std::vector<Complex>(m, Complex(1)), std::vector<Complex>(m, Complex(0))};
  }

  bool operator==(const BasicScanPair&) const = default;
};

/// N pairs of width m stored as two N x m planes.
template <class Real>
struct BasicPairSequence {
  BasicComplexRows<Real> a;
  BasicComplexRows<Real> b;

  BasicPairSequence() = default;
  /// length pairs, each initialized to the identity [1, 0].
  BasicPairSequence(std::size_t length, std::size_t width)
      : a(length, width, std::complex<Real>(1)), b(length, width) {}

  std::size_t size() const noexcept { return a.rows(); }
  std::size_t width() const noexcept { return a.cols(); }

  BasicScanPair<Real> pair(std::size_t k) const {
    return {{a.row(k).begin(), a.row(k).end()}, {b.row(k).begin(), b.row(k).end()}};
  }

  void set(std::size_t k, const BasicScanPair<Real>& p) {
    if (p.a.size() != width() || p.b.size() != width()) {
      throw ContractError("pair width does not match sequence width");
    }
    std::copy(p.a.begin(), p.a.end(), a.row(k).begin());
    std::copy(p.b.begin(), p.b.end(), b.row(k).begin());
  }

  bool operator==(const BasicPairSequence&) const = default;
};

using ComplexRows = BasicComplexRows<double>;
using ScanPair = BasicScanPair<double>;
using PairSequence = BasicPairSequence<double>;

/// Counts applications of the pair operator (one per pair, regardless of width).
struct ScanStats {
  std::atomic<std::size_t> combines{0};
};

/// The pair operator acting on one width-m slice: writes left . right into right.
struct Combine {
  template <class Real>
  static void apply(std::span<const std::complex<Real>> left_a,
                    std::span<const std::complex<Real>> left_b,
                    std::span<std::complex<Real>> right_a, std::span<std::complex<Real>> right_b) {
    for (std::size_t j = 0; j < right_a.size(); ++j) {
      right_b[j] = right_a[j] * left_b[j] + right_b[j];
      right_a[j] = left_a[j] * right_a[j];
    }
  }
};

/// left . right as a value.
template <class Real, class Op = Combine>
BasicScanPair<Real> combine(const BasicScanPair<Real>& left, const BasicScanPair<Real>& right) {
  if (left.a.size() != right.a.size() || left.b.size() != right.b.size() ||
      left.a.size() != left.b.size()) {
    throw ContractError("combine: pair widths differ");
  }
  BasicScanPair<Real> out = right;
  Op::template apply<Real>(left.a, left.b, out.a, out.b);
  return out;
}

namespace detail {

template <class Real>
void check_finite_row(const BasicPairSequence<Real>& s, std::size_t k) {
  for (std::size_t j = 0; j < s.width(); ++j) {
    const auto a = s.a.row(k)[j];
    const auto b = s.b.row(k)[j];
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag()) || !std::isfinite(b.real()) ||
        !std::isfinite(b.imag())) {
      throw NumericError("non-finite scan pair", k);
    }
  }
}

/// Inclusive scan of rows [begin, end) in place; returns the number of combines.
template <class Real, class Op>
std::size_t scan_range(BasicPairSequence<Real>& s, std::size_t begin, std::size_t end) {
  for (std::size_t k = begin + 1; k < end; ++k) {
    Op::template apply<Real>(s.a.row(k - 1), s.b.row(k - 1), s.a.row(k), s.b.row(k));
  }
  return end > begin ? end - begin - 1 : 0;
}

}  // namespace detail

/// Inclusive prefix combine, in place. Throws NumericError if a leaf is non-finite.
template <class Real, class Op = Combine>
void scan_sequential_inplace(BasicPairSequence<Real>& pairs, ScanStats* stats = nullptr) {
  if (pairs.size() == 0) throw ContractError("scan needs at least one pair");
  for (std::size_t k = 0; k < pairs.size(); ++k) detail::check_finite_row(pairs, k);
  const std::size_t n = detail::scan_range<Real, Op>(pairs, 0, pairs.size());
  if (stats) stats->combines += n;
}

template <class Real, class Op = Combine>
BasicPairSequence<Real> scan_sequential(const BasicPairSequence<Real>& pairs,
                                        ScanStats* stats = nullptr) {
  BasicPairSequence<Real> out = pairs;
  scan_sequential_inplace<Real, Op>(out, stats);
  return out;
}

/// Three-phase chunked scan in place: each of `chunks` contiguous chunks is scanned
/// independently, the chunk totals are scanned sequentially, then every element
/// of chunk c > 0 is left-combined with the prefix of chunks 0..c-1.
/// chunks == 1 performs exactly the sequential scan.
template <class Real, class Op = Combine>
void scan_parallel_inplace(BasicPairSequence<Real>& pairs, WorkerPool& pool, std::size_t chunks,
                           ScanStats* stats = nullptr) {
  const std::size_t n = pairs.size();
  if (n == 0) throw ContractError("scan needs at least one pair");
  if (chunks == 0) throw ContractError("scan_parallel needs at least one worker");
  chunks = std::min(chunks, n);
  const std::size_t len = (n + chunks - 1) / chunks;
  chunks = (n + len - 1) / len;
  const std::size_t m = pairs.width();

  std::vector<std::size_t> counts(chunks, 0);
  pool.parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * len;
    const std::size_t end = std::min(n, begin + len);
    for (std::size_t k = begin; k < end; ++k) detail::check_finite_row(pairs, k);
    counts[c] = detail::scan_range<Real, Op>(pairs, begin, end);
  });
  if (chunks == 1) {
    if (stats) stats->combines += counts[0];
    return;
  }

  // carry[c] = total of chunks 0..c-1, for c >= 1
  BasicPairSequence<Real> carry(chunks, m);
  std::size_t carry_combines = 0;
  for (std::size_t c = 1; c < chunks; ++c) {
    const std::size_t last = c * len - 1;
    std::copy(pairs.a.row(last).begin(), pairs.a.row(last).end(), carry.a.row(c).begin());
    std::copy(pairs.b.row(last).begin(), pairs.b.row(last).end(), carry.b.row(c).begin());
    if (c > 1) {
      Op::template apply<Real>(carry.a.row(c - 1), carry.b.row(c - 1), carry.a.row(c),
                               carry.b.row(c));
      ++carry_combines;
    }
  }

  std::vector<std::size_t> fix_counts(chunks, 0);
  pool.parallel_for(chunks - 1, [&](std::size_t i) {
    const std::size_t c = i + 1;
    const std::size_t begin = c * len;
    const std::size_t end = std::min(n, begin + len);
    for (std::size_t k = begin; k < end; ++k) {
      Op::template apply<Real>(carry.a.row(c), carry.b.row(c), pairs.a.row(k), pairs.b.row(k));
    }
    fix_counts[c] = end - begin;
  });

  if (stats) {
    std::size_t total = carry_combines;
    for (std::size_t c = 0; c < chunks; ++c) total += counts[c] + fix_counts[c];
    stats->combines += total;
  }
}

template <class Real, class Op = Combine>
BasicPairSequence<Real> scan_parallel(const BasicPairSequence<Real>& pairs, WorkerPool& pool,
                                      ScanStats* stats = nullptr) {
  BasicPairSequence<Real> out = pairs;
  scan_parallel_inplace<Real, Op>(out, pool, pool.size(), stats);
  return out;
}

/// Convenience overload that runs on a pool of `workers` threads created for the call.
template <class Real, class Op = Combine>
BasicPairSequence<Real> scan_parallel(const BasicPairSequence<Real>& pairs, std::size_t workers,
                                      ScanStats* stats = nullptr) {
  if (workers == 0) throw ContractError("scan_parallel needs at least one worker");
  WorkerPool pool(workers);
  return scan_parallel<Real, Op>(pairs, pool, stats);
}

}  // namespace stream::scan
