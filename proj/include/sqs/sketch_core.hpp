#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "sqs/signal.hpp"

namespace sqs {

/// Shape and generation parameters of a set-query measurement matrix.
struct SketchParams {
  std::uint64_t n = 0;   // ambient dimension
  std::uint64_t k = 0;   // support size the matrix is sized for
  double eps = 1.0;      // target error factor
  std::uint32_t d = 7;   // nonzeros per column
  Norm norm = Norm::L2;
  std::uint64_t seed = 0;
  std::uint64_t w = 0;   // rows

  friend bool operator==(const SketchParams&, const SketchParams&) = default;
};

inline constexpr std::uint32_t kDefaultColumnSparsity = 7;

/// Row count for support size k: the larger of the error-driven size
/// (d^2 k / eps^2 for L2, d k / eps for L1) and the sparsity bound 2 d (d-1) k
/// under which the support hypergraph is almost surely peelable.
std::uint64_t required_rows(std::uint64_t k, double eps, std::uint32_t d, Norm norm);

/// Validated parameters: n >= k >= 1, 0 < eps <= 1, d >= 7.
/// Throws std::invalid_argument otherwise.
SketchParams derive_params(std::uint64_t n, std::uint64_t k, double eps, Norm norm = Norm::L2,
                           std::uint32_t d = kDefaultColumnSparsity, std::uint64_t seed = 0);

/// Explicit w x n shape with d nonzeros per column, bypassing the analysis
/// constraints (small d, tiny w). Only 1 <= d <= w is enforced.
SketchParams shape_params(std::uint64_t n, std::uint64_t w, std::uint32_t d, std::uint64_t seed);

/// Row-major view of a matrix: for each row, its columns in ascending order.
struct RowIndex {
  std::vector<std::uint64_t> offsets;  // size w + 1
  std::vector<std::uint32_t> cols;
  std::vector<std::int8_t> signs;
};

/// Column-sparse random {-1, 0, +1} matrix. Column j holds exactly d entries
/// at distinct rows (sorted ascending) with independent fair signs. Column j is
/// generated from its own stream of the master seed, so construction is
/// reproducible and independent of thread count.
///
/// Immutable after construction; safe to share across threads.
class SketchMatrix {
 public:
  /// Draws a fresh matrix from params.seed.
  explicit SketchMatrix(const SketchParams& params);

  /// Adopts an explicit column table (n * d rows and signs, column-major).
  /// Throws std::invalid_argument if a column repeats a row, a row is out of
  /// range, or a sign is not +-1.
  SketchMatrix(const SketchParams& params, std::vector<std::uint32_t> rows,
               std::vector<std::int8_t> signs);

  const SketchParams& params() const noexcept { return params_; }
  std::uint64_t rows() const noexcept { return params_.w; }
  std::uint64_t cols() const noexcept { return params_.n; }
  std::uint32_t column_sparsity() const noexcept { return params_.d; }

  std::span<const std::uint32_t> column_rows(Index j) const noexcept {
    return {rows_.data() + j * params_.d, params_.d};
  }
  std::span<const std::int8_t> column_signs(Index j) const noexcept {
    return {signs_.data() + j * params_.d, params_.d};
  }

  std::span<const std::uint32_t> all_rows() const noexcept { return rows_; }
  std::span<const std::int8_t> all_signs() const noexcept { return signs_; }

  /// Row-major transpose, built on first use and shared by copies.
  const RowIndex& row_index() const;

  friend bool operator==(const SketchMatrix& a, const SketchMatrix& b) {
    return a.params_ == b.params_ && a.rows_ == b.rows_ && a.signs_ == b.signs_;
  }

 private:
  struct RowIndexCache;

  SketchParams params_;
  std::vector<std::uint32_t> rows_;
  std::vector<std::int8_t> signs_;
  std::shared_ptr<RowIndexCache> row_index_;
};

/// Measurement vector b = A x (+ noise).
struct Sketch {
  SketchParams params;
  std::vector<double> values;

  friend bool operator==(const Sketch&, const Sketch&) = default;
};

/// Same matrix from the same params (including seed).
inline SketchMatrix build_matrix(const SketchParams& params) { return SketchMatrix(params); }

/// A x for a dense signal. Rows are computed in parallel, each summing its
/// columns in ascending order, so the result is bit-identical to
/// serial::apply for any thread count.
Sketch apply(const SketchMatrix& matrix, std::span<const double> x);
/// A x for a sparse signal; cost O(d * nnz).
Sketch apply(const SketchMatrix& matrix, const SparseSignal& x);

/// b += delta * A e_index. Touches exactly d cells.
void update(Sketch& sketch, const SketchMatrix& matrix, Index index, double delta);

/// b += nu.
void add_noise(Sketch& sketch, std::span<const double> nu);

/// Binary 2w x n matrix: row 2q carries the +1 entries of row q and row 2q+1
/// the -1 entries, both stored with sign +1.
SketchMatrix split_binary_rows(const SketchMatrix& matrix);

/// Recovers the signed sketch from a sketch of the split matrix:
/// out[q] = b[2q] - b[2q+1].
std::vector<double> recombine_split(std::span<const double> split_values);

namespace serial {

/// Reference column-scatter product; the parallel kernel must match it bitwise.
Sketch apply(const SketchMatrix& matrix, std::span<const double> x);

}  // namespace serial

/// Throws std::invalid_argument when the sketch was not produced by `matrix`.
void check_compatible(const SketchMatrix& matrix, const Sketch& sketch);

}  // namespace sqs
