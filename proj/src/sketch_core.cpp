#include "sqs/sketch_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>

#include "sqs/rng.hpp"

namespace sqs {

struct SketchMatrix::RowIndexCache {
  std::once_flag once;
  RowIndex index;
};

namespace {

void check_shape(const SketchParams& p) {
  if (p.d == 0) throw std::invalid_argument("column sparsity d must be positive");
  if (p.d > p.w)
    throw std::invalid_argument("column sparsity d=" + std::to_string(p.d) +
                                " exceeds row count w=" + std::to_string(p.w));
  if (p.w > std::numeric_limits<std::uint32_t>::max())
    throw std::invalid_argument("row count w exceeds 32-bit row indices");
  if (p.n > std::numeric_limits<std::uint64_t>::max() / p.d)
    throw std::invalid_argument("n * d overflows");
}

// Floyd's algorithm: d distinct rows uniform over all d-subsets of [w].
void sample_column(Rng& rng, std::uint64_t w, std::span<std::uint32_t> out) {
  const std::size_t d = out.size();
  std::size_t filled = 0;
  for (std::uint64_t t = w - d; t < w; ++t) {
    auto candidate = static_cast<std::uint32_t>(rng.below(t + 1));
    if (std::find(out.begin(), out.begin() + filled, candidate) != out.begin() + filled)
      candidate = static_cast<std::uint32_t>(t);
    out[filled++] = candidate;
  }
  std::sort(out.begin(), out.end());
}

}  // namespace

std::uint64_t required_rows(std::uint64_t k, double eps, std::uint32_t d, Norm norm) {
  const double dd = d;
  const double kk = static_cast<double>(k);
  const double error_rows =
      norm == Norm::L2 ? std::ceil(dd * dd * kk / (eps * eps)) : std::ceil(dd * kk / eps);
  const std::uint64_t sparsity_rows = 2ULL * d * (d - 1) * k;
  return std::max(static_cast<std::uint64_t>(error_rows), sparsity_rows);
}

SketchParams derive_params(std::uint64_t n, std::uint64_t k, double eps, Norm norm,
                           std::uint32_t d, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("support size k must be at least 1");
  if (n < k) throw std::invalid_argument("dimension n must be at least k");
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("eps must lie in (0, 1]");
  if (d < 7) throw std::invalid_argument("column sparsity d must be at least 7");
  SketchParams p{n, k, eps, d, norm, seed, required_rows(k, eps, d, norm)};
  check_shape(p);
  return p;
}

SketchParams shape_params(std::uint64_t n, std::uint64_t w, std::uint32_t d, std::uint64_t seed) {
  SketchParams p{n, 0, 1.0, d, Norm::L2, seed, w};
  check_shape(p);
  return p;
}

SketchMatrix::SketchMatrix(const SketchParams& params)
    : params_(params), row_index_(std::make_shared<RowIndexCache>()) {
  check_shape(params_);
  const std::uint64_t n = params_.n;
  const std::uint32_t d = params_.d;
  rows_.resize(n * d);
  signs_.resize(n * d);
  const auto cols = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < cols; ++j) {
    const auto col = static_cast<std::uint64_t>(j);
    Rng rng(stream_seed(params_.seed, col));
    std::span<std::uint32_t> column(rows_.data() + col * d, d);
    sample_column(rng, params_.w, column);
    for (std::uint32_t s = 0; s < d; ++s) signs_[col * d + s] = rng.coin() ? 1 : -1;
  }
}

SketchMatrix::SketchMatrix(const SketchParams& params, std::vector<std::uint32_t> rows,
                           std::vector<std::int8_t> signs)
    : params_(params),
      rows_(std::move(rows)),
      signs_(std::move(signs)),
      row_index_(std::make_shared<RowIndexCache>()) {
  check_shape(params_);
  const std::uint32_t d = params_.d;
  if (rows_.size() != params_.n * d || signs_.size() != params_.n * d)
    throw std::invalid_argument("column table size does not match n * d");
  std::vector<std::uint32_t> scratch(d);
  for (std::uint64_t j = 0; j < params_.n; ++j) {
    auto col = column_rows(j);
    std::copy(col.begin(), col.end(), scratch.begin());
    std::sort(scratch.begin(), scratch.end());
    if (std::adjacent_find(scratch.begin(), scratch.end()) != scratch.end())
      throw std::invalid_argument("column " + std::to_string(j) + " repeats a row");
    if (!scratch.empty() && scratch.back() >= params_.w)
      throw std::invalid_argument("column " + std::to_string(j) + " has a row out of range");
    for (std::int8_t s : column_signs(j))
      if (s != 1 && s != -1) throw std::invalid_argument("sign must be +1 or -1");
  }
}

const RowIndex& SketchMatrix::row_index() const {
  std::call_once(row_index_->once, [this] {
    RowIndex& idx = row_index_->index;
    const std::uint64_t w = params_.w;
    const std::uint32_t d = params_.d;
    idx.offsets.assign(w + 1, 0);
    for (std::uint32_t r : rows_) ++idx.offsets[r + 1];
    for (std::uint64_t q = 0; q < w; ++q) idx.offsets[q + 1] += idx.offsets[q];
    idx.cols.resize(rows_.size());
    idx.signs.resize(rows_.size());
    std::vector<std::uint64_t> cursor(idx.offsets.begin(), idx.offsets.end() - 1);
    // Columns visited in ascending order, so each row lists its columns sorted.
    for (std::uint64_t j = 0; j < params_.n; ++j) {
      for (std::uint32_t s = 0; s < d; ++s) {
        const std::uint64_t at = cursor[rows_[j * d + s]]++;
        idx.cols[at] = static_cast<std::uint32_t>(j);
        idx.signs[at] = signs_[j * d + s];
      }
    }
  });
  return row_index_->index;
}

void check_compatible(const SketchMatrix& matrix, const Sketch& sketch) {
  if (!(sketch.params == matrix.params()))
    throw std::invalid_argument("sketch parameters do not match the matrix");
  if (sketch.values.size() != matrix.rows())
    throw std::invalid_argument("sketch length does not match matrix rows");
}

Sketch apply(const SketchMatrix& matrix, std::span<const double> x) {
  if (x.size() != matrix.cols())
    throw std::invalid_argument("signal dimension " + std::to_string(x.size()) +
                                " does not match n=" + std::to_string(matrix.cols()));
  if (matrix.cols() > std::numeric_limits<std::uint32_t>::max())
    return serial::apply(matrix, x);
  const RowIndex& idx = matrix.row_index();
  Sketch out{matrix.params(), std::vector<double>(matrix.rows(), 0.0)};
  const auto w = static_cast<std::int64_t>(matrix.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < w; ++q) {
    double acc = 0.0;
    for (std::uint64_t at = idx.offsets[q]; at < idx.offsets[q + 1]; ++at)
      acc += idx.signs[at] * x[idx.cols[at]];
    out.values[q] = acc;
  }
  return out;
}

Sketch apply(const SketchMatrix& matrix, const SparseSignal& x) {
  if (x.n != matrix.cols())
    throw std::invalid_argument("signal dimension " + std::to_string(x.n) +
                                " does not match n=" + std::to_string(matrix.cols()));
  Sketch out{matrix.params(), std::vector<double>(matrix.rows(), 0.0)};
  for (const auto& e : x.entries) {
    if (e.index >= matrix.cols()) throw std::invalid_argument("sparse index out of range");
    auto rows = matrix.column_rows(e.index);
    auto signs = matrix.column_signs(e.index);
    for (std::size_t s = 0; s < rows.size(); ++s) out.values[rows[s]] += signs[s] * e.value;
  }
  return out;
}

void update(Sketch& sketch, const SketchMatrix& matrix, Index index, double delta) {
  check_compatible(matrix, sketch);
  if (index >= matrix.cols())
    throw std::out_of_range("update index " + std::to_string(index) + " out of range");
  auto rows = matrix.column_rows(index);
  auto signs = matrix.column_signs(index);
  for (std::size_t s = 0; s < rows.size(); ++s) sketch.values[rows[s]] += signs[s] * delta;
}

void add_noise(Sketch& sketch, std::span<const double> nu) {
  if (nu.size() != sketch.values.size())
    throw std::invalid_argument("noise length does not match sketch length");
  for (std::size_t q = 0; q < nu.size(); ++q) sketch.values[q] += nu[q];
}

SketchMatrix split_binary_rows(const SketchMatrix& matrix) {
  SketchParams p = matrix.params();
  p.w *= 2;
  auto rows = std::vector<std::uint32_t>(matrix.all_rows().begin(), matrix.all_rows().end());
  auto signs = std::vector<std::int8_t>(matrix.all_signs().begin(), matrix.all_signs().end());
  for (std::size_t at = 0; at < rows.size(); ++at) {
    rows[at] = 2 * rows[at] + (signs[at] < 0 ? 1 : 0);
    signs[at] = 1;
  }
  return SketchMatrix(p, std::move(rows), std::move(signs));
}

std::vector<double> recombine_split(std::span<const double> split_values) {
  if (split_values.size() % 2 != 0) throw std::invalid_argument("split sketch has odd length");
  std::vector<double> out(split_values.size() / 2);
  for (std::size_t q = 0; q < out.size(); ++q) out[q] = split_values[2 * q] - split_values[2 * q + 1];
  return out;
}

namespace serial {

Sketch apply(const SketchMatrix& matrix, std::span<const double> x) {
  if (x.size() != matrix.cols()) throw std::invalid_argument("signal dimension mismatch");
  Sketch out{matrix.params(), std::vector<double>(matrix.rows(), 0.0)};
  for (std::uint64_t j = 0; j < matrix.cols(); ++j) {
    auto rows = matrix.column_rows(j);
    auto signs = matrix.column_signs(j);
    for (std::size_t s = 0; s < rows.size(); ++s) out.values[rows[s]] += signs[s] * x[j];
  }
  return out;
}

}  // namespace serial

}  // namespace sqs
