#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

namespace sqs {

using Index = std::uint64_t;

enum class Norm : std::uint8_t { L2 = 0, L1 = 1 };

struct Entry {
  Index index = 0;
  double value = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

/// Sparse vector over [0, n). Indices are distinct; order is whatever the
/// producer chose (peel order for recovery output).
struct SparseSignal {
  std::uint64_t n = 0;
  std::vector<Entry> entries;

  std::vector<double> to_dense() const;
  /// Copy with entries sorted by index.
  SparseSignal sorted() const;
  /// Throws std::invalid_argument on out-of-range or repeated indices.
  void validate() const;
};

/// Entries with nonzero value, in index order.
SparseSignal to_sparse(std::span<const double> dense);

/// Median of a scratch buffer: middle element for odd length, mean of the two
/// middle elements for even length. Reorders `values`. Empty input gives 0.
double median_inplace(std::span<double> values);

double norm(std::span<const double> v, Norm which);
double norm_of_difference(std::span<const double> a, std::span<const double> b, Norm which);

}  // namespace sqs
