#include "sqs/signal.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace sqs {

std::vector<double> SparseSignal::to_dense() const {
  std::vector<double> out(n, 0.0);
  for (const auto& e : entries) out.at(e.index) += e.value;
  return out;
}

SparseSignal SparseSignal::sorted() const {
  SparseSignal out = *this;
  std::sort(out.entries.begin(), out.entries.end(),
            [](const Entry& a, const Entry& b) { return a.index < b.index; });
  return out;
}

void SparseSignal::validate() const {
  std::unordered_set<Index> seen;
  seen.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.index >= n)
      throw std::invalid_argument("sparse signal index " + std::to_string(e.index) +
                                  " out of range for n=" + std::to_string(n));
    if (!seen.insert(e.index).second)
      throw std::invalid_argument("sparse signal repeats index " + std::to_string(e.index));
  }
}

SparseSignal to_sparse(std::span<const double> dense) {
  SparseSignal out;
  out.n = dense.size();
  for (std::size_t i = 0; i < dense.size(); ++i)
    if (dense[i] != 0.0) out.entries.push_back({i, dense[i]});
  return out;
}

double median_inplace(std::span<double> values) {
  const std::size_t len = values.size();
  if (len == 0) return 0.0;
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(len / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (len % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return (lower + upper) / 2.0;
}

double norm(std::span<const double> v, Norm which) {
  double acc = 0.0;
  if (which == Norm::L1) {
    for (double x : v) acc += std::abs(x);
    return acc;
  }
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double norm_of_difference(std::span<const double> a, std::span<const double> b, Norm which) {
  if (a.size() != b.size()) throw std::invalid_argument("norm_of_difference: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    acc += which == Norm::L1 ? std::abs(diff) : diff * diff;
  }
  return which == Norm::L1 ? acc : std::sqrt(acc);
}

}  // namespace sqs
