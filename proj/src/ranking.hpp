#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace sqs::detail {

/// Positions of the `count` largest |values|; ties go to the lower position.
/// Returned in no particular order.
inline std::vector<std::size_t> largest_positions(std::span<const double> values, std::size_t count) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  count = std::min(count, order.size());
  const auto cut = order.begin() + static_cast<std::ptrdiff_t>(count);
  if (count < order.size()) {
    std::nth_element(order.begin(), cut, order.end(), [values](std::size_t a, std::size_t b) {
      const double ma = std::abs(values[a]);
      const double mb = std::abs(values[b]);
      if (ma != mb) return ma > mb;
      return a < b;
    });
  }
  order.resize(count);
  return order;
}

}  // namespace sqs::detail
