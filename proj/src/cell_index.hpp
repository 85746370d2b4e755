#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "huge_alloc.hpp"

namespace sqs::detail {

/// Dense local ids for the sketch rows touched by a support.
struct CellIndex {
  HugeVector<std::uint32_t> cell_of_slot;  // local id of each input slot
  std::vector<std::uint32_t> rows;          // global row of each local id
};

/// Groups equal rows by an LSD radix sort of (row, slot) pairs. The pass
/// count depends only on the bit width of the largest row, so the cost is
/// linear in the number of slots, and every pass streams through memory.
///
/// Ids follow first appearance in slot order: when most rows are hit once,
/// the cells of consecutive slots get consecutive ids.
inline CellIndex index_cells(std::span<const std::uint32_t> slot_rows) {
  constexpr int kBits = 8;
  constexpr std::uint64_t kMask = (1U << kBits) - 1;
  const std::size_t m = slot_rows.size();
  CellIndex out;
  out.cell_of_slot.resize(m);
  if (m == 0) return out;

  HugeVector<std::uint64_t> keys(m), scratch(m);
  std::uint32_t max_row = 0;
  for (std::size_t i = 0; i < m; ++i) {
    keys[i] = (static_cast<std::uint64_t>(slot_rows[i]) << 32) | i;
    max_row = std::max(max_row, slot_rows[i]);
  }
  const int passes = (std::bit_width(max_row) + kBits - 1) / kBits;
  std::vector<std::array<std::size_t, (1U << kBits)>> count(static_cast<std::size_t>(passes));
  for (std::uint64_t key : keys)
    for (int pass = 0; pass < passes; ++pass) ++count[pass][(key >> (32 + pass * kBits)) & kMask];
  for (int pass = 0; pass < passes; ++pass) {
    const int shift = 32 + pass * kBits;
    auto& offset = count[pass];
    std::size_t sum = 0;
    for (auto& c : offset) sum += std::exchange(c, sum);
    for (std::uint64_t key : keys) scratch[offset[(key >> shift) & kMask]++] = key;
    keys.swap(scratch);
  }

  // Point every slot at the first slot holding its row, then number those
  // leaders in slot order. A leader precedes its followers, so one forward
  // pass resolves both.
  auto& id = out.cell_of_slot;
  std::uint32_t leader = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto slot = static_cast<std::uint32_t>(keys[i]);
    if (i == 0 || (keys[i] >> 32) != (keys[i - 1] >> 32)) leader = slot;
    id[slot] = leader;
  }
  out.rows.reserve(m);
  for (std::size_t slot = 0; slot < m; ++slot) {
    if (id[slot] == slot) {
      id[slot] = static_cast<std::uint32_t>(out.rows.size());
      out.rows.push_back(slot_rows[slot]);
    } else {
      id[slot] = id[id[slot]];
    }
  }
  return out;
}

}  // namespace sqs::detail
