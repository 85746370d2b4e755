#include "sqs/hypergraph.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "cell_index.hpp"

namespace sqs {

const char* to_string(ComponentClass c) noexcept {
  switch (c) {
    case ComponentClass::Hypertree: return "hypertree";
    case ComponentClass::Unicyclic: return "unicyclic";
    case ComponentClass::Complex: return "complex";
  }
  return "?";
}

ComponentClass classify(std::uint64_t vertices, std::uint64_t edges, std::uint32_t d) noexcept {
  const std::uint64_t tree_size = edges * (d - 1) + 1;
  if (vertices >= tree_size) return ComponentClass::Hypertree;
  if (vertices + 1 == tree_size) return ComponentClass::Unicyclic;
  return ComponentClass::Complex;
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t size) : parent_(size) {
    std::iota(parent_.begin(), parent_.end(), 0U);
  }
  std::uint32_t find(std::uint32_t v) {
    while (parent_[v] != v) {
      parent_[v] = parent_[parent_[v]];
      v = parent_[v];
    }
    return v;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace

ComponentReport components(const SketchMatrix& matrix, const SupportSet& support) {
  if (!support.empty() && support.indices().back() >= matrix.cols())
    throw std::invalid_argument("support index out of range");
  const std::size_t k = support.size();
  const std::uint32_t d = matrix.column_sparsity();

  std::vector<std::uint32_t> slot_rows(k * d);
  for (std::size_t p = 0; p < k; ++p) {
    auto rows = matrix.column_rows(support[p]);
    std::copy(rows.begin(), rows.end(), slot_rows.begin() + p * d);
  }
  const auto table = detail::index_cells(slot_rows);
  const auto& cell = table.cell_of_slot;
  const std::size_t cells = table.rows.size();
  // Vertices are the local cells; each edge links its d cells.
  DisjointSets sets(cells);
  for (std::size_t p = 0; p < k; ++p)
    for (std::uint32_t s = 1; s < d; ++s) sets.unite(cell[p * d], cell[p * d + s]);

  ComponentReport report;
  report.d = d;
  report.component_of.resize(k);
  std::vector<std::uint32_t> id_of_root(cells, UINT32_MAX);
  for (std::size_t p = 0; p < k; ++p) {
    const std::uint32_t root = sets.find(cell[p * d]);
    if (id_of_root[root] == UINT32_MAX) {
      id_of_root[root] = static_cast<std::uint32_t>(report.components.size());
      report.components.emplace_back();
    }
    report.component_of[p] = id_of_root[root];
    report.components[id_of_root[root]].edges.push_back(support[p]);
  }
  for (std::size_t c = 0; c < cells; ++c) {
    const std::uint32_t root = sets.find(static_cast<std::uint32_t>(c));
    report.components[id_of_root[root]].vertices.push_back(table.rows[c]);
  }
  for (auto& comp : report.components) {
    std::sort(comp.vertices.begin(), comp.vertices.end());
    comp.kind = classify(comp.vertices.size(), comp.edges.size(), d);
    ++report.class_counts[static_cast<std::size_t>(comp.kind)];
    report.max_component_size = std::max<std::uint64_t>(report.max_component_size, comp.edges.size());
  }
  report.edge_component_size.resize(k);
  for (std::size_t p = 0; p < k; ++p)
    report.edge_component_size[p] = report.components[report.component_of[p]].edges.size();
  return report;
}

Peelability peelability(const ComponentReport& report) noexcept {
  return report.class_counts[static_cast<std::size_t>(ComponentClass::Complex)] == 0
             ? Peelability::AllGood
             : Peelability::HasComplex;
}

SizeMoments component_size_stats(std::span<const ComponentReport> samples) {
  if (samples.size() < 2) throw std::invalid_argument("component_size_stats needs at least two reports");
  SizeMoments out;
  out.samples = samples.size();
  double edges = 0.0;
  double pair_products = 0.0;
  double pairs = 0.0;
  for (const auto& report : samples) {
    double sum_sq = 0.0;
    double sum_fourth = 0.0;
    for (std::uint64_t size : report.edge_component_size) {
      const double dd = static_cast<double>(size);
      out.mean += dd;
      sum_sq += dd * dd;
      sum_fourth += dd * dd * dd * dd;
    }
    out.mean_square += sum_sq;
    out.mean_fourth += sum_fourth;
    const double k = static_cast<double>(report.edge_component_size.size());
    edges += k;
    if (k >= 2) {
      pair_products += sum_sq * sum_sq - sum_fourth;
      pairs += k * (k - 1);
    }
  }
  if (edges == 0) return out;
  out.mean /= edges;
  out.mean_square /= edges;
  out.mean_fourth /= edges;
  if (pairs > 0) out.covariance_of_squares = pair_products / pairs - out.mean_square * out.mean_square;
  return out;
}

std::vector<EdgeDiagnostics> peel_diagnostics(const SketchMatrix& matrix, const Sketch& sketch,
                                              std::span<const double> x, const SupportSet& support,
                                              const RecoveryResult& result,
                                              const ComponentReport& report) {
  const auto errors = point_errors(matrix, sketch, x, support, result);
  std::vector<EdgeDiagnostics> out;
  out.reserve(errors.size());
  for (std::size_t r = 0; r < errors.size(); ++r) {
    const auto& rec = result.peel_log[r];
    const auto pos =
        static_cast<std::size_t>(std::lower_bound(support.begin(), support.end(), rec.index) - support.begin());
    out.push_back({rec.index, errors[r], report.edge_component_size.at(pos), rec.fallback});
  }
  return out;
}

}  // namespace sqs
