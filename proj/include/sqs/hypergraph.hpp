#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "sqs/set_query.hpp"
#include "sqs/sketch_core.hpp"

namespace sqs {

// Structure of the d-uniform hypergraph whose hyperedges are the columns of A
// restricted to a support and whose vertices are sketch rows.

enum class ComponentClass : std::uint8_t { Hypertree = 0, Unicyclic = 1, Complex = 2 };

const char* to_string(ComponentClass c) noexcept;

/// r = s(d-1)+1 is a hypertree, r = s(d-1) unicyclic, anything denser complex.
ComponentClass classify(std::uint64_t vertices, std::uint64_t edges, std::uint32_t d) noexcept;

struct Component {
  std::vector<Index> edges;            // support indices, ascending
  std::vector<std::uint32_t> vertices; // rows, ascending
  ComponentClass kind = ComponentClass::Hypertree;
};

struct ComponentReport {
  std::uint32_t d = 0;
  std::vector<Component> components;       // ordered by smallest edge
  std::vector<std::uint32_t> component_of; // per support position
  std::vector<std::uint64_t> edge_component_size;  // D_i per support position
  std::uint64_t max_component_size = 0;
  std::array<std::uint64_t, 3> class_counts{};  // indexed by ComponentClass
};

/// Connected components by union-find over shared rows.
ComponentReport components(const SketchMatrix& matrix, const SupportSet& support);

enum class Peelability { AllGood, HasComplex };

/// AllGood certifies that the peeling decoder cannot abort on this instance.
Peelability peelability(const ComponentReport& report) noexcept;

struct SizeMoments {
  double mean = 0.0;         // E[D]
  double mean_square = 0.0;  // E[D^2]
  double mean_fourth = 0.0;  // E[D^4]
  double covariance_of_squares = 0.0;  // Cov(D_i^2, D_j^2), i != j
  std::uint64_t samples = 0;
};

/// Edge-weighted moments of component size pooled over sampled reports. The
/// covariance treats edge labels as exchangeable: it averages D_i^2 D_j^2 over
/// ordered pairs i != j within each sample and subtracts E[D^2]^2.
/// Throws std::invalid_argument with fewer than two reports.
SizeMoments component_size_stats(std::span<const ComponentReport> samples);

struct EdgeDiagnostics {
  Index index = 0;
  double point_error = 0.0;          // Y_j
  std::uint64_t component_size = 0;  // D_j
  bool fallback = false;
};

/// Per peel record: point error and the size of its component.
std::vector<EdgeDiagnostics> peel_diagnostics(const SketchMatrix& matrix, const Sketch& sketch,
                                              std::span<const double> x, const SupportSet& support,
                                              const RecoveryResult& result,
                                              const ComponentReport& report);

}  // namespace sqs
