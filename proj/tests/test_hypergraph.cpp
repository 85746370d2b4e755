#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "sqs/harness.hpp"
#include "sqs/hypergraph.hpp"

using namespace sqs;

namespace {

SketchMatrix explicit_matrix(std::uint64_t w, std::uint32_t d, std::vector<std::uint32_t> rows) {
  const std::uint64_t n = rows.size() / d;
  std::vector<std::int8_t> signs(rows.size(), 1);
  return SketchMatrix(shape_params(n, w, d, 0), std::move(rows), std::move(signs));
}

SupportSet all_columns(std::uint64_t n) {
  std::vector<Index> idx(n);
  std::iota(idx.begin(), idx.end(), Index{0});
  return SupportSet(idx);
}

ComponentReport sizes_report(const std::vector<std::uint64_t>& sizes) {
  ComponentReport r;
  r.edge_component_size = sizes;
  return r;
}

}  // namespace

TEST_CASE("classify by vertex and edge counts") {
  CHECK(classify(3, 1, 3) == ComponentClass::Hypertree);
  CHECK(classify(4, 2, 3) == ComponentClass::Unicyclic);
  CHECK(classify(5, 2, 3) == ComponentClass::Hypertree);
  CHECK(classify(3, 2, 3) == ComponentClass::Complex);
  CHECK(classify(7, 1, 7) == ComponentClass::Hypertree);
}

TEST_CASE("components of hand-built instances") {
  SUBCASE("single edge") {
    const auto m = explicit_matrix(3, 3, {0, 1, 2});
    const auto rep = components(m, all_columns(1));
    REQUIRE(rep.components.size() == 1);
    CHECK(rep.components[0].kind == ComponentClass::Hypertree);
    CHECK(rep.components[0].vertices == std::vector<std::uint32_t>{0, 1, 2});
    CHECK(peelability(rep) == Peelability::AllGood);
  }
  SUBCASE("two edges sharing two rows") {
    const auto m = explicit_matrix(4, 3, {0, 1, 2, 0, 1, 3});
    const auto rep = components(m, all_columns(2));
    REQUIRE(rep.components.size() == 1);
    CHECK(rep.components[0].kind == ComponentClass::Unicyclic);
    CHECK(rep.edge_component_size == std::vector<std::uint64_t>{2, 2});
    CHECK(peelability(rep) == Peelability::AllGood);
  }
  SUBCASE("three edges on four rows") {
    const auto m = explicit_matrix(5, 3, {0, 1, 2, 0, 1, 3, 0, 2, 3, 1, 2, 4});
    const SupportSet s({0, 1, 2});
    const auto rep = components(m, s);
    REQUIRE(rep.components.size() == 1);
    CHECK(rep.components[0].kind == ComponentClass::Complex);
    CHECK(peelability(rep) == Peelability::HasComplex);
    CHECK(rep.class_counts[2] == 1);
    // No edge has an isolated row, so the peeler aborts immediately.
    const auto b = sqs::apply(m, std::vector<double>{1.0, 2.0, 3.0, 0.0});
    Rng rng(1);
    CHECK_FALSE(recover(m, b, s, rng).complete());
  }
  SUBCASE("disjoint edges") {
    const auto m = explicit_matrix(6, 3, {3, 4, 5, 0, 1, 2});
    const auto rep = components(m, all_columns(2));
    CHECK(rep.components.size() == 2);
    CHECK(rep.class_counts[0] == 2);
    CHECK(rep.max_component_size == 1);
  }
}

TEST_CASE("components agree with a breadth-first search") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    // Tighter shapes than the default so multi-edge and complex components occur.
    const std::uint64_t k = 100;
    const std::uint64_t w = seed < 10 ? 8400 : (seed < 20 ? 700 : 250);
    const SketchMatrix m(shape_params(5000, w, 7, seed));
    Rng rng(seed);
    const auto s = random_support(5000, k, rng);
    const auto rep = components(m, s);
    const auto bfs = oracle::bfs_components(m, s);
    REQUIRE(rep.components.size() == bfs.size());

    std::array<std::uint64_t, 3> counts{};
    for (const auto& comp : bfs) ++counts[static_cast<std::size_t>(oracle::reference_class(comp.vertices.size(), comp.edges.size(), 7))];
    CHECK(rep.class_counts == counts);

    // Partition of S, vertex sets, D_i and stored classes.
    std::vector<Index> seen;
    for (std::size_t c = 0; c < rep.components.size(); ++c) {
      const auto& comp = rep.components[c];
      CHECK(std::is_sorted(comp.edges.begin(), comp.edges.end()));
      CHECK(comp.kind == classify(comp.vertices.size(), comp.edges.size(), 7));
      std::set<std::uint32_t> rows;
      for (Index j : comp.edges) {
        seen.push_back(j);
        for (auto q : m.column_rows(j)) rows.insert(q);
        const auto pos = static_cast<std::size_t>(std::lower_bound(s.begin(), s.end(), j) - s.begin());
        CHECK(rep.component_of[pos] == c);
        CHECK(rep.edge_component_size[pos] == comp.edges.size());
      }
      CHECK(std::vector<std::uint32_t>(rows.begin(), rows.end()) == comp.vertices);
      const auto match = std::find_if(bfs.begin(), bfs.end(), [&](const auto& b) { return b.edges.count(comp.edges.front()); });
      REQUIRE(match != bfs.end());
      CHECK(std::vector<Index>(match->edges.begin(), match->edges.end()) == comp.edges);
    }
    std::sort(seen.begin(), seen.end());
    CHECK(seen == std::vector<Index>(s.begin(), s.end()));
  }
}

TEST_CASE("peelability certificate: AllGood instances never abort") {
  const std::uint64_t k = 1000;
  const auto base = derive_params(4000, k, 1.0, Norm::L2, 7, 0);
  int good = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    auto p = base;
    p.seed = seed;
    const SketchMatrix m(p);
    Rng rng(seed);
    const auto s = random_support(p.n, k, rng);
    if (peelability(components(m, s)) != Peelability::AllGood) continue;
    ++good;
    std::vector<double> x(p.n, 0.0);
    for (Index i : s) x[i] = rng.normal();
    CHECK(recover(m, sqs::apply(m, x), s, rng).complete());
  }
  CHECK(good > 400);

  // Also on tight shapes, where complex components are common.
  int tight_good = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const SketchMatrix m(shape_params(400, 200, 4, seed));
    Rng rng(seed);
    const auto s = random_support(400, 30, rng);
    if (peelability(components(m, s)) != Peelability::AllGood) continue;
    ++tight_good;
    std::vector<double> x(400, 0.0);
    for (Index i : s) x[i] = rng.normal();
    CHECK(recover(m, sqs::apply(m, x), s, rng).complete());
  }
  CHECK(tight_good > 0);
  CHECK(tight_good < 500);
}

TEST_CASE("component_size_stats: direct counts") {
  const std::vector<ComponentReport> singles{sizes_report({1, 1, 1, 1}), sizes_report({1, 1, 1})};
  const auto a = component_size_stats(singles);
  CHECK(a.mean == 1.0);
  CHECK(a.mean_square == 1.0);
  CHECK(a.mean_fourth == 1.0);
  CHECK(a.covariance_of_squares == 0.0);
  CHECK(a.samples == 2);

  const std::vector<ComponentReport> mixed{sizes_report({1, 3, 3, 3}), sizes_report({1, 3, 3, 3})};
  const auto b = component_size_stats(mixed);
  CHECK(b.mean == 2.5);
  CHECK(b.mean_square == doctest::Approx(28.0 / 4.0));
  CHECK(b.mean_fourth == doctest::Approx(244.0 / 4.0));
  // Ordered pairs i != j: sum D_i^2 D_j^2 = (sum D^2)^2 - sum D^4 = 784 - 244.
  CHECK(b.covariance_of_squares == doctest::Approx(540.0 / 12.0 - 49.0));

  CHECK_THROWS_AS(component_size_stats(std::vector<ComponentReport>{sizes_report({1})}), std::invalid_argument);
}

namespace {

std::vector<ComponentReport> sample_reports(std::uint64_t k, int count, std::uint64_t salt) {
  std::vector<ComponentReport> reports;
  for (int i = 0; i < count; ++i) {
    const auto seed = stream_seed(salt, static_cast<std::uint64_t>(i));
    const SketchMatrix m(derive_params(4 * k, k, 1.0, Norm::L2, 7, seed));
    Rng rng(seed);
    reports.push_back(components(m, random_support(4 * k, k, rng)));
  }
  return reports;
}

}  // namespace

TEST_CASE("component sizes stay bounded as k grows") {
  const auto small = component_size_stats(sample_reports(100, 200, 11));
  const auto large = component_size_stats(sample_reports(1000, 40, 12));
  MESSAGE("E[D^4] k=100: " << small.mean_fourth << "  k=1000: " << large.mean_fourth);
  MESSAGE("Cov(D_i^2, D_j^2) k=100: " << small.covariance_of_squares
                                      << "  k=1000: " << large.covariance_of_squares);
  // At w = 2d(d-1)k an edge meets about d / (2(d-1)) others on average, so
  // the moments are O(1) but far from 1; the check is that they do not grow.
  CHECK(small.mean_fourth >= 1.0);
  CHECK(large.mean_fourth <= 1.25 * small.mean_fourth);
  CHECK(large.mean_square <= 1.25 * small.mean_square);
}

TEST_CASE("instances with a complex component do not become more common as k grows") {
  auto complex_fraction = [](std::uint64_t k, int count, std::uint64_t salt) {
    int hits = 0;
    for (const auto& rep : sample_reports(k, count, salt)) hits += peelability(rep) == Peelability::HasComplex;
    return static_cast<double>(hits) / count;
  };
  const double small = complex_fraction(100, 1000, 21);
  const double large = complex_fraction(1000, 200, 22);
  MESSAGE("complex fraction k=100: " << small << "  k=1000: " << large);
  CHECK(large <= small);
}

TEST_CASE("peel_diagnostics pairs point errors with component sizes") {
  const auto p = derive_params(3000, 50, 1.0, Norm::L2, 7, 8);
  const SketchMatrix m(p);
  const auto inst = gen_set_query_instance(p.n, 50, 10.0, 0.5, 4);
  const auto b = sqs::apply(m, inst.x);
  Rng rng(2);
  const auto r = recover(m, b, inst.support, rng);
  const auto rep = components(m, inst.support);
  const auto diag = peel_diagnostics(m, b, inst.x, inst.support, r, rep);
  const auto ys = point_errors(m, b, inst.x, inst.support, r);
  REQUIRE(diag.size() == r.peel_log.size());
  for (std::size_t i = 0; i < diag.size(); ++i) {
    CHECK(diag[i].index == r.peel_log[i].index);
    CHECK(diag[i].point_error == ys[i]);
    CHECK(diag[i].fallback == r.peel_log[i].fallback);
    CHECK(diag[i].component_size >= 1);
  }
}
