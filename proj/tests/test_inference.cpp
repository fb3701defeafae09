// Factor-graph construction, the count-symmetric message kernel against
// brute-force enumeration, sum-product against exact marginals, and the
// Bethe log-partition value on trees.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <vector>

#include "hypermatch/core.hpp"
#include "hypermatch/inference.hpp"
#include "testutil.hpp"

using namespace hypermatch;
using doctest::Approx;

namespace {

// Single-edge hypergraph with k nodes and the given weight.
MatchHypergraph single_clique_graph(int k, double weight) {
  MatchHypergraph g;
  Hyperedge e;
  for (int i = 0; i < k; ++i) e.node_ids.push_back(g.add_node({i, 0, 0.5}));
  e.weight = weight;
  g.add_edge(std::move(e));
  return g;
}

BpOptions exact_bp() {
  BpOptions opts;
  opts.max_iters = 2000;
  opts.tolerance = 1e-12;
  opts.damping = 0.0;
  return opts;
}

void check_beliefs_match(const BeliefState& got, const BeliefState& want,
                         double tol) {
  REQUIRE(got.node_beliefs.size() == want.node_beliefs.size());
  for (std::size_t i = 0; i < got.node_beliefs.size(); ++i) {
    CHECK(got.node_beliefs[i][0] == Approx(want.node_beliefs[i][0]).epsilon(tol));
    CHECK(got.node_beliefs[i][1] == Approx(want.node_beliefs[i][1]).epsilon(tol));
  }
  REQUIRE(got.clique_count_marginals.size() == want.clique_count_marginals.size());
  for (std::size_t f = 0; f < got.clique_count_marginals.size(); ++f) {
    REQUIRE(got.clique_count_marginals[f].size() ==
            want.clique_count_marginals[f].size());
    for (std::size_t s = 0; s < got.clique_count_marginals[f].size(); ++s)
      CHECK(got.clique_count_marginals[f][s] ==
            Approx(want.clique_count_marginals[f][s]).epsilon(tol));
  }
}

}  // namespace

// ============================================================================
// build_factor_graph
// ============================================================================

TEST_CASE("an edgeless hypergraph builds a factorless graph") {
  MatchHypergraph g;
  g.add_node({0, 0, 0.5});
  g.add_node({1, 1, 0.5});
  const FactorGraph fg = build_factor_graph(g, PenaltyModel::discrete(3));
  CHECK(fg.variable_count() == 2);
  CHECK(fg.factors().empty());
}

TEST_CASE("factor table is the exponentiated negative cost per zero count") {
  const MatchHypergraph g = single_clique_graph(3, 1.0);
  const PenaltyModel linear = PenaltyModel::discrete({0, 1, 2, 3}, {0, 1, 2, 3});
  const FactorGraph fg = build_factor_graph(g, linear);
  REQUIRE(fg.factors().size() == 1);
  const auto& table = fg.factors()[0].log_count_table;
  REQUIRE(table.size() == 4);
  for (int zeros = 0; zeros <= 3; ++zeros) {
    CHECK(std::exp(table[static_cast<std::size_t>(zeros)]) ==
          Approx(std::exp(-static_cast<double>(zeros))).epsilon(1e-12));
  }
}

TEST_CASE("factor tables are strictly positive for random models") {
  testutil::Rng rng(5);
  const MatchHypergraph g = single_clique_graph(3, 0.37);
  const PenaltyModel model = testutil::random_discrete_model(rng, 3, -3.0, 3.0);
  const FactorGraph fg = build_factor_graph(g, model);
  for (const auto& factor : fg.factors())
    for (double lt : factor.log_count_table) CHECK(std::isfinite(lt));
}

TEST_CASE("cliques larger than the model are rejected at build time") {
  const MatchHypergraph g = single_clique_graph(4, 0.5);
  CHECK_THROWS_AS(build_factor_graph(g, PenaltyModel::discrete(3)), ModelSizeError);
}

// ============================================================================
// factor_to_variable_message
// ============================================================================

TEST_CASE("pair factor with uniform input reduces to adjacent table sums") {
  Factor f;
  f.members = {0, 1};
  f.log_count_table = {0.3, -0.4, 0.9};
  const std::vector<std::array<double, 2>> incoming{{0.5, 0.5}};
  const FactorMessage msg = factor_to_variable_message(f, 0, incoming);

  const double f0 = std::exp(0.3), f1 = std::exp(-0.4), f2 = std::exp(0.9);
  const double m0 = f1 + f2;  // own label 0: the other contributes 1 or 2 zeros
  const double m1 = f0 + f1;
  CHECK(msg.normalized[0] == Approx(m0 / (m0 + m1)).epsilon(1e-12));
  CHECK(msg.normalized[1] == Approx(m1 / (m0 + m1)).epsilon(1e-12));
}

TEST_CASE("triangle factor message matches enumeration over the other labels") {
  Factor f;
  f.members = {0, 1, 2};
  f.log_count_table = {0.0, -0.7, -1.9, -2.4};
  const std::vector<std::array<double, 2>> incoming{{0.5, 0.5}, {0.5, 0.5}};
  for (int pos = 0; pos < 3; ++pos) {
    const FactorMessage msg = factor_to_variable_message(f, pos, incoming);
    const auto brute = testutil::brute_force_message(f, pos, incoming);
    const double total = brute[0] + brute[1];
    CHECK(msg.normalized[0] == Approx(brute[0] / total).epsilon(1e-12));
    CHECK(msg.normalized[1] == Approx(brute[1] / total).epsilon(1e-12));
  }
}

TEST_CASE("a constant factor sends a uniform message") {
  Factor f;
  f.members = {0, 1, 2, 3};
  f.log_count_table = {1.7, 1.7, 1.7, 1.7, 1.7};
  const std::vector<std::array<double, 2>> incoming{{0.3, 0.7}, {0.9, 0.1}, {0.5, 0.5}};
  const FactorMessage msg = factor_to_variable_message(f, 1, incoming);
  CHECK(msg.normalized[0] == Approx(0.5).epsilon(1e-12));
  CHECK(msg.normalized[1] == Approx(0.5).epsilon(1e-12));
}

TEST_CASE("nonpositive incoming messages are a numerical domain error") {
  Factor f;
  f.members = {0, 1};
  f.log_count_table = {0.0, 0.0, 0.0};
  const std::vector<std::array<double, 2>> zero_in{{0.0, 1.0}};
  CHECK_THROWS_AS(factor_to_variable_message(f, 0, zero_in), NumericalDomainError);
  const std::vector<std::array<double, 2>> neg_in{{-0.1, 1.1}};
  CHECK_THROWS_AS(factor_to_variable_message(f, 0, neg_in), NumericalDomainError);
}

TEST_CASE("count kernel equals brute force for random factors and inputs") {
  testutil::Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = rng.integer(2, 8);
    Factor f;
    for (int i = 0; i < k; ++i) f.members.push_back(i);
    f.log_count_table.resize(static_cast<std::size_t>(k) + 1);
    for (double& t : f.log_count_table) t = rng.uniform(-2.0, 2.0);

    std::vector<std::array<double, 2>> incoming(static_cast<std::size_t>(k - 1));
    for (auto& m : incoming) {
      m[0] = rng.uniform(0.05, 1.0);
      m[1] = rng.uniform(0.05, 1.0);
    }
    const int pos = rng.integer(0, k - 1);
    const FactorMessage msg = factor_to_variable_message(f, pos, incoming);
    const auto brute = testutil::brute_force_message(f, pos, incoming);
    const double total = brute[0] + brute[1];
    CHECK(std::abs(msg.normalized[0] - brute[0] / total) < 1e-10);
    CHECK(std::abs(msg.normalized[1] - brute[1] / total) < 1e-10);
  }
}

// ============================================================================
// run_sum_product
// ============================================================================

TEST_CASE("a factorless graph yields uniform beliefs immediately") {
  const FactorGraph fg(4);
  const BeliefState st = run_sum_product(fg);
  CHECK(st.converged);
  CHECK(st.iterations == 1);
  REQUIRE(st.node_beliefs.size() == 4);
  for (const auto& b : st.node_beliefs) {
    CHECK(b[0] == Approx(0.5));
    CHECK(b[1] == Approx(0.5));
  }
}

TEST_CASE("a single triangle factor reproduces exact conditionals") {
  const MatchHypergraph g = single_clique_graph(3, 0.9);
  const PenaltyModel model =
      PenaltyModel::discrete({0, 0.7, 1.1, 1.6}, {0, 0.4, 0.9, 1.9});
  const FactorGraph fg = build_factor_graph(g, model);
  const BeliefState bp = run_sum_product(fg, exact_bp());
  const BeliefState exact = exact_marginals(fg);
  CHECK(bp.converged);
  check_beliefs_match(bp, exact, 1e-10);
}

TEST_CASE("sum-product is exact on a tree of ten variables") {
  testutil::Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const FactorGraph fg = testutil::random_tree_factor_graph(rng, 10, 4);
    const BeliefState bp = run_sum_product(fg, exact_bp());
    const BeliefState exact = exact_marginals(fg);
    CHECK(bp.converged);
    check_beliefs_match(bp, exact, 1e-8);
  }
}

TEST_CASE("beliefs stay normalized and nonnegative through every pass") {
  testutil::Rng rng(13);
  const FactorGraph fg = testutil::random_loopy_factor_graph(rng, 8, 10, 4);
  SumProductEngine engine(fg);
  for (int pass = 0; pass < 6; ++pass) {
    engine.iterate(0.5);
    const BeliefState st = engine.snapshot();
    for (const auto& b : st.node_beliefs) {
      CHECK(b[0] >= 0.0);
      CHECK(b[1] >= 0.0);
      CHECK(b[0] + b[1] == Approx(1.0).epsilon(1e-9));
    }
    for (const auto& cm : st.clique_count_marginals) {
      double sum = 0.0;
      for (double p : cm) {
        CHECK(p >= 0.0);
        sum += p;
      }
      CHECK(sum == Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("damping leaves a reached fixed point in place") {
  testutil::Rng rng(19);
  const FactorGraph fg = testutil::random_tree_factor_graph(rng, 12, 4);
  SumProductEngine engine(fg);
  const double tol = 1e-8;
  double residual = 1.0;
  for (int pass = 0; pass < 500 && residual >= tol; ++pass)
    residual = engine.iterate(0.0);
  REQUIRE(residual < tol);
  CHECK(engine.iterate(0.7) < tol);
}

TEST_CASE("non-convergence is reported rather than thrown") {
  testutil::Rng rng(29);
  const FactorGraph fg = testutil::random_loopy_factor_graph(rng, 10, 16, 4, -3.0, 3.0);
  BpOptions opts;
  opts.max_iters = 2;
  opts.tolerance = 1e-14;
  const BeliefState st = run_sum_product(fg, opts);
  CHECK_FALSE(st.converged);
  CHECK(st.iterations == 2);
  CHECK(st.max_residual >= 0.0);
}

TEST_CASE("the optional trace records one row per pass") {
  testutil::Rng rng(31);
  const FactorGraph fg = testutil::random_loopy_factor_graph(rng, 6, 6, 3);
  BpOptions opts;
  opts.max_iters = 7;
  opts.tolerance = 1e-15;
  opts.collect_trace = true;
  const BeliefState st = run_sum_product(fg, opts);
  REQUIRE(st.trace.size() == 7);
  for (std::size_t i = 0; i < st.trace.size(); ++i)
    CHECK(st.trace[i].iteration == static_cast<int>(i) + 1);
}

// ============================================================================
// exact_marginals
// ============================================================================

TEST_CASE("the empty-graph partition function counts labelings") {
  const FactorGraph fg(3);
  const BeliefState st = exact_marginals(fg);
  REQUIRE(st.log_z.has_value());
  CHECK(*st.log_z == Approx(3.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("an all-ones factor leaves marginals uniform") {
  FactorGraph fg(3);
  fg.add_factor({0, 1, 2}, {0.0, 0.0, 0.0, 0.0});
  const BeliefState st = exact_marginals(fg);
  for (const auto& b : st.node_beliefs) {
    CHECK(b[0] == Approx(0.5).epsilon(1e-12));
    CHECK(b[1] == Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("two independent enumeration orders agree on the partition sum") {
  testutil::Rng rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    const TrainingInstance inst = testutil::random_tree_instance(rng, 3);
    const PenaltyModel model = testutil::random_discrete_model(rng, 3, -2.0, 2.0);
    const FactorGraph fg = build_factor_graph(inst.graph, model);
    const BeliefState st = exact_marginals(fg);
    REQUIRE(st.log_z.has_value());
    // max-shifted accumulation over hypergraph energies vs the factor-graph
    // enumeration inside exact_marginals
    CHECK(*st.log_z ==
          Approx(testutil::enumerated_log_z(inst.graph, model)).epsilon(1e-12));
  }
}

TEST_CASE("enumeration refuses graphs beyond twenty variables") {
  const FactorGraph fg(21);
  CHECK_THROWS_AS(exact_marginals(fg), SizeLimitError);
}

// ============================================================================
// bethe_log_z
// ============================================================================

TEST_CASE("the free-energy value of a factorless graph counts labelings") {
  const FactorGraph fg(5);
  const BeliefState st = run_sum_product(fg);
  CHECK(bethe_log_z(fg, st) == Approx(5.0 * std::log(2.0)).epsilon(1e-10));
}

TEST_CASE("the free energy is exact on trees and single factors") {
  testutil::Rng rng(47);
  for (int trial = 0; trial < 5; ++trial) {
    const FactorGraph fg = testutil::random_tree_factor_graph(rng, 12, 4);
    const BeliefState bp = run_sum_product(fg, exact_bp());
    REQUIRE(bp.converged);
    const BeliefState exact = exact_marginals(fg);
    CHECK(bethe_log_z(fg, bp) == Approx(*exact.log_z).epsilon(1e-8));
  }

  FactorGraph single(3);
  single.add_factor({0, 1, 2}, {0.2, -0.5, -1.0, -2.0});
  const BeliefState bp = run_sum_product(single, exact_bp());
  const BeliefState exact = exact_marginals(single);
  CHECK(bethe_log_z(single, bp) == Approx(*exact.log_z).epsilon(1e-10));
}

// ============================================================================
// Gauge invariance
// ============================================================================

TEST_CASE("per-class constant shifts do not move beliefs") {
  testutil::Rng rng(53);
  for (bool loopy : {false, true}) {
    const TrainingInstance inst =
        loopy ? [&] {
          TrainingInstance t;
          MatchHypergraph g;
          for (int i = 0; i < 6; ++i) g.add_node({i, 0, 0.5});
          // three triangles sharing pairs of nodes close a cycle
          for (auto ids : {std::vector<int>{0, 1, 2}, std::vector<int>{2, 3, 4},
                           std::vector<int>{4, 5, 0}}) {
            Hyperedge e;
            e.node_ids = ids;
            e.weight = rng.uniform(0.2, 0.9);
            g.add_edge(std::move(e));
          }
          t.truth.assign(g.node_count(), 1);
          t.graph = std::move(g);
          return t;
        }()
              : testutil::random_tree_instance(rng, 4);

    const PenaltyModel base = testutil::random_discrete_model(rng, 3, -1.5, 1.5);
    PenaltyModel shifted = base;
    for (int a = 0; a <= 3; ++a) {
      shifted.parameters()[static_cast<std::size_t>(shifted.index_of(0, a))] += 0.83;
      shifted.parameters()[static_cast<std::size_t>(shifted.index_of(1, a))] -= 1.29;
    }

    const BeliefState sb = run_sum_product(build_factor_graph(inst.graph, base));
    const BeliefState ss = run_sum_product(build_factor_graph(inst.graph, shifted));
    REQUIRE(sb.node_beliefs.size() == ss.node_beliefs.size());
    for (std::size_t i = 0; i < sb.node_beliefs.size(); ++i) {
      CHECK(std::abs(sb.node_beliefs[i][0] - ss.node_beliefs[i][0]) < 1e-9);
      CHECK(std::abs(sb.node_beliefs[i][1] - ss.node_beliefs[i][1]) < 1e-9);
    }
    for (std::size_t f = 0; f < sb.clique_count_marginals.size(); ++f)
      for (std::size_t s = 0; s < sb.clique_count_marginals[f].size(); ++s)
        CHECK(std::abs(sb.clique_count_marginals[f][s] -
                       ss.clique_count_marginals[f][s]) < 1e-9);
  }
}
