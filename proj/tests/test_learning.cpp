// Likelihood machinery: observed and expected feature accumulation against
// enumeration oracles, the objective and its gradient against finite
// differences, and the gradient-ascent trainer's contracts.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "hypermatch/core.hpp"
#include "hypermatch/inference.hpp"
#include "hypermatch/learning.hpp"
#include "hypermatch/matching.hpp"
#include "hypermatch/synthdata.hpp"
#include "testutil.hpp"

using namespace hypermatch;
using doctest::Approx;

namespace {

BpOptions exact_bp() {
  BpOptions opts;
  opts.max_iters = 2000;
  opts.tolerance = 1e-12;
  opts.damping = 0.0;
  return opts;
}

TrainConfig tree_config() {
  TrainConfig cfg;
  cfg.bp = exact_bp();
  return cfg;
}

// One instance holding a single clique of size 3 with the given weight.
TrainingInstance single_clique_instance(double weight, Labeling truth) {
  TrainingInstance inst;
  MatchHypergraph g;
  Hyperedge e;
  for (int i = 0; i < 3; ++i) e.node_ids.push_back(g.add_node({i, 0, 0.5}));
  e.weight = weight;
  g.add_edge(std::move(e));
  inst.graph = std::move(g);
  inst.truth = std::move(truth);
  return inst;
}

double binom3(int a) {
  static const double c[4] = {1, 3, 3, 1};
  return c[a];
}

}  // namespace

// ============================================================================
// training_k_max
// ============================================================================

TEST_CASE("the covering clique size is the largest edge, floored at two") {
  testutil::Rng rng(3);
  std::vector<TrainingInstance> triangles;
  triangles.push_back(testutil::random_tree_instance(rng, 3));
  CHECK(training_k_max(triangles) == 3);

  std::vector<TrainingInstance> empty;
  CHECK(training_k_max(empty) == 2);
}

// ============================================================================
// observed_features
// ============================================================================

TEST_CASE("a fully-correct clique at weight one observes a single entry") {
  std::vector<TrainingInstance> one;
  one.push_back(single_clique_instance(1.0, {1, 1, 1}));
  const PenaltyModel probe = PenaltyModel::discrete(3);
  const std::vector<double> obs =
      observed_features(one, PenaltyVariant::Discrete, 3);
  REQUIRE(obs.size() == probe.parameter_count());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double want =
        i == static_cast<std::size_t>(probe.index_of(1, 0)) ? -1.0 : 0.0;
    CHECK(obs[i] == Approx(want));
  }
}

TEST_CASE("observed features add across instances") {
  std::vector<TrainingInstance> two;
  two.push_back(single_clique_instance(1.0, {1, 1, 1}));
  two.push_back(single_clique_instance(1.0, {1, 1, 1}));
  const std::vector<double> one =
      observed_features({two.data(), 1}, PenaltyVariant::Discrete, 3);
  const std::vector<double> both =
      observed_features(two, PenaltyVariant::Discrete, 3);
  for (std::size_t i = 0; i < one.size(); ++i)
    CHECK(both[i] == Approx(2.0 * one[i]));
}

TEST_CASE("a cliqueless instance observes nothing") {
  TrainingInstance inst;
  inst.graph.add_node({0, 0, 0.5});
  inst.truth = {1};
  std::vector<TrainingInstance> one;
  one.push_back(std::move(inst));
  for (double v : observed_features(one, PenaltyVariant::Discrete, 3))
    CHECK(v == Approx(0.0));
}

// ============================================================================
// expected_features
// ============================================================================

TEST_CASE("the zero model expects binomial count probabilities") {
  const TrainingInstance inst = single_clique_instance(1.0, {1, 1, 1});
  const PenaltyModel model = PenaltyModel::discrete(3);
  const ExpectedFeatures exp = expected_features(inst, model, exact_bp());
  REQUIRE(exp.bp_converged);
  for (int a = 0; a <= 3; ++a) {
    CHECK(exp.values[static_cast<std::size_t>(model.index_of(1, a))] ==
          Approx(-binom3(a) / 8.0).epsilon(1e-10));
    // the class-0 side carries weight 1 - 1 = 0
    CHECK(exp.values[static_cast<std::size_t>(model.index_of(0, a))] ==
          Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("a zero-weight clique expects nothing on the class-1 side") {
  const TrainingInstance inst = single_clique_instance(0.0, {0, 0, 0});
  const PenaltyModel model = PenaltyModel::discrete(3);
  const ExpectedFeatures exp = expected_features(inst, model, exact_bp());
  for (int a = 0; a <= 3; ++a)
    CHECK(exp.values[static_cast<std::size_t>(model.index_of(1, a))] ==
          Approx(0.0).epsilon(1e-12));
}

TEST_CASE("expected features match full enumeration on trees") {
  testutil::Rng rng(109);
  for (int trial = 0; trial < 5; ++trial) {
    const TrainingInstance inst = testutil::random_tree_instance(rng, 4);
    const PenaltyModel model = testutil::random_discrete_model(rng, 3, -1.5, 1.5);
    const ExpectedFeatures exp = expected_features(inst, model, exact_bp());
    const std::vector<double> oracle =
        testutil::enumerated_expected_features(inst, model);
    REQUIRE(exp.values.size() == oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i)
      CHECK(exp.values[i] == Approx(oracle[i]).epsilon(1e-8));
  }
}

// ============================================================================
// objective
// ============================================================================

TEST_CASE("the uniform model scores minus n log two on a cliqueless instance") {
  TrainingInstance inst;
  for (int i = 0; i < 4; ++i) inst.graph.add_node({i, 0, 0.5});
  inst.truth = {1, 0, 1, 0};
  std::vector<TrainingInstance> one;
  one.push_back(std::move(inst));
  TrainConfig cfg = tree_config();
  cfg.l2_strength = 0.0;
  const PenaltyModel model = PenaltyModel::discrete(3);
  CHECK(objective(one, model, cfg) == Approx(-4.0 * std::log(2.0)).epsilon(1e-10));
}

TEST_CASE("objective equals the enumerated log-likelihood on trees") {
  testutil::Rng rng(113);
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<TrainingInstance> insts;
    insts.push_back(testutil::random_tree_instance(rng, 3));
    const PenaltyModel model = testutil::random_discrete_model(rng, 3, -1.5, 1.5);
    TrainConfig cfg = tree_config();
    cfg.l2_strength = 0.0;
    CHECK(objective(insts, model, cfg) ==
          Approx(testutil::enumerated_log_likelihood(insts[0], model)).epsilon(1e-8));
  }
}

TEST_CASE("per-class constant shifts move the objective only through the L2 term") {
  testutil::Rng rng(127);
  std::vector<TrainingInstance> insts;
  insts.push_back(testutil::random_tree_instance(rng, 4));
  const PenaltyModel base = testutil::random_discrete_model(rng, 3, -1.0, 1.0);
  PenaltyModel shifted = base;
  for (int a = 0; a <= 3; ++a)
    shifted.parameters()[static_cast<std::size_t>(shifted.index_of(0, a))] += 0.61;

  TrainConfig cfg = tree_config();
  cfg.l2_strength = 0.0;
  CHECK(objective(insts, base, cfg) ==
        Approx(objective(insts, shifted, cfg)).epsilon(1e-8));

  cfg.l2_strength = 1e-2;
  auto sq = [](const PenaltyModel& m) {
    double s = 0.0;
    for (double w : m.parameters()) s += w * w;
    return s;
  };
  const double l2_delta =
      0.5 * cfg.l2_strength * (sq(shifted) - sq(base));
  CHECK(objective(insts, base, cfg) - objective(insts, shifted, cfg) ==
        Approx(l2_delta).epsilon(1e-8));
}

// ============================================================================
// gradient
// ============================================================================

TEST_CASE("observed equal to expected leaves only the regularizer pull") {
  // all eight labelings of the same clique as truth: the empirical label
  // distribution is exactly the uniform distribution that gauge-constant
  // parameters induce, so the likelihood part of the gradient cancels
  std::vector<TrainingInstance> insts;
  for (std::uint32_t mask = 0; mask < 8; ++mask) {
    Labeling truth(3);
    for (int i = 0; i < 3; ++i) truth[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
    insts.push_back(single_clique_instance(0.7, truth));
  }
  PenaltyModel model = PenaltyModel::discrete(3);
  for (int a = 0; a <= 3; ++a) {
    model.parameters()[static_cast<std::size_t>(model.index_of(0, a))] = 0.9;
    model.parameters()[static_cast<std::size_t>(model.index_of(1, a))] = -0.3;
  }
  TrainConfig cfg = tree_config();
  cfg.l2_strength = 0.05;
  const std::vector<double> g = gradient(insts, model, cfg);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(g[i] == Approx(-cfg.l2_strength * model.parameters()[i]).epsilon(1e-10));
}

TEST_CASE("the gradient matches central finite differences on trees") {
  testutil::Rng rng(131);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<TrainingInstance> insts;
    insts.push_back(testutil::random_tree_instance(rng, 3));
    insts.push_back(testutil::random_tree_instance(rng, 2));
    PenaltyModel model = testutil::random_discrete_model(rng, 3, -3.0, 3.0);
    TrainConfig cfg = tree_config();

    const std::vector<double> g = gradient(insts, model, cfg);
    const double h = 1e-5;
    for (std::size_t i = 0; i < model.parameters().size(); ++i) {
      const double orig = model.parameters()[i];
      model.parameters()[i] = orig + h;
      const double hi = objective(insts, model, cfg);
      model.parameters()[i] = orig - h;
      const double lo = objective(insts, model, cfg);
      model.parameters()[i] = orig;
      const double fd = (hi - lo) / (2.0 * h);
      CHECK(testutil::rel_err(g[i], fd) <= 1e-4);
    }
  }
}

TEST_CASE("with no instances the gradient is pure regularizer") {
  PenaltyModel model = PenaltyModel::discrete(3);
  model.parameters()[2] = 1.7;
  model.parameters()[5] = -0.4;
  TrainConfig cfg = tree_config();
  cfg.l2_strength = 0.1;
  const std::vector<TrainingInstance> none;
  const std::vector<double> g = gradient(none, model, cfg);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(g[i] == Approx(-0.1 * model.parameters()[i]).epsilon(1e-15));
}

TEST_CASE("sampled labelings reproduce expected features") {
  // exact ancestral sampling from the single-clique distribution; the mean
  // observed features converge to the model's expectations
  testutil::Rng rng(137);
  const double weight = 0.65;
  const PenaltyModel model =
      PenaltyModel::discrete({0, 0.4, 0.9, 1.3}, {0, 0.6, 1.0, 1.1});
  const TrainingInstance proto = single_clique_instance(weight, {1, 1, 1});

  // enumerate the eight labeling probabilities
  std::vector<double> probs(8);
  double z = 0.0;
  for (std::uint32_t mask = 0; mask < 8; ++mask) {
    Labeling lab(3);
    for (int i = 0; i < 3; ++i) lab[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
    probs[mask] = std::exp(-total_energy(proto.graph, lab, model));
    z += probs[mask];
  }
  for (double& p : probs) p /= z;

  const int samples = 100000;
  std::vector<double> acc(model.parameter_count(), 0.0);
  for (int s = 0; s < samples; ++s) {
    double u = rng.uniform(0.0, 1.0);
    std::uint32_t mask = 0;
    while (mask < 7 && u > probs[mask]) u -= probs[mask], ++mask;
    std::vector<TrainingInstance> one;
    Labeling lab(3);
    for (int i = 0; i < 3; ++i) lab[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
    one.push_back(single_clique_instance(weight, lab));
    const std::vector<double> obs =
        observed_features(one, PenaltyVariant::Discrete, 3);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += obs[i];
  }
  for (double& a : acc) a /= samples;

  const ExpectedFeatures exp = expected_features(proto, model, exact_bp());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (std::abs(exp.values[i]) < 1e-3) continue;  // noise-dominated entries
    CHECK(testutil::rel_err(acc[i], exp.values[i]) <= 0.05);
  }
}

TEST_CASE("gauge-shifted starting points follow gauge-equivalent paths") {
  testutil::Rng rng(139);
  std::vector<TrainingInstance> insts;
  insts.push_back(testutil::random_tree_instance(rng, 3));
  const TrainingInstance held_out = testutil::random_tree_instance(rng, 3);

  PenaltyModel a = testutil::random_discrete_model(rng, 3, -1.0, 1.0);
  PenaltyModel b = a;
  for (int t = 0; t <= 3; ++t) {
    b.parameters()[static_cast<std::size_t>(b.index_of(0, t))] += 0.47;
    b.parameters()[static_cast<std::size_t>(b.index_of(1, t))] -= 0.21;
  }

  TrainConfig cfg = tree_config();
  cfg.l2_strength = 0.0;
  for (int step = 0; step < 5; ++step) {
    const std::vector<double> ga = gradient(insts, a, cfg);
    const std::vector<double> gb = gradient(insts, b, cfg);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      a.parameters()[i] += 0.1 * ga[i];
      b.parameters()[i] += 0.1 * gb[i];
    }
  }

  const BeliefState sa = run_sum_product(build_factor_graph(held_out.graph, a), exact_bp());
  const BeliefState sb = run_sum_product(build_factor_graph(held_out.graph, b), exact_bp());
  for (std::size_t i = 0; i < sa.node_beliefs.size(); ++i) {
    CHECK(std::abs(sa.node_beliefs[i][0] - sb.node_beliefs[i][0]) < 1e-6);
    CHECK(std::abs(sa.node_beliefs[i][1] - sb.node_beliefs[i][1]) < 1e-6);
  }
}

// ============================================================================
// train
// ============================================================================

TEST_CASE("accepted objectives never decrease on synthetic training data") {
  SynthConfig scfg;
  scfg.n_points = 12;
  scfg.transform = TransformKind::Shear;
  scfg.shear_factor = 1.4;
  scfg.descriptor_noise_sigma = 0.6;
  scfg.seed = 900;
  const SynthPair pair = generate_pair(scfg);
  const BuildResult built = build_match_hypergraph(pair.left, pair.right, MatchParams{});

  std::vector<TrainingInstance> insts;
  TrainingInstance inst;
  inst.truth = label_candidates(built.graph, pair.ground_truth);
  inst.graph = built.graph;
  insts.push_back(std::move(inst));

  TrainConfig cfg;
  cfg.max_iters = 25;
  const TrainResult result = train(insts, cfg);
  REQUIRE_FALSE(result.log.empty());
  for (std::size_t i = 1; i < result.log.size(); ++i)
    CHECK(result.log[i].objective >= result.log[i - 1].objective - 1e-12);
}

TEST_CASE("training reaches the gradient tolerance on tree instances") {
  testutil::Rng rng(149);
  std::vector<TrainingInstance> insts;
  for (int i = 0; i < 3; ++i) insts.push_back(testutil::random_tree_instance(rng, 3));
  TrainConfig cfg = tree_config();
  cfg.max_iters = 1000;
  const TrainResult result = train(insts, cfg);
  CHECK(result.converged);
  CHECK(result.log.back().grad_max_norm < 1e-3);
}

TEST_CASE("training is deterministic") {
  testutil::Rng rng(151);
  std::vector<TrainingInstance> insts;
  insts.push_back(testutil::random_tree_instance(rng, 3));
  TrainConfig cfg = tree_config();
  cfg.max_iters = 40;
  const TrainResult a = train(insts, cfg);
  const TrainResult b = train(insts, cfg);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i)
    CHECK(a.log[i].objective == b.log[i].objective);
  for (std::size_t i = 0; i < a.model.parameters().size(); ++i)
    CHECK(a.model.parameters()[i] == b.model.parameters()[i]);
}

TEST_CASE("polynomial training recovers a quadratic generator's marginals") {
  // ground-truth labels follow a discrete model whose table is itself
  // quadratic, so the polynomial class contains the generator. The dataset
  // replicates each labeling of a clique in proportion to its exact
  // probability (largest-remainder rounding), which keeps the empirical
  // distribution within 1/N of the generator's without sampling noise.
  const PenaltyModel generator = PenaltyModel::discrete(
      {0.0, 0.4, 0.6, 0.6},   // 0 + 0.5 a - 0.1 a^2
      {0.0, 0.5, 1.1, 1.8});  // 0 + 0.45 a + 0.05 a^2

  auto labeling_of = [](std::uint32_t mask) {
    Labeling lab(3);
    for (int i = 0; i < 3; ++i) lab[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
    return lab;
  };

  std::vector<TrainingInstance> train_set;
  const int replicas = 500;  // instances per clique weight
  for (double weight : {0.3, 0.7}) {
    const TrainingInstance proto = single_clique_instance(weight, {0, 0, 0});
    std::vector<double> probs(8);
    double z = 0.0;
    for (std::uint32_t mask = 0; mask < 8; ++mask) {
      probs[mask] = std::exp(-total_energy(proto.graph, labeling_of(mask), generator));
      z += probs[mask];
    }
    int assigned = 0;
    std::vector<int> counts(8);
    std::vector<std::pair<double, std::uint32_t>> remainders;
    for (std::uint32_t mask = 0; mask < 8; ++mask) {
      const double target = probs[mask] / z * replicas;
      counts[mask] = static_cast<int>(std::floor(target));
      assigned += counts[mask];
      remainders.emplace_back(target - counts[mask], mask);
    }
    std::sort(remainders.rbegin(), remainders.rend());
    for (int i = 0; i < replicas - assigned; ++i) ++counts[remainders[static_cast<std::size_t>(i)].second];
    for (std::uint32_t mask = 0; mask < 8; ++mask)
      for (int c = 0; c < counts[mask]; ++c)
        train_set.push_back(single_clique_instance(weight, labeling_of(mask)));
  }

  TrainConfig cfg = tree_config();
  cfg.variant = PenaltyVariant::Polynomial;
  cfg.max_iters = 250;
  cfg.step_size = 2e-3;  // gradients scale with the instance count
  cfg.l2_strength = 1e-6;
  const TrainResult result = train(train_set, cfg);

  // held out: unseen clique weights, alone and chained
  std::vector<TrainingInstance> held;
  held.push_back(single_clique_instance(0.5, {0, 0, 0}));
  held.push_back(single_clique_instance(0.85, {0, 0, 0}));
  {
    testutil::Rng rng(157);
    held.push_back(testutil::random_tree_instance(rng, 2));
  }

  double worst_tv = 0.0;
  for (const TrainingInstance& inst : held) {
    const BeliefState got =
        run_sum_product(build_factor_graph(inst.graph, result.model), exact_bp());
    const BeliefState want =
        run_sum_product(build_factor_graph(inst.graph, generator), exact_bp());
    for (std::size_t f = 0; f < got.clique_count_marginals.size(); ++f) {
      double tv = 0.0;
      for (std::size_t s = 0; s < got.clique_count_marginals[f].size(); ++s)
        tv += std::abs(got.clique_count_marginals[f][s] -
                       want.clique_count_marginals[f][s]);
      worst_tv = std::max(worst_tv, 0.5 * tv);
    }
  }
  CHECK(worst_tv <= 0.02);
}
