#include "hypermatch/learning.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace hypermatch {

namespace {

void check_instance(const TrainingInstance& instance) {
  if (instance.truth.size() != instance.graph.node_count())
    throw InvalidLabelError("truth labeling length must equal node count");
}

PenaltyModel model_from_parameters(PenaltyVariant variant, int k_max,
                                   const std::vector<double>& params) {
  PenaltyModel model = variant == PenaltyVariant::Discrete
                           ? PenaltyModel::discrete(k_max)
                           : PenaltyModel::polynomial(k_max);
  model.parameters() = params;
  return model;
}

struct Evaluation {
  double objective = 0.0;
  std::vector<double> gradient;
  int bp_nonconverged = 0;
};

// Shared likelihood evaluation: one BP run per instance feeds both the
// Bethe log Z in the objective and the expected features in the gradient.
Evaluation evaluate(std::span<const TrainingInstance> instances,
                    const PenaltyModel& model, const TrainConfig& config,
                    const std::vector<double>& observed) {
  const std::vector<double>& w = model.parameters();

  Evaluation ev;
  ev.gradient.assign(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    ev.objective += w[i] * observed[i] - 0.5 * config.l2_strength * w[i] * w[i];
    ev.gradient[i] = observed[i] - config.l2_strength * w[i];
  }

  for (const TrainingInstance& instance : instances) {
    const FactorGraph fg = build_factor_graph(instance.graph, model);
    const BeliefState beliefs = run_sum_product(fg, config.bp);
    if (!beliefs.converged) ++ev.bp_nonconverged;
    ev.objective -= bethe_log_z(fg, beliefs);

    const auto& edges = instance.graph.edges();
    for (std::size_t f = 0; f < edges.size(); ++f) {
      const Hyperedge& edge = edges[f];
      const int k = static_cast<int>(edge.node_ids.size());
      const std::vector<double>& ones_marginal = beliefs.clique_count_marginals[f];
      const std::array<double, 2> class_weight{1.0 - edge.weight, edge.weight};
      for (int cls = 0; cls < 2; ++cls) {
        if (class_weight[static_cast<std::size_t>(cls)] == 0.0) continue;
        // P(disagreements with cls = a): a ones for class 0, a zeros for 1.
        for (int a = 0; a <= k; ++a) {
          const double p =
              ones_marginal[static_cast<std::size_t>(cls == 0 ? a : k - a)];
          if (p == 0.0) continue;
          if (model.variant() == PenaltyVariant::Discrete) {
            ev.gradient[static_cast<std::size_t>(model.index_of(cls, a))] +=
                class_weight[static_cast<std::size_t>(cls)] * p;
          } else {
            double moment = 1.0;  // a^e / e!
            for (int e = 0; e < 3; ++e) {
              ev.gradient[static_cast<std::size_t>(model.index_of(cls, e))] +=
                  class_weight[static_cast<std::size_t>(cls)] * p * moment;
              moment *= static_cast<double>(a) / static_cast<double>(e + 1);
            }
          }
        }
      }
    }
  }
  return ev;
}

}  // namespace

int training_k_max(std::span<const TrainingInstance> instances) {
  std::size_t k_max = 2;
  for (const TrainingInstance& instance : instances)
    for (const Hyperedge& edge : instance.graph.edges())
      k_max = std::max(k_max, edge.node_ids.size());
  return static_cast<int>(k_max);
}

std::vector<double> observed_features(std::span<const TrainingInstance> instances,
                                      PenaltyVariant variant, int k_max) {
  if (k_max < 2) throw ConfigError("k_max must be at least 2");
  const int terms = variant == PenaltyVariant::Discrete ? k_max + 1 : 3;
  std::vector<double> accum(2 * static_cast<std::size_t>(terms), 0.0);

  std::vector<std::uint8_t> clique_labels;
  for (const TrainingInstance& instance : instances) {
    check_instance(instance);
    for (const Hyperedge& edge : instance.graph.edges()) {
      if (static_cast<int>(edge.node_ids.size()) > k_max)
        throw ModelSizeError("clique larger than k_max in training data");
      clique_labels.clear();
      for (int id : edge.node_ids)
        clique_labels.push_back(instance.truth[static_cast<std::size_t>(id)]);
      for (const FeatureEntry& fe : feature_vector(edge, clique_labels, variant))
        accum[static_cast<std::size_t>(fe.cls * terms + fe.term)] += fe.value;
    }
  }
  return accum;
}

ExpectedFeatures expected_features(const TrainingInstance& instance,
                                   const PenaltyModel& model,
                                   const BpOptions& bp_opts) {
  check_instance(instance);
  TrainConfig config;
  config.l2_strength = 0.0;
  config.variant = model.variant();
  config.bp = bp_opts;
  const std::vector<double> zeros(model.parameter_count(), 0.0);
  const TrainingInstance* one = &instance;
  Evaluation ev = evaluate({one, 1}, model, config, zeros);

  // evaluate() returns observed - expected with observed = 0 and l2 = 0;
  // negate to recover the expectation itself.
  ExpectedFeatures out;
  out.values.resize(ev.gradient.size());
  for (std::size_t i = 0; i < ev.gradient.size(); ++i)
    out.values[i] = -ev.gradient[i];
  out.bp_converged = ev.bp_nonconverged == 0;
  return out;
}

double objective(std::span<const TrainingInstance> instances,
                 const PenaltyModel& model, const TrainConfig& config) {
  for (const TrainingInstance& instance : instances) check_instance(instance);
  const std::vector<double> observed =
      observed_features(instances, model.variant(), model.k_max());
  return evaluate(instances, model, config, observed).objective;
}

std::vector<double> gradient(std::span<const TrainingInstance> instances,
                             const PenaltyModel& model, const TrainConfig& config) {
  for (const TrainingInstance& instance : instances) check_instance(instance);
  const std::vector<double> observed =
      observed_features(instances, model.variant(), model.k_max());
  return evaluate(instances, model, config, observed).gradient;
}

TrainResult train(std::span<const TrainingInstance> instances,
                  const TrainConfig& config) {
  if (instances.empty()) throw ConfigError("training needs at least one instance");
  if (config.step_size <= 0.0) throw ConfigError("step size must be positive");
  if (config.max_iters < 0) throw ConfigError("max_iters must be nonnegative");
  if (config.l2_strength < 0.0) throw ConfigError("l2 strength must be nonnegative");
  for (const TrainingInstance& instance : instances) check_instance(instance);

  const int k_max = training_k_max(instances);
  const std::vector<double> observed =
      observed_features(instances, config.variant, k_max);

  TrainResult result{model_from_parameters(config.variant, k_max,
                                           std::vector<double>(
                                               config.variant == PenaltyVariant::Discrete
                                                   ? 2 * static_cast<std::size_t>(k_max + 1)
                                                   : std::size_t{6},
                                               0.0)),
                     {}, false};
  Evaluation current = evaluate(instances, result.model, config, observed);

  constexpr double kMinStep = 1e-12;
  double accepted_step = config.step_size;
  for (int iter = 0; iter <= config.max_iters; ++iter) {
    double grad_max = 0.0;
    for (double g : current.gradient) grad_max = std::max(grad_max, std::abs(g));
    result.log.push_back(
        {iter, current.objective, grad_max, accepted_step, current.bp_nonconverged});
    if (grad_max < config.grad_tolerance) {
      result.converged = true;
      break;
    }
    if (iter == config.max_iters) break;

    // Line search by halving, starting from twice the last accepted step
    // (capped at the configured size): accept the first candidate that does
    // not decrease the objective; give up once the step degenerates. A
    // candidate that drives beliefs into underflow (Bethe evaluation rejects
    // zero beliefs) counts as a decrease.
    double step = std::min(config.step_size, 2.0 * accepted_step);
    bool accepted = false;
    while (step >= kMinStep) {
      std::vector<double> candidate = result.model.parameters();
      for (std::size_t i = 0; i < candidate.size(); ++i)
        candidate[i] += step * current.gradient[i];
      PenaltyModel next = model_from_parameters(config.variant, k_max, candidate);
      std::optional<Evaluation> trial;
      try {
        trial = evaluate(instances, next, config, observed);
      } catch (const NumericalDomainError&) {
      }
      if (trial && trial->objective >= current.objective) {
        result.model = std::move(next);
        current = std::move(*trial);
        accepted_step = step;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return result;
}

}  // namespace hypermatch
