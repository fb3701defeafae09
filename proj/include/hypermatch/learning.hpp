#pragma once

#include <span>
#include <vector>

#include "hypermatch/core.hpp"
#include "hypermatch/inference.hpp"

namespace hypermatch {

// ============================================================================
// Training data
// ============================================================================

/// One supervised matching problem: a hypergraph plus the ground-truth
/// label of every candidate match.
struct TrainingInstance {
  MatchHypergraph graph;
  Labeling truth;
};

struct TrainConfig {
  double step_size = 0.1;
  int max_iters = 100;
  double grad_tolerance = 1e-3;  // stop when the gradient max-norm drops below
  double l2_strength = 1e-2;
  PenaltyVariant variant = PenaltyVariant::Discrete;
  BpOptions bp;
};

/// Smallest k_max a model must have to cover every clique in `instances`
/// (at least 2, the model minimum).
int training_k_max(std::span<const TrainingInstance> instances);

// ============================================================================
// Likelihood pieces
// ============================================================================

/// Sum of the clique feature vectors at the observed labels, over all
/// instances, as a dense vector aligned with PenaltyModel::parameters()
/// for the given variant and k_max.
std::vector<double> observed_features(std::span<const TrainingInstance> instances,
                                      PenaltyVariant variant, int k_max);

struct ExpectedFeatures {
  std::vector<double> values;
  bool bp_converged = true;
};

/// Expected clique features of one instance under the model's distribution,
/// from sum-product count marginals. The discrete (class, a) entry
/// accumulates -weight_c * P(disagreements with c = a); polynomial entries
/// take the matching moments of the disagreement count. BP non-convergence
/// is flagged, not thrown.
ExpectedFeatures expected_features(const TrainingInstance& instance,
                                   const PenaltyModel& model,
                                   const BpOptions& bp_opts);

/// Penalized log-likelihood of the observed labelings:
///   sum_j [ w . features(truth_j) - log Z_j ] - (l2/2) ||w||^2
/// with log Z_j taken from the Bethe approximation (exact on trees).
double objective(std::span<const TrainingInstance> instances,
                 const PenaltyModel& model, const TrainConfig& config);

/// Gradient of `objective` in parameter order:
///   observed - sum_j expected_j - l2 * w.
std::vector<double> gradient(std::span<const TrainingInstance> instances,
                             const PenaltyModel& model, const TrainConfig& config);

// ============================================================================
// Trainer
// ============================================================================

struct TrainLogRow {
  int iteration = 0;
  double objective = 0.0;
  double grad_max_norm = 0.0;
  double step_size = 0.0;
  int bp_nonconverged_count = 0;  // BP runs that hit max_iters this evaluation
};

struct TrainResult {
  PenaltyModel model;
  std::vector<TrainLogRow> log;
  bool converged = false;  // gradient max-norm reached grad_tolerance
};

/// Gradient ascent from zero-initialized parameters with step halving:
/// a step is accepted only if it does not decrease the objective, so the
/// logged objective is non-decreasing. Deterministic given inputs.
TrainResult train(std::span<const TrainingInstance> instances,
                  const TrainConfig& config);

}  // namespace hypermatch
