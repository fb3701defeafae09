#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hypermatch/core.hpp"
#include "hypermatch/matching.hpp"

namespace hypermatch {

// ============================================================================
// Comparison methods
// ============================================================================

/// Discrete model with identity penalties w_c(a) = a for both classes: each
/// label disagreeing with the clique hypothesis costs one unit.
PenaltyModel linear_penalty_model(int k_max);

/// Appearance-only control: every left feature takes its best-correlated
/// right feature, ties toward the lower right index. Scores are the
/// appearance weights.
MatchAssignment greedy_appearance(const PointSet& left, const PointSet& right);

// ============================================================================
// Spectral matching
// ============================================================================

struct SpectralParams {
  int m = 3;                        // candidates per left feature
  double distance_threshold = 3.0;  // left-feature distance for pair terms
  double sigma = 0.5;               // length-difference affinity bandwidth
  double tolerance = 1e-8;          // power-iteration stopping residual
  int max_iters = 1000;
};

/// Pairwise compatibility problem over candidate matches: appearance
/// weights on the diagonal; off-diagonal exp(-(dL - dR)^2 / sigma^2) for
/// non-conflicting candidate pairs whose left features lie within the
/// distance threshold, where dL and dR are the left- and right-side
/// feature distances.
struct SpectralProblem {
  std::vector<CandidateMatch> candidates;
  std::vector<std::vector<double>> matrix;  // symmetric, nonnegative
};

SpectralProblem build_spectral_problem(const PointSet& left, const PointSet& right,
                                       const SpectralParams& params);

/// Total pairwise-concurrence score of a candidate selection: the sum of
/// matrix entries over selected singles and pairs (x' M x). The objective
/// the spectral relaxation approximates.
double concurrence_score(const SpectralProblem& problem,
                         std::span<const std::uint8_t> selected);

struct SpectralResult {
  MatchAssignment assignment;
  std::vector<std::uint8_t> selected;  // per-candidate indicator
  bool power_converged = false;
  int iterations = 0;
};

/// Power iteration on an explicit problem's matrix, then greedy one-to-one
/// discretization in descending eigenvector order. Non-convergence uses the
/// best iterate and is reported, not thrown. Useful directly when the
/// compatibility matrix is constructed by other means.
SpectralResult solve_spectral(const SpectralProblem& problem,
                              const SpectralParams& params);

/// Principal-eigenvector matching: build_spectral_problem composed with
/// solve_spectral.
SpectralResult spectral_match(const PointSet& left, const PointSet& right,
                              const SpectralParams& params);

}  // namespace hypermatch
