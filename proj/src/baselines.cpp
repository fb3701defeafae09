#include "hypermatch/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hypermatch {

PenaltyModel linear_penalty_model(int k_max) {
  std::vector<double> table(static_cast<std::size_t>(k_max) + 1);
  std::iota(table.begin(), table.end(), 0.0);
  return PenaltyModel::discrete(table, table);
}

MatchAssignment greedy_appearance(const PointSet& left, const PointSet& right) {
  const auto candidates = candidate_matches(left, right, 1);
  MatchAssignment out;
  for (const auto& group : candidates) {
    const CandidateMatch& best = group.front();
    out.pairs.push_back({best.left_index, best.right_index, best.appearance_weight});
  }
  return out;
}

// ============================================================================
// Spectral matching
// ============================================================================

namespace {

double distance(Point2 a, Point2 b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace

SpectralProblem build_spectral_problem(const PointSet& left, const PointSet& right,
                                       const SpectralParams& params) {
  if (params.sigma <= 0.0) throw ConfigError("sigma must be positive");
  if (params.distance_threshold <= 0.0)
    throw ConfigError("distance threshold must be positive");

  SpectralProblem problem;
  for (const auto& group : candidate_matches(left, right, params.m))
    problem.candidates.insert(problem.candidates.end(), group.begin(), group.end());

  const std::size_t n = problem.candidates.size();
  problem.matrix.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const CandidateMatch& ci = problem.candidates[i];
    problem.matrix[i][i] = ci.appearance_weight;
    for (std::size_t j = i + 1; j < n; ++j) {
      const CandidateMatch& cj = problem.candidates[j];
      if (ci.left_index == cj.left_index || ci.right_index == cj.right_index)
        continue;  // conflicting candidates never co-activate
      const double d_left =
          distance(left.points[static_cast<std::size_t>(ci.left_index)],
                   left.points[static_cast<std::size_t>(cj.left_index)]);
      if (d_left > params.distance_threshold) continue;
      const double d_right =
          distance(right.points[static_cast<std::size_t>(ci.right_index)],
                   right.points[static_cast<std::size_t>(cj.right_index)]);
      const double gap = d_left - d_right;
      const double affinity = std::exp(-(gap * gap) / (params.sigma * params.sigma));
      problem.matrix[i][j] = problem.matrix[j][i] = affinity;
    }
  }
  return problem;
}

double concurrence_score(const SpectralProblem& problem,
                         std::span<const std::uint8_t> selected) {
  const std::size_t n = problem.candidates.size();
  if (selected.size() != n)
    throw ConfigError("selection length must equal candidate count");
  double score = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!selected[i]) continue;
    for (std::size_t j = 0; j < n; ++j)
      if (selected[j]) score += problem.matrix[i][j];
  }
  return score;
}

SpectralResult solve_spectral(const SpectralProblem& problem,
                              const SpectralParams& params) {
  if (params.tolerance <= 0.0) throw ConfigError("tolerance must be positive");
  if (params.max_iters < 1) throw ConfigError("max_iters must be positive");

  const std::size_t n = problem.candidates.size();
  if (problem.matrix.size() != n)
    throw ConfigError("matrix size must equal candidate count");
  int max_left = -1, max_right = -1;
  for (const CandidateMatch& c : problem.candidates) {
    max_left = std::max(max_left, c.left_index);
    max_right = std::max(max_right, c.right_index);
  }

  SpectralResult result;
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> mv(n);
  for (int iter = 1; iter <= params.max_iters; ++iter) {
    result.iterations = iter;
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += problem.matrix[i][j] * v[j];
      mv[i] = s;
      norm += s * s;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) break;  // zero matrix: any direction is stationary
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mv[i] /= norm;
      residual = std::max(residual, std::abs(mv[i] - v[i]));
    }
    v = mv;
    if (residual < params.tolerance) {
      result.power_converged = true;
      break;
    }
  }

  // Greedy discretization: accept candidates in descending eigenvector
  // order, skipping conflicts; stop when no positive value remains.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (v[a] != v[b]) return v[a] > v[b];
    const CandidateMatch& ca = problem.candidates[a];
    const CandidateMatch& cb = problem.candidates[b];
    if (ca.left_index != cb.left_index) return ca.left_index < cb.left_index;
    return ca.right_index < cb.right_index;
  });

  result.selected.assign(n, 0);
  std::vector<std::uint8_t> left_used, right_used;
  left_used.assign(static_cast<std::size_t>(max_left) + 1, 0);
  right_used.assign(static_cast<std::size_t>(max_right) + 1, 0);
  for (std::size_t idx : order) {
    if (v[idx] <= 0.0) break;
    const CandidateMatch& c = problem.candidates[idx];
    if (left_used[static_cast<std::size_t>(c.left_index)] ||
        right_used[static_cast<std::size_t>(c.right_index)])
      continue;
    left_used[static_cast<std::size_t>(c.left_index)] = 1;
    right_used[static_cast<std::size_t>(c.right_index)] = 1;
    result.selected[idx] = 1;
    result.assignment.pairs.push_back({c.left_index, c.right_index, v[idx]});
  }
  std::sort(result.assignment.pairs.begin(), result.assignment.pairs.end(),
            [](const AssignedMatch& a, const AssignedMatch& b) {
              return a.left_index < b.left_index;
            });
  return result;
}

SpectralResult spectral_match(const PointSet& left, const PointSet& right,
                              const SpectralParams& params) {
  return solve_spectral(build_spectral_problem(left, right, params), params);
}

}  // namespace hypermatch
