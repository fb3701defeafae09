#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "hypermatch/core.hpp"
#include "hypermatch/inference.hpp"

namespace hypermatch {

// ============================================================================
// Point sets
// ============================================================================

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Feature locations of one image, with optional descriptors (one vector of
/// common dimension per point).
struct PointSet {
  std::vector<Point2> points;
  std::vector<std::vector<double>> descriptors;  // empty, or one per point

  bool has_descriptors() const { return !descriptors.empty(); }

  /// Throws DataError on non-finite coordinates, descriptor count mismatch,
  /// or inconsistent/empty descriptor dimensions.
  void validate() const;
};

// ============================================================================
// Hypergraph construction
// ============================================================================

struct MatchParams {
  int m = 3;           // candidates kept per left feature
  int knn = 5;         // neighbors forming triangles around each left feature
  double delta = 0.5;  // angle-dissimilarity cutoff (radians^2)
  BpOptions bp;
  bool one_to_one = false;  // greedy injective post-processing of the output
};

/// Construction counters, useful for diagnosing empty or one-sided graphs.
struct BuildReport {
  int left_triangles = 0;      // non-degenerate left triangles enumerated
  int candidate_triples = 0;   // right candidate combinations examined
  int repeated_right = 0;      // skipped: combination reuses a right feature
  int degenerate_left = 0;     // skipped: collinear left triangle
  int degenerate_right = 0;    // skipped: collinear right triangle
  int discarded_by_angle = 0;  // skipped: angle dissimilarity above delta
  int kept = 0;                // surviving pairs before deduplication
  int deduplicated = 0;        // duplicates merged into an existing edge
  int unmatched_left = 0;      // left features absent from the assignment
};

/// Normalized correlation of two descriptors, clamped below at zero so
/// anti-correlated pairs contribute nothing. Throws
/// DegenerateDescriptorError on a zero vector, DataError on dimension
/// mismatch.
double appearance_weight(std::span<const double> u, std::span<const double> v);

/// The m best-correlated right features per left feature (fewer when the
/// right side is small), each as a CandidateMatch carrying its weight.
/// Ties break toward the lower right index.
std::vector<std::vector<CandidateMatch>> candidate_matches(const PointSet& left,
                                                           const PointSet& right,
                                                           int m);

/// True when the triangle is too close to collinear to yield stable angles
/// (area at most 1e-9 times the squared diameter).
bool triangle_is_degenerate(Point2 a, Point2 b, Point2 c) noexcept;

/// Interior angles at p1, p2, p3 in that order, radians. Throws
/// DegenerateTriangleError when triangle_is_degenerate holds.
std::array<double, 3> interior_angles(Point2 p1, Point2 p2, Point2 p3);

/// Angle-based similarity of two correspondence-ordered triangles:
/// 1 - eps/delta with eps the sum of squared per-vertex angle differences.
/// Returns nullopt when eps exceeds delta (the pair is discarded).
std::optional<double> geometric_weight(const std::array<double, 3>& left_angles,
                                       const std::array<double, 3>& right_angles,
                                       double delta);

struct BuildResult {
  MatchHypergraph graph;
  BuildReport report;
};

/// Builds the match hypergraph: candidate matches become nodes; every
/// triangle formed by a left feature and two of its knn nearest neighbors,
/// combined with one candidate per vertex (m^3 combinations), becomes a
/// size-3 hyperedge weighted by geometric similarity times the product of
/// the three appearance weights. Duplicate node triples keep the maximum
/// weight.
BuildResult build_match_hypergraph(const PointSet& left, const PointSet& right,
                                   const MatchParams& params);

// ============================================================================
// Discretization and evaluation
// ============================================================================

struct AssignedMatch {
  int left_index = -1;
  int right_index = -1;
  double score = 0.0;  // belief log-ratio log b(1) - log b(0)
};

/// Hard correspondences, at most one per left feature, ascending left index.
struct MatchAssignment {
  std::vector<AssignedMatch> pairs;
};

/// Per left feature, selects the candidate with the largest belief
/// log-ratio (beliefs floored at 1e-12); ties break by higher appearance
/// weight, then lower right index. With one_to_one, candidates are instead
/// accepted greedily in descending score order, skipping any whose left or
/// right feature is already taken.
MatchAssignment discretize(const MatchHypergraph& graph,
                           const BeliefState& beliefs, bool one_to_one);

struct PipelineResult {
  MatchHypergraph graph;
  BuildReport report;
  BeliefState beliefs;
  MatchAssignment assignment;
};

/// Full matching pipeline: build hypergraph, run sum-product under the
/// model, discretize. Deterministic given inputs and params.
PipelineResult match_pipeline(const PointSet& left, const PointSet& right,
                              const PenaltyModel& model,
                              const MatchParams& params);

struct PairMetrics {
  int n_truth_available = 0;  // left features with a ground-truth entry
  int n_correct = 0;          // assigned pairs agreeing with ground truth
  int n_incorrect = 0;        // assigned pairs contradicting ground truth
  double pct_incorrect = 0.0; // 100 * (1 - correct / truth_available)
};

/// Scores an assignment against ground truth. Unassigned left features
/// count against pct_incorrect, so an empty assignment scores 100%.
PairMetrics evaluate_assignment(const MatchAssignment& assignment,
                                const std::map<int, int>& ground_truth);

}  // namespace hypermatch
