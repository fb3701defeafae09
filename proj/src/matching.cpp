#include "hypermatch/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hypermatch {

namespace {

double squared_distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Angle at vertex `at` between rays toward `u` and `v`.
double vertex_angle(Point2 at, Point2 u, Point2 v) {
  const double ax = u.x - at.x, ay = u.y - at.y;
  const double bx = v.x - at.x, by = v.y - at.y;
  const double cross = ax * by - ay * bx;
  const double dot = ax * bx + ay * by;
  return std::atan2(std::abs(cross), dot);
}

}  // namespace

void PointSet::validate() const {
  for (const Point2& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw DataError("point coordinates must be finite");
  if (descriptors.empty()) return;
  if (descriptors.size() != points.size())
    throw DataError("descriptor count must equal point count");
  const std::size_t dim = descriptors.front().size();
  if (dim == 0) throw DataError("descriptors must be nonempty vectors");
  for (const auto& d : descriptors) {
    if (d.size() != dim) throw DataError("descriptors must share one dimension");
    for (double v : d)
      if (!std::isfinite(v)) throw DataError("descriptor values must be finite");
  }
}

// ============================================================================
// Appearance
// ============================================================================

double appearance_weight(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw DataError("descriptor dimensions differ");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0)
    throw DegenerateDescriptorError("zero descriptor has no correlation");
  const double rho = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(rho, 0.0, 1.0);
}

std::vector<std::vector<CandidateMatch>> candidate_matches(const PointSet& left,
                                                           const PointSet& right,
                                                           int m) {
  if (m < 1) throw ConfigError("candidate count must be at least 1");
  left.validate();
  right.validate();
  if (left.points.empty() || right.points.empty())
    throw DataError("both point sets must be nonempty");
  if (!left.has_descriptors() || !right.has_descriptors())
    throw DataError("candidate selection needs descriptors on both sides");

  std::vector<std::vector<CandidateMatch>> result(left.points.size());
  std::vector<CandidateMatch> scored(right.points.size());
  for (std::size_t l = 0; l < left.points.size(); ++l) {
    for (std::size_t r = 0; r < right.points.size(); ++r)
      scored[r] = {static_cast<int>(l), static_cast<int>(r),
                   appearance_weight(left.descriptors[l], right.descriptors[r])};
    const std::size_t keep = std::min<std::size_t>(scored.size(),
                                                   static_cast<std::size_t>(m));
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                      scored.end(), [](const CandidateMatch& a, const CandidateMatch& b) {
                        if (a.appearance_weight != b.appearance_weight)
                          return a.appearance_weight > b.appearance_weight;
                        return a.right_index < b.right_index;
                      });
    result[l].assign(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  return result;
}

// ============================================================================
// Triangles
// ============================================================================

bool triangle_is_degenerate(Point2 a, Point2 b, Point2 c) noexcept {
  const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  const double area = 0.5 * std::abs(cross);
  const double sq_diameter = std::max({squared_distance(a, b), squared_distance(b, c),
                                       squared_distance(a, c)});
  return !(area > 1e-9 * sq_diameter);
}

std::array<double, 3> interior_angles(Point2 p1, Point2 p2, Point2 p3) {
  if (triangle_is_degenerate(p1, p2, p3))
    throw DegenerateTriangleError("collinear points have no interior angles");
  return {vertex_angle(p1, p2, p3), vertex_angle(p2, p3, p1),
          vertex_angle(p3, p1, p2)};
}

std::optional<double> geometric_weight(const std::array<double, 3>& left_angles,
                                       const std::array<double, 3>& right_angles,
                                       double delta) {
  if (delta <= 0.0) throw ConfigError("delta must be positive");
  double eps = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = left_angles[static_cast<std::size_t>(i)] -
                     right_angles[static_cast<std::size_t>(i)];
    eps += d * d;
  }
  if (eps > delta) return std::nullopt;
  return 1.0 - eps / delta;
}

// ============================================================================
// Construction
// ============================================================================

BuildResult build_match_hypergraph(const PointSet& left, const PointSet& right,
                                   const MatchParams& params) {
  if (params.knn < 2) throw ConfigError("knn must be at least 2");
  if (params.delta <= 0.0) throw ConfigError("delta must be positive");

  BuildResult out;
  const auto candidates = candidate_matches(left, right, params.m);

  // One node per candidate; node_ids[l][j] indexes candidates[l][j].
  std::vector<std::vector<int>> node_ids(candidates.size());
  for (std::size_t l = 0; l < candidates.size(); ++l)
    for (const CandidateMatch& c : candidates[l])
      node_ids[l].push_back(out.graph.add_node(c));

  const int n_left = static_cast<int>(left.points.size());

  // Nearest neighbors per left feature, ties toward the lower index.
  std::vector<std::vector<int>> neighbors(static_cast<std::size_t>(n_left));
  for (int l = 0; l < n_left; ++l) {
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n_left) - 1);
    for (int i = 0; i < n_left; ++i)
      if (i != l) order.push_back(i);
    const Point2 p = left.points[static_cast<std::size_t>(l)];
    const std::size_t keep = std::min<std::size_t>(order.size(),
                                                   static_cast<std::size_t>(params.knn));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep),
                      order.end(), [&](int a, int b) {
                        const double da = squared_distance(p, left.points[static_cast<std::size_t>(a)]);
                        const double db = squared_distance(p, left.points[static_cast<std::size_t>(b)]);
                        if (da != db) return da < db;
                        return a < b;
                      });
    order.resize(keep);
    neighbors[static_cast<std::size_t>(l)] = std::move(order);
  }

  // Deduplication by sorted node-id triple, keeping the largest weight.
  std::map<std::array<int, 3>, double> edge_weight;

  for (int l = 0; l < n_left; ++l) {
    const auto& nb = neighbors[static_cast<std::size_t>(l)];
    for (std::size_t i = 0; i < nb.size(); ++i) {
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        const int u = nb[i], v = nb[j];
        const Point2 pl = left.points[static_cast<std::size_t>(l)];
        const Point2 pu = left.points[static_cast<std::size_t>(u)];
        const Point2 pv = left.points[static_cast<std::size_t>(v)];
        if (triangle_is_degenerate(pl, pu, pv)) {
          ++out.report.degenerate_left;
          continue;
        }
        ++out.report.left_triangles;
        const std::array<double, 3> angles_left = interior_angles(pl, pu, pv);

        const auto& cl = candidates[static_cast<std::size_t>(l)];
        const auto& cu = candidates[static_cast<std::size_t>(u)];
        const auto& cv = candidates[static_cast<std::size_t>(v)];
        for (std::size_t a = 0; a < cl.size(); ++a) {
          for (std::size_t b = 0; b < cu.size(); ++b) {
            for (std::size_t c = 0; c < cv.size(); ++c) {
              ++out.report.candidate_triples;
              const int ra = cl[a].right_index;
              const int rb = cu[b].right_index;
              const int rc = cv[c].right_index;
              if (ra == rb || ra == rc || rb == rc) {
                ++out.report.repeated_right;
                continue;
              }
              const Point2 qa = right.points[static_cast<std::size_t>(ra)];
              const Point2 qb = right.points[static_cast<std::size_t>(rb)];
              const Point2 qc = right.points[static_cast<std::size_t>(rc)];
              if (triangle_is_degenerate(qa, qb, qc)) {
                ++out.report.degenerate_right;
                continue;
              }
              const auto geo = geometric_weight(
                  angles_left, interior_angles(qa, qb, qc), params.delta);
              if (!geo) {
                ++out.report.discarded_by_angle;
                continue;
              }
              const double weight =
                  std::clamp(*geo * cl[a].appearance_weight * cu[b].appearance_weight *
                                 cv[c].appearance_weight,
                             0.0, 1.0);
              std::array<int, 3> key{node_ids[static_cast<std::size_t>(l)][a],
                                     node_ids[static_cast<std::size_t>(u)][b],
                                     node_ids[static_cast<std::size_t>(v)][c]};
              std::sort(key.begin(), key.end());
              ++out.report.kept;
              auto [it, inserted] = edge_weight.try_emplace(key, weight);
              if (!inserted) {
                ++out.report.deduplicated;
                it->second = std::max(it->second, weight);
              }
            }
          }
        }
      }
    }
  }

  for (const auto& [key, weight] : edge_weight)
    out.graph.add_edge({{key[0], key[1], key[2]}, weight});
  return out;
}

// ============================================================================
// Discretization
// ============================================================================

namespace {

struct ScoredNode {
  int node_id = -1;
  double score = 0.0;
};

double belief_log_ratio(const std::array<double, 2>& b) {
  constexpr double kFloor = 1e-12;
  return std::log(std::max(b[1], kFloor)) - std::log(std::max(b[0], kFloor));
}

// Preference order among candidates: higher score, then higher appearance
// weight, then lower right index.
bool preferred(const ScoredNode& a, const ScoredNode& b,
               const std::vector<CandidateMatch>& nodes) {
  if (a.score != b.score) return a.score > b.score;
  const CandidateMatch& ca = nodes[static_cast<std::size_t>(a.node_id)];
  const CandidateMatch& cb = nodes[static_cast<std::size_t>(b.node_id)];
  if (ca.appearance_weight != cb.appearance_weight)
    return ca.appearance_weight > cb.appearance_weight;
  return ca.right_index < cb.right_index;
}

}  // namespace

MatchAssignment discretize(const MatchHypergraph& graph,
                           const BeliefState& beliefs, bool one_to_one) {
  if (beliefs.node_beliefs.size() != graph.node_count())
    throw ConfigError("beliefs do not cover the graph's nodes");
  const auto& nodes = graph.nodes();

  MatchAssignment out;
  if (!one_to_one) {
    for (const auto& [left, ids] : graph.left_groups()) {
      ScoredNode best{-1, 0.0};
      for (int id : ids) {
        const ScoredNode entry{
            id, belief_log_ratio(beliefs.node_beliefs[static_cast<std::size_t>(id)])};
        if (best.node_id < 0 || preferred(entry, best, nodes)) best = entry;
      }
      out.pairs.push_back({left, nodes[static_cast<std::size_t>(best.node_id)].right_index,
                           best.score});
    }
    return out;
  }

  // Greedy injective variant: descending preference over all candidates,
  // skipping any whose left or right feature is already taken.
  std::vector<ScoredNode> ranked;
  ranked.reserve(nodes.size());
  for (std::size_t id = 0; id < nodes.size(); ++id)
    ranked.push_back({static_cast<int>(id), belief_log_ratio(beliefs.node_beliefs[id])});
  std::sort(ranked.begin(), ranked.end(), [&](const ScoredNode& a, const ScoredNode& b) {
    const CandidateMatch& ca = nodes[static_cast<std::size_t>(a.node_id)];
    const CandidateMatch& cb = nodes[static_cast<std::size_t>(b.node_id)];
    if (a.score != b.score) return a.score > b.score;
    if (ca.appearance_weight != cb.appearance_weight)
      return ca.appearance_weight > cb.appearance_weight;
    if (ca.right_index != cb.right_index) return ca.right_index < cb.right_index;
    return ca.left_index < cb.left_index;
  });

  std::map<int, bool> left_used, right_used;
  for (const ScoredNode& entry : ranked) {
    const CandidateMatch& c = nodes[static_cast<std::size_t>(entry.node_id)];
    if (left_used[c.left_index] || right_used[c.right_index]) continue;
    left_used[c.left_index] = right_used[c.right_index] = true;
    out.pairs.push_back({c.left_index, c.right_index, entry.score});
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const AssignedMatch& a, const AssignedMatch& b) {
              return a.left_index < b.left_index;
            });
  return out;
}

PipelineResult match_pipeline(const PointSet& left, const PointSet& right,
                              const PenaltyModel& model, const MatchParams& params) {
  PipelineResult out;
  BuildResult built = build_match_hypergraph(left, right, params);
  out.graph = std::move(built.graph);
  out.report = built.report;
  const FactorGraph fg = build_factor_graph(out.graph, model);
  out.beliefs = run_sum_product(fg, params.bp);
  out.assignment = discretize(out.graph, out.beliefs, params.one_to_one);
  out.report.unmatched_left =
      static_cast<int>(left.points.size()) - static_cast<int>(out.assignment.pairs.size());
  return out;
}

PairMetrics evaluate_assignment(const MatchAssignment& assignment,
                                const std::map<int, int>& ground_truth) {
  PairMetrics metrics;
  metrics.n_truth_available = static_cast<int>(ground_truth.size());
  for (const AssignedMatch& pair : assignment.pairs) {
    const auto it = ground_truth.find(pair.left_index);
    if (it == ground_truth.end()) continue;
    if (it->second == pair.right_index)
      ++metrics.n_correct;
    else
      ++metrics.n_incorrect;
  }
  metrics.pct_incorrect =
      metrics.n_truth_available == 0
          ? 0.0
          : 100.0 * (1.0 - static_cast<double>(metrics.n_correct) /
                               static_cast<double>(metrics.n_truth_available));
  return metrics;
}

}  // namespace hypermatch
