#include "hypermatch/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace hypermatch {

void SynthConfig::validate() const {
  if (n_points < 1) throw ConfigError("n_points must be positive");
  if (shear_factor < 1.0 || shear_factor > 2.0)
    throw ConfigError("shear factor must lie in [1, 2]");
  if (rotate_angle_deg < 0.0 || rotate_angle_deg > 90.0)
    throw ConfigError("rotation angle must lie in [0, 90] degrees");
  if (jitter_sigma < 0.0) throw ConfigError("jitter sigma must be nonnegative");
  if (descriptor_noise_sigma < 0.0)
    throw ConfigError("descriptor noise sigma must be nonnegative");
  if (descriptor_dim < 1) throw ConfigError("descriptor dimension must be positive");
  if (distractor_count < 0)
    throw ConfigError("distractor count must be nonnegative");
}

Point2 apply_transform(const SynthConfig& config, Point2 p) {
  Point2 q = p;
  if (config.transform != TransformKind::Rotate)
    q.x += (config.shear_factor - 1.0) * q.y;
  if (config.transform != TransformKind::Shear) {
    const double rad = config.rotate_angle_deg * std::numbers::pi / 180.0;
    const double cx = q.x - 0.5, cy = q.y - 0.5;
    q.x = 0.5 + std::cos(rad) * cx - std::sin(rad) * cy;
    q.y = 0.5 + std::sin(rad) * cx + std::cos(rad) * cy;
  }
  return q;
}

SynthPair generate_pair(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> coord(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t n = static_cast<std::size_t>(config.n_points);
  const std::size_t dim = static_cast<std::size_t>(config.descriptor_dim);

  SynthPair pair;
  pair.left.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = coord(rng);
    pair.left.points.push_back({x, coord(rng)});
  }
  pair.left.descriptors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    pair.left.descriptors[i].reserve(dim);
    for (std::size_t d = 0; d < dim; ++d)
      pair.left.descriptors[i].push_back(gauss(rng));
  }

  // True correspondents in left order, then distractors; shuffled below.
  std::vector<Point2> staged_points;
  std::vector<std::vector<double>> staged_descriptors;
  for (std::size_t i = 0; i < n; ++i) {
    Point2 q = apply_transform(config, pair.left.points[i]);
    const double jx = gauss(rng);
    const double jy = gauss(rng);
    q.x += config.jitter_sigma * jx;
    q.y += config.jitter_sigma * jy;
    staged_points.push_back(q);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> desc = pair.left.descriptors[i];
    for (double& v : desc) v += config.descriptor_noise_sigma * gauss(rng);
    staged_descriptors.push_back(std::move(desc));
  }
  for (int j = 0; j < config.distractor_count; ++j) {
    const double x = coord(rng);
    staged_points.push_back({x, coord(rng)});
    std::vector<double> desc(dim);
    for (double& v : desc) v = gauss(rng);
    staged_descriptors.push_back(std::move(desc));
  }

  std::vector<std::size_t> source(staged_points.size());
  std::iota(source.begin(), source.end(), std::size_t{0});
  std::shuffle(source.begin(), source.end(), rng);

  pair.right.points.resize(staged_points.size());
  pair.right.descriptors.resize(staged_points.size());
  for (std::size_t pos = 0; pos < source.size(); ++pos) {
    pair.right.points[pos] = staged_points[source[pos]];
    pair.right.descriptors[pos] = std::move(staged_descriptors[source[pos]]);
    if (source[pos] < n)
      pair.ground_truth[static_cast<int>(source[pos])] = static_cast<int>(pos);
  }
  return pair;
}

Labeling label_candidates(const MatchHypergraph& graph,
                          const std::map<int, int>& ground_truth) {
  Labeling labels;
  labels.reserve(graph.node_count());
  for (const CandidateMatch& node : graph.nodes()) {
    const auto it = ground_truth.find(node.left_index);
    if (it == ground_truth.end())
      throw DataError("candidate's left feature has no ground-truth entry");
    labels.push_back(it->second == node.right_index ? std::uint8_t{1}
                                                    : std::uint8_t{0});
  }
  return labels;
}

}  // namespace hypermatch
