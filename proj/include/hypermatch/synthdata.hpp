#pragma once

#include <cstdint>
#include <map>

#include "hypermatch/core.hpp"
#include "hypermatch/matching.hpp"

namespace hypermatch {

// ============================================================================
// Synthetic matching problems
// ============================================================================

enum class TransformKind { Shear, Rotate, Composite };

/// Generator settings. The geometric transform distorts a unit-square point
/// cloud; descriptor noise controls how ambiguous appearance-only matching
/// becomes; distractors add right-side points with no true correspondent.
struct SynthConfig {
  int n_points = 30;
  TransformKind transform = TransformKind::Shear;
  double shear_factor = 1.0;      // width gain per unit height, in [1, 2]
  double rotate_angle_deg = 0.0;  // about the square's center, in [0, 90]
  double jitter_sigma = 0.0;      // coordinate noise on true correspondents
  int descriptor_dim = 8;
  double descriptor_noise_sigma = 0.0;
  int distractor_count = 0;
  std::uint64_t seed = 0;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

struct SynthPair {
  PointSet left;
  PointSet right;
  std::map<int, int> ground_truth;  // left index -> right index
};

/// The transformed location of `p` under the config's transform: horizontal
/// shear (x, y) -> (x + (factor - 1) y, y), rotation about (0.5, 0.5), or
/// shear followed by rotation for Composite.
Point2 apply_transform(const SynthConfig& config, Point2 p);

/// Generates one ground-truthed pair. Left points are uniform in the unit
/// square with standard-normal descriptors; right points are the
/// transformed lefts plus Gaussian jitter, with noisy copies of the left
/// descriptors; distractors are appended and the right side shuffled.
/// Deterministic per seed; the draw order is points, descriptors, jitter,
/// noise, distractors, shuffle.
SynthPair generate_pair(const SynthConfig& config);

/// Ground-truth labels for a hypergraph's candidate matches: 1 where the
/// candidate agrees with the truth map. Throws DataError when a node's left
/// feature has no truth entry.
Labeling label_candidates(const MatchHypergraph& graph,
                          const std::map<int, int>& ground_truth);

}  // namespace hypermatch
