#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypermatch {

// ============================================================================
// Errors
// ============================================================================

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidLabelError : Error { using Error::Error; };
struct ModelSizeError : Error { using Error::Error; };
struct NumericalDomainError : Error { using Error::Error; };
struct SizeLimitError : Error { using Error::Error; };
struct DegenerateDescriptorError : Error { using Error::Error; };
struct DegenerateTriangleError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };

// ============================================================================
// Domain types
// ============================================================================

/// One candidate correspondence between a left and a right feature.
/// A node of the match hypergraph; its binary label (1 = correct match)
/// lives in a Labeling, not here.
struct CandidateMatch {
  int left_index = -1;
  int right_index = -1;
  double appearance_weight = 0.0;  // similarity in [0, 1]
};

/// A weighted subset of candidate matches. `weight` is the likelihood that
/// all member matches are jointly correct, in [0, 1].
struct Hyperedge {
  std::vector<int> node_ids;  // distinct, size >= 2
  double weight = 0.0;
};

/// Per-node binary labels, index-aligned with MatchHypergraph::nodes().
using Labeling = std::vector<std::uint8_t>;

/// Candidate matches plus weighted hyperedges over them. Nodes are grouped
/// by left feature: left_groups()[l] lists the node ids competing for left
/// feature l (the candidate set of l).
class MatchHypergraph {
 public:
  /// Adds a node and returns its id. The (left, right) index pair must be
  /// unique within the graph and the appearance weight must lie in [0, 1].
  int add_node(const CandidateMatch& node);

  /// Adds a validated hyperedge: ids in range and distinct, size >= 2,
  /// weight in [0, 1].
  void add_edge(Hyperedge edge);

  const std::vector<CandidateMatch>& nodes() const { return nodes_; }
  const std::vector<Hyperedge>& edges() const { return edges_; }
  const std::map<int, std::vector<int>>& left_groups() const { return left_groups_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  /// Number of distinct left / right feature indices among the nodes.
  int distinct_left_count() const;
  int distinct_right_count() const;

 private:
  std::vector<CandidateMatch> nodes_;
  std::vector<Hyperedge> edges_;
  std::map<int, std::vector<int>> left_groups_;
};

// ============================================================================
// Penalty models
// ============================================================================

enum class PenaltyVariant { Discrete, Polynomial };

/// Learnable label-disagreement penalties, one function per hypothesis class
/// c in {0, 1}. Two parametric forms:
///
///   Discrete:    G_c(a) = w[c][a], one table entry per disagreement count
///                a = 0..k_max.
///   Polynomial:  G_c(a) = g[c][0] + a g[c][1] + (a^2 / 2) g[c][2],
///                a second-order expansion around zero disagreements.
///
/// Class balancing constants are folded into the parameters; the products
/// are what the likelihood identifies. Parameters are stored in one flat
/// vector (class-0 block first) so the learner can treat any model as a
/// generic log-linear weight vector. Adding a constant to one class's table
/// leaves the induced distribution unchanged (gauge freedom); use
/// normalized_penalties() for display and shape comparisons.
class PenaltyModel {
 public:
  /// Zero-initialized discrete model (uniform distribution).
  static PenaltyModel discrete(int k_max);
  /// Discrete model from explicit tables, each of length k_max + 1.
  static PenaltyModel discrete(std::vector<double> w1, std::vector<double> w0);
  /// Zero-initialized polynomial model.
  static PenaltyModel polynomial(int k_max);
  /// Polynomial model from per-class coefficients (order 0, 1, 2).
  static PenaltyModel polynomial(std::array<double, 3> g1,
                                 std::array<double, 3> g0, int k_max);

  PenaltyVariant variant() const { return variant_; }
  int k_max() const { return k_max_; }

  /// Parameters per class: k_max + 1 (discrete) or 3 (polynomial).
  int terms_per_class() const;
  std::size_t parameter_count() const { return 2 * static_cast<std::size_t>(terms_per_class()); }

  /// Flat index of parameter (cls, term). `term` is the disagreement count
  /// for the discrete form and the expansion order for the polynomial form.
  int index_of(int cls, int term) const;

  /// G_c(count): penalty charged when `count` member labels disagree with
  /// hypothesis `cls`. `count` must not exceed k_max.
  double penalty(int cls, int count) const;

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  /// Penalty table over counts 0..k_max, shifted so the zero-disagreement
  /// entry is zero. Gauge representative used for display and shape checks.
  std::vector<double> normalized_penalties(int cls) const;

 private:
  PenaltyModel(PenaltyVariant variant, int k_max);

  PenaltyVariant variant_;
  int k_max_;
  std::vector<double> params_;
};

// ============================================================================
// Operations
// ============================================================================

struct LabelCounts {
  int zeros = 0;  // members labeled 0
  int ones = 0;   // members labeled 1
};

/// Counts 0- and 1-labels in one clique. Throws InvalidLabelError on values
/// outside {0, 1}.
LabelCounts count_labels(std::span<const std::uint8_t> clique_labels);

/// Clique cost as a function of counts alone:
///   weight * G_1(zeros) + (1 - weight) * G_0(ones).
/// This is the quantity every labeling-dependent cost reduces to.
double clique_cost_from_counts(double weight, int zeros, int ones,
                               const PenaltyModel& model);

/// Cost of assigning `clique_labels` to the members of `edge`. High weight
/// penalizes 0-labels, low weight penalizes 1-labels. The probabilistic
/// exponent is the negation of this cost.
double clique_cost(const Hyperedge& edge,
                   std::span<const std::uint8_t> clique_labels,
                   const PenaltyModel& model);

/// One sparse feature entry keyed by (class, term); see PenaltyModel for the
/// meaning of `term` under each variant.
struct FeatureEntry {
  int cls = 0;
  int term = 0;
  double value = 0.0;
};

using SparseFeatures = std::vector<FeatureEntry>;

/// Log-linear features of one clique labeling. The dot product of these
/// entries with the aligned parameters equals minus the clique cost.
/// Zero-valued entries are omitted.
///
/// Discrete: at most two entries, (c=1, zeros) -> -weight and
/// (c=0, ones) -> -(1 - weight). Polynomial: up to six entries,
/// (c, e) -> -weight_c * disagreements^e / e!.
SparseFeatures feature_vector(const Hyperedge& edge,
                              std::span<const std::uint8_t> clique_labels,
                              PenaltyVariant variant);

/// Total labeling cost: sum of clique costs over all hyperedges.
double total_energy(const MatchHypergraph& graph, const Labeling& labeling,
                    const PenaltyModel& model);

}  // namespace hypermatch
