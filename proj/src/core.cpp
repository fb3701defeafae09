#include "hypermatch/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

namespace hypermatch {

// ============================================================================
// MatchHypergraph
// ============================================================================

int MatchHypergraph::add_node(const CandidateMatch& node) {
  if (node.left_index < 0 || node.right_index < 0)
    throw DataError("candidate match has negative feature index");
  if (!(node.appearance_weight >= 0.0 && node.appearance_weight <= 1.0))
    throw DataError("appearance weight outside [0, 1]");
  if (auto it = left_groups_.find(node.left_index); it != left_groups_.end()) {
    for (int id : it->second) {
      if (nodes_[static_cast<std::size_t>(id)].right_index == node.right_index)
        throw DataError("duplicate (left, right) candidate pair");
    }
  }
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  left_groups_[node.left_index].push_back(id);
  return id;
}

void MatchHypergraph::add_edge(Hyperedge edge) {
  if (edge.node_ids.size() < 2)
    throw DataError("hyperedge needs at least two nodes");
  if (!(edge.weight >= 0.0 && edge.weight <= 1.0))
    throw DataError("hyperedge weight outside [0, 1]");
  std::set<int> distinct;
  for (int id : edge.node_ids) {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
      throw DataError("hyperedge references unknown node id");
    if (!distinct.insert(id).second)
      throw DataError("hyperedge node ids not distinct");
  }
  edges_.push_back(std::move(edge));
}

int MatchHypergraph::distinct_left_count() const {
  return static_cast<int>(left_groups_.size());
}

int MatchHypergraph::distinct_right_count() const {
  std::set<int> rights;
  for (const auto& n : nodes_) rights.insert(n.right_index);
  return static_cast<int>(rights.size());
}

// ============================================================================
// PenaltyModel
// ============================================================================

PenaltyModel::PenaltyModel(PenaltyVariant variant, int k_max)
    : variant_(variant), k_max_(k_max) {
  if (k_max < 2) throw ConfigError("penalty model needs k_max >= 2");
  params_.assign(parameter_count(), 0.0);
}

PenaltyModel PenaltyModel::discrete(int k_max) {
  return PenaltyModel(PenaltyVariant::Discrete, k_max);
}

PenaltyModel PenaltyModel::discrete(std::vector<double> w1,
                                    std::vector<double> w0) {
  if (w1.size() != w0.size() || w1.size() < 3)
    throw ConfigError("discrete tables must share a length of at least 3");
  PenaltyModel m(PenaltyVariant::Discrete, static_cast<int>(w1.size()) - 1);
  for (std::size_t a = 0; a < w0.size(); ++a) {
    m.params_[m.index_of(0, static_cast<int>(a))] = w0[a];
    m.params_[m.index_of(1, static_cast<int>(a))] = w1[a];
  }
  return m;
}

PenaltyModel PenaltyModel::polynomial(int k_max) {
  return PenaltyModel(PenaltyVariant::Polynomial, k_max);
}

PenaltyModel PenaltyModel::polynomial(std::array<double, 3> g1,
                                      std::array<double, 3> g0, int k_max) {
  PenaltyModel m(PenaltyVariant::Polynomial, k_max);
  for (int e = 0; e < 3; ++e) {
    m.params_[m.index_of(0, e)] = g0[static_cast<std::size_t>(e)];
    m.params_[m.index_of(1, e)] = g1[static_cast<std::size_t>(e)];
  }
  return m;
}

int PenaltyModel::terms_per_class() const {
  return variant_ == PenaltyVariant::Discrete ? k_max_ + 1 : 3;
}

int PenaltyModel::index_of(int cls, int term) const {
  if (cls != 0 && cls != 1) throw InvalidLabelError("class must be 0 or 1");
  if (term < 0 || term >= terms_per_class())
    throw ModelSizeError("parameter term out of range for this model");
  return cls * terms_per_class() + term;
}

double PenaltyModel::penalty(int cls, int count) const {
  if (count < 0 || count > k_max_)
    throw ModelSizeError("disagreement count exceeds model k_max");
  if (variant_ == PenaltyVariant::Discrete)
    return params_[static_cast<std::size_t>(index_of(cls, count))];
  const double a = static_cast<double>(count);
  const std::size_t base = static_cast<std::size_t>(cls) * 3;
  return params_[base] + a * params_[base + 1] + 0.5 * a * a * params_[base + 2];
}

std::vector<double> PenaltyModel::normalized_penalties(int cls) const {
  std::vector<double> out(static_cast<std::size_t>(k_max_) + 1);
  const double at_zero = penalty(cls, 0);
  for (int a = 0; a <= k_max_; ++a)
    out[static_cast<std::size_t>(a)] = penalty(cls, a) - at_zero;
  return out;
}

// ============================================================================
// Operations
// ============================================================================

LabelCounts count_labels(std::span<const std::uint8_t> clique_labels) {
  if (clique_labels.empty())
    throw InvalidLabelError("clique labels must be nonempty");
  LabelCounts counts;
  for (std::uint8_t x : clique_labels) {
    if (x == 0)
      ++counts.zeros;
    else if (x == 1)
      ++counts.ones;
    else
      throw InvalidLabelError("label value outside {0, 1}");
  }
  return counts;
}

double clique_cost_from_counts(double weight, int zeros, int ones,
                               const PenaltyModel& model) {
  if (zeros + ones > model.k_max())
    throw ModelSizeError("clique size exceeds model k_max");
  return weight * model.penalty(1, zeros) +
         (1.0 - weight) * model.penalty(0, ones);
}

double clique_cost(const Hyperedge& edge,
                   std::span<const std::uint8_t> clique_labels,
                   const PenaltyModel& model) {
  const LabelCounts counts = count_labels(clique_labels);
  return clique_cost_from_counts(edge.weight, counts.zeros, counts.ones, model);
}

SparseFeatures feature_vector(const Hyperedge& edge,
                              std::span<const std::uint8_t> clique_labels,
                              PenaltyVariant variant) {
  const LabelCounts counts = count_labels(clique_labels);
  const double class_weight[2] = {1.0 - edge.weight, edge.weight};
  const int disagreements[2] = {counts.ones, counts.zeros};

  SparseFeatures features;
  if (variant == PenaltyVariant::Discrete) {
    for (int cls = 1; cls >= 0; --cls) {
      const double value = -class_weight[cls];
      if (value != 0.0) features.push_back({cls, disagreements[cls], value});
    }
    return features;
  }
  for (int cls = 1; cls >= 0; --cls) {
    double power_over_factorial = 1.0;  // d^e / e!
    const double d = static_cast<double>(disagreements[cls]);
    for (int e = 0; e < 3; ++e) {
      const double value = -class_weight[cls] * power_over_factorial;
      if (value != 0.0) features.push_back({cls, e, value});
      power_over_factorial *= d / static_cast<double>(e + 1);
    }
  }
  return features;
}

double total_energy(const MatchHypergraph& graph, const Labeling& labeling,
                    const PenaltyModel& model) {
  if (labeling.size() != graph.node_count())
    throw InvalidLabelError("labeling length does not match node count");
  double energy = 0.0;
  std::vector<std::uint8_t> clique_labels;
  for (const Hyperedge& edge : graph.edges()) {
    clique_labels.clear();
    for (int id : edge.node_ids)
      clique_labels.push_back(labeling[static_cast<std::size_t>(id)]);
    energy += clique_cost(edge, clique_labels, model);
  }
  return energy;
}

}  // namespace hypermatch
