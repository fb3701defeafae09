#include "hypermatch/inference.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <set>

namespace hypermatch {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

std::array<double, 2> max_normalized(std::array<double, 2> log_pair) {
  const double hi = std::max(log_pair[0], log_pair[1]);
  return {log_pair[0] - hi, log_pair[1] - hi};
}

// Stable conversion of a log pair to probabilities summing to one.
std::array<double, 2> to_probabilities(const std::array<double, 2>& log_pair) {
  const double hi = std::max(log_pair[0], log_pair[1]);
  const double e0 = std::exp(log_pair[0] - hi);
  const double e1 = std::exp(log_pair[1] - hi);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

// Count-generating coefficients of the messages in `in_logs`, skipping
// position `skip` (pass -1 to include all). coeffs[t] accumulates, in log
// space, the total weight of joint assignments where exactly t of the
// included variables carry label 0.
void count_convolution(std::span<const std::array<double, 2>> in_logs, int skip,
                       std::vector<double>& coeffs) {
  coeffs.assign(in_logs.size() + 1, kNegInf);
  coeffs[0] = 0.0;
  int used = 0;
  for (int q = 0; q < static_cast<int>(in_logs.size()); ++q) {
    if (q == skip) continue;
    const double pick_one = in_logs[static_cast<std::size_t>(q)][1];
    const double pick_zero = in_logs[static_cast<std::size_t>(q)][0];
    for (int t = used + 1; t >= 1; --t) {
      const double keep = t <= used ? coeffs[static_cast<std::size_t>(t)] + pick_one : kNegInf;
      coeffs[static_cast<std::size_t>(t)] =
          log_add_exp(keep, coeffs[static_cast<std::size_t>(t - 1)] + pick_zero);
    }
    coeffs[0] += pick_one;
    ++used;
  }
  coeffs.resize(static_cast<std::size_t>(used) + 1);
}

// Log-domain kernel message: the defining sum over the other members'
// labelings, folded by zero-count.
std::array<double, 2> kernel_message(const Factor& factor, int position,
                                     std::span<const std::array<double, 2>> in_logs,
                                     std::vector<double>& scratch) {
  count_convolution(in_logs, position, scratch);
  const auto& table = factor.log_count_table;
  double out_one = kNegInf;
  double out_zero = kNegInf;
  for (std::size_t t = 0; t < scratch.size(); ++t) {
    out_one = log_add_exp(out_one, table[t] + scratch[t]);
    out_zero = log_add_exp(out_zero, table[t + 1] + scratch[t]);
  }
  return {out_zero, out_one};
}

}  // namespace

// ============================================================================
// FactorGraph
// ============================================================================

FactorGraph::FactorGraph(int variable_count) : variable_count_(variable_count) {
  if (variable_count < 0) throw ConfigError("negative variable count");
  factors_of_.resize(static_cast<std::size_t>(variable_count));
}

void FactorGraph::add_factor(std::vector<int> members,
                             std::vector<double> log_count_table) {
  if (members.empty()) throw ConfigError("factor needs at least one member");
  if (log_count_table.size() != members.size() + 1)
    throw ConfigError("count table length must be member count + 1");
  for (double v : log_count_table) {
    if (!std::isfinite(v))
      throw NumericalDomainError("factor table entries must be positive and finite");
  }
  std::set<int> distinct;
  for (int v : members) {
    if (v < 0 || v >= variable_count_)
      throw ConfigError("factor member out of range");
    if (!distinct.insert(v).second)
      throw ConfigError("factor members must be distinct");
  }
  const int id = static_cast<int>(factors_.size());
  for (int v : members) factors_of_[static_cast<std::size_t>(v)].push_back(id);
  factors_.push_back({std::move(members), std::move(log_count_table)});
}

FactorGraph build_factor_graph(const MatchHypergraph& graph,
                               const PenaltyModel& model) {
  FactorGraph fg(static_cast<int>(graph.node_count()));
  for (const Hyperedge& edge : graph.edges()) {
    const int k = static_cast<int>(edge.node_ids.size());
    if (k > model.k_max())
      throw ModelSizeError("hyperedge size exceeds model k_max");
    std::vector<double> table(static_cast<std::size_t>(k) + 1);
    for (int zeros = 0; zeros <= k; ++zeros)
      table[static_cast<std::size_t>(zeros)] =
          -clique_cost_from_counts(edge.weight, zeros, k - zeros, model);
    fg.add_factor(edge.node_ids, std::move(table));
  }
  return fg;
}

// ============================================================================
// Messages
// ============================================================================

FactorMessage factor_to_variable_message(
    const Factor& factor, int position,
    std::span<const std::array<double, 2>> incoming) {
  const int k = static_cast<int>(factor.members.size());
  if (position < 0 || position >= k)
    throw ConfigError("message position out of range");
  if (incoming.size() != static_cast<std::size_t>(k) - 1)
    throw ConfigError("expected one incoming message per other member");

  // Splice the incoming messages into member order, in log space.
  std::vector<std::array<double, 2>> in_logs(static_cast<std::size_t>(k),
                                             {0.0, 0.0});
  int next = 0;
  for (int q = 0; q < k; ++q) {
    if (q == position) continue;
    const auto& m = incoming[static_cast<std::size_t>(next++)];
    for (int x = 0; x < 2; ++x) {
      if (!(m[static_cast<std::size_t>(x)] > 0.0) ||
          !std::isfinite(m[static_cast<std::size_t>(x)]))
        throw NumericalDomainError("incoming messages must be positive and finite");
      in_logs[static_cast<std::size_t>(q)][static_cast<std::size_t>(x)] =
          std::log(m[static_cast<std::size_t>(x)]);
    }
  }

  std::vector<double> scratch;
  const std::array<double, 2> log_msg =
      kernel_message(factor, position, in_logs, scratch);
  return {log_msg, to_probabilities(log_msg)};
}

// ============================================================================
// SumProductEngine
// ============================================================================

SumProductEngine::SumProductEngine(const FactorGraph& fg) : fg_(&fg) {
  offsets_.reserve(fg.factors().size() + 1);
  int slots = 0;
  for (const Factor& f : fg.factors()) {
    offsets_.push_back(slots);
    slots += static_cast<int>(f.members.size());
  }
  offsets_.push_back(slots);
  to_factor_log_.assign(static_cast<std::size_t>(slots), {0.0, 0.0});
  to_variable_log_.assign(static_cast<std::size_t>(slots), {0.0, 0.0});
}

void SumProductEngine::refresh_variable_messages() {
  const auto& factors = fg_->factors();
  std::vector<std::array<double, 2>> totals(
      static_cast<std::size_t>(fg_->variable_count()), {0.0, 0.0});
  for (std::size_t f = 0; f < factors.size(); ++f) {
    for (std::size_t p = 0; p < factors[f].members.size(); ++p) {
      const std::size_t slot = static_cast<std::size_t>(offsets_[f]) + p;
      const auto v = static_cast<std::size_t>(factors[f].members[p]);
      totals[v][0] += to_variable_log_[slot][0];
      totals[v][1] += to_variable_log_[slot][1];
    }
  }
  for (std::size_t f = 0; f < factors.size(); ++f) {
    for (std::size_t p = 0; p < factors[f].members.size(); ++p) {
      const std::size_t slot = static_cast<std::size_t>(offsets_[f]) + p;
      const auto v = static_cast<std::size_t>(factors[f].members[p]);
      to_factor_log_[slot] = max_normalized(
          {totals[v][0] - to_variable_log_[slot][0],
           totals[v][1] - to_variable_log_[slot][1]});
    }
  }
}

double SumProductEngine::iterate(double damping) {
  if (!(damping >= 0.0 && damping < 1.0))
    throw ConfigError("damping must lie in [0, 1)");
  refresh_variable_messages();

  const auto& factors = fg_->factors();
  double residual = 0.0;
  std::vector<double> scratch;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    const Factor& factor = factors[f];
    const int k = static_cast<int>(factor.members.size());
    const std::span<const std::array<double, 2>> in_logs(
        to_factor_log_.data() + offsets_[f], static_cast<std::size_t>(k));
    for (int p = 0; p < k; ++p) {
      const std::size_t slot =
          static_cast<std::size_t>(offsets_[f]) + static_cast<std::size_t>(p);
      const std::array<double, 2> fresh =
          max_normalized(kernel_message(factor, p, in_logs, scratch));
      const std::array<double, 2> old_prob = to_probabilities(to_variable_log_[slot]);
      const std::array<double, 2> new_prob = to_probabilities(fresh);
      residual = std::max(residual, std::abs(new_prob[0] - old_prob[0]));
      residual = std::max(residual, std::abs(new_prob[1] - old_prob[1]));
      to_variable_log_[slot] = max_normalized(
          {damping * to_variable_log_[slot][0] + (1.0 - damping) * fresh[0],
           damping * to_variable_log_[slot][1] + (1.0 - damping) * fresh[1]});
    }
  }
  return residual;
}

BeliefState SumProductEngine::snapshot() const {
  const auto& factors = fg_->factors();
  BeliefState state;

  // Node beliefs: product of incoming factor messages; isolated variables
  // fall out uniform.
  std::vector<std::array<double, 2>> totals(
      static_cast<std::size_t>(fg_->variable_count()), {0.0, 0.0});
  for (std::size_t f = 0; f < factors.size(); ++f) {
    for (std::size_t p = 0; p < factors[f].members.size(); ++p) {
      const std::size_t slot = static_cast<std::size_t>(offsets_[f]) + p;
      const auto v = static_cast<std::size_t>(factors[f].members[p]);
      totals[v][0] += to_variable_log_[slot][0];
      totals[v][1] += to_variable_log_[slot][1];
    }
  }
  state.node_beliefs.reserve(totals.size());
  for (const auto& t : totals) state.node_beliefs.push_back(to_probabilities(t));

  // Variable-to-factor messages consistent with the current factor messages.
  state.factor_inputs.resize(factors.size());
  for (std::size_t f = 0; f < factors.size(); ++f) {
    auto& inputs = state.factor_inputs[f];
    inputs.resize(factors[f].members.size());
    for (std::size_t p = 0; p < factors[f].members.size(); ++p) {
      const std::size_t slot = static_cast<std::size_t>(offsets_[f]) + p;
      const auto v = static_cast<std::size_t>(factors[f].members[p]);
      inputs[p] = max_normalized({totals[v][0] - to_variable_log_[slot][0],
                                  totals[v][1] - to_variable_log_[slot][1]});
    }
  }

  // Count marginals from the factor beliefs, folded by one-count via the
  // same convolution the messages use.
  state.clique_count_marginals.resize(factors.size());
  std::vector<double> coeffs;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    const Factor& factor = factors[f];
    const int k = static_cast<int>(factor.members.size());
    count_convolution(state.factor_inputs[f], -1, coeffs);
    std::vector<double> log_by_zeros(static_cast<std::size_t>(k) + 1);
    double lse = kNegInf;
    for (int zeros = 0; zeros <= k; ++zeros) {
      log_by_zeros[static_cast<std::size_t>(zeros)] =
          factor.log_count_table[static_cast<std::size_t>(zeros)] +
          coeffs[static_cast<std::size_t>(zeros)];
      lse = log_add_exp(lse, log_by_zeros[static_cast<std::size_t>(zeros)]);
    }
    auto& marginal = state.clique_count_marginals[f];
    marginal.resize(static_cast<std::size_t>(k) + 1);
    for (int ones = 0; ones <= k; ++ones)
      marginal[static_cast<std::size_t>(ones)] =
          std::exp(log_by_zeros[static_cast<std::size_t>(k - ones)] - lse);
  }
  return state;
}

// ============================================================================
// Drivers
// ============================================================================

BeliefState run_sum_product(const FactorGraph& fg, const BpOptions& opts) {
  if (opts.tolerance <= 0.0) throw ConfigError("tolerance must be positive");
  if (!(opts.damping >= 0.0 && opts.damping < 1.0))
    throw ConfigError("damping must lie in [0, 1)");

  SumProductEngine engine(fg);
  std::vector<TraceRow> trace;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    residual = engine.iterate(opts.damping);
    iterations = iter;
    if (opts.collect_trace) {
      BeliefState probe = engine.snapshot();
      double bethe = std::numeric_limits<double>::quiet_NaN();
      try {
        bethe = bethe_log_z(fg, probe);
      } catch (const NumericalDomainError&) {
        // Saturated beliefs leave the trace entry undefined; the run itself
        // must not fail.
      }
      trace.push_back({iter, residual, bethe});
    }
    if (residual < opts.tolerance) {
      converged = true;
      break;
    }
  }

  BeliefState state = engine.snapshot();
  state.converged = converged;
  state.iterations = iterations;
  state.max_residual = residual;
  state.trace = std::move(trace);
  return state;
}

BeliefState exact_marginals(const FactorGraph& fg) {
  const int n = fg.variable_count();
  if (n > 20) throw SizeLimitError("exact enumeration limited to 20 variables");

  const auto& factors = fg.factors();
  std::vector<std::uint32_t> member_masks(factors.size(), 0);
  for (std::size_t f = 0; f < factors.size(); ++f)
    for (int v : factors[f].members)
      member_masks[f] |= (std::uint32_t{1} << v);

  const std::uint64_t total = std::uint64_t{1} << n;
  const auto log_weight = [&](std::uint64_t mask) {
    double lw = 0.0;
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const int k = static_cast<int>(factors[f].members.size());
      const int ones = std::popcount(static_cast<std::uint32_t>(mask) & member_masks[f]);
      lw += factors[f].log_count_table[static_cast<std::size_t>(k - ones)];
    }
    return lw;
  };

  double max_log = kNegInf;
  for (std::uint64_t mask = 0; mask < total; ++mask)
    max_log = std::max(max_log, log_weight(mask));

  BeliefState state;
  state.clique_count_marginals.resize(factors.size());
  for (std::size_t f = 0; f < factors.size(); ++f)
    state.clique_count_marginals[f].assign(factors[f].members.size() + 1, 0.0);

  double z = 0.0;
  std::vector<double> mass_one(static_cast<std::size_t>(n), 0.0);
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    const double w = std::exp(log_weight(mask) - max_log);
    z += w;
    for (int v = 0; v < n; ++v)
      if (mask & (std::uint64_t{1} << v)) mass_one[static_cast<std::size_t>(v)] += w;
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const int ones = std::popcount(static_cast<std::uint32_t>(mask) & member_masks[f]);
      state.clique_count_marginals[f][static_cast<std::size_t>(ones)] += w;
    }
  }

  state.node_beliefs.resize(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    const double p1 = mass_one[static_cast<std::size_t>(v)] / z;
    state.node_beliefs[static_cast<std::size_t>(v)] = {1.0 - p1, p1};
  }
  for (auto& marginal : state.clique_count_marginals)
    for (double& m : marginal) m /= z;

  state.converged = true;
  state.iterations = 0;
  state.max_residual = 0.0;
  state.log_z = max_log + std::log(z);
  return state;
}

double bethe_log_z(const FactorGraph& fg, const BeliefState& beliefs) {
  const auto& factors = fg.factors();
  if (beliefs.node_beliefs.size() != static_cast<std::size_t>(fg.variable_count()) ||
      beliefs.factor_inputs.size() != factors.size())
    throw ConfigError("belief state does not match this factor graph");
  for (const auto& b : beliefs.node_beliefs)
    if (!(b[0] > 0.0 && b[1] > 0.0))
      throw NumericalDomainError("zero belief encountered in Bethe evaluation");

  // Factor terms: sum over configurations of b_f * (log f - log b_f), with
  // b_f reconstructed from the stored variable-to-factor messages.
  double factor_term = 0.0;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    const Factor& factor = factors[f];
    const int k = static_cast<int>(factor.members.size());
    if (k > 25) throw SizeLimitError("factor too large for Bethe enumeration");
    const auto& inputs = beliefs.factor_inputs[f];
    if (inputs.size() != static_cast<std::size_t>(k))
      throw ConfigError("factor inputs do not match member count");

    const std::uint32_t total = std::uint32_t{1} << k;
    std::vector<double> log_unnorm(total);
    double lse = kNegInf;
    for (std::uint32_t mask = 0; mask < total; ++mask) {
      const int ones = std::popcount(mask);
      double lu = factor.log_count_table[static_cast<std::size_t>(k - ones)];
      for (int p = 0; p < k; ++p)
        lu += inputs[static_cast<std::size_t>(p)]
                    [(mask >> p) & 1u];
      log_unnorm[mask] = lu;
      lse = log_add_exp(lse, lu);
    }
    for (std::uint32_t mask = 0; mask < total; ++mask) {
      const int ones = std::popcount(mask);
      const double log_b = log_unnorm[mask] - lse;
      const double b = std::exp(log_b);
      if (b > 0.0)
        factor_term +=
            b * (factor.log_count_table[static_cast<std::size_t>(k - ones)] - log_b);
    }
  }

  double node_term = 0.0;
  for (int v = 0; v < fg.variable_count(); ++v) {
    const double degree =
        static_cast<double>(fg.factors_of()[static_cast<std::size_t>(v)].size());
    const auto& b = beliefs.node_beliefs[static_cast<std::size_t>(v)];
    node_term += (degree - 1.0) * (b[0] * std::log(b[0]) + b[1] * std::log(b[1]));
  }
  return factor_term + node_term;
}

}  // namespace hypermatch
