#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "hypermatch/core.hpp"

namespace hypermatch {

// ============================================================================
// Factor graphs with count-symmetric factors
// ============================================================================

/// A factor over binary variables whose value depends on the member labels
/// only through how many are zero. The table stores log f(zeros) for
/// zeros = 0..k, so exp(table) is strictly positive by construction.
struct Factor {
  std::vector<int> members;            // distinct variable ids
  std::vector<double> log_count_table; // length members.size() + 1
};

class FactorGraph {
 public:
  explicit FactorGraph(int variable_count);

  /// Adds a factor; members must be distinct valid ids and the table must
  /// have one finite entry per possible zero-count.
  void add_factor(std::vector<int> members, std::vector<double> log_count_table);

  int variable_count() const { return variable_count_; }
  const std::vector<Factor>& factors() const { return factors_; }

  /// Factor indices incident to each variable.
  const std::vector<std::vector<int>>& factors_of() const { return factors_of_; }

 private:
  int variable_count_ = 0;
  std::vector<Factor> factors_;
  std::vector<std::vector<int>> factors_of_;
};

/// One factor per hyperedge, in edge order; the factor table for zero-count
/// t is exp(-clique cost with t zeros). Throws ModelSizeError if any clique
/// exceeds the model's k_max.
FactorGraph build_factor_graph(const MatchHypergraph& graph,
                               const PenaltyModel& model);

// ============================================================================
// Beliefs
// ============================================================================

struct TraceRow {
  int iteration = 0;
  double max_residual = 0.0;
  double bethe_log_z = 0.0;
};

/// Approximate (or exact) marginals of a factor graph. Node beliefs are
/// (b(0), b(1)) pairs summing to one; clique_count_marginals[f][s] is the
/// probability that exactly s members of factor f carry label 1.
///
/// factor_inputs holds the final variable-to-factor log messages, aligned
/// with each factor's member list; they reconstruct the factor beliefs that
/// the Bethe approximation needs. Exact enumeration leaves them empty and
/// sets log_z instead.
struct BeliefState {
  std::vector<std::array<double, 2>> node_beliefs;
  std::vector<std::vector<double>> clique_count_marginals;
  std::vector<std::vector<std::array<double, 2>>> factor_inputs;
  bool converged = false;
  int iterations = 0;
  double max_residual = 0.0;
  std::optional<double> log_z;
  std::vector<TraceRow> trace;
};

struct BpOptions {
  int max_iters = 200;
  double tolerance = 1e-6;
  double damping = 0.5;       // in [0, 1); geometric damping of log messages
  bool collect_trace = false; // record per-iteration residual and Bethe log Z
};

// ============================================================================
// Sum-product
// ============================================================================

/// Result of one factor-to-variable message. `normalized` sums to one;
/// log_unnormalized preserves the scale of the defining sum.
struct FactorMessage {
  std::array<double, 2> log_unnormalized{};
  std::array<double, 2> normalized{};
};

/// Message from `factor` to the member at `position`, given positive
/// incoming messages from the other members (in member order, skipping
/// `position`). Computed in O(k^2) by convolving the incoming messages'
/// count-generating coefficients instead of enumerating the 2^(k-1)
/// labelings of the other members. Throws NumericalDomainError on
/// nonpositive or nonfinite incoming values.
FactorMessage factor_to_variable_message(
    const Factor& factor, int position,
    std::span<const std::array<double, 2>> incoming);

/// Synchronous (flooding) sum-product engine. Messages are stored in the
/// log domain, max-normalized, so factor tables spanning hundreds of nats
/// do not underflow. Exposed as a class so callers can warm-start, step
/// manually, and inspect intermediate beliefs; run_sum_product covers the
/// common case.
class SumProductEngine {
 public:
  explicit SumProductEngine(const FactorGraph& fg);

  /// One flooding pass: refresh variable-to-factor messages, then compute
  /// all factor-to-variable messages from that snapshot. Returns the
  /// maximum absolute change of any normalized message component measured
  /// before damping is applied.
  double iterate(double damping);

  /// Beliefs and count marginals from the current messages.
  BeliefState snapshot() const;

  const FactorGraph& graph() const { return *fg_; }

 private:
  void refresh_variable_messages();

  const FactorGraph* fg_;
  std::vector<int> offsets_;                          // factor -> first slot
  std::vector<std::array<double, 2>> to_factor_log_;  // per slot
  std::vector<std::array<double, 2>> to_variable_log_;
};

/// Runs flooding sum-product until the message residual drops below
/// opts.tolerance or opts.max_iters passes elapse. Non-convergence is
/// reported in the returned state, never thrown.
BeliefState run_sum_product(const FactorGraph& fg, const BpOptions& opts = {});

/// Exact node and count marginals plus exact log Z by enumerating all 2^n
/// labelings. Limited to 20 variables.
BeliefState exact_marginals(const FactorGraph& fg);

/// Bethe free-energy approximation of log Z from a converged sum-product
/// state; exact when the factor graph is a tree. Requires the state's
/// factor_inputs (i.e. beliefs produced by run_sum_product on `fg`).
double bethe_log_z(const FactorGraph& fg, const BeliefState& beliefs);

}  // namespace hypermatch
