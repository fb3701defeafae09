#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hypermatch/core.hpp"
#include "hypermatch/inference.hpp"
#include "hypermatch/learning.hpp"
#include "hypermatch/matching.hpp"
#include "hypermatch/synthdata.hpp"

namespace hypermatch::io {

/// Shortest decimal form that round-trips the value exactly.
std::string fmt_double(double v);

// ============================================================================
// JSON checkpoints
// ============================================================================

/// {"variant": "discrete"|"polynomial", "k_max": int, "parameters": [...]}
/// with parameters flat in PenaltyModel order (class-0 block first).
void save_model(const PenaltyModel& model, const std::filesystem::path& path);
PenaltyModel load_model(const std::filesystem::path& path);

/// {"points": [[x, y], ...], "descriptors": [[...], ...]} with the
/// descriptor field omitted when the set carries none.
void save_point_set(const PointSet& set, const std::filesystem::path& path);
PointSet load_point_set(const std::filesystem::path& path);

// ============================================================================
// CSV files
// ============================================================================

/// Header left_index,right_index.
void save_truth_csv(const std::map<int, int>& truth,
                    const std::filesystem::path& path);
std::map<int, int> load_truth_csv(const std::filesystem::path& path);

/// Header left_index,right_index,score with an is_correct column appended
/// when ground truth is supplied.
void save_assignment_csv(const MatchAssignment& assignment,
                         const std::filesystem::path& path,
                         const std::map<int, int>* truth = nullptr);
MatchAssignment load_assignment_csv(const std::filesystem::path& path);

/// Header iteration,objective,grad_max_norm,step_size,bp_nonconverged_count.
void save_training_log_csv(std::span<const TrainLogRow> rows,
                           const std::filesystem::path& path);

/// Header iteration,max_residual,bethe_log_z.
void save_trace_csv(std::span<const TraceRow> rows,
                    const std::filesystem::path& path);

struct MetricsRow {
  std::string pair;
  PairMetrics metrics;
};

/// Header pair,n_truth_available,n_correct,n_incorrect,pct_incorrect; data
/// rows in the given order, then mean and std rows (sample std, n-1
/// denominator, 0 for fewer than two rows).
void save_metrics_csv(std::span<const MetricsRow> rows,
                      const std::filesystem::path& path);

struct CompareRow {
  std::string pair;
  std::string method;
  PairMetrics metrics;
};

/// Header pair,method,n_truth_available,n_correct,n_incorrect,pct_incorrect;
/// data rows in the given order, then per-method mean and std rows.
void save_compare_csv(std::span<const CompareRow> rows,
                      const std::filesystem::path& path);

// ============================================================================
// Dataset bundles
// ============================================================================

/// Directory layout: config.json plus, per pair i,
/// pair_NNN.left.json / pair_NNN.right.json / pair_NNN.truth.csv
/// (NNN zero-padded). config.json records one generator config per pair.
void save_bundle(const std::filesystem::path& dir,
                 std::span<const SynthPair> pairs,
                 std::span<const SynthConfig> configs);

struct Bundle {
  std::vector<SynthPair> pairs;
  std::vector<SynthConfig> configs;  // empty when config.json is absent
};

Bundle load_bundle(const std::filesystem::path& dir);

}  // namespace hypermatch::io
