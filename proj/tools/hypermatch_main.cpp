// Command-line driver: generate synthetic datasets, train penalty models,
// run matchers, and score the results against ground truth. All interfaces
// are file-based so experiments stay reproducible and scriptable.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hypermatch/baselines.hpp"
#include "hypermatch/io.hpp"
#include "hypermatch/learning.hpp"
#include "hypermatch/matching.hpp"
#include "hypermatch/synthdata.hpp"

namespace {

using namespace hypermatch;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

std::string pair_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "pair_%03zu", index);
  return buf;
}

// ============================================================================
// Shared option blocks
// ============================================================================

struct MatchOptions {
  std::string method = "learned";
  std::string model_path;
  MatchParams params;
  SpectralParams spectral;
};

void add_match_options(CLI::App* cmd, MatchOptions* opts) {
  cmd->add_option("--method", opts->method, "learned|linear|greedy|spectral")
      ->check(CLI::IsMember({"learned", "linear", "greedy", "spectral"}))
      ->capture_default_str();
  cmd->add_option("--model", opts->model_path, "penalty model JSON (learned method)");
  cmd->add_option("--m", opts->params.m, "candidates per left feature")
      ->capture_default_str();
  cmd->add_option("--knn", opts->params.knn, "neighbors per left feature")
      ->capture_default_str();
  cmd->add_option("--delta", opts->params.delta, "angle dissimilarity cutoff")
      ->capture_default_str();
  cmd->add_flag("--one-to-one", opts->params.one_to_one,
                "greedy injective post-processing");
  cmd->add_option("--bp-max-iters", opts->params.bp.max_iters, "sum-product passes")
      ->capture_default_str();
  cmd->add_option("--bp-tol", opts->params.bp.tolerance, "message residual target")
      ->capture_default_str();
  cmd->add_option("--bp-damping", opts->params.bp.damping, "message damping in [0,1)")
      ->capture_default_str();
}

// Keep the spectral candidate budget in step with --m unless the caller
// overrides it; other spectral knobs stay at their defaults.
void finalize_match_options(MatchOptions* opts) {
  opts->spectral.m = opts->params.m;
}

MatchAssignment run_method(const MatchOptions& opts, const SynthPair& pair,
                           const std::optional<PenaltyModel>& model,
                           BeliefState* beliefs_out) {
  if (opts.method == "greedy") return greedy_appearance(pair.left, pair.right);
  if (opts.method == "spectral")
    return spectral_match(pair.left, pair.right, opts.spectral).assignment;
  const PenaltyModel active =
      opts.method == "learned" ? *model : linear_penalty_model(3);
  PipelineResult result = match_pipeline(pair.left, pair.right, active, opts.params);
  if (beliefs_out) *beliefs_out = std::move(result.beliefs);
  return std::move(result.assignment);
}

std::optional<PenaltyModel> load_method_model(const MatchOptions& opts) {
  if (opts.method != "learned") return std::nullopt;
  if (opts.model_path.empty())
    throw ConfigError("--method learned requires --model");
  return io::load_model(opts.model_path);
}

// ============================================================================
// Subcommands
// ============================================================================

struct GenerateArgs {
  std::string out;
  int pairs = 5;
  SynthConfig base;
  std::string transform = "shear";
};

struct TrainArgs {
  std::string dataset;
  std::string out;
  std::string log_path;
  std::string variant = "discrete";
  TrainConfig config;
  MatchParams params;
};

int run_train(const TrainArgs& args) {
  const io::Bundle bundle = io::load_bundle(args.dataset);
  std::vector<TrainingInstance> instances;
  for (const SynthPair& pair : bundle.pairs) {
    if (pair.ground_truth.empty())
      throw ConfigError("training dataset has pairs without ground truth");
    BuildResult built = build_match_hypergraph(pair.left, pair.right, args.params);
    Labeling truth = label_candidates(built.graph, pair.ground_truth);
    instances.push_back({std::move(built.graph), std::move(truth)});
  }

  TrainConfig config = args.config;
  config.variant = args.variant == "polynomial" ? PenaltyVariant::Polynomial
                                                : PenaltyVariant::Discrete;
  const TrainResult result = train(instances, config);
  io::save_model(result.model, args.out);
  const fs::path log_path = args.log_path.empty()
                                ? fs::path(args.out).replace_extension(".log.csv")
                                : fs::path(args.log_path);
  io::save_training_log_csv(result.log, log_path);

  const TrainLogRow& last = result.log.back();
  std::printf("trained %s model on %zu pairs: objective %s, grad max-norm %s, %s\n",
              args.variant.c_str(), bundle.pairs.size(),
              io::fmt_double(last.objective).c_str(),
              io::fmt_double(last.grad_max_norm).c_str(),
              result.converged ? "converged" : "not converged");
  return kExitOk;
}

struct MatchArgs {
  std::string dataset;
  std::string out;
  MatchOptions opts;
  bool trace = false;
};

int run_match(const MatchArgs& args) {
  const io::Bundle bundle = io::load_bundle(args.dataset);
  const std::optional<PenaltyModel> model = load_method_model(args.opts);
  fs::create_directories(args.out);

  MatchOptions opts = args.opts;
  opts.params.bp.collect_trace = args.trace;
  for (std::size_t i = 0; i < bundle.pairs.size(); ++i) {
    const SynthPair& pair = bundle.pairs[i];
    BeliefState beliefs;
    const MatchAssignment assignment = run_method(opts, pair, model, &beliefs);
    const fs::path out_path = fs::path(args.out) / (pair_name(i) + ".assignment.csv");
    io::save_assignment_csv(assignment, out_path,
                            pair.ground_truth.empty() ? nullptr : &pair.ground_truth);
    if (args.trace && !beliefs.trace.empty())
      io::save_trace_csv(beliefs.trace,
                         fs::path(args.out) / (pair_name(i) + ".trace.csv"));
  }
  std::printf("matched %zu pairs with method %s into %s\n", bundle.pairs.size(),
              opts.method.c_str(), args.out.c_str());
  return kExitOk;
}

struct EvalArgs {
  std::string dataset;
  std::string assignments;
  std::string out;
};

int run_eval(const EvalArgs& args) {
  const io::Bundle bundle = io::load_bundle(args.dataset);
  std::vector<io::MetricsRow> rows;
  for (std::size_t i = 0; i < bundle.pairs.size(); ++i) {
    const SynthPair& pair = bundle.pairs[i];
    if (pair.ground_truth.empty())
      throw ConfigError("evaluation needs ground truth for every pair");
    const MatchAssignment assignment = io::load_assignment_csv(
        fs::path(args.assignments) / (pair_name(i) + ".assignment.csv"));
    rows.push_back({pair_name(i), evaluate_assignment(assignment, pair.ground_truth)});
  }
  io::save_metrics_csv(rows, args.out);
  std::printf("evaluated %zu pairs into %s\n", rows.size(), args.out.c_str());
  return kExitOk;
}

struct CompareArgs {
  std::string dataset;
  std::string out;
  std::vector<std::string> methods{"learned", "linear", "greedy", "spectral"};
  MatchOptions opts;
};

int run_compare(const CompareArgs& args) {
  const io::Bundle bundle = io::load_bundle(args.dataset);
  std::vector<std::string> methods = args.methods;
  std::sort(methods.begin(), methods.end());

  std::vector<io::CompareRow> rows;
  for (std::size_t i = 0; i < bundle.pairs.size(); ++i) {
    const SynthPair& pair = bundle.pairs[i];
    if (pair.ground_truth.empty())
      throw ConfigError("comparison needs ground truth for every pair");
    for (const std::string& method : methods) {
      MatchOptions opts = args.opts;
      opts.method = method;
      const std::optional<PenaltyModel> model = load_method_model(opts);
      const MatchAssignment assignment = run_method(opts, pair, model, nullptr);
      rows.push_back({pair_name(i), method,
                      evaluate_assignment(assignment, pair.ground_truth)});
    }
  }
  io::save_compare_csv(rows, args.out);
  std::printf("compared %zu methods on %zu pairs into %s\n", methods.size(),
              bundle.pairs.size(), args.out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hypergraph feature matching: dataset generation, penalty "
               "learning, matching, and evaluation"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset bundle");
  generate->add_option("--out", gen.out, "bundle directory")->required();
  generate->add_option("--pairs", gen.pairs, "number of pairs")->capture_default_str();
  generate->add_option("--n-points", gen.base.n_points, "points per side")
      ->capture_default_str();
  generate->add_option("--transform", gen.transform, "shear|rotate|composite")
      ->check(CLI::IsMember({"shear", "rotate", "composite"}))
      ->capture_default_str();
  generate->add_option("--factor", gen.base.shear_factor, "shear factor in [1,2]")
      ->capture_default_str();
  generate->add_option("--angle", gen.base.rotate_angle_deg, "rotation in [0,90] deg")
      ->capture_default_str();
  generate->add_option("--jitter", gen.base.jitter_sigma, "coordinate noise sigma")
      ->capture_default_str();
  generate->add_option("--dim", gen.base.descriptor_dim, "descriptor dimension")
      ->capture_default_str();
  generate->add_option("--noise", gen.base.descriptor_noise_sigma,
                       "descriptor noise sigma")
      ->capture_default_str();
  generate->add_option("--distractors", gen.base.distractor_count,
                       "extra right-side points")
      ->capture_default_str();
  generate->add_option("--seed", gen.base.seed, "base seed; pair i uses seed+i")
      ->capture_default_str();

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "fit a penalty model to a bundle");
  train_cmd->add_option("--dataset", tr.dataset, "bundle directory")->required();
  train_cmd->add_option("--out", tr.out, "model JSON path")->required();
  train_cmd->add_option("--log", tr.log_path, "training log CSV path");
  train_cmd->add_option("--variant", tr.variant, "discrete|polynomial")
      ->check(CLI::IsMember({"discrete", "polynomial"}))
      ->capture_default_str();
  train_cmd->add_option("--l2", tr.config.l2_strength, "L2 strength")
      ->capture_default_str();
  train_cmd->add_option("--step", tr.config.step_size, "initial step size")
      ->capture_default_str();
  train_cmd->add_option("--max-iters", tr.config.max_iters, "gradient steps")
      ->capture_default_str();
  train_cmd->add_option("--m", tr.params.m, "candidates per left feature")
      ->capture_default_str();
  train_cmd->add_option("--knn", tr.params.knn, "neighbors per left feature")
      ->capture_default_str();
  train_cmd->add_option("--delta", tr.params.delta, "angle dissimilarity cutoff")
      ->capture_default_str();
  train_cmd->add_option("--bp-max-iters", tr.config.bp.max_iters, "sum-product passes")
      ->capture_default_str();
  train_cmd->add_option("--bp-tol", tr.config.bp.tolerance, "message residual target")
      ->capture_default_str();
  train_cmd->add_option("--bp-damping", tr.config.bp.damping, "message damping")
      ->capture_default_str();

  MatchArgs ma;
  CLI::App* match_cmd = app.add_subcommand("match", "assign matches for every pair");
  match_cmd->add_option("--dataset", ma.dataset, "bundle directory")->required();
  match_cmd->add_option("--out", ma.out, "assignment directory")->required();
  match_cmd->add_flag("--trace", ma.trace, "write per-pair BP trace CSVs");
  add_match_options(match_cmd, &ma.opts);

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score assignments against truth");
  eval_cmd->add_option("--dataset", ev.dataset, "bundle directory")->required();
  eval_cmd->add_option("--assignments", ev.assignments, "assignment directory")
      ->required();
  eval_cmd->add_option("--out", ev.out, "metrics CSV path")->required();

  CompareArgs co;
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "side-by-side metrics across methods");
  compare_cmd->add_option("--dataset", co.dataset, "bundle directory")->required();
  compare_cmd->add_option("--out", co.out, "comparison CSV path")->required();
  compare_cmd->add_option("--methods", co.methods, "methods to run")
      ->delimiter(',')
      ->capture_default_str();
  add_match_options(compare_cmd, &co.opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (generate->parsed()) {
      gen.base.transform = gen.transform == "rotate"      ? TransformKind::Rotate
                           : gen.transform == "composite" ? TransformKind::Composite
                                                          : TransformKind::Shear;
      if (gen.pairs < 1) throw ConfigError("--pairs must be positive");
      std::vector<SynthPair> pairs;
      std::vector<SynthConfig> configs;
      for (int i = 0; i < gen.pairs; ++i) {
        SynthConfig config = gen.base;
        config.seed = gen.base.seed + static_cast<std::uint64_t>(i);
        config.validate();
        pairs.push_back(generate_pair(config));
        configs.push_back(config);
      }
      io::save_bundle(gen.out, pairs, configs);
      std::printf("wrote %d pairs (%d points each) to %s\n", gen.pairs,
                  gen.base.n_points, gen.out.c_str());
      return kExitOk;
    }
    if (train_cmd->parsed()) return run_train(tr);
    if (match_cmd->parsed()) {
      finalize_match_options(&ma.opts);
      return run_match(ma);
    }
    if (eval_cmd->parsed()) return run_eval(ev);
    if (compare_cmd->parsed()) {
      finalize_match_options(&co.opts);
      return run_compare(co);
    }
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const ModelSizeError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
}
