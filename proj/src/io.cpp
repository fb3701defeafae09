#include "hypermatch/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace hypermatch::io {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

json parse_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

// CSV plumbing: all files here are plain comma-separated numerics with a
// fixed header, so no quoting is involved.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               const std::string& expected_header) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header)
    throw DataError("unexpected CSV header in " + path.string() + ": " + line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

int parse_int(const std::string& field, const std::filesystem::path& path) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw DataError("bad integer '" + field + "' in " + path.string());
  return value;
}

double parse_double(const std::string& field, const std::filesystem::path& path) {
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw DataError("bad number '" + field + "' in " + path.string());
  return value;
}

std::string transform_name(TransformKind kind) {
  switch (kind) {
    case TransformKind::Shear: return "shear";
    case TransformKind::Rotate: return "rotate";
    case TransformKind::Composite: return "composite";
  }
  throw ConfigError("unknown transform kind");
}

TransformKind transform_from_name(const std::string& name) {
  if (name == "shear") return TransformKind::Shear;
  if (name == "rotate") return TransformKind::Rotate;
  if (name == "composite") return TransformKind::Composite;
  throw DataError("unknown transform '" + name + "'");
}

json config_to_json(const SynthConfig& config) {
  return json{{"n_points", config.n_points},
              {"transform", transform_name(config.transform)},
              {"shear_factor", config.shear_factor},
              {"rotate_angle_deg", config.rotate_angle_deg},
              {"jitter_sigma", config.jitter_sigma},
              {"descriptor_dim", config.descriptor_dim},
              {"descriptor_noise_sigma", config.descriptor_noise_sigma},
              {"distractor_count", config.distractor_count},
              {"seed", config.seed}};
}

SynthConfig config_from_json(const json& j) {
  SynthConfig config;
  config.n_points = j.at("n_points").get<int>();
  config.transform = transform_from_name(j.at("transform").get<std::string>());
  config.shear_factor = j.at("shear_factor").get<double>();
  config.rotate_angle_deg = j.at("rotate_angle_deg").get<double>();
  config.jitter_sigma = j.at("jitter_sigma").get<double>();
  config.descriptor_dim = j.at("descriptor_dim").get<int>();
  config.descriptor_noise_sigma = j.at("descriptor_noise_sigma").get<double>();
  config.distractor_count = j.at("distractor_count").get<int>();
  config.seed = j.at("seed").get<std::uint64_t>();
  return config;
}

std::string pair_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pair_%03zu", index);
  return buf;
}

}  // namespace

std::string fmt_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw NumericalDomainError("value not representable");
  return std::string(buf, ptr);
}

// ============================================================================
// JSON checkpoints
// ============================================================================

void save_model(const PenaltyModel& model, const std::filesystem::path& path) {
  const json j{
      {"variant",
       model.variant() == PenaltyVariant::Discrete ? "discrete" : "polynomial"},
      {"k_max", model.k_max()},
      {"parameters", model.parameters()}};
  write_file(path, j.dump(2) + "\n");
}

PenaltyModel load_model(const std::filesystem::path& path) {
  const json j = parse_json(path);
  try {
    const std::string variant = j.at("variant").get<std::string>();
    const int k_max = j.at("k_max").get<int>();
    auto params = j.at("parameters").get<std::vector<double>>();
    PenaltyModel model = variant == "discrete"   ? PenaltyModel::discrete(k_max)
                         : variant == "polynomial" ? PenaltyModel::polynomial(k_max)
                                                   : throw DataError(
                                                         "unknown variant '" +
                                                         variant + "'");
    if (params.size() != model.parameter_count())
      throw DataError("parameter count does not match variant and k_max");
    model.parameters() = std::move(params);
    return model;
  } catch (const json::exception& e) {
    throw DataError("bad model file " + path.string() + ": " + e.what());
  }
}

void save_point_set(const PointSet& set, const std::filesystem::path& path) {
  json points = json::array();
  for (const Point2& p : set.points) points.push_back({p.x, p.y});
  json j{{"points", std::move(points)}};
  if (set.has_descriptors()) j["descriptors"] = set.descriptors;
  write_file(path, j.dump() + "\n");
}

PointSet load_point_set(const std::filesystem::path& path) {
  const json j = parse_json(path);
  PointSet set;
  try {
    for (const auto& entry : j.at("points")) {
      if (!entry.is_array() || entry.size() != 2)
        throw DataError("each point must be an [x, y] pair");
      set.points.push_back({entry[0].get<double>(), entry[1].get<double>()});
    }
    if (j.contains("descriptors"))
      set.descriptors = j.at("descriptors").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw DataError("bad point set " + path.string() + ": " + e.what());
  }
  set.validate();
  return set;
}

// ============================================================================
// CSV files
// ============================================================================

void save_truth_csv(const std::map<int, int>& truth,
                    const std::filesystem::path& path) {
  std::string text = "left_index,right_index\n";
  for (const auto& [left, right] : truth)
    text += std::to_string(left) + "," + std::to_string(right) + "\n";
  write_file(path, text);
}

std::map<int, int> load_truth_csv(const std::filesystem::path& path) {
  std::map<int, int> truth;
  for (const auto& row : read_csv(path, "left_index,right_index")) {
    if (row.size() != 2) throw DataError("bad truth row in " + path.string());
    const int left = parse_int(row[0], path);
    if (!truth.emplace(left, parse_int(row[1], path)).second)
      throw DataError("duplicate left index in " + path.string());
  }
  return truth;
}

void save_assignment_csv(const MatchAssignment& assignment,
                         const std::filesystem::path& path,
                         const std::map<int, int>* truth) {
  std::string text = truth ? "left_index,right_index,score,is_correct\n"
                           : "left_index,right_index,score\n";
  for (const AssignedMatch& pair : assignment.pairs) {
    text += std::to_string(pair.left_index) + "," +
            std::to_string(pair.right_index) + "," + fmt_double(pair.score);
    if (truth) {
      const auto it = truth->find(pair.left_index);
      text += it != truth->end() && it->second == pair.right_index ? ",1" : ",0";
    }
    text += "\n";
  }
  write_file(path, text);
}

MatchAssignment load_assignment_csv(const std::filesystem::path& path) {
  // Accept both layouts; the is_correct column is derived, so it is ignored.
  std::string header = "left_index,right_index,score";
  std::vector<std::vector<std::string>> rows;
  try {
    rows = read_csv(path, header);
  } catch (const DataError&) {
    rows = read_csv(path, header + ",is_correct");
  }
  MatchAssignment assignment;
  std::set<int> seen;
  for (const auto& row : rows) {
    if (row.size() < 3) throw DataError("bad assignment row in " + path.string());
    AssignedMatch pair{parse_int(row[0], path), parse_int(row[1], path),
                       parse_double(row[2], path)};
    if (!seen.insert(pair.left_index).second)
      throw DataError("duplicate left index in " + path.string());
    assignment.pairs.push_back(pair);
  }
  return assignment;
}

void save_training_log_csv(std::span<const TrainLogRow> rows,
                           const std::filesystem::path& path) {
  std::string text = "iteration,objective,grad_max_norm,step_size,bp_nonconverged_count\n";
  for (const TrainLogRow& row : rows)
    text += std::to_string(row.iteration) + "," + fmt_double(row.objective) + "," +
            fmt_double(row.grad_max_norm) + "," + fmt_double(row.step_size) + "," +
            std::to_string(row.bp_nonconverged_count) + "\n";
  write_file(path, text);
}

void save_trace_csv(std::span<const TraceRow> rows,
                    const std::filesystem::path& path) {
  std::string text = "iteration,max_residual,bethe_log_z\n";
  for (const TraceRow& row : rows)
    text += std::to_string(row.iteration) + "," + fmt_double(row.max_residual) +
            "," + fmt_double(row.bethe_log_z) + "\n";
  write_file(path, text);
}

namespace {

struct RunningStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  int n = 0;

  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  double mean() const { return n == 0 ? 0.0 : sum / n; }
  double std_dev() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, (sum_sq - n * m * m) / (n - 1)));
  }
};

std::string metrics_fields(const PairMetrics& m) {
  return std::to_string(m.n_truth_available) + "," + std::to_string(m.n_correct) +
         "," + std::to_string(m.n_incorrect) + "," + fmt_double(m.pct_incorrect);
}

struct MetricsStats {
  RunningStats truth, correct, incorrect, pct;

  void add(const PairMetrics& m) {
    truth.add(m.n_truth_available);
    correct.add(m.n_correct);
    incorrect.add(m.n_incorrect);
    pct.add(m.pct_incorrect);
  }
  std::string mean_fields() const {
    return fmt_double(truth.mean()) + "," + fmt_double(correct.mean()) + "," +
           fmt_double(incorrect.mean()) + "," + fmt_double(pct.mean());
  }
  std::string std_fields() const {
    return fmt_double(truth.std_dev()) + "," + fmt_double(correct.std_dev()) + "," +
           fmt_double(incorrect.std_dev()) + "," + fmt_double(pct.std_dev());
  }
};

}  // namespace

void save_metrics_csv(std::span<const MetricsRow> rows,
                      const std::filesystem::path& path) {
  std::string text = "pair,n_truth_available,n_correct,n_incorrect,pct_incorrect\n";
  MetricsStats stats;
  for (const MetricsRow& row : rows) {
    text += row.pair + "," + metrics_fields(row.metrics) + "\n";
    stats.add(row.metrics);
  }
  text += "mean," + stats.mean_fields() + "\n";
  text += "std," + stats.std_fields() + "\n";
  write_file(path, text);
}

void save_compare_csv(std::span<const CompareRow> rows,
                      const std::filesystem::path& path) {
  std::string text = "pair,method,n_truth_available,n_correct,n_incorrect,pct_incorrect\n";
  std::map<std::string, MetricsStats> by_method;
  for (const CompareRow& row : rows) {
    text += row.pair + "," + row.method + "," + metrics_fields(row.metrics) + "\n";
    by_method[row.method].add(row.metrics);
  }
  for (const auto& [method, stats] : by_method)
    text += "mean," + method + "," + stats.mean_fields() + "\n";
  for (const auto& [method, stats] : by_method)
    text += "std," + method + "," + stats.std_fields() + "\n";
  write_file(path, text);
}

// ============================================================================
// Dataset bundles
// ============================================================================

void save_bundle(const std::filesystem::path& dir,
                 std::span<const SynthPair> pairs,
                 std::span<const SynthConfig> configs) {
  if (!configs.empty() && configs.size() != pairs.size())
    throw ConfigError("config list must be empty or match the pair count");
  std::filesystem::create_directories(dir);
  json config_list = json::array();
  for (const SynthConfig& config : configs)
    config_list.push_back(config_to_json(config));
  write_file(dir / "config.json",
             json{{"pairs", std::move(config_list)}}.dump(2) + "\n");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string stem = pair_stem(i);
    save_point_set(pairs[i].left, dir / (stem + ".left.json"));
    save_point_set(pairs[i].right, dir / (stem + ".right.json"));
    save_truth_csv(pairs[i].ground_truth, dir / (stem + ".truth.csv"));
  }
}

Bundle load_bundle(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw DataError("dataset directory not found: " + dir.string());
  Bundle bundle;
  for (std::size_t i = 0;; ++i) {
    const std::string stem = pair_stem(i);
    const auto left_path = dir / (stem + ".left.json");
    if (!std::filesystem::exists(left_path)) break;
    SynthPair pair;
    pair.left = load_point_set(left_path);
    pair.right = load_point_set(dir / (stem + ".right.json"));
    const auto truth_path = dir / (stem + ".truth.csv");
    if (std::filesystem::exists(truth_path))
      pair.ground_truth = load_truth_csv(truth_path);
    bundle.pairs.push_back(std::move(pair));
  }
  if (bundle.pairs.empty())
    throw DataError("no pair files in dataset directory " + dir.string());
  const auto config_path = dir / "config.json";
  if (std::filesystem::exists(config_path)) {
    const json j = parse_json(config_path);
    try {
      for (const auto& entry : j.at("pairs"))
        bundle.configs.push_back(config_from_json(entry));
    } catch (const json::exception& e) {
      throw DataError("bad bundle config " + config_path.string() + ": " + e.what());
    }
  }
  return bundle;
}

}  // namespace hypermatch::io
