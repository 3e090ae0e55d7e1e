// Copyright 2026 The AdaQuant Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "adaquant/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <future>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "adaquant/errors.hpp"

namespace adaquant {

namespace {

namespace pt = boost::property_tree;

// Recognized keys per section.
const std::map<std::string, std::set<std::string>, std::less<>> kSchema = {
    {"model", {"kind", "hidden", "classes"}},
    {"data",
     {"source", "task", "samples", "features", "classes", "noise", "eval_samples", "path",
      "eval_path"}},
    {"federation", {"clients", "partition", "local_steps", "batch_size", "workers"}},
    {"lr", {"eta", "decay", "period"}},
    {"fixed", {"bits"}},
    {"adaquant", {"s0", "interval_bits", "s_max", "f_star"}},
    {"run",
     {"rounds", "bit_budget", "loss_threshold", "stop_at_threshold", "seed", "eval_every",
      "output"}},
    {"diagnostics", {"smoothness"}},
};

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto value = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!value) return std::nullopt;
    return *value;
  }

  bool has_section(const std::string& section) const {
    return static_cast<bool>(tree_.get_child_optional(section));
  }

  template <typename T>
  std::optional<T> get(const std::string& section, const std::string& key) const {
    const auto text = raw(section, key);
    if (!text) return std::nullopt;
    return convert<T>(section + "." + key, *text);
  }

  template <typename T>
  T get_or(const std::string& section, const std::string& key, T fallback) const {
    return get<T>(section, key).value_or(fallback);
  }

  template <typename T>
  T require(const std::string& section, const std::string& key) const {
    auto value = get<T>(section, key);
    if (!value) throw ConfigError(section + "." + key, "required field is missing");
    return *value;
  }

 private:
  template <typename T>
  static T convert(const std::string& field, const std::string& text) {
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes") return true;
      if (text == "false" || text == "0" || text == "no") return false;
      throw ConfigError(field, "expected a boolean, got '" + text + "'");
    } else if constexpr (std::is_floating_point_v<T>) {
      try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
        return static_cast<T>(v);
      } catch (const std::exception&) {
        throw ConfigError(field, "expected a number, got '" + text + "'");
      }
    } else {
      T v{};
      const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || end != text.data() + text.size()) {
        throw ConfigError(field, "expected a nonnegative integer, got '" + text + "'");
      }
      return v;
    }
  }

  const pt::ptree& tree_;
};

void check_schema(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    const auto known = kSchema.find(section);
    if (known == kSchema.end()) {
      throw ConfigError(section, body.empty() ? "key outside any section" : "unknown section");
    }
    for (const auto& [key, value] : body) {
      if (!known->second.contains(key)) throw ConfigError(section + "." + key, "unknown key");
    }
  }
}

template <typename Fn>
auto rethrow_as_config(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(field, e.what());
  }
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

std::string csv_line(const RoundRecord& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{}", r.round, r.cumulative_bits,
                     format_double(r.train_loss),
                     r.eval_metric ? format_double(*r.eval_metric) : std::string(), r.s, r.b,
                     format_double(r.eta), r.interval,
                     r.feasible ? (*r.feasible ? "1" : "0") : "");
}

ExperimentSummary summarize(const TrainingConfig& config, const TrainingRun& run,
                            std::string label) {
  ExperimentSummary summary;
  summary.label = std::move(label);
  summary.rounds = run.records.size();
  summary.final_loss = run.final_loss;
  summary.final_eval = run.final_eval;
  summary.cumulative_bits = run.records.empty() ? 0 : run.records.back().cumulative_bits;
  if (config.loss_threshold) {
    summary.bits_to_threshold = bits_to_threshold(run.records, *config.loss_threshold);
  }
  for (const auto& r : run.records) summary.s_trajectory.push_back(r.s);
  summary.failure = run.failure;
  return summary;
}

Experiment run_with_problem(const TrainingConfig& config, const Problem& problem,
                            std::string label) {
  std::optional<CsvWriter> writer;
  if (!config.output.empty()) writer.emplace(config.output);
  const TrainingRun run = run_training(config, problem, [&](const RoundRecord& r) {
    if (writer) writer->write(r);
  });
  Experiment out;
  out.summary = summarize(config, run, std::move(label));
  out.records = run.records;
  return out;
}

}  // namespace

TrainingConfig parse_config(std::string_view text) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }
  check_schema(tree);
  const Reader cfg(tree);
  TrainingConfig config;

  // [model]
  const auto kind_name = cfg.require<std::string>("model", "kind");
  const ModelKind kind = rethrow_as_config("model.kind", [&] { return parse_model_kind(kind_name); });

  // [data]
  const auto source = cfg.get_or<std::string>("data", "source", "synthetic");
  const bool default_classification = kind != ModelKind::kQuadratic;
  const auto task = cfg.get_or<std::string>("data", "task",
                                            default_classification ? "classification" : "regression");
  if (task != "classification" && task != "regression") {
    throw ConfigError("data.task", "expected 'classification' or 'regression'");
  }
  const bool classification = task == "classification";
  if (classification != default_classification) {
    throw ConfigError("data.task", std::string("model '") + kind_name + "' needs a " +
                                       (default_classification ? "classification" : "regression") +
                                       " dataset");
  }
  const auto classes = cfg.get_or<std::size_t>("data", "classes", 2);
  if (classification && classes < 2) throw ConfigError("data.classes", "must be >= 2");
  if (kind == ModelKind::kLogistic && classes != 2) {
    throw ConfigError("data.classes", "logistic regression is binary");
  }
  std::size_t features = 0;
  if (source == "synthetic") {
    config.data.source = DataConfig::Source::kSynthetic;
    auto& syn = config.data.synthetic;
    syn.kind = classification ? SyntheticKind::kClassification : SyntheticKind::kRegression;
    syn.samples = cfg.get_or<std::size_t>("data", "samples", 2000);
    syn.feature_dim = cfg.get_or<std::size_t>("data", "features", 19);
    syn.classes = classification ? classes : 0;
    syn.noise = cfg.get_or<double>("data", "noise", 0.0);
    if (syn.samples == 0) throw ConfigError("data.samples", "must be >= 1");
    if (syn.feature_dim == 0) throw ConfigError("data.features", "must be >= 1");
    if (syn.noise < 0.0 || (classification && syn.noise > 1.0)) {
      throw ConfigError("data.noise", classification ? "flip probability must lie in [0, 1]"
                                                     : "must be >= 0");
    }
    config.data.eval_samples = cfg.get_or<std::size_t>("data", "eval_samples", 0);
    features = syn.feature_dim;
    for (const char* key : {"path", "eval_path"}) {
      if (cfg.raw("data", key)) throw ConfigError(std::string("data.") + key, "only valid with source = file");
    }
  } else if (source == "file") {
    config.data.source = DataConfig::Source::kFile;
    config.data.file = cfg.require<std::string>("data", "path");
    if (auto eval = cfg.get<std::string>("data", "eval_path")) config.data.eval_file = *eval;
    features = cfg.get_or<std::size_t>("data", "features", 0);
    for (const char* key : {"samples", "noise", "eval_samples"}) {
      if (cfg.raw("data", key)) throw ConfigError(std::string("data.") + key, "only valid with source = synthetic");
    }
  } else {
    throw ConfigError("data.source", "expected 'synthetic' or 'file'");
  }

  switch (kind) {
    case ModelKind::kQuadratic: config.model = ModelSpec::quadratic(features); break;
    case ModelKind::kLogistic: config.model = ModelSpec::logistic(features); break;
    case ModelKind::kMlp: {
      const auto hidden = cfg.get_or<std::size_t>("model", "hidden", 16);
      const auto outputs = cfg.get_or<std::size_t>("model", "classes", classes);
      if (hidden == 0) throw ConfigError("model.hidden", "must be >= 1");
      if (outputs < 2) throw ConfigError("model.classes", "must be >= 2");
      config.model = ModelSpec{ModelKind::kMlp, features, hidden, outputs};
      break;
    }
  }
  if (kind != ModelKind::kMlp) {
    for (const char* key : {"hidden", "classes"}) {
      if (cfg.raw("model", key)) throw ConfigError(std::string("model.") + key, "only valid for kind = mlp");
    }
  }

  // [federation]
  config.clients = cfg.get_or<std::size_t>("federation", "clients", 8);
  if (config.clients == 0) throw ConfigError("federation.clients", "must be >= 1");
  const auto partition_name = cfg.get_or<std::string>("federation", "partition", "iid");
  config.partition = rethrow_as_config("federation.partition",
                                       [&] { return parse_partition_mode(partition_name); });
  config.local_steps = cfg.get_or<std::size_t>("federation", "local_steps", 10);
  if (config.local_steps == 0) throw ConfigError("federation.local_steps", "must be >= 1");
  config.batch_size = cfg.get_or<std::size_t>("federation", "batch_size", 32);
  if (config.batch_size == 0) throw ConfigError("federation.batch_size", "must be >= 1");
  config.workers = cfg.get_or<std::size_t>("federation", "workers", 1);
  if (config.workers == 0) throw ConfigError("federation.workers", "must be >= 1");

  // [lr]
  config.lr.eta0 = cfg.get_or<double>("lr", "eta", 0.1);
  config.lr.decay = cfg.get_or<double>("lr", "decay", 1.0);
  config.lr.period = cfg.get_or<std::size_t>("lr", "period", 0);
  if (!(config.lr.eta0 > 0.0)) throw ConfigError("lr.eta", "must be positive");
  if (!(config.lr.decay > 0.0)) throw ConfigError("lr.decay", "must be positive");

  // [fixed] / [adaquant]
  const bool fixed = cfg.has_section("fixed");
  if (fixed && cfg.has_section("adaquant")) {
    throw ConfigError("fixed", "conflicts with [adaquant]; choose one quantization mode");
  }
  if (fixed) {
    FixedLevels mode;
    mode.bits = cfg.require<std::uint32_t>("fixed", "bits");
    if (mode.bits == 0 || mode.bits > 32) throw ConfigError("fixed.bits", "must lie in [1, 32]");
    config.quant = mode;
  } else {
    AdaptiveLevels mode;
    mode.s0 = cfg.get_or<std::uint32_t>("adaquant", "s0", kDefaultInitialLevels);
    mode.interval_bits = cfg.get<std::uint64_t>("adaquant", "interval_bits");
    mode.s_max = cfg.get_or<std::uint32_t>("adaquant", "s_max", kDefaultMaxLevels);
    mode.f_star = cfg.get_or<double>("adaquant", "f_star", 0.0);
    if (mode.s0 == 0) throw ConfigError("adaquant.s0", "must be >= 1");
    if (mode.s_max < mode.s0) throw ConfigError("adaquant.s_max", "must be >= s0");
    if (mode.interval_bits && *mode.interval_bits == 0) {
      throw ConfigError("adaquant.interval_bits", "must be >= 1");
    }
    config.quant = mode;
  }

  // [run]
  config.max_rounds = cfg.require<std::size_t>("run", "rounds");
  config.bit_budget = cfg.get<std::uint64_t>("run", "bit_budget");
  config.loss_threshold = cfg.get<double>("run", "loss_threshold");
  config.stop_at_threshold = cfg.get_or<bool>("run", "stop_at_threshold", false);
  if (config.stop_at_threshold && !config.loss_threshold) {
    throw ConfigError("run.stop_at_threshold", "needs run.loss_threshold");
  }
  config.seed = cfg.get_or<std::uint64_t>("run", "seed", 1);
  config.eval_every = cfg.get_or<std::size_t>("run", "eval_every", 1);
  if (auto out = cfg.get<std::string>("run", "output")) config.output = *out;

  // [diagnostics]
  config.smoothness = cfg.get<double>("diagnostics", "smoothness");
  if (config.smoothness && !(*config.smoothness > 0.0)) {
    throw ConfigError("diagnostics.smoothness", "must be positive");
  }
  return config;
}

TrainingConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  TrainingConfig config = parse_config(buffer.str());
  // Relative data paths resolve against the config's directory.
  const auto base = path.parent_path();
  auto resolve = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  resolve(config.data.file);
  if (config.data.eval_file) resolve(*config.data.eval_file);
  return config;
}

std::optional<std::uint64_t> bits_to_threshold(std::span<const RoundRecord> records,
                                               double threshold) {
  for (const auto& r : records) {
    if (r.train_loss <= threshold) return r.cumulative_bits;
  }
  return std::nullopt;
}

Experiment run_experiment(const TrainingConfig& config, std::string label) {
  return run_with_problem(config, build_problem(config), std::move(label));
}

std::vector<Experiment> sweep(const TrainingConfig& config, const std::filesystem::path& out_dir) {
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  const Problem problem = build_problem(config);

  std::vector<std::pair<std::string, TrainingConfig>> plan;
  for (const auto b : kSweepBits) {
    TrainingConfig c = config;
    c.quant = FixedLevels{b};
    plan.emplace_back(fmt::format("fixed_b{}", b), std::move(c));
  }
  TrainingConfig adaptive = config;
  if (!std::holds_alternative<AdaptiveLevels>(adaptive.quant)) adaptive.quant = AdaptiveLevels{};
  plan.emplace_back("adaquant", std::move(adaptive));

  std::vector<std::future<Experiment>> pending;
  for (auto& [label, c] : plan) {
    c.output = out_dir.empty() ? std::filesystem::path() : out_dir / (label + ".csv");
    pending.push_back(std::async(std::launch::async, [&problem, &c = c, label = label] {
      return run_with_problem(c, problem, label);
    }));
  }
  std::vector<Experiment> runs;
  for (auto& f : pending) runs.push_back(f.get());
  if (!out_dir.empty()) write_summary_csv(runs, out_dir / "summary.csv");
  return runs;
}

GridSearchResult grid_search_s0(const TrainingConfig& config,
                                std::span<const std::uint32_t> candidates) {
  if (candidates.empty()) throw InvalidParameter("grid_search_s0: no candidates");
  const Problem problem = build_problem(config);
  GridSearchResult result;
  for (const auto s0 : candidates) {
    TrainingConfig c = config;
    AdaptiveLevels mode = std::holds_alternative<AdaptiveLevels>(config.quant)
                              ? std::get<AdaptiveLevels>(config.quant)
                              : AdaptiveLevels{};
    mode.s0 = s0;
    mode.s_max = std::max(mode.s_max, s0);
    c.quant = mode;
    c.output.clear();
    result.ranking.emplace_back(s0, run_with_problem(c, problem, fmt::format("s0_{}", s0)).summary);
  }
  auto key = [](const std::pair<std::uint32_t, ExperimentSummary>& entry) {
    const auto& s = entry.second;
    const double loss = std::isfinite(s.final_loss) ? s.final_loss : INFINITY;
    return std::make_tuple(!s.bits_to_threshold.has_value(), s.bits_to_threshold.value_or(0), loss,
                           entry.first);
  };
  std::stable_sort(result.ranking.begin(), result.ranking.end(),
                   [&](const auto& a, const auto& b) { return key(a) < key(b); });
  result.best_s0 = result.ranking.front().first;
  return result;
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : path_(path), out_(path) {
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
  out_ << kCsvHeader << '\n';
  out_.flush();
  if (!out_) throw Error("write failed: " + path.string());
}

void CsvWriter::write(const RoundRecord& record) {
  out_ << csv_line(record) << '\n';
  out_.flush();
  if (!out_) throw Error("write failed: " + path_.string());
}

void emit_csv(std::span<const RoundRecord> records, const std::filesystem::path& path) {
  CsvWriter writer(path);
  for (const auto& r : records) writer.write(r);
}

std::vector<RoundRecord> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw Error(path.string() + ": missing or unexpected header");
  }
  std::vector<RoundRecord> records;
  std::uint64_t previous_bits = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 9) throw Error(path.string() + ": malformed row '" + line + "'");
    RoundRecord r;
    r.round = std::stoull(cells[0]);
    r.cumulative_bits = std::stoull(cells[1]);
    r.train_loss = std::stod(cells[2]);
    if (!cells[3].empty()) r.eval_metric = std::stod(cells[3]);
    r.s = static_cast<std::uint32_t>(std::stoul(cells[4]));
    r.b = static_cast<std::uint32_t>(std::stoul(cells[5]));
    r.eta = std::stod(cells[6]);
    r.interval = std::stoull(cells[7]);
    if (!cells[8].empty()) r.feasible = cells[8] == "1";
    r.bits_this_round = r.cumulative_bits - previous_bits;
    previous_bits = r.cumulative_bits;
    records.push_back(r);
  }
  return records;
}

void write_summary_csv(std::span<const Experiment> runs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "label,rounds,cumulative_bits,final_loss,final_eval,bits_to_threshold,s_first,s_last\n";
  for (const auto& run : runs) {
    const auto& s = run.summary;
    out << fmt::format("{},{},{},{},{},{},{},{}\n", s.label, s.rounds, s.cumulative_bits,
                       format_double(s.final_loss),
                       s.final_eval ? format_double(*s.final_eval) : std::string(),
                       s.bits_to_threshold ? std::to_string(*s.bits_to_threshold) : std::string(),
                       s.s_trajectory.empty() ? std::string() : std::to_string(s.s_trajectory.front()),
                       s.s_trajectory.empty() ? std::string() : std::to_string(s.s_trajectory.back()));
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace adaquant
