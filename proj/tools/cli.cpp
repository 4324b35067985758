#include "cli.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "noiseforge/analysis.hpp"
#include "noiseforge/concentration.hpp"
#include "noiseforge/dataset_io.hpp"
#include "noiseforge/generators.hpp"
#include "noiseforge/parallel.hpp"
#include "noiseforge/transition.hpp"

namespace noiseforge::cli {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::shared_ptr<spdlog::logger> log() {
  static auto logger = [] {
    auto l = std::make_shared<spdlog::logger>(
        "noiseforge", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("[%l] %v");
    return l;
  }();
  return logger;
}

/// Rounds to a fixed number of decimals so JSON output is stable; NaN and
/// infinities become null.
Json fixed(double v, int decimals) {
  if (!std::isfinite(v)) return nullptr;
  const double scale = std::pow(10.0, decimals);
  const double r = std::round(v * scale) / scale;
  return r == 0.0 ? 0.0 : r;  // no "-0.0"
}

template <typename Range>
Json fixed_array(const Range& values, int decimals) {
  Json out = Json::array();
  for (double v : values) out.push_back(fixed(v, decimals));
  return out;
}

std::string shortest(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing (" + path.string() + ")");
  out << text;
  if (!out) throw DataError("write failed (" + path.string() + ")");
}

void write_json(const fs::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

Json read_json_file(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " (" + path.string() + ")");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed ") + what + " (" + path.string() + "): " + e.what());
  }
}

std::map<ClassId, ClassId> parse_asym_map(const Json& j) {
  std::map<ClassId, ClassId> out;
  auto add = [&](std::uint64_t from, std::uint64_t to) {
    if (!out.emplace(static_cast<ClassId>(from), static_cast<ClassId>(to)).second)
      throw ConfigError("asymmetric map lists class " + std::to_string(from) + " twice");
  };
  try {
    if (j.is_object()) {
      for (const auto& [key, value] : j.items()) {
        std::uint64_t from = 0;
        auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), from);
        if (ec != std::errc{} || ptr != key.data() + key.size())
          throw ConfigError("asymmetric map key `" + key + "` is not a class index");
        add(from, value.get<std::uint64_t>());
      }
    } else if (j.is_array()) {
      for (const auto& pair : j) add(pair.at(0).get<std::uint64_t>(), pair.at(1).get<std::uint64_t>());
    } else {
      throw ConfigError("asymmetric map must be a JSON object or an array of pairs");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed asymmetric map: ") + e.what());
  }
  return out;
}

Json asym_map_json(const std::map<ClassId, ClassId>& m) {
  Json out = Json::object();
  for (const auto& [from, to] : m) out[std::to_string(from)] = to;
  return out;
}

/// Fully-resolved run parameters. Each field is filled from the config file
/// first and then overridden by any flag given on the command line.
struct RunConfig {
  std::optional<std::string> pattern;
  std::optional<double> rho0;
  std::optional<double> tau;
  std::optional<std::map<ClassId, ClassId>> asym_map;
  double mu1 = 0.1;
  double mu2 = 0.9;
  IntervalWeights interval_weights = kDefaultIntervalWeights;
  std::uint64_t seed = 0;
  std::optional<std::size_t> classes;
  std::optional<std::string> features, labels, subset, subset_features, noisy, out, audit;
  unsigned threads = 0;
};

void load_config_file(const fs::path& path, RunConfig& cfg) {
  Json j = read_json_file(path, "config file");
  if (j.contains("config")) j = j["config"];
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "pattern") cfg.pattern = value.get<std::string>();
      else if (key == "rho0") cfg.rho0 = value.get<double>();
      else if (key == "tau") cfg.tau = value.get<double>();
      else if (key == "asym_map") cfg.asym_map = parse_asym_map(value);
      else if (key == "mu1") cfg.mu1 = value.get<double>();
      else if (key == "mu2") cfg.mu2 = value.get<double>();
      else if (key == "interval_weights") {
        const auto w = value.get<std::vector<std::uint64_t>>();
        if (w.size() != kIntervals) throw ConfigError("interval_weights needs 5 entries");
        std::copy(w.begin(), w.end(), cfg.interval_weights.begin());
      } else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "classes") cfg.classes = value.get<std::size_t>();
      else if (key == "features") cfg.features = value.get<std::string>();
      else if (key == "labels") cfg.labels = value.get<std::string>();
      else if (key == "subset") cfg.subset = value.get<std::string>();
      else if (key == "subset_features") cfg.subset_features = value.get<std::string>();
      else if (key == "noisy") cfg.noisy = value.get<std::string>();
      else if (key == "out") cfg.out = value.get<std::string>();
      else if (key == "audit") cfg.audit = value.get<std::string>();
      else if (key == "threads") cfg.threads = value.get<unsigned>();
      else throw ConfigError("unknown config key `" + key + "`");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad value in config file (" + path.string() + "): " + e.what());
  }
}

/// Command-line values, kept separate so they can override the config file.
struct Flags {
  std::string config;
  std::string pattern;
  double rho0 = 0, tau = 0, mu1 = 0, mu2 = 0;
  std::vector<std::uint64_t> interval_weights;
  std::uint64_t seed = 0;
  std::size_t classes = 0;
  std::string features, labels, subset, subset_features, noisy, out, audit, asym_map;
  unsigned threads = 0;
  bool quiet = false;
  bool verbose = false;
};

struct FlagOptions {
  CLI::Option *pattern = nullptr, *rho0 = nullptr, *tau = nullptr, *mu1 = nullptr,
              *mu2 = nullptr, *weights = nullptr, *seed = nullptr, *classes = nullptr,
              *features = nullptr, *labels = nullptr, *subset = nullptr,
              *subset_features = nullptr, *noisy = nullptr, *out = nullptr, *audit = nullptr,
              *asym_map = nullptr, *threads = nullptr;
};

bool given(const CLI::Option* o) { return o != nullptr && o->count() > 0; }

RunConfig resolve(const Flags& f, const FlagOptions& o) {
  RunConfig cfg;
  if (!f.config.empty()) load_config_file(f.config, cfg);
  if (given(o.pattern)) cfg.pattern = f.pattern;
  if (given(o.rho0)) cfg.rho0 = f.rho0;
  if (given(o.tau)) cfg.tau = f.tau;
  if (given(o.mu1)) cfg.mu1 = f.mu1;
  if (given(o.mu2)) cfg.mu2 = f.mu2;
  if (given(o.mu1) && !given(o.mu2)) cfg.mu2 = 1.0 - cfg.mu1;
  if (given(o.mu2) && !given(o.mu1)) cfg.mu1 = 1.0 - cfg.mu2;
  if (given(o.weights)) {
    if (f.interval_weights.size() != kIntervals)
      throw ConfigError("--interval-weights needs exactly 5 values");
    std::copy(f.interval_weights.begin(), f.interval_weights.end(),
              cfg.interval_weights.begin());
  }
  if (given(o.seed)) cfg.seed = f.seed;
  if (given(o.classes)) cfg.classes = f.classes;
  if (given(o.features)) cfg.features = f.features;
  if (given(o.labels)) cfg.labels = f.labels;
  if (given(o.subset)) cfg.subset = f.subset;
  if (given(o.subset_features)) cfg.subset_features = f.subset_features;
  if (given(o.noisy)) cfg.noisy = f.noisy;
  if (given(o.out)) cfg.out = f.out;
  if (given(o.audit)) cfg.audit = f.audit;
  if (given(o.asym_map)) cfg.asym_map = parse_asym_map(read_json_file(f.asym_map, "asymmetric map"));
  if (given(o.threads)) cfg.threads = f.threads;
  return cfg;
}

const std::string& require(const std::optional<std::string>& v, const char* flag) {
  if (!v || v->empty()) throw ConfigError(std::string("missing required ") + flag);
  return *v;
}

std::size_t class_count(const RunConfig& cfg, const fs::path& label_file) {
  if (cfg.classes) {
    if (*cfg.classes == 0) throw ConfigError("--classes must be at least 1");
    return *cfg.classes;
  }
  const auto c = infer_class_count(label_file);
  log()->info("class count inferred from {}: {}", label_file.string(), c);
  return c;
}

LabeledDataset load_dataset(const RunConfig& cfg, std::size_t c) {
  auto features = read_features(require(cfg.features, "--features"));
  auto labels = read_labels(require(cfg.labels, "--labels"), c);
  log()->info("loaded {} samples, dim {}, {} classes", features.n_samples(), features.dim(), c);
  return LabeledDataset(std::move(features), std::move(labels));
}

NoisySubset load_subset(const RunConfig& cfg, std::size_t c, const LabeledDataset& ds) {
  const auto& path = require(cfg.subset, "--subset");
  auto subset = cfg.subset_features
                    ? read_noisy_subset(path, c, read_features(*cfg.subset_features))
                    : read_noisy_subset_from_parent(path, c, ds.features());
  const auto counts = subset.clean_labels.class_counts();
  std::string report;
  for (std::size_t j = 0; j < counts.size(); ++j)
    report += (j ? " " : "") + std::to_string(counts[j]);
  log()->info("subset: {} samples ({:.2f}% of the dataset), {} disagreements; per-class clean counts: {}",
              subset.size(), 100.0 * static_cast<double>(subset.size()) / static_cast<double>(ds.size()),
              subset.disagreements(), report);
  return subset;
}

NoiseSpec make_spec(const RunConfig& cfg) {
  NoiseSpec spec;
  spec.pattern = parse_pattern(*cfg.pattern);
  spec.seed = cfg.seed;
  spec.mu1 = cfg.mu1;
  spec.mu2 = cfg.mu2;
  spec.interval_weights = cfg.interval_weights;
  switch (spec.pattern) {
    case Pattern::rgn:
      if (!cfg.rho0) throw ConfigError("pattern rgn needs --rho0");
      if (!cfg.subset) throw ConfigError("pattern rgn needs --subset");
      spec.rho0 = *cfg.rho0;
      break;
    case Pattern::asym:
      if (!cfg.asym_map) throw ConfigError("pattern asym needs --asym-map");
      spec.asym_map = *cfg.asym_map;
      [[fallthrough]];
    case Pattern::symm_inc:
    case Pattern::symm_exc:
      if (!cfg.tau) throw ConfigError("pattern " + *cfg.pattern + " needs --tau");
      spec.tau = *cfg.tau;
      break;
  }
  return spec;
}

/// The stanza that reproduces a generate run: everything that affects the
/// output, and nothing that does not (output paths, worker count).
Json resolved_config(const RunConfig& cfg, const NoiseSpec& spec, std::size_t c) {
  Json j;
  j["pattern"] = pattern_name(spec.pattern);
  if (spec.pattern == Pattern::rgn) {
    j["rho0"] = spec.rho0;
    j["mu1"] = spec.mu1;
    j["mu2"] = spec.mu2;
    j["interval_weights"] = spec.interval_weights;
  } else {
    j["tau"] = spec.tau;
  }
  if (spec.pattern == Pattern::asym) j["asym_map"] = asym_map_json(spec.asym_map);
  j["seed"] = spec.seed;
  j["classes"] = c;
  j["features"] = *cfg.features;
  j["labels"] = *cfg.labels;
  if (spec.pattern == Pattern::rgn) {
    j["subset"] = *cfg.subset;
    if (cfg.subset_features) j["subset_features"] = *cfg.subset_features;
  }
  return j;
}

Json version_stanza() {
  Json j;
  j["tool"] = "noiseforge";
  j["version"] = NOISEFORGE_VERSION;
  j["feature_format_version"] = kFeatureFormatVersion;
  return j;
}

Json transition_json(const TransitionMatrix& tm, const ClassNoiseProfile& np) {
  Json j;
  j["classes"] = tm.n_classes;
  Json matrix = Json::array();
  for (std::size_t r = 0; r < tm.n_classes; ++r) {
    Json row = Json::array();
    for (std::size_t col = 0; col < tm.n_classes; ++col) row.push_back(fixed(tm.at(r, col), 9));
    matrix.push_back(row);
  }
  j["matrix"] = matrix;
  j["support"] = tm.support;
  j["rho"] = fixed_array(np.rho, 9);
  j["rho_overall"] = fixed(np.rho_overall, 9);
  Json rows = Json::array();
  for (std::size_t r = 0; r < tm.n_classes; ++r)
    rows.push_back(np.flip_row_defined[r] ? fixed_array(np.flip_rows[r], 9) : Json(nullptr));
  j["flip_rows"] = rows;
  Json undefined = Json::array();
  for (std::size_t r = 0; r < tm.n_classes; ++r)
    if (!tm.row_defined(r)) undefined.push_back(r);
  j["undefined_rows"] = undefined;
  return j;
}

Json budget_json(const NoiseBudget& b) {
  Json j;
  j["num_all"] = b.num_all;
  j["class_rate"] = fixed_array(b.class_rate, 9);
  j["class_count"] = b.class_count;
  Json rates = Json::array(), counts = Json::array();
  for (std::size_t c = 0; c < b.interval_rate.size(); ++c) {
    rates.push_back(fixed_array(b.interval_rate[c], 9));
    counts.push_back(b.interval_count[c]);
  }
  j["interval_rate"] = rates;
  j["interval_count"] = counts;
  j["interval_rate_fallback"] = b.interval_rate_fallback;
  Json caps = Json::array();
  for (const auto& cap : b.caps) {
    Json e;
    e["class"] = cap.class_id;
    e["interval"] = cap.interval ? Json(*cap.interval) : Json(nullptr);
    e["requested"] = cap.requested;
    e["capacity"] = cap.capacity;
    caps.push_back(e);
  }
  j["caps"] = caps;
  return j;
}

Json audit_json(const Json& config, const NoiseAssignment& a) {
  Json j = version_stanza();
  j["config"] = config;
  Json summary;
  summary["n_samples"] = a.labels.size();
  summary["n_flipped"] = a.flip_count();
  summary["realized_ratio"] =
      fixed(static_cast<double>(a.flip_count()) / static_cast<double>(a.labels.size()), 9);
  j["summary"] = summary;
  j["log"] = a.log;
  if (a.rgn) {
    const auto& d = *a.rgn;
    j["transition"] = transition_json(d.transition, d.noise);
    Json sub;
    Json totals = Json::array(), noisy = Json::array();
    for (std::size_t c = 0; c < d.subset_stats.total.size(); ++c) {
      totals.push_back(d.subset_stats.total[c]);
      noisy.push_back(d.subset_stats.noisy[c]);
    }
    sub["interval_total"] = totals;
    sub["interval_noisy"] = noisy;
    j["subset_intervals"] = sub;
    j["clean_interval_sizes"] = d.clean_interval_sizes;
    j["budget"] = budget_json(d.budget);
    Json flips = Json::array();
    for (const auto& f : a.flips) {
      Json e;
      e["sample"] = f.sample;
      e["clean"] = f.clean;
      e["noisy"] = f.choice.label;
      e["p_transition"] = fixed_array(f.choice.p_transition, 9);
      e["p_concentration"] = fixed_array(f.choice.p_concentration, 9);
      e["p_blend"] = fixed_array(f.choice.p_blend, 9);
      if (!f.choice.fallback.empty()) e["fallback"] = f.choice.fallback;
      flips.push_back(e);
    }
    j["flips"] = flips;
  }
  return j;
}

std::string assignment_csv(const NoiseAssignment& a) {
  std::string out = "index,clean_label,noisy_label,flipped\n";
  out.reserve(out.size() + a.labels.size() * 12);
  for (std::size_t k = 0; k < a.labels.size(); ++k) {
    out += std::to_string(k);
    out += ',';
    out += std::to_string(a.clean[k]);
    out += ',';
    out += std::to_string(a.labels[k]);
    out += a.flipped[k] ? ",1\n" : ",0\n";
  }
  return out;
}

NoiseAssignment generate(const RunConfig& cfg, const LabeledDataset& ds, const NoiseSpec& spec,
                         std::size_t c, unsigned threads) {
  switch (spec.pattern) {
    case Pattern::symm_inc:
    case Pattern::symm_exc: return gen_symmetric(ds, spec);
    case Pattern::asym: return gen_asymmetric(ds, spec);
    case Pattern::rgn: return gen_rgn(ds, load_subset(cfg, c, ds), spec, threads);
  }
  throw ConfigError("unknown pattern");
}

int cmd_transition(const RunConfig& cfg) {
  const auto& subset_path = require(cfg.subset, "--subset");
  const auto& out = require(cfg.out, "--out");
  const auto c = class_count(cfg, subset_path);
  const auto [clean, noisy] = read_subset_labels(subset_path, c);
  const auto tm = estimate_transition(clean, noisy);
  const auto np = class_noise_profile(tm);
  log()->info("subset of {} samples: overall noise ratio {:.6f}", clean.size(), np.rho_overall);
  for (std::size_t j = 0; j < c; ++j)
    if (!tm.row_defined(j)) log()->warn("class {} has no subset samples; row undefined", j);

  Json j = version_stanza();
  j["subset"] = subset_path;
  j["n_samples"] = clean.size();
  auto body = transition_json(tm, np);
  for (auto& [key, value] : body.items()) j[key] = value;
  write_json(out, j);
  return kExitOk;
}

int cmd_concentration(const RunConfig& cfg) {
  const auto& out = require(cfg.out, "--out");
  const auto c = class_count(cfg, require(cfg.labels, "--labels"));
  const auto ds = load_dataset(cfg, c);
  validate_interval_weights(cfg.interval_weights);
  const auto profile = concentration_profile(ds, cfg.interval_weights, cfg.threads);

  if (fs::path(out).extension() == ".csv") {
    std::string text = "index,class,con,interval\n";
    for (std::size_t k = 0; k < ds.size(); ++k)
      text += std::to_string(k) + ',' + std::to_string(ds.labels()[k]) + ',' +
              shortest(profile.con[k]) + ',' + std::to_string(profile.interval_of[k]) + '\n';
    write_file(out, text);
    return kExitOk;
  }

  Json j = version_stanza();
  j["classes"] = c;
  j["interval_weights"] = profile.weights;
  Json intervals = Json::array();
  for (std::size_t cls = 0; cls < c; ++cls) {
    const auto& ci = profile.classes[cls];
    Json e;
    e["class"] = cls;
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < kIntervals; ++i) sizes.push_back(ci.size(i));
    e["sizes"] = sizes;
    Json lo = Json::array(), hi = Json::array();
    for (std::size_t i = 0; i < kIntervals; ++i) {
      lo.push_back(std::isfinite(ci.con_min[i]) ? Json(ci.con_min[i]) : Json(nullptr));
      hi.push_back(std::isfinite(ci.con_max[i]) ? Json(ci.con_max[i]) : Json(nullptr));
    }
    e["con_min"] = lo;
    e["con_max"] = hi;
    e["undersized"] = ci.undersized;
    intervals.push_back(e);
  }
  j["intervals"] = intervals;
  Json samples = Json::array();
  for (std::size_t k = 0; k < ds.size(); ++k) {
    Json s;
    s["index"] = k;
    s["class"] = ds.labels()[k];
    s["con"] = profile.con[k];
    s["interval"] = profile.interval_of[k];
    samples.push_back(s);
  }
  j["samples"] = samples;
  write_json(out, j);
  return kExitOk;
}

int cmd_generate(const RunConfig& cfg) {
  if (!cfg.pattern) throw ConfigError("missing required --pattern");
  const auto spec = make_spec(cfg);
  const auto& out = require(cfg.out, "--out");
  const auto c = class_count(cfg, require(cfg.labels, "--labels"));
  validate_spec(spec, c);
  require(cfg.features, "--features");

  const auto ds = load_dataset(cfg, c);
  const auto a = generate(cfg, ds, spec, c, cfg.threads);
  for (const auto& line : a.log) log()->info("{}", line);
  log()->info("{}: flipped {} of {} labels ({:.6f})", pattern_name(spec.pattern), a.flip_count(),
              a.labels.size(),
              static_cast<double>(a.flip_count()) / static_cast<double>(a.labels.size()));

  write_file(out, assignment_csv(a));
  if (cfg.audit) write_json(*cfg.audit, audit_json(resolved_config(cfg, spec, c), a));
  return kExitOk;
}

/// Noisy labels from a generate output, a subset-style CSV or a plain
/// `index,label` file, checked against the clean labels.
std::vector<std::uint8_t> load_noisy_flags(const fs::path& path, const LabelVector& clean,
                                           LabelVector& noisy_out) {
  const auto table = read_integer_csv(path);
  const auto& cols = table.columns;
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i] == name) return i;
    return std::nullopt;
  };
  const auto idx = column("index");
  auto lab = column("noisy_label");
  if (!lab) lab = column("label");
  if (!idx || !lab)
    throw DataError("noisy label file needs `index` and `noisy_label` or `label` columns (" +
                    path.string() + ")");
  const auto clean_col = column("clean_label");
  if (table.rows.size() != clean.size())
    throw DataError("noisy label file has " + std::to_string(table.rows.size()) +
                    " rows, dataset has " + std::to_string(clean.size()));

  std::vector<ClassId> noisy(clean.size());
  std::vector<bool> seen(clean.size(), false);
  for (const auto& row : table.rows) {
    const auto k = row[*idx];
    if (k >= clean.size() || seen[k])
      throw DataError("noisy label file index " + std::to_string(k) +
                      " is out of range or repeated (" + path.string() + ")");
    seen[k] = true;
    if (row[*lab] >= clean.n_classes)
      throw DataError("noisy label " + std::to_string(row[*lab]) + " is outside the class range");
    if (clean_col && row[*clean_col] != clean[k])
      throw DataError("noisy label file disagrees with --labels on the clean label of sample " +
                      std::to_string(k));
    noisy[k] = static_cast<ClassId>(row[*lab]);
  }
  noisy_out = LabelVector(noisy, clean.n_classes);
  std::vector<std::uint8_t> flags(clean.size());
  for (std::size_t k = 0; k < clean.size(); ++k) flags[k] = noisy[k] != clean[k] ? 1 : 0;
  return flags;
}

Json report_json(const IntervalNoiseReport& r, double accuracy) {
  Json j = version_stanza();
  j["n_samples"] = r.n_samples;
  j["n_noisy"] = r.n_noisy;
  j["overall_ratio"] = fixed(r.overall_ratio, 6);
  j["label_accuracy"] = fixed(accuracy, 6);
  std::size_t monotone = 0;
  Json classes = Json::array();
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    const auto& cls = r.classes[c];
    monotone += cls.ratio_non_decreasing() ? 1 : 0;
    Json e;
    e["class"] = c;
    e["total"] = cls.total;
    e["noisy"] = cls.noisy;
    e["ratio_non_decreasing"] = cls.ratio_non_decreasing();
    Json cells = Json::array();
    for (std::size_t i = 0; i < kIntervals; ++i) {
      const auto& cell = cls.cells[i];
      Json ce;
      ce["interval"] = i;
      ce["total"] = cell.total;
      ce["noisy"] = cell.noisy;
      ce["ratio"] = fixed(cell.ratio, 6);
      ce["empty"] = cell.empty;
      ce["con_min"] = cell.empty ? Json(nullptr) : fixed(cell.con_min, 6);
      ce["con_max"] = cell.empty ? Json(nullptr) : fixed(cell.con_max, 6);
      cells.push_back(ce);
    }
    e["intervals"] = cells;
    classes.push_back(e);
  }
  j["non_decreasing_classes"] = monotone;
  j["classes"] = classes;
  return j;
}

int cmd_analyze(const RunConfig& cfg) {
  const auto& out = require(cfg.out, "--out");
  const auto& noisy_path = require(cfg.noisy, "--noisy");
  const auto c = class_count(cfg, require(cfg.labels, "--labels"));
  const auto ds = load_dataset(cfg, c);
  LabelVector noisy;
  const auto flags = load_noisy_flags(noisy_path, ds.labels(), noisy);
  const auto profile = concentration_profile(ds, cfg.interval_weights, cfg.threads);
  const auto report = interval_noise_report(ds, flags, profile);
  const double accuracy = overall_accuracy(noisy, ds.labels());
  std::size_t monotone = 0;
  for (const auto& cls : report.classes) monotone += cls.ratio_non_decreasing() ? 1 : 0;
  log()->info("noise ratio {:.6f}; {} of {} classes have non-decreasing interval ratios",
              report.overall_ratio, monotone, c);
  write_json(out, report_json(report, accuracy));
  return kExitOk;
}

int cmd_validate(const RunConfig& cfg) {
  RunConfig run = cfg;
  run.pattern = "rgn";
  const auto spec = make_spec(run);
  const auto c = class_count(cfg, require(cfg.labels, "--labels"));
  validate_spec(spec, c);
  const auto ds = load_dataset(cfg, c);
  const auto subset = load_subset(cfg, c, ds);

  const unsigned threads = std::max(2u, cfg.threads == 0 ? default_threads() : cfg.threads);
  const auto serial = gen_rgn(ds, subset, spec, 1);
  const auto parallel = gen_rgn(ds, subset, spec, threads);
  const auto config = resolved_config(run, spec, c);

  std::vector<std::string> violations;
  if (assignment_csv(serial) != assignment_csv(parallel) ||
      audit_json(config, serial).dump() != audit_json(config, parallel).dump())
    violations.push_back("output differs between 1 and " + std::to_string(threads) + " workers");

  const auto profile = concentration_profile(ds, spec.interval_weights, 1);
  const auto report = interval_noise_report(ds, serial, profile);
  const auto closure = check_closure(report, serial.rgn->budget);
  violations.insert(violations.end(), closure.violations.begin(), closure.violations.end());

  log()->info("closure: {} flips, max rounding gap {:.6f}, max rate deviation {:.6f}",
              report.n_noisy, closure.max_rounding_gap, closure.max_rate_deviation);
  if (cfg.out) {
    Json j = version_stanza();
    j["config"] = config;
    j["ok"] = violations.empty();
    j["violations"] = violations;
    j["max_rounding_gap"] = fixed(closure.max_rounding_gap, 6);
    j["max_rate_deviation"] = fixed(closure.max_rate_deviation, 6);
    j["report"] = report_json(report, 1.0 - report.overall_ratio);
    write_json(*cfg.out, j);
  }
  if (!violations.empty()) {
    for (const auto& v : violations) log()->error("{}", v);
    throw ValidationError(std::to_string(violations.size()) + " closure violation(s)");
  }
  log()->info("validation passed");
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& argv) {
  CLI::App app{"noiseforge: label-noise synthesis for classification datasets", "noiseforge"};
  app.set_version_flag("--version",
                       std::string("noiseforge ") + NOISEFORGE_VERSION + " (RGNF format v" +
                           std::to_string(kFeatureFormatVersion) + ")");
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  FlagOptions o;
  app.add_option("--config", f.config, "JSON config file; flags override its values");
  o.threads = app.add_option("--threads", f.threads, "Worker threads (0 = all cores)");
  app.add_flag("-q,--quiet", f.quiet, "Only log warnings and errors");
  app.add_flag("-v,--verbose", f.verbose, "Debug logging");

  auto add_classes = [&](CLI::App* s) {
    o.classes = s->add_option("--classes", f.classes, "Number of classes (default: max label + 1)");
  };
  auto add_weights = [&](CLI::App* s) {
    o.weights = s->add_option("--interval-weights", f.interval_weights,
                              "Five relative interval widths (default 1 2 4 8 16)")
                    ->expected(5);
  };
  auto add_dataset = [&](CLI::App* s) {
    o.features = s->add_option("--features", f.features, "RGNF feature file");
    o.labels = s->add_option("--labels", f.labels, "index,label CSV");
    add_classes(s);
  };
  auto add_subset = [&](CLI::App* s) {
    o.subset = s->add_option("--subset", f.subset, "index,clean_label,noisy_label CSV");
    o.subset_features = s->add_option(
        "--subset-features", f.subset_features,
        "RGNF features for a self-contained subset (default: index into --features)");
  };
  auto add_rgn = [&](CLI::App* s) {
    o.rho0 = s->add_option("--rho0", f.rho0, "Target overall noise ratio");
    o.mu1 = s->add_option("--mu1", f.mu1, "Weight of the transition-matrix flip row (default 0.1)");
    o.mu2 = s->add_option("--mu2", f.mu2, "Weight of the concentration flip row (default 0.9)");
    o.seed = s->add_option("--seed", f.seed, "RNG seed");
    add_weights(s);
  };

  auto* transition = app.add_subcommand("transition", "Estimate the noise transition matrix of a subset");
  o.subset = transition->add_option("--subset", f.subset, "index,clean_label,noisy_label CSV");
  add_classes(transition);
  o.out = transition->add_option("--out", f.out, "JSON report");

  auto* concentration = app.add_subcommand("concentration", "Per-sample Con_k and interval partition");
  add_dataset(concentration);
  add_weights(concentration);
  concentration->add_option("--out", f.out, "Output (.csv or .json)");

  auto* generate_cmd = app.add_subcommand("generate", "Generate noisy labels");
  o.pattern = generate_cmd->add_option("--pattern", f.pattern, "symm-inc | symm-exc | asym | rgn");
  add_dataset(generate_cmd);
  add_subset(generate_cmd);
  add_rgn(generate_cmd);
  o.tau = generate_cmd->add_option("--tau", f.tau, "Flip rate for symmetric and asymmetric noise");
  o.asym_map = generate_cmd->add_option("--asym-map", f.asym_map, "JSON class map for asym");
  generate_cmd->add_option("--out", f.out, "index,clean_label,noisy_label,flipped CSV");
  o.audit = generate_cmd->add_option("--audit", f.audit, "Audit JSON");

  auto* analyze = app.add_subcommand("analyze", "Per-interval noise statistics of a noisy labeling");
  add_dataset(analyze);
  add_weights(analyze);
  o.noisy = analyze->add_option("--noisy", f.noisy, "Noisy labels (generate output or index,label)");
  analyze->add_option("--out", f.out, "JSON report");

  auto* validate = app.add_subcommand("validate", "Run rgn end to end and check budget closure");
  add_dataset(validate);
  add_subset(validate);
  add_rgn(validate);
  validate->add_option("--out", f.out, "Optional JSON report");

  // Options with the same name on several subcommands: only the parsed
  // subcommand's instance can be set, so look it up after parsing.
  std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n";
    const auto parsed = app.get_subcommands();
    std::cerr << (parsed.empty() ? app.help() : parsed.front()->help());
    return kExitConfig;
  }

  auto* sub = app.get_subcommands().front();
  auto find = [&](const char* name) -> CLI::Option* {
    try {
      return sub->get_option(name);
    } catch (const CLI::OptionNotFound&) {
      return nullptr;
    }
  };
  o.pattern = find("--pattern");
  o.rho0 = find("--rho0");
  o.tau = find("--tau");
  o.mu1 = find("--mu1");
  o.mu2 = find("--mu2");
  o.weights = find("--interval-weights");
  o.seed = find("--seed");
  o.classes = find("--classes");
  o.features = find("--features");
  o.labels = find("--labels");
  o.subset = find("--subset");
  o.subset_features = find("--subset-features");
  o.noisy = find("--noisy");
  o.out = find("--out");
  o.audit = find("--audit");
  o.asym_map = find("--asym-map");

  log()->set_level(f.quiet ? spdlog::level::warn
                           : f.verbose ? spdlog::level::debug : spdlog::level::info);
  try {
    const auto cfg = resolve(f, o);
    const auto& name = sub->get_name();
    if (name == "transition") return cmd_transition(cfg);
    if (name == "concentration") return cmd_concentration(cfg);
    if (name == "generate") return cmd_generate(cfg);
    if (name == "analyze") return cmd_analyze(cfg);
    return cmd_validate(cfg);
  } catch (const Error& e) {
    log()->error("{}", e.what());
    switch (e.kind()) {
      case Error::Kind::config: return kExitConfig;
      case Error::Kind::data: return kExitData;
      case Error::Kind::validation: return kExitValidation;
    }
  } catch (const std::exception& e) {
    log()->error("internal error: {}", e.what());
  }
  return kExitInternal;
}

}  // namespace noiseforge::cli
