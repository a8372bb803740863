#include "kmor/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kmor/csv.hpp"
#include "kmor/errors.hpp"
#include "kmor/gramian.hpp"
#include "kmor/rkhs.hpp"
#include "kmor/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace kmor {

namespace {

// --- strict JSON helpers -------------------------------------------------

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
    }
  }
}

double require_number(const json& j, const std::string& key,
                      const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ConfigError("config: " + where + " needs numeric field '" + key + "'");
  }
  return j.at(key).get<double>();
}

int require_int(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number_integer()) {
    throw ConfigError("config: " + where + " needs integer field '" + key + "'");
  }
  return j.at(key).get<int>();
}

// --- signal parsing ------------------------------------------------------

Signal parse_signal(const json& j, std::uint64_t seed, const std::string& where);

std::vector<Signal> parse_signals(const json& j, int m, std::uint64_t seed,
                                  const std::string& where) {
  std::vector<Signal> out;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(parse_signal(j[i], seed, where));
    }
  } else {
    out.push_back(parse_signal(j, seed, where));
  }
  if (static_cast<int>(out.size()) != m) {
    std::ostringstream msg;
    msg << "config: " << where << " needs " << m << " signal(s), got "
        << out.size();
    throw ConfigError(msg.str());
  }
  return out;
}

Signal parse_signal(const json& j, std::uint64_t seed, const std::string& where) {
  if (!j.is_object() || !j.contains("type")) {
    throw ConfigError("config: " + where + ": signal needs a 'type' field");
  }
  const std::string type = j.at("type").get<std::string>();
  if (type == "zero") {
    reject_unknown_keys(j, {"type"}, where);
    return Signal::zero();
  }
  if (type == "impulse") {
    reject_unknown_keys(j, {"type", "width"}, where);
    return Signal::impulse(require_number(j, "width", where));
  }
  if (type == "square") {
    reject_unknown_keys(j, {"type", "freq_hz", "amplitude", "phase"}, where);
    return Signal::square(require_number(j, "freq_hz", where),
                          j.value("amplitude", 1.0), j.value("phase", 0.0));
  }
  if (type == "sine") {
    reject_unknown_keys(j, {"type", "freq_hz", "amplitude", "phase"}, where);
    return Signal::sine(require_number(j, "freq_hz", where),
                        j.value("amplitude", 1.0), j.value("phase", 0.0));
  }
  if (type == "sum") {
    reject_unknown_keys(j, {"type", "terms"}, where);
    if (!j.contains("terms") || !j.at("terms").is_array()) {
      throw ConfigError("config: " + where + ": sum signal needs 'terms' array");
    }
    std::vector<Signal> terms;
    for (const auto& t : j.at("terms")) terms.push_back(parse_signal(t, seed, where));
    return Signal::sum(std::move(terms));
  }
  if (type == "scaled") {
    reject_unknown_keys(j, {"type", "factor", "signal"}, where);
    if (!j.contains("signal")) {
      throw ConfigError("config: " + where + ": scaled signal needs 'signal'");
    }
    return Signal::scaled(parse_signal(j.at("signal"), seed, where),
                          require_number(j, "factor", where));
  }
  if (type == "uniform-random") {
    reject_unknown_keys(j, {"type", "lo", "hi", "hold", "seed"}, where);
    const std::uint64_t local =
        j.contains("seed") ? j.at("seed").get<std::uint64_t>() : 0;
    return Signal::uniform_random(require_number(j, "lo", where),
                                  require_number(j, "hi", where),
                                  require_number(j, "hold", where),
                                  local + seed);
  }
  throw ConfigError("config: " + where + ": unknown signal type '" + type + "'");
}

// --- kernel parsing ------------------------------------------------------

KernelChoice parse_kernel(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"family", "degree", "offset", "gamma"}, where);
  if (!j.contains("family")) {
    throw ConfigError("config: " + where + ": kernel needs 'family'");
  }
  const std::string family = j.at("family").get<std::string>();
  KernelChoice choice;
  if (family == "linear") {
    choice.spec = KernelSpec::linear();
    return choice;
  }
  if (family == "polynomial") {
    choice.spec = KernelSpec::polynomial(require_int(j, "degree", where),
                                         j.value("offset", 1.0));
    return choice;
  }
  if (family == "gaussian") {
    if (!j.contains("gamma")) {
      throw ConfigError("config: " + where + ": gaussian kernel needs 'gamma'");
    }
    if (j.at("gamma").is_string()) {
      if (j.at("gamma").get<std::string>() != "auto") {
        throw ConfigError("config: " + where + ": gamma must be a number or 'auto'");
      }
      choice.spec = KernelSpec::gaussian(1.0);
      choice.gamma_auto = true;
    } else {
      choice.spec = KernelSpec::gaussian(require_number(j, "gamma", where));
    }
    return choice;
  }
  throw ConfigError("config: " + where + ": unknown kernel family '" + family + "'");
}

// --- system parsing ------------------------------------------------------

std::vector<MonomialTerm> parse_terms(const json& j, int n, int m,
                                      const std::string& where) {
  std::vector<MonomialTerm> terms;
  for (const auto& tj : j) {
    reject_unknown_keys(tj, {"c", "x", "u"}, where);
    MonomialTerm t;
    t.coef = require_number(tj, "c", where);
    t.state_exponents.assign(static_cast<std::size_t>(n), 0);
    if (tj.contains("x")) {
      const auto& xs = tj.at("x");
      if (!xs.is_array() || static_cast<int>(xs.size()) != n) {
        throw ConfigError("config: " + where + ": 'x' must be an array of length n");
      }
      for (int k = 0; k < n; ++k) t.state_exponents[static_cast<std::size_t>(k)] = xs[static_cast<std::size_t>(k)].get<int>();
    }
    if (tj.contains("u")) {
      const auto& us = tj.at("u");
      if (!us.is_array() || static_cast<int>(us.size()) != m) {
        throw ConfigError("config: " + where + ": 'u' must be an array of length m");
      }
      t.input_exponents.assign(static_cast<std::size_t>(m), 0);
      for (int k = 0; k < m; ++k) t.input_exponents[static_cast<std::size_t>(k)] = us[static_cast<std::size_t>(k)].get<int>();
    }
    terms.push_back(std::move(t));
  }
  return terms;
}

ControlSystem parse_system(const json& j) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "benchmark7d") return benchmark_7d();
    throw ConfigError("config: unknown builtin system '" + name + "'");
  }
  reject_unknown_keys(j, {"n", "m", "p", "name", "dynamics", "output"}, "system");
  const int n = require_int(j, "n", "system");
  const int m = require_int(j, "m", "system");
  const int p = require_int(j, "p", "system");
  if (!j.contains("dynamics") || !j.at("dynamics").is_array() ||
      static_cast<int>(j.at("dynamics").size()) != n) {
    throw ConfigError("config: system.dynamics must list terms for each of the n states");
  }
  if (!j.contains("output") || !j.at("output").is_array() ||
      static_cast<int>(j.at("output").size()) != p) {
    throw ConfigError("config: system.output must list terms for each of the p outputs");
  }
  std::vector<std::vector<MonomialTerm>> dynamics, output;
  for (const auto& lst : j.at("dynamics")) {
    dynamics.push_back(parse_terms(lst, n, m, "system.dynamics"));
  }
  for (const auto& lst : j.at("output")) {
    output.push_back(parse_terms(lst, n, 0, "system.output"));
  }
  return make_polynomial_system(n, m, p, dynamics, output,
                                j.value("name", std::string("config-system")));
}

TimeGrid parse_grid(const json& j, const std::string& where) {
  TimeGrid g;
  g.t_final = require_number(j, "t_final", where);
  g.samples = require_int(j, "samples", where);
  g.substeps = j.contains("substeps") ? require_int(j, "substeps", where) : 1;
  g.validate();
  return g;
}

std::vector<double> parse_lambda_grid(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError("config: " + where + ".lambda_grid must be a nonempty array");
  }
  std::vector<double> grid;
  for (const auto& v : j) {
    const double lam = v.get<double>();
    if (!(lam > 0.0)) {
      throw ConfigError("config: " + where + ": every lambda must be > 0");
    }
    grid.push_back(lam);
  }
  return grid;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int e = -10; e <= 2; ++e) grid.push_back(std::pow(10.0, e));
  return grid;
}

// --- artifact names ------------------------------------------------------

constexpr const char* kDataset = "dataset.csv";
constexpr const char* kHankel = "hankel_values.csv";
constexpr const char* kReduction = "reduction.json";
constexpr const char* kFModel = "fmodel.json";
constexpr const char* kHModel = "hmodel.json";
constexpr const char* kLoocvF = "loocv_f.csv";
constexpr const char* kLoocvH = "loocv_h.csv";
constexpr const char* kFullEval = "full_eval.csv";
constexpr const char* kReducedEval = "reduced_eval.csv";
constexpr const char* kComparison = "comparison.csv";
constexpr const char* kMetrics = "metrics.json";
constexpr const char* kSpectrumSvg = "hankel_spectrum.svg";
constexpr const char* kComparisonSvg = "comparison.svg";
constexpr const char* kManifest = "MANIFEST.json";

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

KernelSpec KernelChoice::resolve(const Eigen::MatrixXd& train_inputs) const {
  if (!gamma_auto) return spec;
  KernelSpec out = spec;
  out.gamma = gamma_heuristic(train_inputs);
  return out;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Gramians: return "gramians";
    case Stage::Balance: return "balance";
    case Stage::Learn: return "learn";
    case Stage::Simulate: return "simulate";
    case Stage::Reduce: return "reduce";
    case Stage::Evaluate: return "evaluate";
  }
  return "?";
}

std::string config_fingerprint(const std::string& config_path,
                               std::uint64_t seed) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config: " + config_path);
  std::stringstream buf;
  buf << in.rdbuf();
  char out[32];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a(buf.str(), fnv1a(std::to_string(seed)))));
  return out;
}

PipelineConfig load_config(const std::string& path,
                           std::optional<std::uint64_t> seed_override,
                           std::optional<std::string> out_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: JSON parse error in " + path + ": " + e.what());
  }

  reject_unknown_keys(j,
                      {"spec_version", "seed", "output_dir", "system",
                       "tolerances", "gramian", "balance", "train_f", "train_h",
                       "jacobian", "evaluation"},
                      "top level");

  PipelineConfig cfg;
  cfg.spec_version = j.value("spec_version", 1);
  if (cfg.spec_version != 1) {
    throw ConfigError("config: unsupported spec_version");
  }
  cfg.seed = seed_override.value_or(j.value("seed", 0ULL));
  cfg.output_dir = out_override.value_or(j.value("output_dir", std::string("out")));

  if (!j.contains("system")) throw ConfigError("config: missing 'system'");
  cfg.system = parse_system(j.at("system"));

  if (j.contains("tolerances")) {
    const auto& tj = j.at("tolerances");
    reject_unknown_keys(tj, {"pinv_rtol", "psd_clip", "jitter"}, "tolerances");
    cfg.tol.pinv_rtol = tj.value("pinv_rtol", cfg.tol.pinv_rtol);
    cfg.tol.psd_clip = tj.value("psd_clip", cfg.tol.psd_clip);
    cfg.tol.jitter = tj.value("jitter", cfg.tol.jitter);
    if (cfg.tol.pinv_rtol < 0 || cfg.tol.psd_clip < 0 || cfg.tol.jitter < 0) {
      throw ConfigError("config: tolerances must be nonnegative");
    }
  }

  if (!j.contains("gramian")) throw ConfigError("config: missing 'gramian'");
  {
    const auto& gj = j.at("gramian");
    reject_unknown_keys(gj, {"t_final", "samples", "substeps", "kernel"},
                        "gramian");
    cfg.gramian_grid = parse_grid(gj, "gramian");
    if (!gj.contains("kernel")) {
      throw ConfigError("config: gramian needs a 'kernel'");
    }
    cfg.gramian_kernel = parse_kernel(gj.at("kernel"), "gramian.kernel");
    if (cfg.gramian_kernel.gamma_auto) {
      throw ConfigError("config: gramian kernel gamma must be numeric");
    }
  }

  if (j.contains("balance")) {
    const auto& bj = j.at("balance");
    reject_unknown_keys(bj, {"order", "scaling", "auto_gap_threshold"}, "balance");
    if (bj.contains("order")) {
      if (bj.at("order").is_string()) {
        if (bj.at("order").get<std::string>() != "auto-gap") {
          throw ConfigError("config: balance.order must be an integer or 'auto-gap'");
        }
        cfg.order = 0;
      } else {
        cfg.order = require_int(bj, "order", "balance");
        if (cfg.order < 1) throw ConfigError("config: balance.order must be >= 1");
      }
    }
    cfg.auto_gap_threshold = bj.value("auto_gap_threshold", 10.0);
    const std::string sc = bj.value("scaling", std::string("input-normal"));
    if (sc == "input-normal") {
      cfg.scaling = ReductionScaling::InputNormal;
    } else if (sc == "balanced") {
      cfg.scaling = ReductionScaling::Balanced;
    } else {
      throw ConfigError("config: balance.scaling must be 'input-normal' or 'balanced'");
    }
  }

  auto parse_train = [&](const char* key, StageGrid& sg, KernelChoice& kc,
                         bool& bias, std::vector<double>& grid) {
    if (!j.contains(key)) throw ConfigError(std::string("config: missing '") + key + "'");
    const auto& tj = j.at(key);
    reject_unknown_keys(tj,
                        {"t_final", "samples", "substeps", "signal", "kernel",
                         "bias", "lambda_grid"},
                        key);
    sg.grid = parse_grid(tj, key);
    if (!tj.contains("signal")) {
      throw ConfigError(std::string("config: ") + key + " needs a 'signal'");
    }
    sg.signals = parse_signals(tj.at("signal"), cfg.system.m, cfg.seed, key);
    if (!tj.contains("kernel")) {
      throw ConfigError(std::string("config: ") + key + " needs a 'kernel'");
    }
    kc = parse_kernel(tj.at("kernel"), std::string(key) + ".kernel");
    bias = tj.value("bias", true);
    grid = tj.contains("lambda_grid")
               ? parse_lambda_grid(tj.at("lambda_grid"), key)
               : default_lambda_grid();
  };
  parse_train("train_f", cfg.train_f, cfg.f_kernel, cfg.f_bias, cfg.f_lambda_grid);
  parse_train("train_h", cfg.train_h, cfg.h_kernel, cfg.h_bias, cfg.h_lambda_grid);

  if (j.contains("jacobian")) {
    const auto& jj = j.at("jacobian");
    reject_unknown_keys(
        jj, {"mode", "refresh_every", "clamp_negative", "expansion_point"},
        "jacobian");
    const std::string mode = jj.value("mode", std::string("taylor"));
    if (mode == "taylor") {
      cfg.jmode.kind = JacobianMode::Kind::TaylorInverse;
    } else if (mode == "kernel-property") {
      cfg.jmode.kind = JacobianMode::Kind::KernelProperty;
    } else {
      throw ConfigError("config: jacobian.mode must be 'taylor' or 'kernel-property'");
    }
    cfg.jmode.refresh_every = jj.value("refresh_every", 0);
    if (cfg.jmode.refresh_every < 0) {
      throw ConfigError("config: jacobian.refresh_every must be >= 0");
    }
    cfg.jmode.clamp_negative = jj.value("clamp_negative", false);
    if (jj.contains("expansion_point")) {
      const auto& a = jj.at("expansion_point");
      if (!a.is_array() || static_cast<int>(a.size()) != cfg.system.n) {
        throw ConfigError("config: jacobian.expansion_point must have length n");
      }
      cfg.jmode.expansion_point.resize(cfg.system.n);
      for (int k = 0; k < cfg.system.n; ++k) {
        cfg.jmode.expansion_point(k) = a[static_cast<std::size_t>(k)].get<double>();
      }
    }
  }

  if (!j.contains("evaluation")) throw ConfigError("config: missing 'evaluation'");
  {
    const auto& ej = j.at("evaluation");
    reject_unknown_keys(ej, {"t_final", "samples", "substeps", "signal"},
                        "evaluation");
    cfg.evaluation.grid = parse_grid(ej, "evaluation");
    if (!ej.contains("signal")) {
      throw ConfigError("config: evaluation needs a 'signal'");
    }
    cfg.evaluation.signals =
        parse_signals(ej.at("signal"), cfg.system.m, cfg.seed, "evaluation");
  }

  return cfg;
}

Signal signal_from_json_file(const std::string& path, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open signal file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("signal file: JSON parse error: " + std::string(e.what()));
  }
  if (j.is_object() && j.contains("signal")) j = j.at("signal");
  return parse_signal(j, seed, "signal file");
}

// --- pipeline ------------------------------------------------------------

Pipeline::Pipeline(PipelineConfig cfg, std::string config_path)
    : cfg_(std::move(cfg)), config_path_(std::move(config_path)) {
  fingerprint_ = config_fingerprint(config_path_, cfg_.seed);
  fs::create_directories(cfg_.output_dir);
}

std::string Pipeline::artifact_path(const std::string& name) const {
  return (fs::path(cfg_.output_dir) / name).string();
}

void Pipeline::override_evaluation_signal(Signal s) {
  cfg_.evaluation.signals.assign(static_cast<std::size_t>(cfg_.system.m), Signal::zero());
  if (cfg_.system.m != 1) {
    throw ConfigError("--input override currently supports single-input systems");
  }
  cfg_.evaluation.signals[0] = std::move(s);
  // The override changes what evaluate produces; fold it into the
  // fingerprint so stale checks stay honest.
  fingerprint_ += "+input-override";
}

void Pipeline::require_artifact(const std::string& name,
                                const char* produced_by) const {
  const fs::path p = artifact_path(name);
  if (!fs::exists(p)) {
    throw ConfigError("missing artifact '" + p.string() +
                      "'; run `kernel-mor " + produced_by + "` first");
  }
  if (fs::exists(config_path_) &&
      fs::last_write_time(p) < fs::last_write_time(config_path_)) {
    throw ConfigError("artifact '" + p.string() +
                      "' is older than the config; rerun `kernel-mor " +
                      produced_by + "`");
  }
}

void Pipeline::record_stage(Stage s, const StageResult& r) {
  const std::string path = artifact_path(kManifest);
  json manifest;
  if (fs::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    try {
      in >> manifest;
    } catch (...) {
      manifest = json::object();
    }
  }
  manifest["kind"] = "kernel-mor-manifest";
  manifest["config_fingerprint"] = fingerprint_;
  manifest["seed"] = cfg_.seed;
  json stage;
  stage["completed"] = true;
  stage["artifacts"] = r.artifacts;
  stage["timestamp"] = static_cast<long long>(
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
  manifest["stages"][stage_name(s)] = stage;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
}

GramianDataset Pipeline::load_dataset() const {
  require_artifact(kDataset, "gramians");
  return read_dataset_csv(artifact_path(kDataset));
}

BalancedReduction Pipeline::load_reduction() const {
  require_artifact(kReduction, "balance");
  return read_reduction_bundle(artifact_path(kReduction));
}

ReducedSystem Pipeline::load_reduced_system() const {
  require_artifact(kFModel, "learn");
  require_artifact(kHModel, "learn");
  ReducedSystem rs;
  rs.br = load_reduction();
  rs.fhat = read_model_bundle(artifact_path(kFModel));
  rs.hhat = read_model_bundle(artifact_path(kHModel));
  rs.jmode = cfg_.jmode;
  if (rs.jmode.kind == JacobianMode::Kind::TaylorInverse &&
      rs.jmode.expansion_point.size() == 0) {
    rs.jmode.expansion_point = Eigen::VectorXd::Zero(cfg_.system.n);
  }
  rs.tol = cfg_.tol;
  return rs;
}

StageResult Pipeline::stage_gramians() {
  const GramianDataset ds = collect(cfg_.system, cfg_.gramian_grid);
  write_dataset_csv(ds, artifact_path(kDataset));
  StageResult r{{artifact_path(kDataset)}};
  record_stage(Stage::Gramians, r);
  return r;
}

StageResult Pipeline::stage_balance() {
  const GramianDataset ds = load_dataset();
  const KernelSpec kernel = cfg_.gramian_kernel.spec;
  const Eigen::MatrixXd Kc = gram_matrix(kernel, ds.ctrl);
  const Eigen::MatrixXd Ko = gram_matrix(kernel, ds.obs);
  const KernelBalance kb =
      kernel_balance(Kc, Ko, ds.ctrl_scale(), ds.obs_scale(), cfg_.tol);

  int q = cfg_.order;
  if (q == 0) q = auto_gap_order(kb.sigma, cfg_.auto_gap_threshold);
  if (q > kb.sigma.size()) {
    std::ostringstream msg;
    msg << "config: balance.order = " << q << " exceeds the numerical rank "
        << kb.sigma.size();
    throw ConfigError(msg.str());
  }

  // Printed summary: spectrum and gap ratios.
  const Eigen::VectorXd ratios = sigma_gap_ratios(kb.sigma);
  std::cout << "Hankel spectrum (rank " << kb.sigma.size() << ", q = " << q
            << "):\n";
  for (Eigen::Index i = 0; i < kb.sigma.size(); ++i) {
    std::cout << "  sigma_" << (i + 1) << " = " << format_double(kb.sigma(i));
    if (i < ratios.size()) {
      std::cout << "   gap to next = " << format_double(ratios(i));
    }
    std::cout << '\n';
  }

  {
    CsvWriter w(artifact_path(kHankel));
    w.header({"index", "value"});
    for (Eigen::Index i = 0; i < kb.sigma.size(); ++i) {
      w.begin_row();
      w.field(static_cast<long>(i + 1));
      w.field(kb.sigma(i));
      w.end_row();
    }
  }

  EmpiricalFeatureMap fmap(kernel, ds.ctrl);
  const BalancedReduction br =
      truncate(fmap, kb, Kc, q, ds.ctrl_scale(), cfg_.scaling);
  write_reduction_bundle(br, artifact_path(kReduction));

  // Log-scale spectrum plot; zero values are omitted by the log scale.
  SvgSeries s;
  s.label = "sigma_k";
  s.color = "#d62728";
  s.markers = true;
  s.x.resize(kb.sigma.size());
  s.y = kb.sigma;
  for (Eigen::Index i = 0; i < kb.sigma.size(); ++i) s.x(i) = static_cast<double>(i + 1);
  SvgPlotOptions opt;
  opt.title = "Hankel singular values";
  opt.x_label = "index";
  opt.y_label = "sigma";
  opt.log_y = true;
  write_svg_plot(artifact_path(kSpectrumSvg), {s}, opt);

  StageResult r{{artifact_path(kHankel), artifact_path(kReduction),
                 artifact_path(kSpectrumSvg)}};
  record_stage(Stage::Balance, r);
  return r;
}

namespace {

void write_loocv_csv(const std::string& path, const std::vector<double>& grid,
                     const std::vector<double>& errors, double chosen) {
  CsvWriter w(path);
  w.header({"lambda", "loocv_error", "selected"});
  for (std::size_t i = 0; i < grid.size(); ++i) {
    w.begin_row();
    w.field(grid[i]);
    w.field(errors[i]);
    w.field(static_cast<long>(grid[i] == chosen ? 1 : 0));
    w.end_row();
  }
}

}  // namespace

StageResult Pipeline::stage_learn() {
  const BalancedReduction br = load_reduction();
  const int q = br.order();
  const int m = cfg_.system.m;

  // --- f-hat: inputs (Pi(x), u), targets f(x, u) along the training run
  const Trajectory traj_f =
      integrate(cfg_.system, Eigen::VectorXd::Zero(cfg_.system.n),
                cfg_.train_f.signals, cfg_.train_f.grid);
  const int Nf = cfg_.train_f.grid.samples;
  Eigen::MatrixXd zf(q + m, Nf);
  Eigen::MatrixXd yf(cfg_.system.n, Nf);
  for (int i = 0; i < Nf; ++i) {
    zf.col(i).head(q) = br.reduce(traj_f.states.col(i));
    zf.col(i).tail(m) = traj_f.inputs.col(i);
    yf.col(i) = cfg_.system.f(traj_f.states.col(i), traj_f.inputs.col(i));
  }
  const RegressionDataset ds_f = make_regression_dataset(zf, yf, cfg_.f_bias);
  const KernelSpec f_kernel = cfg_.f_kernel.resolve(ds_f.inputs);
  std::vector<double> f_errors;
  const double f_lambda =
      select_lambda(ds_f, f_kernel, cfg_.f_lambda_grid, &f_errors);
  const RKHSModel fhat = rls_fit(ds_f, f_kernel, f_lambda);
  write_model_bundle(fhat, artifact_path(kFModel));
  write_loocv_csv(artifact_path(kLoocvF), cfg_.f_lambda_grid, f_errors, f_lambda);
  std::cout << "f-model: kernel " << f_kernel.describe() << ", lambda = "
            << format_double(f_lambda) << '\n';

  // --- h-hat: inputs Pi(x), targets y along its own training run
  const Trajectory traj_h =
      integrate(cfg_.system, Eigen::VectorXd::Zero(cfg_.system.n),
                cfg_.train_h.signals, cfg_.train_h.grid);
  const int Nh = cfg_.train_h.grid.samples;
  Eigen::MatrixXd zh(q, Nh);
  for (int i = 0; i < Nh; ++i) zh.col(i) = br.reduce(traj_h.states.col(i));
  const RegressionDataset ds_h =
      make_regression_dataset(zh, traj_h.outputs, cfg_.h_bias);
  const KernelSpec h_kernel = cfg_.h_kernel.resolve(ds_h.inputs);
  std::vector<double> h_errors;
  const double h_lambda =
      select_lambda(ds_h, h_kernel, cfg_.h_lambda_grid, &h_errors);
  const RKHSModel hhat = rls_fit(ds_h, h_kernel, h_lambda);
  write_model_bundle(hhat, artifact_path(kHModel));
  write_loocv_csv(artifact_path(kLoocvH), cfg_.h_lambda_grid, h_errors, h_lambda);
  std::cout << "h-model: kernel " << h_kernel.describe() << ", lambda = "
            << format_double(h_lambda) << '\n';

  StageResult r{{artifact_path(kFModel), artifact_path(kLoocvF),
                 artifact_path(kHModel), artifact_path(kLoocvH)}};
  record_stage(Stage::Learn, r);
  return r;
}

namespace {

void write_trajectory_csv(const std::string& path, const Eigen::VectorXd& t,
                          const Eigen::MatrixXd& u, const Eigen::MatrixXd& y,
                          const char* y_prefix,
                          const Eigen::MatrixXd* states = nullptr,
                          const char* state_prefix = "xr") {
  CsvWriter w(path);
  std::vector<std::string> names = {"t"};
  for (Eigen::Index c = 0; c < u.rows(); ++c) names.push_back("u" + std::to_string(c + 1));
  if (states != nullptr) {
    for (Eigen::Index c = 0; c < states->rows(); ++c) {
      names.push_back(std::string(state_prefix) + std::to_string(c + 1));
    }
  }
  for (Eigen::Index c = 0; c < y.rows(); ++c) {
    names.push_back(std::string(y_prefix) + std::to_string(c + 1));
  }
  w.header(names);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    w.begin_row();
    w.field(t(i));
    for (Eigen::Index c = 0; c < u.rows(); ++c) w.field(u(c, i));
    if (states != nullptr) {
      for (Eigen::Index c = 0; c < states->rows(); ++c) w.field((*states)(c, i));
    }
    for (Eigen::Index c = 0; c < y.rows(); ++c) w.field(y(c, i));
    w.end_row();
  }
}

}  // namespace

StageResult Pipeline::stage_simulate() {
  const Trajectory traj =
      integrate(cfg_.system, Eigen::VectorXd::Zero(cfg_.system.n),
                cfg_.evaluation.signals, cfg_.evaluation.grid);
  write_trajectory_csv(artifact_path(kFullEval), traj.times, traj.inputs,
                       traj.outputs, "y");
  StageResult r{{artifact_path(kFullEval)}};
  record_stage(Stage::Simulate, r);
  return r;
}

StageResult Pipeline::stage_reduce() {
  const ReducedSystem rs = load_reduced_system();
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(cfg_.system.n);
  const Eigen::VectorXd xr0 = rs.br.reduce(x0);
  const ReducedTrajectory traj =
      simulate_reduced(rs, xr0, cfg_.evaluation.signals, cfg_.evaluation.grid);
  write_trajectory_csv(artifact_path(kReducedEval), traj.times, traj.inputs,
                       traj.outputs, "yhat", &traj.states);
  StageResult r{{artifact_path(kReducedEval)}};
  record_stage(Stage::Reduce, r);
  return r;
}

StageResult Pipeline::stage_evaluate() {
  require_artifact(kFullEval, "simulate");
  require_artifact(kReducedEval, "reduce");
  const CsvTable full = read_csv(artifact_path(kFullEval));
  const CsvTable red = read_csv(artifact_path(kReducedEval));
  if (full.rows.size() != red.rows.size()) {
    throw NumericError("evaluate: full and reduced runs have different grids");
  }
  const int p = cfg_.system.p;
  const int m = cfg_.system.m;
  const Eigen::Index N = static_cast<Eigen::Index>(full.rows.size());
  Eigen::VectorXd t(N);
  Eigen::MatrixXd u(m, N), y(p, N), yhat(p, N);
  const int yc = full.column("y1");
  const int yhc = red.column("yhat1");
  if (yc < 0 || yhc < 0) {
    throw NumericError("evaluate: unexpected artifact layout");
  }
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& fr = full.rows[static_cast<std::size_t>(i)];
    const auto& rr = red.rows[static_cast<std::size_t>(i)];
    t(i) = parse_double(fr[0]);
    for (int c = 0; c < m; ++c) u(c, i) = parse_double(fr[static_cast<std::size_t>(1 + c)]);
    for (int c = 0; c < p; ++c) {
      y(c, i) = parse_double(fr[static_cast<std::size_t>(yc + c)]);
      yhat(c, i) = parse_double(rr[static_cast<std::size_t>(yhc + c)]);
    }
  }

  const ComparisonMetrics mtr = compare(y, yhat);
  {
    CsvWriter w(artifact_path(kComparison));
    std::vector<std::string> names = {"t"};
    for (int c = 0; c < m; ++c) names.push_back("u" + std::to_string(c + 1));
    for (int c = 0; c < p; ++c) names.push_back("y" + std::to_string(c + 1));
    for (int c = 0; c < p; ++c) names.push_back("yhat" + std::to_string(c + 1));
    w.header(names);
    for (Eigen::Index i = 0; i < N; ++i) {
      w.begin_row();
      w.field(t(i));
      for (int c = 0; c < m; ++c) w.field(u(c, i));
      for (int c = 0; c < p; ++c) w.field(y(c, i));
      for (int c = 0; c < p; ++c) w.field(yhat(c, i));
      w.end_row();
    }
  }
  {
    json mj;
    mj["rmse"] = mtr.rmse;
    mj["relative_l2"] = mtr.relative_l2;
    mj["max_abs_err"] = mtr.max_abs_err;
    std::ofstream out(artifact_path(kMetrics), std::ios::binary | std::ios::trunc);
    out << mj.dump(2) << '\n';
  }

  std::vector<SvgSeries> series;
  {
    SvgSeries su;
    su.label = "u";
    su.color = "#999999";
    su.width = 0.9;
    su.x = t;
    su.y = u.row(0);
    series.push_back(su);
    SvgSeries sy;
    sy.label = "y";
    sy.color = "#1f77b4";
    sy.x = t;
    sy.y = y.row(0);
    series.push_back(sy);
    SvgSeries sh;
    sh.label = "yhat";
    sh.color = "#d62728";
    sh.x = t;
    sh.y = yhat.row(0);
    series.push_back(sh);
  }
  SvgPlotOptions opt;
  opt.title = "Original vs reduced output";
  opt.x_label = "t [s]";
  opt.y_label = "output";
  write_svg_plot(artifact_path(kComparisonSvg), series, opt);

  std::cout << "relative_l2 = " << format_double(mtr.relative_l2)
            << ", rmse = " << format_double(mtr.rmse)
            << ", max_abs_err = " << format_double(mtr.max_abs_err) << '\n';

  StageResult r{{artifact_path(kComparison), artifact_path(kMetrics),
                 artifact_path(kComparisonSvg)}};
  record_stage(Stage::Evaluate, r);
  return r;
}

StageResult Pipeline::run_stage(Stage s) {
  switch (s) {
    case Stage::Gramians: return stage_gramians();
    case Stage::Balance: return stage_balance();
    case Stage::Learn: return stage_learn();
    case Stage::Simulate: return stage_simulate();
    case Stage::Reduce: return stage_reduce();
    case Stage::Evaluate: return stage_evaluate();
  }
  throw ConfigError("unknown stage");
}

std::string Pipeline::run_all() {
  for (Stage s : {Stage::Gramians, Stage::Balance, Stage::Learn,
                  Stage::Simulate, Stage::Reduce, Stage::Evaluate}) {
    std::cout << "[" << stage_name(s) << "]\n";
    run_stage(s);
  }
  return cfg_.output_dir;
}

}  // namespace kmor
