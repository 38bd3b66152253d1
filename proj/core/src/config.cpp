#include "msna/harness.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace msna {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  size_t b = s.find_last_not_of(" \t");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

double resolve_factor(const std::string& token, double d, double b, double n0) {
  const std::string t = trim(token);
  if (t.empty()) throw std::invalid_argument("resolve_scalar: empty factor");
  if (t == "d") return d;
  if (t == "b") return b;
  if (t == "n0") return n0;
  if (t == "sqrt(d)") return std::sqrt(d);
  if (t == "sqrt(b)") return std::sqrt(b);
  const auto caret = t.find('^');
  if (caret != std::string::npos) {
    const std::string base = trim(t.substr(0, caret));
    const std::string exp_str = trim(t.substr(caret + 1));
    double base_val = 0.0;
    if (base == "d")
      base_val = d;
    else if (base == "b")
      base_val = b;
    else if (base == "n0")
      base_val = n0;
    else
      throw std::invalid_argument("resolve_scalar: unknown base '" + base + "'");
    try {
      return std::pow(base_val, std::stod(exp_str));
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("resolve_scalar: bad exponent '" + exp_str + "'");
    }
  }
  try {
    size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size())
      throw std::invalid_argument("resolve_scalar: trailing characters in '" + t + "'");
    return v;
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("resolve_scalar: cannot parse '" + t + "'");
  }
}

}  // namespace

double resolve_scalar(const std::string& expr, double d, double b, double n0) {
  double value = 1.0;
  size_t start = 0;
  bool any = false;
  while (start <= expr.size()) {
    const size_t star = expr.find('*', start);
    const std::string token =
        star == std::string::npos ? expr.substr(start) : expr.substr(start, star - start);
    value *= resolve_factor(token, d, b, n0);
    any = true;
    if (star == std::string::npos) break;
    start = star + 1;
  }
  if (!any) throw std::invalid_argument("resolve_scalar: empty expression");
  return value;
}

int resolve_mask_size(const std::string& expr, int d) {
  const double raw = resolve_scalar(expr, d, 0.0, 0.0);
  long rounded = std::lround(raw);
  if (rounded < 1) rounded = 1;
  if (rounded > d) rounded = d;
  return static_cast<int>(rounded);
}

StepSchedule ScheduleSpec::resolve(double d, double b, double n0) const {
  return StepSchedule(exponent, resolve_scalar(scale, d, b, n0),
                      resolve_scalar(shift, d, b, n0));
}

namespace {

std::string scalar_field(const json& j, const std::string& key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) {
    std::ostringstream out;
    out.precision(17);
    out << v.get<double>();
    return out.str();
  }
  throw std::invalid_argument("config: field '" + key + "' must be a number or expression string");
}

ScheduleSpec parse_schedule(const json& j, const ScheduleSpec& defaults) {
  ScheduleSpec spec = defaults;
  spec.exponent = j.value("exponent", defaults.exponent);
  spec.scale = scalar_field(j, "scale", defaults.scale);
  spec.shift = scalar_field(j, "shift", defaults.shift);
  return spec;
}

OptimizerKind parse_kind(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "averaged_sgd" || s == "sgd_avg") return OptimizerKind::averaged_sgd;
  if (s == "msna") return OptimizerKind::msna;
  if (s == "averaged_msna" || s == "msna_avg") return OptimizerKind::averaged_msna;
  throw std::invalid_argument("config: unknown optimizer kind '" + s + "'");
}

ProblemKind parse_problem(const std::string& s) {
  if (s == "linear") return ProblemKind::linear;
  if (s == "logistic") return ProblemKind::logistic;
  if (s == "ridge_logistic") return ProblemKind::ridge_logistic;
  throw std::invalid_argument("config: unknown problem kind '" + s + "'");
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, bool paper_scale) {
  json j = json::parse(json_text);
  if (paper_scale && j.contains("paper_scale")) {
    json patch = j.at("paper_scale");
    j.erase("paper_scale");
    j.merge_patch(patch);
  } else if (j.contains("paper_scale")) {
    j.erase("paper_scale");
  }

  RunConfig cfg;
  cfg.name = j.value("name", cfg.name);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.replications = j.value("replications", cfg.replications);
  cfg.checkpoints = j.value("checkpoints", cfg.checkpoints);
  cfg.samples = j.value("samples", cfg.samples);
  cfg.batch = scalar_field(j, "batch", cfg.batch);
  cfg.n0 = scalar_field(j, "n0", cfg.n0);
  cfg.workers = j.value("workers", cfg.workers);
  cfg.test_samples = j.value("test_samples", cfg.test_samples);
  cfg.mc_samples = j.value("mc_samples", cfg.mc_samples);
  cfg.table_mode = j.value("mode", std::string("curves")) == "table";
  cfg.export_snapshots = j.value("export_snapshots", cfg.export_snapshots);
  cfg.out_dir = j.value("out", cfg.out_dir);

  if (j.contains("problem")) {
    const auto& p = j.at("problem");
    cfg.problem = parse_problem(p.value("kind", std::string("linear")));
    cfg.ridge_lambda = p.value("ridge_lambda", 0.0);
  }

  if (j.contains("warm_start")) {
    const auto& w = j.at("warm_start");
    cfg.warm_start_iterate = w.value("iterate", false);
    cfg.warm_start_estimate = w.value("estimate", false);
  }

  if (!j.contains("data")) throw std::invalid_argument("config: missing 'data' section");
  const auto& data = j.at("data");
  if (data.contains("synthetic")) {
    const auto& s = data.at("synthetic");
    SyntheticSpec spec;
    spec.dim = s.value("dim", spec.dim);
    spec.eigen_min = s.value("eigen_min", spec.eigen_min);
    spec.eigen_max = s.value("eigen_max", spec.eigen_max);
    spec.noise_sigma = s.value("noise_sigma", spec.noise_sigma);
    cfg.synthetic = spec;
  } else if (data.contains("dataset")) {
    const auto& ds = data.at("dataset");
    DatasetSpec spec;
    spec.path = ds.at("path").get<std::string>();
    const std::string fmt = ds.value("format", std::string("csv"));
    if (fmt == "csv")
      spec.options.format = DatasetFormat::csv;
    else if (fmt == "libsvm")
      spec.options.format = DatasetFormat::libsvm;
    else
      throw std::invalid_argument("config: unknown dataset format '" + fmt + "'");
    spec.options.label_column = ds.value("label_column", spec.options.label_column);
    spec.options.has_header = ds.value("header", spec.options.has_header);
    spec.options.standardize = ds.value("standardize", spec.options.standardize);
    spec.options.intercept = ds.value("intercept", spec.options.intercept);
    spec.options.test_fraction = ds.value("test_fraction", spec.options.test_fraction);
    spec.options.init_fraction = ds.value("init_fraction", spec.options.init_fraction);
    if (ds.contains("dim")) spec.options.dim = ds.at("dim").get<int>();
    cfg.dataset = spec;
  } else {
    throw std::invalid_argument("config: 'data' needs a 'synthetic' or 'dataset' entry");
  }

  if (!j.contains("optimizers") || !j.at("optimizers").is_array() || j.at("optimizers").empty())
    throw std::invalid_argument("config: missing or empty 'optimizers' list");
  for (const auto& o : j.at("optimizers")) {
    OptimizerSpec spec;
    spec.kind = parse_kind(o.value("kind", std::string("sgd")));
    spec.name = o.value("name", to_string(spec.kind));
    spec.step = parse_schedule(o.value("step", json::object()), spec.step);
    spec.gain = parse_schedule(o.value("gain", json::object()), spec.gain);
    spec.mask = scalar_field(o, "mask", spec.mask);
    spec.nu = o.value("nu", spec.nu);
    spec.tau = o.value("tau", spec.tau);
    const std::string query = o.value("hessian_query", std::string("current"));
    if (query == "current")
      spec.query_point = HessianQueryPoint::current;
    else if (query == "averaged")
      spec.query_point = HessianQueryPoint::averaged;
    else
      throw std::invalid_argument("config: unknown hessian_query '" + query + "'");
    const std::string gate = o.value("gate_norm", std::string("exact"));
    if (gate == "exact")
      spec.gate_norm = GateNorm::exact;
    else if (gate == "frobenius")
      spec.gate_norm = GateNorm::frobenius_bound;
    else
      throw std::invalid_argument("config: unknown gate_norm '" + gate + "'");
    spec.average_estimate = o.value("average_estimate", false);
    cfg.optimizers.push_back(std::move(spec));
  }

  if (cfg.replications < 1) throw std::invalid_argument("config: replications must be >= 1");
  if (cfg.synthetic && cfg.samples < 1)
    throw std::invalid_argument("config: synthetic data needs a positive 'samples'");
  return cfg;
}

RunConfig load_run_config(const std::string& path, bool paper_scale) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_run_config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), paper_scale);
}

}  // namespace msna
