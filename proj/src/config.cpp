#include "itolab/config.hpp"

#include "itolab/errors.hpp"
#include "itolab/io.hpp"

#include <yaml-cpp/yaml.h>

#include <functional>
#include <map>

namespace itolab {

namespace {

template <typename T>
T scalar(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigurationError("config key '" + key + "' must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigurationError("config key '" + key + "' has a malformed value '" + n.Scalar() + "'");
  }
}

template <typename T>
std::vector<T> list(const YAML::Node& n, const std::string& key) {
  if (n.IsScalar()) return {scalar<T>(n, key)};
  if (!n.IsSequence()) throw ConfigurationError("config key '" + key + "' must be a list");
  std::vector<T> out;
  for (const auto& item : n) out.push_back(scalar<T>(item, key));
  return out;
}

template <typename E>
E parse_enum(const YAML::Node& n, const std::string& key, E (*parse)(const std::string&)) {
  const auto text = scalar<std::string>(n, key);
  try {
    return parse(text);
  } catch (const InputError& err) {
    throw ConfigurationError("config key '" + key + "': " + err.what());
  }
}

std::string one_of(const YAML::Node& n, const std::string& key, std::initializer_list<const char*> allowed) {
  const auto v = scalar<std::string>(n, key);
  for (const char* a : allowed) {
    if (v == a) return v;
  }
  throw ConfigurationError("config key '" + key + "' has unsupported value '" + v + "'");
}


}  // namespace

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& err) {
    throw ConfigurationError(std::string("config is not valid YAML: ") + err.what());
  }
  ExperimentConfig cfg;
  if (root.IsNull()) return cfg;
  if (!root.IsMap()) throw ConfigurationError("config must be a mapping of keys to values");

  using Setter = std::function<void(const YAML::Node&, const std::string&)>;
  ProblemParams& p = cfg.problem;
  const std::map<std::string, Setter> setters = {
      {"preset", [&](auto& n, auto& k) { cfg.preset = parse_enum<Preset>(n, k, parse_preset); }},
      {"problem", [&](auto& n, auto& k) { p.problem = parse_enum<Problem>(n, k, parse_problem); }},
      {"dim", [&](auto& n, auto& k) { p.dim = scalar<int>(n, k); }},
      {"curvature", [&](auto& n, auto& k) { p.curvature = list<double>(n, k); }},
      {"tau", [&](auto& n, auto& k) { p.tau = scalar<double>(n, k); }},
      {"cov_scale", [&](auto& n, auto& k) { p.cov_scale = scalar<double>(n, k); }},
      {"noise", [&](auto& n, auto& k) { p.noise = parse_enum<NoiseKind>(n, k, parse_noise_kind); }},
      {"noise_rotation", [&](auto& n, auto& k) { p.noise_rotation = scalar<bool>(n, k); }},
      {"projection_rotation", [&](auto& n, auto& k) { p.projection_rotation = scalar<bool>(n, k); }},
      {"double_well_radius", [&](auto& n, auto& k) { p.double_well_radius = scalar<double>(n, k); }},
      {"sa_shift", [&](auto& n, auto& k) { p.sa_shift = scalar<double>(n, k); }},
      {"contraction", [&](auto& n, auto& k) { p.contraction = scalar<double>(n, k); }},
      {"x0", [&](auto& n, auto& k) { p.x0 = list<double>(n, k); }},
      {"problem_seed", [&](auto& n, auto& k) { p.problem_seed = scalar<std::uint64_t>(n, k); }},
      {"eta", [&](auto& n, auto& k) { p.eta = scalar<double>(n, k); }},
      {"eta_grid", [&](auto& n, auto& k) { cfg.eta_grid = list<double>(n, k); }},
      {"horizon_t", [&](auto& n, auto& k) { cfg.horizon_t = scalar<double>(n, k); }},
      {"n_traj", [&](auto& n, auto& k) { cfg.n_traj = scalar<int>(n, k); }},
      {"n_repeats", [&](auto& n, auto& k) { cfg.n_repeats = scalar<int>(n, k); }},
      {"refinement", [&](auto& n, auto& k) { cfg.refinement = scalar<int>(n, k); }},
      {"cascade_refinement", [&](auto& n, auto& k) { cfg.cascade_refinement = scalar<int>(n, k); }},
      {"seed", [&](auto& n, auto& k) { cfg.seed = scalar<std::uint64_t>(n, k); }},
      {"out_dir", [&](auto& n, auto& k) { cfg.out_dir = scalar<std::string>(n, k); }},
      {"s_policy", [&](auto& n, auto& k) { cfg.s_policy = one_of(n, k, {"corollary", "explicit"}); }},
      {"s_batch", [&](auto& n, auto& k) { cfg.s_batch = scalar<int>(n, k); }},
      {"l_policy", [&](auto& n, auto& k) { cfg.l_policy = one_of(n, k, {"auto", "explicit"}); }},
      {"l_window", [&](auto& n, auto& k) { cfg.l_window = scalar<double>(n, k); }},
      {"l1_corrector", [&](auto& n, auto& k) { cfg.l1_corrector = scalar<double>(n, k); }},
      {"m0", [&](auto& n, auto& k) { cfg.m0 = scalar<double>(n, k); }},
      {"m1", [&](auto& n, auto& k) { cfg.m1 = scalar<double>(n, k); }},
      {"m_eps", [&](auto& n, auto& k) { cfg.m_eps = scalar<double>(n, k); }},
      {"sigma0", [&](auto& n, auto& k) { cfg.sigma0 = scalar<double>(n, k); }},
      {"sigma1", [&](auto& n, auto& k) { cfg.sigma1 = scalar<double>(n, k); }},
      {"alpha", [&](auto& n, auto& k) { cfg.alpha = scalar<double>(n, k); }},
      {"beta", [&](auto& n, auto& k) { cfg.beta = scalar<double>(n, k); }},
      {"b0", [&](auto& n, auto& k) { cfg.b0 = scalar<double>(n, k); }},
      {"synthetic_coeff", [&](auto& n, auto& k) { cfg.synthetic_coeff = scalar<double>(n, k); }},
      {"synthetic_exponent", [&](auto& n, auto& k) { cfg.synthetic_exponent = scalar<double>(n, k); }},
      {"n_clt", [&](auto& n, auto& k) { cfg.n_clt = scalar<int>(n, k); }},
      {"clt_batches", [&](auto& n, auto& k) { cfg.clt_batches = list<int>(n, k); }},
  };
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigurationError("unknown config key '" + key + "'");
    it->second(kv.second, key);
  }

  if (cfg.synthetic_coeff.has_value() != cfg.synthetic_exponent.has_value()) {
    throw ConfigurationError("synthetic_coeff and synthetic_exponent must be given together");
  }
  if (cfg.s_policy == "explicit" && cfg.s_batch < 1) {
    throw ConfigurationError("s_policy explicit needs s_batch >= 1");
  }
  if (cfg.l_policy == "explicit" && !(cfg.l_window > 0.0)) {
    throw ConfigurationError("l_policy explicit needs l_window > 0");
  }
  if (cfg.n_traj < 1) throw ConfigurationError("n_traj must be >= 1");
  for (int s : cfg.clt_batches) {
    if (s < 1) throw ConfigurationError("clt_batches entries must be >= 1");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const InputError&) {
    throw ConfigurationError("cannot read config file " + path.string());
  }
  return parse_config(text);
}

ChainSpec build_chain(const ExperimentConfig& cfg, double eta) {
  ProblemParams pp = cfg.problem;
  pp.eta = eta;
  ChainSpec spec = make_preset(cfg.preset, pp);
  AssumptionConstants& c = spec.constants;
  if (cfg.m0) c.m0 = *cfg.m0;
  if (cfg.m1) c.m1 = *cfg.m1;
  if (cfg.m_eps) c.m_eps = *cfg.m_eps;
  if (cfg.sigma0) c.sigma0 = *cfg.sigma0;
  if (cfg.sigma1) c.sigma1 = *cfg.sigma1;
  if (cfg.b0) c.b_at_zero_norm = *cfg.b0;
  if (cfg.alpha) {
    c.alpha = *cfg.alpha;
    c.bias_vanishes = false;
  }
  if (cfg.beta) {
    c.beta = *cfg.beta;
    spec.noise.declared_beta = *cfg.beta;
  }
  c.validate();
  return spec;
}

int resolve_s_batch(const ExperimentConfig& cfg, const ChainSpec& spec) {
  if (cfg.s_policy == "explicit") return cfg.s_batch;
  return corollary_batch_size(spec.eta, spec.constants.beta, spec.noise.chi0());
}

SweepPlan to_sweep_plan(const ExperimentConfig& cfg) {
  SweepPlan plan;
  plan.preset = cfg.preset;
  plan.problem = cfg.problem;
  if (!cfg.eta_grid.empty()) plan.eta_grid = cfg.eta_grid;
  plan.horizon_t = cfg.horizon_t;
  plan.n_traj = cfg.n_traj;
  plan.refinement = cfg.refinement;
  plan.n_repeats = cfg.n_repeats;
  plan.seed = cfg.seed;
  plan.make_chain = [cfg](double eta) { return build_chain(cfg, eta); };
  if (cfg.synthetic_coeff) plan.synthetic = std::make_pair(*cfg.synthetic_coeff, *cfg.synthetic_exponent);
  return plan;
}

VerifyOptions to_verify_options(const ExperimentConfig& cfg) {
  VerifyOptions o;
  o.s_batch = cfg.s_policy == "explicit" ? cfg.s_batch : 0;
  o.l_window = cfg.l_policy == "explicit" ? cfg.l_window : 0.0;
  o.l1 = cfg.l_policy == "explicit" ? cfg.l1_corrector : 0.0;
  o.horizon_t = cfg.horizon_t;
  o.refinement = cfg.cascade_refinement;
  o.n_clt = cfg.n_clt;
  o.seed = cfg.seed;
  return o;
}

std::string resolved_yaml(const ExperimentConfig& cfg) {
  const ProblemParams& p = cfg.problem;
  const ChainSpec spec = build_chain(cfg, p.eta);
  const AssumptionConstants& c = spec.constants;
  const int s = resolve_s_batch(cfg, spec);
  std::vector<double> x0(spec.x0.data(), spec.x0.data() + spec.x0.size());
  std::vector<double> grid = cfg.eta_grid.empty() ? std::vector<double>{p.eta} : cfg.eta_grid;

  std::string l_text = "auto", l1_text = "auto";
  try {
    const ConstantsBundle k = compute_constants(c, p.eta, s, x0, spec.noise.chi0());
    l_text = format_double(cfg.l_policy == "explicit" ? cfg.l_window : k.l_window);
    l1_text = format_double(cfg.l_policy == "explicit" && cfg.l1_corrector > 0.0 ? cfg.l1_corrector : k.l1_corrector);
  } catch (const InputError&) {
    // S eta > 1: thresholds are undefined at this step size.
  }

  YAML::Emitter out;
  out << YAML::BeginMap;
  auto kv = [&](const char* key, const std::string& v) { out << YAML::Key << key << YAML::Value << v; };
  auto num = [&](const char* key, double v) { kv(key, format_double(v)); };
  auto seq = [&](const char* key, const std::vector<double>& v) {
    out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double x : v) out << format_double(x);
    out << YAML::EndSeq;
  };
  kv("preset", to_string(cfg.preset));
  kv("problem", to_string(p.problem));
  out << YAML::Key << "dim" << YAML::Value << p.dim;
  seq("curvature", p.curvature);
  num("tau", p.tau);
  num("cov_scale", p.cov_scale);
  kv("noise", to_string(p.noise));
  out << YAML::Key << "noise_rotation" << YAML::Value << p.noise_rotation;
  out << YAML::Key << "projection_rotation" << YAML::Value << p.projection_rotation;
  num("double_well_radius", p.double_well_radius);
  num("sa_shift", p.sa_shift);
  num("contraction", p.contraction);
  seq("x0", x0);
  out << YAML::Key << "problem_seed" << YAML::Value << p.problem_seed;
  num("eta", p.eta);
  seq("eta_grid", grid);
  num("horizon_t", cfg.horizon_t);
  out << YAML::Key << "n_traj" << YAML::Value << cfg.n_traj;
  out << YAML::Key << "n_repeats" << YAML::Value << cfg.n_repeats;
  out << YAML::Key << "refinement" << YAML::Value << cfg.refinement;
  out << YAML::Key << "cascade_refinement" << YAML::Value << cfg.cascade_refinement;
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;
  kv("out_dir", cfg.out_dir);
  kv("s_policy", cfg.s_policy);
  out << YAML::Key << "s_batch" << YAML::Value << s;
  kv("l_policy", cfg.l_policy);
  kv("l_window", l_text);
  kv("l1_corrector", l1_text);
  num("m0", c.m0);
  num("m1", c.m1);
  num("m_eps", c.m_eps);
  num("sigma0", c.sigma0);
  num("sigma1", c.sigma1);
  if (!c.bias_vanishes) num("alpha", c.alpha);
  num("beta", c.beta);
  num("b0", c.b_at_zero_norm);
  if (cfg.synthetic_coeff) {
    num("synthetic_coeff", *cfg.synthetic_coeff);
    num("synthetic_exponent", *cfg.synthetic_exponent);
  }
  out << YAML::Key << "n_clt" << YAML::Value << cfg.n_clt;
  std::vector<double> batches(cfg.clt_batches.begin(), cfg.clt_batches.end());
  seq("clt_batches", batches);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace itolab
