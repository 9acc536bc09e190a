#include "itolab/cli.hpp"

#include "itolab/config.hpp"
#include "itolab/errors.hpp"
#include "itolab/harness.hpp"
#include "itolab/io.hpp"
#include "itolab/parallel.hpp"
#include "itolab/sde.hpp"

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace itolab {

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
  bool constants_only = false;
};

struct Manifest {
  std::string command;
  ExperimentConfig cfg;
  std::vector<std::pair<std::string, std::string>> lineage;
  std::vector<std::string> outputs;
  std::vector<double> etas;
};

void emit_bundle(YAML::Emitter& out, const ConstantsBundle& k) {
  const std::vector<std::pair<const char*, double>> fields = {
      {"eta", k.eta},           {"S", k.s_batch},
      {"chi0", k.chi0},         {"M_sq", k.m_sq},
      {"C", k.c_growth},        {"C_prime", k.c_increment},
      {"C_dprime", k.c_window}, {"L", k.l_window},
      {"L_main", k.l_window_main}, {"L_appendix", k.l_window_appendix},
      {"L1", k.l1_corrector},   {"L1_main", k.l1_main},
      {"L1_appendix", k.l1_appendix}, {"C2", k.c2},
      {"C3", k.c3},             {"C4", k.c4},
      {"C5", k.c5},             {"C6", k.c6},
      {"C_W_scale", k.c_w_scale},
  };
  out << YAML::BeginMap;
  for (const auto& [name, v] : fields) out << YAML::Key << name << YAML::Value << format_double(v);
  out << YAML::EndMap;
}

std::string manifest_yaml(const Manifest& m) {
  const ChainSpec first = build_chain(m.cfg, m.cfg.problem.eta);
  const RatePrediction rate = predict_rate(first.constants, first.noise.chi0());

  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "tool" << YAML::Value << "ito-lab";
  out << YAML::Key << "command" << YAML::Value << m.command;
  out << YAML::Key << "seed" << YAML::Value << m.cfg.seed;
  out << YAML::Key << "gamma" << YAML::Value << first.constants.gamma;
  out << YAML::Key << "chi0" << YAML::Value << first.noise.chi0();
  out << YAML::Key << "theta" << YAML::Value << format_double(rate.theta);
  out << YAML::Key << "overall_exponent" << YAML::Value << format_double(rate.overall_exponent);
  out << YAML::Key << "config" << YAML::Value << YAML::Load(resolved_yaml(m.cfg));

  out << YAML::Key << "constants" << YAML::Value << YAML::BeginSeq;
  for (double eta : m.etas) {
    const ChainSpec spec = build_chain(m.cfg, eta);
    const int s = resolve_s_batch(m.cfg, spec);
    try {
      emit_bundle(out, compute_constants(spec.constants, eta, s,
                                         {spec.x0.data(), static_cast<std::size_t>(spec.dim())}, spec.noise.chi0()));
    } catch (const InputError& err) {
      out << YAML::BeginMap << YAML::Key << "eta" << YAML::Value << format_double(eta) << YAML::Key << "S"
          << YAML::Value << s << YAML::Key << "error" << YAML::Value << err.what() << YAML::EndMap;
    }
  }
  out << YAML::EndSeq;

  out << YAML::Key << "lineage" << YAML::Value << YAML::BeginMap;
  for (const auto& [k, v] : m.lineage) out << YAML::Key << k << YAML::Value << v;
  out << YAML::EndMap;
  out << YAML::Key << "outputs" << YAML::Value << YAML::Flow << m.outputs;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void finish(const fs::path& dir, Manifest& m) {
  write_text(dir / "config.resolved.yaml", resolved_yaml(m.cfg));
  m.outputs.push_back("config.resolved.yaml");
  write_text(dir / "manifest.yaml", manifest_yaml(m));
}

std::string seed_text(std::uint64_t v) { return std::to_string(v); }

int cmd_simulate(const ExperimentConfig& cfg, const fs::path& dir) {
  const double eta = cfg.problem.eta;
  const ChainSpec spec = build_chain(cfg, eta);
  validate_chain(spec);
  const std::int64_t k_steps = steps_for_horizon(eta, cfg.horizon_t);
  const std::uint64_t chain_root = derive_seed(cfg.seed, {1});
  const std::uint64_t ref_root = derive_seed(cfg.seed, {2});

  const Ensemble chain = simulate_ensemble(spec, cfg.n_traj, cfg.horizon_t, {k_steps}, RngStream(chain_root));
  const Ensemble ref = simulate_reference(DiffusionSpec::from_chain(spec), cfg.n_traj, cfg.horizon_t,
                                          cfg.refinement, RngStream(ref_root), {k_steps});
  write_text(dir / "chain.csv", ensemble_csv(chain));
  save_ensemble_binary(chain, dir / "chain.bin");
  write_text(dir / "reference.csv", ensemble_csv(ref));
  save_ensemble_binary(ref, dir / "reference.bin");

  const W2Estimate est = w2_auto(chain.at(0), ref.at(0), derive_seed(cfg.seed, {3}));
  const double floor = cfg.n_traj >= 4 ? w2_auto(chain.half(0, 0), chain.half(0, 1), derive_seed(cfg.seed, {4})).value
                                       : 0.0;
  std::ostringstream w2;
  w2 << "eta,steps,w2,stderr,floor,method,n_diverged\n"
     << format_double(eta) << ',' << k_steps << ',' << format_double(est.value) << ','
     << format_double(est.std_error) << ',' << format_double(floor) << ',' << est.method << ','
     << chain.n_diverged + ref.n_diverged << '\n';
  write_text(dir / "w2.csv", w2.str());
  std::cout << "W2(chain, reference) = " << format_double(est.value) << " (floor " << format_double(floor) << ")\n";

  Manifest m{"simulate", cfg, {}, {"chain.csv", "chain.bin", "reference.csv", "reference.bin", "w2.csv"}, {eta}};
  m.lineage = {{"chain_root", seed_text(chain_root)},
               {"reference_root", seed_text(ref_root)},
               {"streams", "(root, traj, step, role) with roles chain_noise=1 brownian=2"}};
  finish(dir, m);
  return 0;
}

int cmd_rate_sweep(const ExperimentConfig& cfg, const fs::path& dir) {
  const SweepPlan plan = to_sweep_plan(cfg);
  const RateFit fit = run_sweep(plan);
  const std::string preset = to_string(cfg.preset);
  const std::string sweep_text = sweep_csv(fit, preset);
  const std::string fit_text = fit_csv(fit);
  write_text(dir / "sweep.csv", sweep_text);
  write_text(dir / "fit.csv", fit_text);
  write_text(dir / "sweep.svg", render_sweep_svg(read_text(dir / "sweep.csv"), read_text(dir / "fit.csv")));
  for (const std::string& w : fit.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << preset << ": slope " << format_double(fit.fit.slope) << ", predicted overall "
            << format_double(fit.predicted.overall_exponent) << " (theta " << format_double(fit.predicted.theta)
            << "), " << fit.n_fit_points << " points, check " << (fit.slope_check() ? "pass" : "fail") << '\n';

  Manifest m{"rate-sweep", cfg, {}, {"sweep.csv", "fit.csv", "sweep.svg"}, plan.eta_grid};
  m.lineage = {{"point_seed", "derive_seed(seed, {eta_index, repeat})"},
               {"chain_root", "derive_seed(point_seed, {1})"},
               {"reference_root", "derive_seed(point_seed, {2})"},
               {"estimator_seed", "derive_seed(point_seed, {3})"}};
  finish(dir, m);
  return fit.slope_check() ? 0 : 1;
}

int cmd_constants(const ExperimentConfig& cfg, const fs::path& dir, const std::string& command) {
  const ChainSpec spec = build_chain(cfg, cfg.problem.eta);
  const int s = resolve_s_batch(cfg, spec);
  const ConstantsBundle k = compute_constants(spec.constants, spec.eta, s,
                                              {spec.x0.data(), static_cast<std::size_t>(spec.dim())}, spec.noise.chi0());
  const std::string text = constants_csv(k, predict_rate(spec.constants, spec.noise.chi0()));
  std::cout << text;
  write_text(dir / "constants.csv", text);
  Manifest m{command, cfg, {}, {"constants.csv"}, {cfg.problem.eta}};
  finish(dir, m);
  return 0;
}

int cmd_verify(const ExperimentConfig& cfg, const fs::path& dir) {
  const ChainSpec spec = build_chain(cfg, cfg.problem.eta);
  const VerifyOptions opts = to_verify_options(cfg);
  const std::vector<LemmaReport> reports = verify_lemmas(spec, cfg.n_traj, opts);
  write_text(dir / "lemmas.csv", lemmas_csv(reports));
  bool all = true;
  for (const LemmaReport& r : reports) {
    std::cout << r.lemma << ": " << (r.pass ? "pass" : "FAIL") << " (measured " << format_double(r.measured)
              << ", bound " << format_double(r.bound) << ", " << r.detail << ")\n";
    all = all && r.pass;
  }
  Manifest m{"verify", cfg, {}, {"lemmas.csv"}, {cfg.problem.eta}};
  m.lineage = {{"ensemble_root", seed_text(derive_seed(cfg.seed, {1}))},
               {"cascade_root", seed_text(derive_seed(cfg.seed, {2}))},
               {"clt_seed", "derive_seed(seed, {6, S})"}};
  finish(dir, m);
  return all ? 0 : 1;
}

int cmd_clt_gap(const ExperimentConfig& cfg, const fs::path& dir) {
  const ChainSpec spec = build_chain(cfg, cfg.problem.eta);
  std::ostringstream os;
  os << "noise,S,gap,stderr,floor,n,sup_bound\n";
  const double sup = spec.dim() * clt_gap_sup(spec.noise.kind);
  for (int s : cfg.clt_batches) {
    const CltGapEstimate g =
        estimate_clt_gap(spec.noise, s, cfg.n_clt, derive_seed(cfg.seed, {6, static_cast<std::uint64_t>(s)}));
    os << to_string(spec.noise.kind) << ',' << s << ',' << format_double(g.value) << ','
       << format_double(g.std_error) << ',' << format_double(g.floor) << ',' << g.n << ',' << format_double(sup)
       << '\n';
  }
  write_text(dir / "clt_gap.csv", os.str());
  std::cout << os.str();
  Manifest m{"clt-gap", cfg, {{"clt_seed", "derive_seed(seed, {6, S})"}}, {"clt_gap.csv"}, {cfg.problem.eta}};
  finish(dir, m);
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"ito-lab: discretization error of Ito chains against their diffusion limits"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "experiment config (YAML)")->required();
    sub->add_option("--seed", flags.seed, "root seed (overrides the config)");
    sub->add_option("--out", flags.out, "output directory (overrides the config)");
    sub->add_option("--threads", flags.threads, "worker threads (default: ITO_LAB_THREADS or 1)")
        ->check(CLI::Range(1, 1024));
  };
  CLI::App* simulate = app.add_subcommand("simulate", "chain and reference ensembles at one step size");
  CLI::App* sweep = app.add_subcommand("rate-sweep", "W2 against step size and log-log slope fit");
  CLI::App* verify = app.add_subcommand("verify", "empirical check of each intermediate bound");
  CLI::App* constants = app.add_subcommand("constants", "print the derived constants");
  CLI::App* clt = app.add_subcommand("clt-gap", "W2^2 gap between batch sums and their Gaussian limit");
  for (CLI::App* sub : {simulate, sweep, verify, constants, clt}) add_common(sub);
  verify->add_flag("--constants", flags.constants_only, "print the constants without simulating");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg = load_config(flags.config);
    if (flags.seed) cfg.seed = *flags.seed;
    if (!flags.out.empty()) cfg.out_dir = flags.out;
    if (flags.threads > 0) set_default_threads(flags.threads);
    const fs::path dir = cfg.out_dir;

    if (*simulate) return cmd_simulate(cfg, dir);
    if (*sweep) return cmd_rate_sweep(cfg, dir);
    if (*verify) return flags.constants_only ? cmd_constants(cfg, dir, "verify --constants") : cmd_verify(cfg, dir);
    if (*constants) return cmd_constants(cfg, dir, "constants");
    return cmd_clt_gap(cfg, dir);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const RunError& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace itolab
