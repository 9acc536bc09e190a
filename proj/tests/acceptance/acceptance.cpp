// Acceptance criteria, one PASS/FAIL line each. Exit status is the number of failures.

#include "itolab/chain.hpp"
#include "itolab/cli.hpp"
#include "itolab/config.hpp"
#include "itolab/core.hpp"
#include "itolab/harness.hpp"
#include "itolab/io.hpp"
#include "itolab/presets.hpp"
#include "itolab/rng.hpp"
#include "itolab/sde.hpp"
#include "itolab/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace itolab;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << detail << std::endl;
  if (!pass) ++failures;
}

void run_criterion(int id, const std::string& name, const std::function<bool(std::ostringstream&)>& body) {
  std::ostringstream detail;
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  try {
    pass = body(detail);
  } catch (const std::exception& e) {
    detail << "exception: " << e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  detail << " (" << format_double(std::round(secs * 10.0) / 10.0) << " s)";
  report(id, name, pass, detail.str());
}

std::string f(double v) { return format_double(v); }

// Mean W2 between n exact draws from N(mean, sd^2) and the law itself.
double gaussian_floor(double mean, double sd, int n, std::uint64_t seed) {
  double total = 0.0;
  const int reps = 5;
  for (int r = 0; r < reps; ++r) {
    RngStream s(seed, static_cast<std::uint64_t>(r), 0, StreamRole::probe);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = mean + sd * s.normal();
    total += w2_1d_vs_gaussian(EmpiricalMeasure(1, std::move(x)), mean, sd).value;
  }
  return total / reps;
}

bool ou_exactness(std::ostringstream& out) {
  ProblemParams pp;
  pp.tau = 1.0;
  pp.x0 = {1.0};
  pp.eta = 1.0 / 128.0;
  const int n = 20000;
  const ChainSpec chain = make_preset(Preset::gld, pp);
  validate_chain(chain);
  const std::int64_t k = steps_for_horizon(pp.eta, 1.0);
  const GaussianLaw exact = ou_exact_law(1.0, std::sqrt(2.0), 0, pp.eta, chain.x0, 1.0);
  const double mean = exact.mean(0);
  const double sd = std::sqrt(exact.cov(0, 0));

  const Ensemble ch = simulate_ensemble(chain, n, 1.0, {k}, RngStream(derive_seed(1, {1})));
  const Ensemble ref = simulate_reference(DiffusionSpec::from_chain(chain), n, 1.0, 64,
                                          RngStream(derive_seed(1, {2})), {k});
  const double floor = gaussian_floor(mean, sd, n, 99);
  const double w_chain = w2_1d_vs_gaussian(ch.at(0), mean, sd).value;
  const double w_ref = w2_1d_vs_gaussian(ref.at(0), mean, sd).value;
  const bool ok_chain = w_chain <= 2.0 * pp.eta + 3.0 * floor;
  const bool ok_ref = w_ref <= 3.0 * floor;
  out << "W2(chain, OU) = " << f(w_chain) << " <= " << f(2.0 * pp.eta + 3.0 * floor) << (ok_chain ? "" : " violated")
      << "; W2(Euler ref, OU) = " << f(w_ref) << " <= " << f(3.0 * floor) << (ok_ref ? "" : " violated")
      << "; floor " << f(floor);
  return ok_chain && ok_ref && ch.n_diverged == 0;
}

SweepPlan sweep_plan(Preset preset, ProblemParams pp, std::uint64_t seed) {
  SweepPlan plan;
  plan.preset = preset;
  plan.problem = std::move(pp);
  plan.n_traj = 20000;
  plan.n_repeats = 3;
  plan.refinement = 16;
  plan.seed = seed;
  return plan;
}

std::string levels_text(const RateFit& fit) {
  std::ostringstream os;
  for (const auto& l : fit.levels) {
    os << " eta=" << f(l.eta) << " S=" << l.s_batch << " W2=" << f(l.value) << (l.excluded ? "(excluded)" : "");
  }
  return os.str();
}

bool rate_check(Preset preset, ProblemParams pp, double expected_overall, std::optional<double> expected_theta,
                std::ostringstream& out) {
  const ChainSpec probe = make_preset(preset, pp);
  const RatePrediction pred = predict_rate(probe.constants, probe.noise.chi0());
  const bool exact = pred.overall_exponent == expected_overall &&
                     (!expected_theta || pred.theta == *expected_theta);
  const RateFit fit = run_sweep(sweep_plan(preset, pp, 11));
  out << "theta=" << f(pred.theta) << " overall=" << f(pred.overall_exponent) << "; slope " << f(fit.fit.slope)
      << " >= " << f(expected_overall - kSlopeTolerance) << " over " << fit.n_fit_points << " points;"
      << levels_text(fit);
  return exact && fit.slope_check();
}

bool rademacher_sgld(std::ostringstream& out) {
  ProblemParams pp;
  pp.tau = 16.0;
  pp.x0 = {8.0};
  pp.noise = NoiseKind::rademacher;
  const RateFit fit = run_sweep(sweep_plan(Preset::sgld, pp, 13));
  bool s_ok = fit.levels.size() == 6;
  for (const auto& l : fit.levels) {
    const ChainSpec spec = make_preset(Preset::sgld, [&] { auto q = pp; q.eta = l.eta; return q; }());
    s_ok = s_ok && l.s_batch == corollary_batch_size(l.eta, spec.constants.beta, spec.noise.chi0());
  }
  bool monotone = fit.levels.size() >= 4;
  for (std::size_t i = fit.levels.size() - 3; monotone && i < fit.levels.size(); ++i) {
    const auto& a = fit.levels[i - 1];
    const auto& b = fit.levels[i];
    monotone = b.value <= a.value + 3.0 * std::hypot(a.std_error, b.std_error);
  }
  out << "completed, monotone on last 4 within 3 sigma: " << (monotone ? "yes" : "no") << ";" << levels_text(fit);
  return s_ok && monotone;
}

bool lemma_suite(std::ostringstream& out) {
  bool all = true;
  for (Preset p : {Preset::gld, Preset::sgld, Preset::sgd}) {
    for (double eta : {1.0 / 32.0, 1.0 / 128.0}) {
      ProblemParams pp;
      pp.eta = eta;
      const ChainSpec spec = make_preset(p, pp);
      VerifyOptions opts;
      opts.seed = 21;
      const auto reports = verify_lemmas(spec, 20000, opts);
      int passed = 0;
      for (const auto& r : reports) {
        passed += r.pass ? 1 : 0;
        if (!r.pass) out << " [" << to_string(p) << " eta=" << f(eta) << " " << r.lemma << " margin " << f(r.margin) << "]";
      }
      out << " " << to_string(p) << "@" << f(eta) << ":" << passed << "/" << reports.size();
      all = all && reports.size() == 6 && passed == 6;
    }
  }
  return all;
}

double brute_force_w2(const std::vector<double>& a, const std::vector<double>& b, int n, int dim) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < dim; ++c) {
        const double d = a[static_cast<std::size_t>(i * dim + c)] - b[static_cast<std::size_t>(perm[i] * dim + c)];
        cost += d * d;
      }
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / n);
}

std::vector<double> random_points(RngStream& s, int n, int dim) {
  std::vector<double> v(static_cast<std::size_t>(n * dim));
  for (auto& x : v) x = 2.0 * s.normal();
  return v;
}

bool transport(std::ostringstream& out) {
  RngStream s(5, 0, 0, StreamRole::probe);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 8;
    const int dim = 1 + t % 3;
    const auto a = random_points(s, n, dim);
    const auto b = random_points(s, n, dim);
    const double got = w2_exact_assignment(EmpiricalMeasure(dim, a), EmpiricalMeasure(dim, b)).value;
    worst = std::max(worst, std::abs(got - brute_force_w2(a, b, n, dim)));
  }
  const bool assign_ok = worst <= 1e-9;

  const int n = 10000;
  std::vector<double> x(n);
  for (auto& v : x) v = 1.5 + 0.7 * s.normal();
  const double gauss_err = w2_1d_vs_gaussian(EmpiricalMeasure(1, std::move(x)), 1.5, 0.7).value;
  const bool gauss_ok = gauss_err <= 5.0 / std::sqrt(static_cast<double>(n));

  int violations = 0;
  for (int t = 0; t < 200; ++t) {
    const int m = 2 + t % 7;
    const int dim = 1 + t % 2;
    const EmpiricalMeasure p(dim, random_points(s, m, dim));
    const EmpiricalMeasure q(dim, random_points(s, m, dim));
    const EmpiricalMeasure r(dim, random_points(s, m, dim));
    const double pq = w2_exact_assignment(p, q).value;
    const double qp = w2_exact_assignment(q, p).value;
    const double qr = w2_exact_assignment(q, r).value;
    const double pr = w2_exact_assignment(p, r).value;
    const double pp = w2_exact_assignment(p, p).value;
    if (pp > 1e-12 || std::abs(pq - qp) > 1e-9 || pr > pq + qr + 1e-9 || pq < 0.0) ++violations;
  }
  out << "assignment vs enumeration max error " << f(worst) << "; 1-D vs Gaussian " << f(gauss_err)
      << " <= " << f(5.0 / std::sqrt(static_cast<double>(n))) << "; metric violations " << violations << "/200";
  return assign_ok && gauss_ok && violations == 0;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "itolab_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ito-lab");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  return code;
}

bool golden_constants(std::ostringstream& out) {
  const fs::path dir = scratch("golden");
  const int code = cli({"constants", "--config", std::string(ITOLAB_FIXTURES) + "/golden_constants.yaml", "--out",
                        dir.string()});
  const CsvTable t = parse_csv(read_text(dir / "constants.csv"));
  auto value = [&](const std::string& name) -> std::string {
    for (const auto& r : t.rows) {
      if (r[0] == name) return r[1];
    }
    return "missing";
  };
  const std::string m_sq = value("M_sq"), c = value("C"), l = value("L_main");
  out << "exit " << code << "; M_sq=" << m_sq << " C=" << c << " L_main=" << l;
  return code == 0 && m_sq == "4" && c == "40" && l == "10" && std::stod(m_sq) == 4.0 && std::stod(c) == 40.0 &&
         std::stod(l) == 10.0;
}

bool determinism(std::ostringstream& out) {
  const fs::path cfg_dir = scratch("det_configs");
  write_text(cfg_dir / "sweep.yaml",
             "preset: sgd\ncov_scale: 0.25\nx0: [4]\neta_grid: [0.125, 0.0625, 0.03125, 0.015625]\n"
             "n_traj: 2000\nn_repeats: 2\nrefinement: 16\nseed: 5\n");
  write_text(cfg_dir / "verify.yaml", "preset: sgld\nnoise: rademacher\neta: 0.0625\nn_traj: 3000\nn_clt: 20000\n"
                                      "seed: 6\nclt_batches: [1, 4]\n");
  write_text(cfg_dir / "simulate.yaml", "preset: sgld\ndim: 2\nx0: [1, -1]\neta: 0.03125\nn_traj: 3000\nseed: 7\n");
  write_text(cfg_dir / "gld.yaml", read_text(std::string(ITOLAB_FIXTURES) + "/gld.yaml"));
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"simulate", "simulate.yaml"}, {"rate-sweep", "sweep.yaml"}, {"verify", "gld.yaml"},
      {"clt-gap", "verify.yaml"},    {"constants", "gld.yaml"}};
  int compared = 0, mismatched = 0;
  for (const auto& [command, config] : runs) {
    std::vector<fs::path> dirs;
    std::vector<int> codes;
    for (int threads : {1, 2, 8}) {
      dirs.push_back(scratch("det_" + command + "_" + std::to_string(threads)));
      codes.push_back(cli({command, "--config", (cfg_dir / config).string(), "--out", dirs.back().string(),
                           "--threads", std::to_string(threads)}));
    }
    if (codes[0] != codes[1] || codes[0] != codes[2] || codes[0] == 2) {
      out << " " << command << " exit codes differ or input rejected;";
      ++mismatched;
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      if (entry.path().extension() != ".csv") continue;
      const std::string base = read_text(entry.path());
      for (std::size_t i = 1; i < dirs.size(); ++i) {
        ++compared;
        if (read_text(dirs[i] / entry.path().filename()) != base) {
          ++mismatched;
          out << " " << command << "/" << entry.path().filename().string() << " differs;";
        }
      }
    }
  }
  out << " " << compared << " CSV comparisons across 1, 2 and 8 threads, " << mismatched << " mismatches";
  return mismatched == 0 && compared >= 10;
}

}  // namespace

int main() {
  run_criterion(1, "OU exactness (GLD, eta=2^-7)", ou_exactness);
  run_criterion(2, "rate check SGD Gaussian", [](std::ostringstream& out) {
    ProblemParams pp;
    pp.cov_scale = 0.25;
    pp.x0 = {4.0};
    return rate_check(Preset::sgd, pp, 0.75, 1.0, out);
  });
  run_criterion(3, "rate check SGLD Gaussian", [](std::ostringstream& out) {
    ProblemParams pp;
    pp.tau = 16.0;
    pp.x0 = {8.0};
    return rate_check(Preset::sgld, pp, 0.25, std::nullopt, out);
  });
  run_criterion(4, "SGLD Rademacher sweep", rademacher_sgld);
  run_criterion(5, "lemma suite {GLD, SGLD, SGD} x {2^-5, 2^-7}", lemma_suite);
  run_criterion(6, "transport correctness", transport);
  run_criterion(7, "constant arithmetic golden file", golden_constants);
  run_criterion(8, "determinism across 1, 2, 8 threads", determinism);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures;
}
