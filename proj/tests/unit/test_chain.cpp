#include "itolab/chain.hpp"
#include "itolab/errors.hpp"
#include "itolab/parallel.hpp"
#include "itolab/presets.hpp"

#include <doctest.h>

#include <cmath>

using namespace itolab;

namespace {

ChainSpec linear_chain(double a, double s, int gamma, double eta) {
  ChainSpec spec;
  spec.name = "linear";
  spec.drift = [a](const Vec& x) { return Vec(-a * x); };
  spec.cov_coeff = [s](const Vec& x) { return Mat(s * Mat::Identity(x.size(), x.size())); };
  spec.noise = NoiseModel{NoiseKind::gaussian, 1};
  spec.eta = eta;
  spec.gamma = gamma;
  spec.x0 = Vec::Constant(1, 2.0);
  spec.constants.m0 = a;
  spec.constants.sigma0 = spec.constants.sigma1 = s;
  spec.constants.gamma = gamma;
  spec.constants.alpha = kAlphaInfinity;
  spec.constants.bias_vanishes = true;
  return spec;
}

}  // namespace

TEST_CASE("one step follows the update rule") {
  ChainSpec spec = linear_chain(1.0, 0.5, 1, 0.25);
  spec.bias = [](const Vec& x, std::int64_t, double) { return Vec(0.1 * x); };
  spec.cov_shift = [](const Vec& x, std::int64_t, double) { return Mat(0.2 * Mat::Identity(x.size(), x.size())); };
  const Vec eps = Vec::Constant(1, 1.5);
  const Vec next = step_with_noise(spec, spec.x0, 0, eps);
  // 2 + 0.25 (-2 + 0.2) + 0.25^{(1+1)/2} (0.5 + 0.2) 1.5.
  CHECK(next(0) == doctest::Approx(2.0 + 0.25 * (-1.8) + 0.25 * 0.7 * 1.5).epsilon(1e-15));
  CHECK(spec.noise_scale() == 0.25);
  spec.gamma = 0;
  CHECK(spec.noise_scale() == 0.5);
}

TEST_CASE("steps_for_horizon demands an integer number of steps") {
  CHECK(steps_for_horizon(1.0 / 64.0, 1.0) == 64);
  CHECK(steps_for_horizon(0.1, 1.0) == 10);
  CHECK_THROWS_AS(steps_for_horizon(0.3, 1.0), PreconditionError);
}

TEST_CASE("ensembles do not depend on the worker count") {
  const ChainSpec spec = linear_chain(1.0, 1.0, 0, 1.0 / 32.0);
  set_default_threads(1);
  const Ensemble a = simulate_ensemble(spec, 300, 1.0, {8, 32}, RngStream(5));
  set_default_threads(4);
  const Ensemble b = simulate_ensemble(spec, 300, 1.0, {8, 32}, RngStream(5));
  set_default_threads(1);
  CHECK(a.states == b.states);
  CHECK(a.grid == std::vector<std::int64_t>{8, 32});
  // A single trajectory replays through step() with the same streams.
  Vec x = spec.x0;
  RngStream root(5);
  for (std::int64_t k = 0; k < 32; ++k) x = step(spec, x, k, root.at(7, static_cast<std::uint64_t>(k), StreamRole::chain_noise));
  CHECK(a.value(7, 1, 0) == x(0));
}

TEST_CASE("ensemble moments of a linear chain") {
  // X_{k+1} = (1 - eta) X_k + sqrt(eta) eps: mean x0 (1-eta)^K, variance eta (1 - (1-eta)^{2K}) / (1 - (1-eta)^2).
  const double eta = 1.0 / 16.0;
  const ChainSpec spec = linear_chain(1.0, 1.0, 0, eta);
  const Ensemble e = simulate_ensemble(spec, 20000, 1.0, {16}, RngStream(3));
  double m = 0.0, v = 0.0;
  for (int i = 0; i < e.n_traj; ++i) m += e.value(i, 0, 0);
  m /= e.n_traj;
  for (int i = 0; i < e.n_traj; ++i) v += (e.value(i, 0, 0) - m) * (e.value(i, 0, 0) - m);
  v /= e.n_traj - 1;
  const double r = 1.0 - eta;
  const double var = eta * (1.0 - std::pow(r, 32)) / (1.0 - r * r);
  CHECK(std::abs(m - 2.0 * std::pow(r, 16)) < 4.0 * std::sqrt(var / e.n_traj));
  CHECK(v == doctest::Approx(var).epsilon(0.04));
}

TEST_CASE("validation rejects a non-Lipschitz drift") {
  ChainSpec spec = linear_chain(1.0, 1.0, 0, 0.01);
  spec.drift = [](const Vec& x) { return Vec(x.cwiseProduct(x)); };
  spec.constants.m0 = 1.0;
  CHECK_THROWS_WITH_AS(validate_chain(spec), doctest::Contains("Lipschitz"), ValidationError);
}

TEST_CASE("validation rejects constants that understate the model") {
  ChainSpec spec = linear_chain(1.0, 1.0, 0, 0.01);
  CHECK_NOTHROW(validate_chain(spec));
  spec.constants.sigma1 = 0.5;
  spec.constants.sigma0 = 0.5;
  CHECK_THROWS_AS(validate_chain(spec), ValidationError);
  spec = linear_chain(1.0, 1.0, 0, 0.01);
  spec.bias = [](const Vec& x, std::int64_t, double) { return Vec(x + Vec::Ones(x.size())); };
  spec.constants.bias_vanishes = false;
  spec.constants.alpha = 0.5;
  spec.constants.m1 = 0.1;
  CHECK_THROWS_WITH_AS(validate_chain(spec), doctest::Contains("bias"), ValidationError);
}

TEST_CASE("divergent ensembles abort") {
  ChainSpec spec = linear_chain(-100.0, 1.0, 0, 0.5);
  spec.constants.m0 = 100.0;
  CHECK_THROWS_AS(simulate_ensemble(spec, 50, 10.0, {20}, RngStream(1)), DivergenceError);
}

TEST_CASE("window coupling with S = 1 and L = 0 reproduces the chain exactly") {
  ProblemParams pp;
  pp.eta = 1.0 / 32.0;
  const ChainSpec spec = make_preset(Preset::gld, pp);
  CoupledOptions o;
  o.enforce_thresholds = false;
  const CoupledPair p = simulate_coupled(spec, 1, 0.0, 64, 1.0, RngStream(9), o);
  CHECK(p.x_states == p.y_states);
  for (double g : p.mean_sq_gap()) CHECK(g == 0.0);
}

TEST_CASE("window coupling stays close for non-Gaussian noise") {
  ProblemParams pp;
  pp.eta = 1.0 / 64.0;
  pp.noise = NoiseKind::rademacher;
  pp.cov_scale = 0.25;
  const ChainSpec spec = make_preset(Preset::sgd, pp);
  const int s = 8;
  CoupledOptions o;
  o.enforce_thresholds = false;
  const CoupledPair p = simulate_coupled(spec, s, 4.0, 2000, 1.0, RngStream(9), o);
  const auto gap = p.mean_sq_gap();
  REQUIRE(gap.size() == 9);
  CHECK(gap.front() == 0.0);
  for (double g : gap) CHECK(g < 0.05);
}

TEST_CASE("window thresholds name the violated inequality") {
  ConstantsBundle k;
  k.eta = 0.01;
  k.s_batch = 1;
  k.l_window_main = 10.0;
  k.l_window_appendix = 11.0;
  k.l_window = 11.0;
  CHECK_NOTHROW(check_window_thresholds(k, 11.0));
  CHECK_THROWS_WITH_AS(check_window_thresholds(k, 9.0), doctest::Contains("1 + M0 + M"), PreconditionError);
  CHECK_THROWS_WITH_AS(check_window_thresholds(k, 10.5), doctest::Contains("10 M0^2"), PreconditionError);
  k.eta = 0.1;
  CHECK_THROWS_WITH_AS(check_window_thresholds(k, 11.0), doctest::Contains("eta_bar"), PreconditionError);
}
