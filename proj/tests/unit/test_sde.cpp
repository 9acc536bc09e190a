#include "itolab/errors.hpp"
#include "itolab/presets.hpp"
#include "itolab/sde.hpp"

#include <doctest.h>

#include <cmath>

using namespace itolab;

TEST_CASE("OU law in closed form") {
  const Vec x0 = Vec::Constant(1, 2.0);
  // a = 1, s = 1, gamma = 0: mean 2 e^{-t}, variance (1 - e^{-2t}) / 2.
  GaussianLaw l = ou_exact_law(1.0, 1.0, 0, 0.1, x0, 0.5);
  CHECK(l.mean(0) == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-15));
  CHECK(l.cov(0, 0) == doctest::Approx((1.0 - std::exp(-1.0)) / 2.0).epsilon(1e-15));
  // gamma = 1 scales the variance by eta.
  GaussianLaw g = ou_exact_law(1.0, 1.0, 1, 0.1, x0, 0.5);
  CHECK(g.cov(0, 0) == doctest::Approx(0.1 * (1.0 - std::exp(-1.0)) / 2.0).epsilon(1e-14));
  // a = 0 is Brownian motion.
  GaussianLaw b = ou_exact_law(0.0, 2.0, 0, 0.1, x0, 3.0);
  CHECK(b.mean(0) == 2.0);
  CHECK(b.cov(0, 0) == doctest::Approx(12.0));
  // Tiny a agrees with the Brownian limit.
  GaussianLaw near = ou_exact_law(1e-12, 2.0, 0, 0.1, x0, 3.0);
  CHECK(near.cov(0, 0) == doctest::Approx(12.0).epsilon(1e-9));
}

TEST_CASE("Euler reference matches the OU law") {
  ProblemParams pp;
  pp.eta = 1.0 / 16.0;
  pp.tau = 2.0;  // sigma = 1
  pp.x0 = {2.0};
  const ChainSpec chain = make_preset(Preset::gld, pp);
  const DiffusionSpec spec = DiffusionSpec::from_chain(chain);
  const Ensemble e = simulate_reference(spec, 20000, 1.0, 64, RngStream(1), {16});
  const GaussianLaw exact = ou_exact_law(1.0, 1.0, 0, pp.eta, chain.x0, 1.0);
  double m = 0.0, v = 0.0;
  for (int i = 0; i < e.n_traj; ++i) m += e.value(i, 0, 0);
  m /= e.n_traj;
  for (int i = 0; i < e.n_traj; ++i) v += (e.value(i, 0, 0) - m) * (e.value(i, 0, 0) - m);
  v /= e.n_traj - 1;
  CHECK(std::abs(m - exact.mean(0)) < 4.0 * std::sqrt(exact.cov(0, 0) / e.n_traj) + 0.005);
  CHECK(v == doctest::Approx(exact.cov(0, 0)).epsilon(0.04));
}

TEST_CASE("reference recording grid") {
  ProblemParams pp;
  pp.eta = 0.25;
  const ChainSpec chain = make_preset(Preset::gld, pp);
  const DiffusionSpec spec = DiffusionSpec::from_chain(chain);
  const Ensemble all = simulate_reference(spec, 10, 1.0, 16, RngStream(1));
  CHECK(all.grid == std::vector<std::int64_t>{0, 1, 2, 3, 4});
  const Ensemble last = simulate_reference(spec, 10, 1.0, 16, RngStream(1), {4});
  for (int i = 0; i < 10; ++i) CHECK(last.value(i, 0, 0) == all.value(i, 4, 0));
  CHECK_THROWS_AS(simulate_reference(spec, 10, 1.0, 8, RngStream(1)), PreconditionError);
}

TEST_CASE("Brownian bridge hits its endpoint with the right spread") {
  RngStream s(4);
  const int m = 16;
  const double h = 0.01;
  double var = 0.0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    RngStream t = s.at(r, 0, StreamRole::bridge);
    double sum = 0.0;
    const auto inc = brownian_bridge(0.3, m, h, t, sum);
    REQUIRE(inc.size() == m);
    CHECK(std::abs(sum - 0.3) < 1e-14);
    var += (inc[3] - 0.3 / m) * (inc[3] - 0.3 / m);
  }
  // Conditional variance of one increment: h (1 - 1/m).
  CHECK(var / reps == doctest::Approx(h * (1.0 - 1.0 / m)).epsilon(0.04));
}

TEST_CASE("interpolation cascade on GLD") {
  ProblemParams pp;
  pp.eta = 1.0 / 32.0;
  const ChainSpec chain = make_preset(Preset::gld, pp);
  const ConstantsBundle k = compute_constants(chain.constants, pp.eta, 1, std::vector<double>{1.0}, 1);
  const CascadeReport r =
      simulate_interpolation_cascade(chain, 1, k.l_window, k.l1_corrector, 2000, 1.0, RngStream(3));
  CHECK(r.n_valid == 2000);
  CHECK(r.max_grid_mismatch < 1e-9);
  for (const CascadeRow& row : r.rows) {
    CAPTURE(row.stage);
    CAPTURE(row.t);
    CHECK(row.margin >= -3.0 * row.std_error);
  }
  CHECK(r.sup_corrector_gap <= r.sup_interpolation_gap);
  CHECK(r.to_csv().rfind("stage,t,gap,bound,margin\n", 0) == 0);
  CHECK_THROWS_AS(simulate_interpolation_cascade(chain, 1, 1.0, k.l1_corrector, 10, 1.0, RngStream(3)),
                  PreconditionError);
  CHECK_THROWS_AS(simulate_interpolation_cascade(chain, 1, k.l_window, 1.0, 10, 1.0, RngStream(3)),
                  PreconditionError);
}

TEST_CASE("KL bound requires the bundle's eta and S") {
  ProblemParams pp;
  pp.eta = 1.0 / 32.0;
  const ChainSpec chain = make_preset(Preset::gld, pp);
  const ConstantsBundle k = compute_constants(chain.constants, pp.eta, 1, std::vector<double>{1.0}, 1);
  CHECK(kl_bound(k, pp.eta, 1, 1.0) > 0.0);
  CHECK(kl_bound(k, pp.eta, 1, 0.5) < kl_bound(k, pp.eta, 1, 1.0));
  CHECK_THROWS_AS(kl_bound(k, pp.eta, 2, 1.0), PreconditionError);
}
