#include "itolab/errors.hpp"
#include "itolab/presets.hpp"

#include <doctest.h>

#include <cmath>

using namespace itolab;

TEST_CASE("preset exponent table") {
  CHECK(preset_row(Preset::gld).gamma == 0);
  CHECK(preset_row(Preset::gld).bias_vanishes);
  CHECK(preset_row(Preset::sgld).alpha == 0.5);
  CHECK(preset_row(Preset::sgld).beta == 1.0);
  for (Preset p : {Preset::sgd, Preset::sgda, Preset::sa_fp, Preset::sa, Preset::sgb}) {
    CHECK(preset_row(p).gamma == 1);
    CHECK(preset_row(p).beta == 0.0);
    CHECK(preset_row(p).bias_vanishes);
  }
  CHECK(preset_row(Preset::sglb).alpha == 0.5);
  CHECK(preset_row(Preset::sglb_o).alpha == 0.25);
}

TEST_CASE("published rates") {
  CHECK(reported_rate(Preset::sgld, 1).value() == 0.25);
  CHECK(reported_rate(Preset::sgd, 1).value() == 0.75);
  CHECK(reported_rate(Preset::sgd, 0).value() == 0.5);
  CHECK(reported_rate(Preset::sgb, 0).value() == 0.5);
  CHECK(reported_rate(Preset::sglb, 0).value() == 0.25);
  CHECK_FALSE(reported_rate(Preset::gld, 1).has_value());
}

TEST_CASE("names round-trip") {
  for (Preset p : all_presets()) CHECK(parse_preset(to_string(p)) == p);
  for (Problem p : {Problem::quadratic, Problem::double_well, Problem::bilinear, Problem::affine_map}) {
    CHECK(parse_problem(to_string(p)) == p);
  }
  CHECK_THROWS_AS(parse_preset("adam"), ConfigurationError);
}

TEST_CASE("every preset passes its own assumption check") {
  for (Preset p : all_presets()) {
    for (NoiseKind nk : {NoiseKind::gaussian, NoiseKind::rademacher}) {
      ProblemParams pp;
      pp.dim = 2;
      pp.noise = nk;
      pp.eta = 1.0 / 64.0;
      pp.x0 = {1.0, -0.5};
      if (p == Preset::sgda) pp.problem = Problem::bilinear;
      if (p == Preset::sa_fp) pp.problem = Problem::affine_map;
      CAPTURE(to_string(p));
      CAPTURE(to_string(nk));
      const ChainSpec spec = make_preset(p, pp);
      CHECK(spec.dim() == 2);
      CHECK_NOTHROW(validate_chain(spec));
    }
  }
}

TEST_CASE("rotated noise and projections stay valid") {
  ProblemParams pp;
  pp.dim = 3;
  pp.noise = NoiseKind::uniform;
  pp.noise_rotation = true;
  pp.projection_rotation = true;
  pp.eta = 1.0 / 32.0;
  pp.x0 = {0.5, 0.5, 0.5};
  CHECK_NOTHROW(validate_chain(make_preset(Preset::sglb, pp)));
  CHECK_NOTHROW(validate_chain(make_preset(Preset::sgld, pp)));
}

TEST_CASE("double well gradient and Lipschitz constant") {
  ProblemParams pp;
  pp.problem = Problem::double_well;
  const Objective f = make_objective(pp);
  // 12 R^2 - 4 at R = 3.
  CHECK(f.lipschitz == 104.0);
  Vec x = Vec::Constant(1, 0.5);
  CHECK(f.grad(x)(0) == doctest::Approx(4 * 0.125 - 2.0));
  Vec far = Vec::Constant(1, 4.0);
  // Linear continuation past R: g(R) + g'(R)(x - R).
  CHECK(f.grad(far)(0) == doctest::Approx(4 * 27 - 12 + 104.0));
}

TEST_CASE("Langevin presets use sqrt(2 / tau)") {
  ProblemParams pp;
  pp.tau = 8.0;
  const ChainSpec spec = make_preset(Preset::gld, pp);
  CHECK(spec.constants.sigma0 == doctest::Approx(0.5));
  CHECK(spec.cov_coeff(spec.x0)(0, 0) == doctest::Approx(0.5));
  CHECK(spec.constants.m_eps == 0.0);
  pp.noise = NoiseKind::rademacher;
  pp.eta = 1.0 / 16.0;
  const ChainSpec r = make_preset(Preset::sgld, pp);
  // m_eps^2 eta^beta equals the tabulated gap with beta = 1.
  CHECK(r.constants.m_eps * r.constants.m_eps * pp.eta == doctest::Approx(clt_gap_sup(NoiseKind::rademacher)));
}

TEST_CASE("invalid problem parameters") {
  ProblemParams pp;
  pp.tau = 0.0;
  CHECK_THROWS_AS(make_preset(Preset::gld, pp), ValidationError);
  pp = ProblemParams{};
  pp.x0 = {1.0, 2.0};
  CHECK_THROWS_AS(make_preset(Preset::gld, pp), DimensionError);
  pp = ProblemParams{};
  pp.dim = 9;
  CHECK_THROWS_AS(make_preset(Preset::gld, pp), DimensionError);
}
