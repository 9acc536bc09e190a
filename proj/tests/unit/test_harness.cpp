#include "itolab/errors.hpp"
#include "itolab/harness.hpp"

#include <doctest.h>

#include <cmath>

using namespace itolab;

TEST_CASE("slope of an exact power law") {
  std::vector<FitPoint> pts;
  for (double eta : {0.5, 0.25, 0.125, 0.0625}) pts.push_back({eta, 3.0 * std::pow(eta, 0.75), 0.0});
  const SlopeFit f = fit_slope(pts);
  CHECK(f.slope == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(f.r_squared == doctest::Approx(1.0));
}

TEST_CASE("hand-computed unweighted fit") {
  // log-log points (0, 0), (1, 1), (2, 3): slope 1.5, intercept -1/6.
  std::vector<FitPoint> pts{{1.0, 1.0, 0.0}, {std::exp(1.0), std::exp(1.0), 0.0}, {std::exp(2.0), std::exp(3.0), 0.0}};
  const SlopeFit f = fit_slope(pts);
  CHECK(f.slope == doctest::Approx(1.5));
  CHECK(f.intercept == doctest::Approx(-1.0 / 6.0));
  // SS_res = 1/6, SS_tot = 14/3.
  CHECK(f.r_squared == doctest::Approx(27.0 / 28.0));
}

TEST_CASE("weights favour precise points") {
  std::vector<FitPoint> pts{{1.0, 1.0, 0.001}, {std::exp(1.0), std::exp(1.0), 0.001 * std::exp(1.0)},
                            {std::exp(2.0), std::exp(3.0), 100.0}};
  CHECK(fit_slope(pts).slope == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("fit invariances") {
  std::vector<FitPoint> a{{0.5, 0.3, 0.01}, {0.25, 0.2, 0.01}, {0.125, 0.11, 0.005}, {0.0625, 0.07, 0.004}};
  std::vector<FitPoint> b = a;
  for (auto& p : b) {
    p.value *= 10.0;
    p.std_error *= 10.0;
  }
  const SlopeFit fa = fit_slope(a), fb = fit_slope(b);
  CHECK(fa.slope == doctest::Approx(fb.slope).epsilon(1e-12));
  CHECK(fb.intercept - fa.intercept == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("fit rejects unusable data") {
  CHECK_THROWS_AS(fit_slope({{0.5, 1.0, 0.0}}), DataError);
  CHECK_THROWS_AS(fit_slope({{0.5, 1.0, 0.0}, {0.25, 0.0, 0.0}}), DataError);
  CHECK_THROWS_AS(fit_slope({{0.5, 1.0, 0.0}, {0.5, 2.0, 0.0}}), DataError);
}

TEST_CASE("synthetic series is echoed by the sweep") {
  SweepPlan plan;
  plan.preset = Preset::sgd;
  plan.n_repeats = 2;
  plan.synthetic = std::make_pair(0.8, 0.5);
  const RateFit fit = run_sweep(plan);
  CHECK(fit.n_fit_points == 6);
  CHECK(fit.fit.slope == doctest::Approx(0.5).epsilon(0.03));
  CHECK(fit.predicted.overall_exponent == 0.75);
  CHECK(fit.reported.value() == 0.75);
  CHECK_FALSE(fit.slope_check());
  plan.synthetic = std::make_pair(0.8, 0.7);
  CHECK(run_sweep(plan).slope_check());
}

TEST_CASE("points below the floor are excluded and flagged") {
  std::vector<SweepPoint> pts;
  const double etas[] = {0.5, 0.25, 0.125, 0.0625, 0.03125};
  for (double eta : etas) {
    SweepPoint p;
    p.eta = eta;
    p.w2 = eta;
    p.std_error = 0.001;
    p.floor = eta < 0.05 ? 0.1 : 0.001;
    pts.push_back(p);
  }
  const RateFit fit = fit_sweep_points("X", pts, RatePrediction{1.0, 0.5, 0.5, 1}, std::nullopt);
  CHECK(fit.n_fit_points == 4);
  CHECK(fit.levels.back().excluded);
  CHECK(fit.points.back().warnings.find("excluded") != std::string::npos);
  CHECK(fit.fit.slope == doctest::Approx(1.0));
  const std::string csv = sweep_csv(fit, "X");
  CHECK(csv.rfind("preset,eta,S,n_traj,repeat,w2,stderr,", 0) == 0);
  CHECK(csv.find("excluded") != std::string::npos);

  // Too few usable points: no throw, failed check, warning recorded.
  for (auto& p : pts) p.floor = 1.0;
  const RateFit none = fit_sweep_points("X", pts, RatePrediction{1.0, 0.5, 0.5, 1}, std::nullopt);
  CHECK(none.n_fit_points == 0);
  CHECK_FALSE(none.slope_check());
  CHECK_FALSE(none.warnings.empty());
}

TEST_CASE("plan validation") {
  SweepPlan plan;
  plan.eta_grid = {0.1, 0.05};
  CHECK_THROWS_AS(plan.validate(), ConfigurationError);
  plan.eta_grid = {0.125, 0.0625, 0.03125, 0.3};
  CHECK_THROWS_AS(plan.validate(), PreconditionError);
  plan.eta_grid = {0.125, 0.0625, 0.03125, 0.015625};
  plan.refinement = 4;
  CHECK_THROWS_AS(plan.validate(), ConfigurationError);
}

TEST_CASE("lemma suite on GLD") {
  ProblemParams pp;
  pp.eta = 1.0 / 32.0;
  const ChainSpec spec = make_preset(Preset::gld, pp);
  VerifyOptions o;
  o.n_clt = 20000;
  const auto reports = verify_lemmas(spec, 2000, o);
  REQUIRE(reports.size() == 6);
  const char* names[] = {"moment", "increment", "window", "interpolation", "corrector", "clt-gap"};
  for (std::size_t i = 0; i < 6; ++i) {
    CAPTURE(reports[i].detail);
    CHECK(reports[i].lemma == names[i]);
    CHECK(reports[i].pass);
  }
  const std::string csv = lemmas_csv(reports);
  CHECK(csv.rfind("lemma,measured,bound,margin,pass", 0) == 0);
}

TEST_CASE("lemma preconditions are checked before simulating") {
  ProblemParams pp;
  pp.eta = 1.0 / 32.0;
  const ChainSpec spec = make_preset(Preset::gld, pp);
  VerifyOptions o;
  o.l_window = 6.0;
  CHECK_THROWS_AS(verify_lemmas(spec, 100, o), PreconditionError);
  o = VerifyOptions{};
  o.l1 = 1.0;
  CHECK_THROWS_AS(verify_lemmas(spec, 100, o), PreconditionError);
}

TEST_CASE("svg is rendered from csv text") {
  const std::string sweep = "preset,eta,S,n_traj,repeat,w2,stderr,floor,method,seed,warnings\n"
                            "X,0.5,1,10,0,0.5,0.01,0,m,1,\nX,0.25,1,10,0,0.25,0.01,0,m,1,\n";
  const std::string fit = "preset,slope,intercept,r2\nX,1,0,1\n";
  const std::string svg = render_sweep_svg(sweep, fit);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("<circle") != std::string::npos);
  CHECK(svg.find("<line") != std::string::npos);
  CHECK(render_sweep_svg(sweep, fit) == svg);
}
