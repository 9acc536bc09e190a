#pragma once

#include "itolab/core.hpp"
#include "itolab/io.hpp"
#include "itolab/presets.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace itolab {

struct SweepPlan {
  Preset preset = Preset::gld;
  ProblemParams problem;
  std::vector<double> eta_grid{0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625};
  double horizon_t = 1.0;
  int n_traj = 20000;
  int refinement = 64;
  int n_repeats = 5;
  std::uint64_t seed = 1;
  /// Builds the chain at a step size; empty means make_preset(preset, problem).
  std::function<ChainSpec(double eta)> make_chain;
  /// Replaces the simulation with W2(eta) = coeff * eta^exponent (harness self-test).
  std::optional<std::pair<double, double>> synthetic;

  /// Throws ConfigurationError/PreconditionError on an invalid plan.
  void validate() const;
};

/// One (eta, repeat) measurement.
struct SweepPoint {
  double eta = 0.0;
  int s_batch = 1;
  int n_traj = 0;
  int repeat = 0;
  double w2 = 0.0;
  double std_error = 0.0;
  double floor = 0.0;  // W2 between the even and odd halves of the chain ensemble
  std::string method;
  std::uint64_t seed = 0;
  std::string warnings;
};

/// Repeats at one eta, reduced to a fit point.
struct SweepLevel {
  double eta = 0.0;
  int s_batch = 1;
  double value = 0.0;
  double std_error = 0.0;
  double floor = 0.0;
  bool excluded = false;
  std::string warnings;
};

struct FitPoint {
  double eta = 0.0;
  double value = 0.0;
  double std_error = 0.0;  // 0: unweighted
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least squares of log(value) on log(eta). With standard errors, each point is
/// weighted by (value / std_error)^2, the inverse variance of log(value).
SlopeFit fit_slope(const std::vector<FitPoint>& points);

inline constexpr double kSlopeTolerance = 0.15;

struct RateFit {
  std::string preset;
  SlopeFit fit;
  std::vector<SweepPoint> points;
  std::vector<SweepLevel> levels;
  std::vector<double> residuals;  // per level used in the fit
  RatePrediction predicted;
  std::optional<double> reported;
  int n_fit_points = 0;
  std::vector<std::string> warnings;

  /// Fitted slope >= predicted overall exponent - 0.15.
  [[nodiscard]] bool slope_check() const;
};

RateFit run_sweep(const SweepPlan& plan);

/// Reduces measurements to levels, applies the exclusion rule and fits. With fewer
/// than 2 usable levels the fit is NaN; with fewer than 4 the slope check fails.
RateFit fit_sweep_points(const std::string& preset, std::vector<SweepPoint> points, const RatePrediction& predicted,
                         std::optional<double> reported);

struct LemmaReport {
  std::string lemma;  // moment | increment | window | interpolation | corrector | clt-gap
  double measured = 0.0;
  double bound = 0.0;
  double margin = 0.0;
  double std_error = 0.0;
  bool pass = false;
  std::string detail;
};

struct VerifyOptions {
  int s_batch = 0;          // 0: batch-size rule from core
  double l_window = 0.0;    // 0: max of the window thresholds
  double l1 = 0.0;          // 0: max of the corrector thresholds
  double horizon_t = 1.0;
  int refinement = 16;      // cascade fine steps per chain step
  int n_clt = 200000;
  std::uint64_t seed = 1;
};

/// Checks every precondition without simulating; returns the constants used.
ConstantsBundle verify_preconditions(const ChainSpec& spec, const VerifyOptions& opts, int& s_batch,
                                     double& l_window, double& l1);

std::vector<LemmaReport> verify_lemmas(const ChainSpec& spec, int n_traj, const VerifyOptions& opts);

std::string sweep_csv(const RateFit& fit, const std::string& preset);
std::string fit_csv(const RateFit& fit);
std::string lemmas_csv(const std::vector<LemmaReport>& reports);
std::string constants_csv(const ConstantsBundle& k, const RatePrediction& r);

/// Log-log plot of a sweep, built only from the sweep.csv and fit.csv text.
std::string render_sweep_svg(const std::string& sweep_csv_text, const std::string& fit_csv_text);

}  // namespace itolab
