#pragma once

#include <span>
#include <string>

namespace itolab {

/// Sentinel exponent for "no bias" rows (alpha = infinity).
inline constexpr double kAlphaInfinity = 64.0;

struct AssumptionConstants {
  double m0 = 0.0;      // Lipschitz constant of b and sigma
  double m1 = 0.0;      // bias scale
  double m_eps = 0.0;   // CLT constant
  double sigma0 = 1.0;  // smallest eigenvalue of sigma
  double sigma1 = 1.0;  // largest eigenvalue of sigma
  double alpha = 1.0;   // bias decay exponent
  double beta = 1.0;    // CLT decay exponent
  int gamma = 0;        // noise-scale exponent, 0 or 1
  double b_at_zero_norm = 0.0;
  int dim = 1;
  bool bias_vanishes = false;  // alpha = infinity: every eta^{2 alpha} term is zero

  /// Throws ValidationError naming the violated bound.
  void validate() const;
  /// eta^{2 alpha}, or 0 when the bias vanishes.
  [[nodiscard]] double eta_pow_2alpha(double eta) const;
};

struct ConstantsBundle {
  double m_sq = 0.0;
  double c_growth = 0.0;
  double c_increment = 0.0;
  double c_window = 0.0;
  double l_window = 0.0;  // max of the two window thresholds
  double l_window_main = 0.0;
  double l_window_appendix = 0.0;
  double l1_corrector = 0.0;  // max of the two corrector thresholds
  double l1_main = 0.0;
  double l1_appendix = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  double c5 = 0.0;
  double c6 = 0.0;
  double c_w_scale = 0.0;  // eta^{gamma/2} sigma1 sqrt(2d/M0); +inf when M0 = 0

  // Inputs echoed so downstream bounds need nothing else.
  double eta = 0.0;
  int s_batch = 1;
  int chi0 = 1;
  double x0_norm_sq = 0.0;
  AssumptionConstants assumptions;

  [[nodiscard]] double eta_bar() const { return eta * s_batch; }
  /// R^2(t) = e^{C t} (1 + |x0|^2).
  [[nodiscard]] double r_sq(double t) const;
  /// eta^{2 alpha} + eta^{gamma+beta} (1 - chi0) / S + eta_bar.
  [[nodiscard]] double window_rate_term() const;
};

struct RatePrediction {
  double theta = 0.0;
  double secondary_exponent = 0.0;
  double overall_exponent = 0.0;
  int chi0 = 1;
};

struct HorizonBound {
  double horizon_t = 0.0;
  double r0_sq = 1.0;
  double r_sq_of_t = 1.0;
};

double compute_m_sq(const AssumptionConstants& c, double eta);

/// `chi0` < 0 means "infer": Gaussian iff m_eps == 0.
ConstantsBundle compute_constants(const AssumptionConstants& c, double eta, int s_batch,
                                  std::span<const double> x0, int chi0 = -1);

RatePrediction predict_rate(const AssumptionConstants& c, int chi0);

/// e^{C t}(1 + |x0|^2) with C evaluated at eta = 1, which dominates every eta <= 1.
double moment_envelope(const AssumptionConstants& c, std::span<const double> x0, double t);
double moment_envelope(const AssumptionConstants& c, std::span<const double> x0, double t,
                       double eta);

HorizonBound horizon_bound(const AssumptionConstants& c, std::span<const double> x0, double t,
                           double eta);

/// Batch size that balances the CLT term against eta_bar: ceil(eta^{-(1-beta)/2}) for
/// non-Gaussian noise, 1 for Gaussian.
int corollary_batch_size(double eta, double beta, int chi0);

void check_stepsize(double eta);

}  // namespace itolab
