#include "itolab/core.hpp"

#include "itolab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace itolab {
namespace {

double norm_sq(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void AssumptionConstants::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError(msg); };
  if (!(sigma0 > 0.0)) fail("uniform ellipticity violated: sigma0 must be > 0 (got " + fmt(sigma0) + ")");
  if (!(sigma1 >= sigma0)) {
    fail("uniform ellipticity violated: sigma1 must be >= sigma0 (got sigma1=" + fmt(sigma1) +
         ", sigma0=" + fmt(sigma0) + ")");
  }
  if (!(m0 >= 0.0)) fail("Lipschitz bound violated: m0 must be >= 0 (got " + fmt(m0) + ")");
  if (!(m1 >= 0.0)) fail("bias bound violated: m1 must be >= 0 (got " + fmt(m1) + ")");
  if (!(m_eps >= 0.0)) fail("CLT bound violated: m_eps must be >= 0 (got " + fmt(m_eps) + ")");
  if (!(alpha > 0.0)) fail("bias bound violated: alpha must be > 0 (got " + fmt(alpha) + ")");
  if (!(beta >= 0.0 && beta <= 1.0)) fail("CLT bound violated: beta must lie in [0, 1] (got " + fmt(beta) + ")");
  if (gamma != 0 && gamma != 1) fail("gamma must be 0 or 1 (got " + std::to_string(gamma) + ")");
  if (!(b_at_zero_norm >= 0.0)) fail("|b(0)| must be >= 0 (got " + fmt(b_at_zero_norm) + ")");
  if (dim < 1) fail("dim must be a positive integer (got " + std::to_string(dim) + ")");
}

double AssumptionConstants::eta_pow_2alpha(double eta) const {
  return bias_vanishes ? 0.0 : std::pow(eta, 2.0 * alpha);
}

double ConstantsBundle::r_sq(double t) const { return std::exp(c_growth * t) * (1.0 + x0_norm_sq); }

double ConstantsBundle::window_rate_term() const {
  const auto& a = assumptions;
  return a.eta_pow_2alpha(eta) +
         std::pow(eta, a.gamma + a.beta) * (1.0 - chi0) / static_cast<double>(s_batch) + eta_bar();
}

void check_stepsize(double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError("step size eta must lie in (0, 1] (got " + fmt(eta) + ")");
}

double compute_m_sq(const AssumptionConstants& c, double eta) {
  c.validate();
  check_stepsize(eta);
  const double m0_sq = c.m0 * c.m0;
  return 2.0 * std::max(m0_sq, c.b_at_zero_norm * c.b_at_zero_norm) +
         2.0 * std::max(m0_sq, c.dim * c.sigma1 * c.sigma1) +
         3.0 * c.eta_pow_2alpha(eta) * c.m1 * c.m1;
}

ConstantsBundle compute_constants(const AssumptionConstants& c, double eta, int s_batch,
                                  std::span<const double> x0, int chi0) {
  const double m_sq = compute_m_sq(c, eta);
  if (s_batch < 1) throw PreconditionError("batch size S must be >= 1 (got " + std::to_string(s_batch) + ")");
  const double eta_bar = s_batch * eta;
  if (eta_bar > 1.0) {
    throw PreconditionError("S * eta <= 1 violated (S=" + std::to_string(s_batch) + ", eta=" + fmt(eta) + ")");
  }
  if (static_cast<int>(x0.size()) != c.dim) {
    throw DimensionError("x0 has " + std::to_string(x0.size()) + " coordinates, dim is " +
                         std::to_string(c.dim));
  }

  ConstantsBundle k;
  k.assumptions = c;
  k.eta = eta;
  k.s_batch = s_batch;
  k.chi0 = chi0 < 0 ? (c.m_eps == 0.0 ? 1 : 0) : (chi0 != 0 ? 1 : 0);
  k.x0_norm_sq = norm_sq(x0);

  const double m0 = c.m0;
  const double m0_sq = m0 * m0;
  const double m1_sq = c.m1 * c.m1;
  const double meps_sq = c.m_eps * c.m_eps;
  const double d = c.dim;
  const double s1_sq = c.sigma1 * c.sigma1;
  const double m = std::sqrt(m_sq);

  k.m_sq = m_sq;
  k.c_growth = 8.0 * (1.0 + m_sq);
  const double cg = k.c_growth;
  k.c_increment = 12.0 * m_sq * std::exp((cg + 1.0) * eta_bar);
  k.c_window = 2.0 * (3.0 * m1_sq * std::exp(cg) + 3.0 * m0_sq * k.c_increment +
                      4.0 * m1_sq * std::exp(cg) + 48.0 * m0_sq * m_sq * std::exp(cg + 1.0) +
                      4.0 * d * s1_sq * meps_sq);

  k.l_window_main = 1.0 + m0 + m + 2.0 * m0_sq + m_sq + m_sq * meps_sq;
  k.l_window_appendix = 1.0 + 10.0 * m0_sq;
  k.l_window = std::max(k.l_window_main, k.l_window_appendix);

  const double eta_g = std::pow(eta, c.gamma);
  k.l1_main = 2.0 * m0 + 4.0 * m0 * eta_g;
  k.l1_appendix = 2.0 * m0 + 4.0 * m0_sq * eta_g;
  k.l1_corrector = std::max(k.l1_main, k.l1_appendix);

  const double l = k.l_window;
  const double l1 = k.l1_corrector;
  k.c2 = 4.0 * (l * l + m_sq) * (1.0 + 3.0 * k.c_window) * (1.0 + k.x0_norm_sq);
  k.c3 = 2.0 * (l * l * k.c_window + l1 * l1 * k.c2) / (c.sigma0 * c.sigma0);
  k.c5 = k.c_window + 2.0 * k.c2;
  if (m0 > 0.0) {
    k.c4 = std::sqrt(2.0 * d / m0) * c.sigma1 * std::sqrt(k.c3);
    k.c6 = std::sqrt(std::sqrt(2.0) * d / m0) * c.sigma1 * std::pow(k.c3, 0.25);
    k.c_w_scale = std::pow(eta, 0.5 * c.gamma) * c.sigma1 * std::sqrt(2.0 * d / m0);
  } else {
    const double inf = std::numeric_limits<double>::infinity();
    k.c4 = inf;
    k.c6 = inf;
    k.c_w_scale = inf;
  }
  return k;
}

RatePrediction predict_rate(const AssumptionConstants& c, int chi0) {
  c.validate();
  RatePrediction r;
  r.chi0 = chi0 != 0 ? 1 : 0;
  const double x = r.chi0;
  const double formula = ((c.gamma + 1.0) * (1.0 + x) + (c.gamma + c.beta) * (1.0 - x)) / 4.0;
  r.theta = c.bias_vanishes ? formula : std::min(c.alpha, formula);
  r.secondary_exponent = r.theta / 2.0 + c.gamma / 4.0;
  r.overall_exponent = std::min(r.theta, r.secondary_exponent);
  return r;
}

double moment_envelope(const AssumptionConstants& c, std::span<const double> x0, double t) {
  return moment_envelope(c, x0, t, 1.0);
}

double moment_envelope(const AssumptionConstants& c, std::span<const double> x0, double t,
                       double eta) {
  if (!(t >= 0.0)) throw PreconditionError("time t must be >= 0 (got " + fmt(t) + ")");
  const double cg = 8.0 * (1.0 + compute_m_sq(c, eta));
  return std::exp(cg * t) * (1.0 + norm_sq(x0));
}

HorizonBound horizon_bound(const AssumptionConstants& c, std::span<const double> x0, double t,
                           double eta) {
  HorizonBound h;
  h.horizon_t = t;
  h.r0_sq = std::max(1.0, norm_sq(x0));
  h.r_sq_of_t = moment_envelope(c, x0, t, eta);
  return h;
}

int corollary_batch_size(double eta, double beta, int chi0) {
  check_stepsize(eta);
  if (chi0 != 0) return 1;
  const double v = std::pow(eta, -(1.0 - beta) / 2.0);
  const double r = std::round(v);
  // eta = 2^-k gives exact powers of two up to rounding noise in pow.
  if (std::abs(v - r) <= 1e-9 * std::max(1.0, r)) return static_cast<int>(r);
  return static_cast<int>(std::ceil(v));
}

}  // namespace itolab
