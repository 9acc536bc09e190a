#include "itolab/presets.hpp"

#include "itolab/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace itolab {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

Mat gaussian_matrix(int rows, int cols, std::uint64_t seed, std::uint64_t tag) {
  RngStream s(seed, tag, 0, StreamRole::probe);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = s.normal();
  }
  return m;
}

Mat random_orthogonal(int d, std::uint64_t seed, std::uint64_t tag) {
  Eigen::HouseholderQR<Mat> qr(gaussian_matrix(d, d, seed, tag));
  Mat q = qr.householderQ();
  return q;
}

double spectral_norm(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

/// Fixed SPD matrix with eigenvalues in [0.1, 1].
Mat projection_matrix(int d, std::uint64_t seed) {
  RngStream s(seed, 101, 0, StreamRole::probe);
  Vec ev(d);
  for (int i = 0; i < d; ++i) ev(i) = 0.1 + 0.9 * s.uniform();
  const Mat q = random_orthogonal(d, seed, 102);
  Mat p = q * ev.asDiagonal() * q.transpose();
  return 0.5 * (p + p.transpose());
}

/// Rotation of coordinates (0, 1) by 0.5 atan(|x|); identity when d = 1.
Mat state_rotation(const Vec& x) {
  const int d = static_cast<int>(x.size());
  Mat r = Mat::Identity(d, d);
  if (d >= 2) {
    const double a = 0.5 * std::atan(x.norm());
    r(0, 0) = std::cos(a);
    r(0, 1) = -std::sin(a);
    r(1, 0) = std::sin(a);
    r(1, 1) = std::cos(a);
  }
  return r;
}

Vec default_x0(const ProblemParams& p) {
  if (p.x0.empty()) return Vec::Ones(p.dim);
  if (static_cast<int>(p.x0.size()) != p.dim) {
    throw DimensionError("x0 has " + std::to_string(p.x0.size()) + " entries, dim is " + std::to_string(p.dim));
  }
  return to_vec(p.x0);
}

Vec curvature_diag(const ProblemParams& p) {
  if (p.curvature.empty()) throw ConfigurationError("curvature must not be empty");
  Vec a(p.dim);
  for (int i = 0; i < p.dim; ++i) {
    a(i) = p.curvature.size() == 1 ? p.curvature[0] : p.curvature.at(static_cast<std::size_t>(i));
  }
  if (p.curvature.size() != 1 && static_cast<int>(p.curvature.size()) != p.dim) {
    throw DimensionError("curvature needs 1 or dim entries");
  }
  if ((a.array() <= 0.0).any()) throw ValidationError("curvature entries must be > 0 (A must be SPD)");
  return a;
}

}  // namespace

Preset parse_preset(const std::string& name) {
  const std::string n = lower(name);
  if (n == "gld") return Preset::gld;
  if (n == "sgld") return Preset::sgld;
  if (n == "sgld-smoothing") return Preset::sgld_smoothing;
  if (n == "sgd") return Preset::sgd;
  if (n == "sgda") return Preset::sgda;
  if (n == "sa-fp") return Preset::sa_fp;
  if (n == "sa") return Preset::sa;
  if (n == "sgb") return Preset::sgb;
  if (n == "sglb") return Preset::sglb;
  if (n == "sglb-o") return Preset::sglb_o;
  throw ConfigurationError("unknown preset '" + name + "'");
}

std::string to_string(Preset p) {
  switch (p) {
    case Preset::gld: return "GLD";
    case Preset::sgld: return "SGLD";
    case Preset::sgld_smoothing: return "SGLD-smoothing";
    case Preset::sgd: return "SGD";
    case Preset::sgda: return "SGDA";
    case Preset::sa_fp: return "SA-FP";
    case Preset::sa: return "SA";
    case Preset::sgb: return "SGB";
    case Preset::sglb: return "SGLB";
    case Preset::sglb_o: return "SGLB-O";
  }
  return "unknown";
}

Problem parse_problem(const std::string& name) {
  const std::string n = lower(name);
  if (n == "quadratic" || n == "ou") return Problem::quadratic;
  if (n == "double-well") return Problem::double_well;
  if (n == "bilinear") return Problem::bilinear;
  if (n == "affine-map" || n == "fixed-point") return Problem::affine_map;
  throw ConfigurationError("unknown problem '" + name + "'");
}

std::string to_string(Problem p) {
  switch (p) {
    case Problem::quadratic: return "quadratic";
    case Problem::double_well: return "double-well";
    case Problem::bilinear: return "bilinear";
    case Problem::affine_map: return "affine-map";
  }
  return "unknown";
}

std::vector<Preset> all_presets() {
  return {Preset::gld, Preset::sgld, Preset::sgld_smoothing, Preset::sgd, Preset::sgda,
          Preset::sa_fp, Preset::sa, Preset::sgb, Preset::sglb, Preset::sglb_o};
}

PresetRow preset_row(Preset p) {
  switch (p) {
    case Preset::gld: return {0, kAlphaInfinity, 1.0, true};
    case Preset::sgld:
    case Preset::sgld_smoothing: return {0, 0.5, 1.0, false};
    case Preset::sgd:
    case Preset::sgda:
    case Preset::sa_fp:
    case Preset::sa:
    case Preset::sgb: return {1, kAlphaInfinity, 0.0, true};
    case Preset::sglb: return {0, 0.5, 0.0, false};
    case Preset::sglb_o: return {0, 0.25, 0.0, false};
  }
  throw ConfigurationError("unknown preset");
}

std::optional<double> reported_rate(Preset p, int chi0) {
  switch (p) {
    case Preset::sgld: return 0.25;
    case Preset::sgd: return chi0 ? 0.75 : 0.5;
    case Preset::sgb: return 0.5;
    case Preset::sglb: return 0.25;
    default: return std::nullopt;
  }
}

Objective make_objective(const ProblemParams& params) {
  check_dim(params.dim);
  Objective obj;
  if (params.problem == Problem::quadratic) {
    const Vec a = curvature_diag(params);
    obj.grad = [a](const Vec& x) { return Vec(a.cwiseProduct(x)); };
    obj.lipschitz = a.maxCoeff();
  } else if (params.problem == Problem::double_well) {
    // f(x) = sum (x_i^2 - 1)^2, gradient continued linearly beyond |x_i| = R.
    const double r = params.double_well_radius;
    if (!(r >= 1.0)) throw ConfigurationError("double_well_radius must be >= 1");
    const double g_r = 4.0 * r * r * r - 4.0 * r;
    const double slope = 12.0 * r * r - 4.0;
    obj.grad = [r, g_r, slope](const Vec& x) {
      Vec g(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = x(i);
        if (v > r) g(i) = g_r + slope * (v - r);
        else if (v < -r) g(i) = -g_r + slope * (v + r);
        else g(i) = 4.0 * v * v * v - 4.0 * v;
      }
      return g;
    };
    obj.lipschitz = slope;
  } else {
    throw ConfigurationError("problem '" + to_string(params.problem) + "' has no scalar objective");
  }
  return obj;
}

ChainSpec make_preset(Preset p, const ProblemParams& params) {
  check_dim(params.dim);
  check_stepsize(params.eta);
  const int d = params.dim;
  const PresetRow row = preset_row(p);
  if (!(params.tau > 0.0)) throw ValidationError("tau must be > 0");
  if (!(params.cov_scale > 0.0)) throw ValidationError("uniform ellipticity violated: cov_scale must be > 0");

  ChainSpec spec;
  spec.name = to_string(p);
  spec.eta = params.eta;
  spec.gamma = row.gamma;
  spec.x0 = default_x0(params);
  spec.noise.kind = params.noise;
  spec.noise.dim = d;
  spec.noise.declared_beta = row.beta;
  spec.noise.state_rotation = params.noise_rotation;

  AssumptionConstants& c = spec.constants;
  c.dim = d;
  c.gamma = row.gamma;
  c.alpha = row.alpha;
  c.beta = row.beta;
  c.bias_vanishes = row.bias_vanishes;

  const double langevin_scale = std::sqrt(2.0 / params.tau);
  const double grad_scale = std::sqrt(params.cov_scale);
  const double cov = params.cov_scale;
  const bool langevin = p == Preset::gld || p == Preset::sgld || p == Preset::sgld_smoothing ||
                        p == Preset::sglb || p == Preset::sglb_o;
  const double sig = langevin ? langevin_scale : grad_scale;
  spec.cov_coeff = [d, sig](const Vec&) { return Mat(sig * Mat::Identity(d, d)); };
  c.sigma0 = sig;
  c.sigma1 = sig;

  double lip = 0.0;
  double m1_sq = 0.0;

  switch (p) {
    case Preset::sgda: {
      if (params.problem != Problem::bilinear) throw ConfigurationError("SGDA needs problem 'bilinear'");
      if (d % 2 != 0) throw DimensionError("bilinear problem needs an even dimension");
      const int m = d / 2;
      Mat b = gaussian_matrix(m, m, params.problem_seed, 201);
      b *= params.curvature.at(0) / spectral_norm(b);
      spec.drift = [b, m](const Vec& x) {
        Vec g(2 * m);
        g.head(m) = -b * x.tail(m);
        g.tail(m) = b.transpose() * x.head(m);
        return g;
      };
      lip = spectral_norm(b);
      break;
    }
    case Preset::sa_fp: {
      if (params.problem != Problem::affine_map) throw ConfigurationError("SA-FP needs problem 'affine-map'");
      if (!(params.contraction >= 0.0 && params.contraction < 1.0)) {
        throw ConfigurationError("contraction must lie in [0, 1)");
      }
      Mat g = gaussian_matrix(d, d, params.problem_seed, 301);
      g *= params.contraction / spectral_norm(g);
      const Vec h = Vec::Constant(d, 0.5);
      spec.drift = [g, h](const Vec& x) { return Vec(g * x + h - x); };
      lip = spectral_norm(g - Mat::Identity(d, d));
      break;
    }
    case Preset::sa: {
      if (params.problem != Problem::quadratic) throw ConfigurationError("SA needs problem 'quadratic'");
      const Vec a = curvature_diag(params);
      const Vec shift = Vec::Constant(d, params.sa_shift);
      spec.drift = [a, shift](const Vec& x) { return Vec(-a.cwiseProduct(x) - shift); };
      lip = a.maxCoeff();
      break;
    }
    default: {
      if (params.problem != Problem::quadratic && params.problem != Problem::double_well) {
        throw ConfigurationError(spec.name + " needs problem 'quadratic' or 'double-well'");
      }
      const Objective obj = make_objective(params);
      lip = obj.lipschitz;
      const DriftFn grad = obj.grad;
      if (p == Preset::sgb || p == Preset::sglb) {
        const Mat pm = projection_matrix(d, params.problem_seed);
        if (params.projection_rotation && d >= 2) {
          spec.drift = [pm, grad](const Vec& x) {
            const Mat r = state_rotation(x);
            return Vec(-(r * pm * r.transpose()) * grad(x));
          };
          lip = 1.5 * spectral_norm(pm) * obj.lipschitz;
        } else {
          spec.drift = [pm, grad](const Vec& x) { return Vec(-pm * grad(x)); };
          lip = spectral_norm(pm) * obj.lipschitz;
        }
      } else if (p == Preset::sglb_o) {
        const Mat pinf = projection_matrix(d, params.problem_seed);
        Mat e = gaussian_matrix(d, d, params.problem_seed, 401);
        e = 0.5 * (e + e.transpose());
        e *= 0.1 / spectral_norm(e);
        spec.drift = [pinf, grad](const Vec& x) { return Vec(-pinf * grad(x)); };
        // P(x) = P_inf + eta^{1/4} E, so delta = (P_inf - P(x)) grad f = -eta^{1/4} E grad f.
        spec.bias = [e, grad](const Vec& x, std::int64_t, double eta) {
          return Vec(-std::pow(eta, 0.25) * (e * grad(x)));
        };
        lip = spectral_norm(pinf) * obj.lipschitz;
        m1_sq = 0.01 * obj.lipschitz * obj.lipschitz;
      } else {
        spec.drift = [grad](const Vec& x) { return Vec(-grad(x)); };
      }
      if (p == Preset::sgld_smoothing) {
        constexpr int kInner = 64;
        std::vector<Vec> inner;
        double mean_norm = 0.0;
        RngStream s(params.problem_seed, 501, 0, StreamRole::inner_mc);
        for (int i = 0; i < kInner; ++i) {
          Vec e(d);
          for (int j = 0; j < d; ++j) e(j) = s.normal();
          mean_norm += e.norm() / kInner;
          inner.push_back(e);
        }
        spec.bias = [grad, inner](const Vec& x, std::int64_t, double eta) {
          const double r = std::sqrt(eta);
          Vec avg = Vec::Zero(x.size());
          for (const Vec& e : inner) avg += grad(x + r * e);
          avg /= static_cast<double>(inner.size());
          return Vec(grad(x) - avg);
        };
        m1_sq = std::max(m1_sq, std::pow(obj.lipschitz * mean_norm, 2));
      }
      break;
    }
  }

  // Covariance shifts.
  if (p == Preset::sgld || p == Preset::sgld_smoothing) {
    const double base = 2.0 / params.tau;
    spec.cov_shift = [d, base, cov](const Vec&, std::int64_t, double eta) {
      return Mat((std::sqrt(base + eta * cov) - std::sqrt(base)) * Mat::Identity(d, d));
    };
    m1_sq = std::max(m1_sq, d * cov);
  } else if (p == Preset::sglb || p == Preset::sglb_o) {
    spec.cov_shift = [d, cov](const Vec&, std::int64_t, double eta) {
      return Mat(std::sqrt(eta * cov) * Mat::Identity(d, d));
    };
    m1_sq = p == Preset::sglb ? d * cov : m1_sq + d * cov;
  }

  c.m0 = lip;
  c.m1 = std::sqrt(m1_sq);
  c.b_at_zero_norm = spec.drift(Vec::Zero(d)).norm();
  if (params.noise != NoiseKind::gaussian) {
    c.m_eps = std::sqrt(d * clt_gap_sup(params.noise) / std::pow(params.eta, c.beta));
  }
  return spec;
}

}  // namespace itolab
