#include "itolab/chain.hpp"

#include "itolab/errors.hpp"
#include "itolab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace itolab {
namespace {

constexpr std::size_t kTrajBlock = 64;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string fmt(const Vec& v) {
  std::ostringstream os;
  os.precision(6);
  os << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i);
  os << ")";
  return os.str();
}

Vec advance(const ChainSpec& spec, const Vec& x, std::int64_t k, const Vec& eps) {
  Vec drift = spec.drift(x);
  if (spec.bias) drift += spec.bias(x, k, spec.eta);
  Mat sig = spec.cov_coeff(x);
  if (spec.cov_shift) sig += spec.cov_shift(x, k, spec.eta);
  const Vec noise = sig * eps;
  return x + spec.eta * drift + spec.noise_scale() * noise;
}

bool diverged(const Vec& x) { return !x.allFinite() || x.norm() > kDivergenceNorm; }

double op_norm_sym(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

void check_spec_shape(const ChainSpec& spec) {
  if (!spec.drift || !spec.cov_coeff) throw ConfigurationError("chain spec needs drift and cov_coeff");
  check_dim(spec.dim());
  check_stepsize(spec.eta);
  if (spec.noise.dim != spec.dim()) throw DimensionError("noise dimension does not match the state");
  if (spec.constants.dim != spec.dim()) throw DimensionError("constants.dim does not match the state");
  if (spec.constants.gamma != spec.gamma) throw ValidationError("constants.gamma differs from the chain's gamma");
}

}  // namespace

double ChainSpec::noise_scale() const { return std::sqrt(eta * std::pow(eta, gamma)); }

Vec step_with_noise(const ChainSpec& spec, const Vec& state, std::int64_t k, const Vec& eps) {
  if (eps.size() != state.size()) throw DimensionError("injected noise has wrong dimension");
  Vec next = advance(spec, state, k, eps);
  if (!next.allFinite()) {
    throw DivergenceError("non-finite state at step " + std::to_string(k + 1) + " of chain '" + spec.name + "'");
  }
  return next;
}

Vec step(const ChainSpec& spec, const Vec& state, std::int64_t k, RngStream stream) {
  return step_with_noise(spec, state, k, draw_noise(spec.noise, state, stream));
}

void validate_chain(const ChainSpec& spec, const ValidationOptions& opts) {
  check_spec_shape(spec);
  const AssumptionConstants& c = spec.constants;
  c.validate();
  const int d = spec.dim();
  const double eta = spec.eta;
  auto fail = [&](const std::string& msg) { throw ValidationError(msg + " [chain '" + spec.name + "']"); };

  if (spec.noise.kind == NoiseKind::gaussian) {
    if (c.m_eps != 0.0) fail("CLT bound: m_eps must be 0 for Gaussian noise (got " + fmt(c.m_eps) + ")");
  } else {
    const double need = d * clt_gap_sup(spec.noise.kind);
    const double have = c.m_eps * c.m_eps * std::pow(eta, c.beta);
    if (have < need * (1.0 - 1e-9)) {
      fail("CLT bound violated: m_eps^2 eta^beta = " + fmt(have) + " < tabulated W2^2 gap " + fmt(need) +
           " for " + to_string(spec.noise.kind) + " noise");
    }
  }

  const Vec zero = Vec::Zero(d);
  const double b0 = spec.drift(zero).norm();
  if (b0 > c.b_at_zero_norm * (1.0 + 1e-9) + 1e-12) {
    fail("|b(0)| = " + fmt(b0) + " exceeds b_at_zero_norm = " + fmt(c.b_at_zero_norm));
  }

  const double radius = opts.radius > 0.0 ? opts.radius : std::max(3.0, 2.0 * spec.x0.norm());
  RngStream rng(opts.seed, 0, 0, StreamRole::probe);
  std::vector<Vec> probes{zero, spec.x0};
  for (int i = 0; i < opts.n_probe; ++i) {
    Vec x(d);
    for (int j = 0; j < d; ++j) x(j) = rng.normal();
    probes.push_back(x * (radius * rng.uniform() / std::max(x.norm(), 1e-300)));
  }

  const double bias_scale = c.m1 * c.m1 * c.eta_pow_2alpha(eta);
  const std::int64_t ks[] = {0, 1, 17};
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const Vec& x = probes[i];
    const Mat sig = spec.cov_coeff(x);
    if ((sig - sig.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, sig.cwiseAbs().maxCoeff())) {
      fail("sigma(x) is not symmetric at x = " + fmt(x));
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(sig);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo < c.sigma0 * (1.0 - 1e-9)) {
      fail("uniform ellipticity violated: eigenvalue " + fmt(lo) + " of sigma(x) below sigma0 = " +
           fmt(c.sigma0) + " at x = " + fmt(x));
    }
    if (hi > c.sigma1 * (1.0 + 1e-9)) {
      fail("uniform ellipticity violated: eigenvalue " + fmt(hi) + " of sigma(x) above sigma1 = " +
           fmt(c.sigma1) + " at x = " + fmt(x));
    }
    const double envelope = 1.0 + x.squaredNorm();
    for (std::int64_t k : ks) {
      if (spec.bias) {
        const double db = spec.bias(x, k, eta).squaredNorm();
        if (db > bias_scale * envelope * (1.0 + 1e-9) + 1e-24) {
          fail("bias bound violated: |delta_k(x)|^2 = " + fmt(db) + " > M1^2 eta^{2 alpha} (1 + |x|^2) = " +
               fmt(bias_scale * envelope) + " at x = " + fmt(x));
        }
      }
      if (spec.cov_shift) {
        const Mat shift = spec.cov_shift(x, k, eta);
        if ((shift - shift.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, shift.cwiseAbs().maxCoeff())) {
          fail("covariance shift Delta_k(x) is not symmetric at x = " + fmt(x));
        }
        const double tr = std::pow(eta, c.gamma) * (shift * shift).trace();
        if (tr > bias_scale * envelope * (1.0 + 1e-9) + 1e-24) {
          fail("covariance shift bound violated: eta^gamma Tr(Delta^2) = " + fmt(tr) +
               " > M1^2 eta^{2 alpha} (1 + |x|^2) = " + fmt(bias_scale * envelope) + " at x = " + fmt(x));
        }
      }
    }

    // Lipschitz pairs: a near neighbour and the next probe.
    Vec near(d);
    for (int j = 0; j < d; ++j) near(j) = rng.normal();
    near = x + near * (1e-3 * radius / std::max(near.norm(), 1e-300));
    const Vec& far = probes[(i + 1) % probes.size()];
    for (const Vec* y : std::initializer_list<const Vec*>{&near, &far}) {
      const double dist = (x - *y).norm();
      if (dist == 0.0) continue;
      const double db = (spec.drift(x) - spec.drift(*y)).norm();
      if (db > c.m0 * dist * (1.0 + 1e-9) + 1e-12) {
        fail("Lipschitz bound violated: |b(x) - b(y)| = " + fmt(db) + " > M0 |x - y| = " + fmt(c.m0 * dist) +
             " at x = " + fmt(x) + ", y = " + fmt(*y));
      }
      const double ds = op_norm_sym(spec.cov_coeff(x) - spec.cov_coeff(*y));
      if (ds > c.m0 * dist * (1.0 + 1e-9) + 1e-12) {
        fail("Lipschitz bound violated: |sigma(x) - sigma(y)| = " + fmt(ds) + " > M0 |x - y| = " +
             fmt(c.m0 * dist) + " at x = " + fmt(x) + ", y = " + fmt(*y));
      }
    }
  }
}

std::int64_t steps_for_horizon(double eta, double horizon_t) {
  check_stepsize(eta);
  if (!(horizon_t >= 0.0)) throw PreconditionError("horizon_t must be >= 0");
  const double k = std::round(horizon_t / eta);
  if (std::abs(k * eta - horizon_t) > 1e-9 * std::max(1.0, horizon_t)) {
    throw PreconditionError("horizon_t = " + fmt(horizon_t) + " is not an integer multiple of eta = " + fmt(eta));
  }
  return static_cast<std::int64_t>(k);
}

Vec Ensemble::state(int traj, std::size_t g) const {
  Vec v(dim);
  for (int c = 0; c < dim; ++c) v(c) = value(traj, g, c);
  return v;
}

EmpiricalMeasure Ensemble::at(std::size_t g) const {
  std::vector<double> pts;
  pts.reserve(static_cast<std::size_t>(n_traj) * static_cast<std::size_t>(dim));
  for (int i = 0; i < n_traj; ++i) {
    if (!valid[static_cast<std::size_t>(i)]) continue;
    for (int c = 0; c < dim; ++c) pts.push_back(value(i, g, c));
  }
  return EmpiricalMeasure(dim, std::move(pts));
}

EmpiricalMeasure Ensemble::half(std::size_t g, int parity) const {
  std::vector<double> pts;
  for (int i = parity; i < n_traj; i += 2) {
    if (!valid[static_cast<std::size_t>(i)]) continue;
    for (int c = 0; c < dim; ++c) pts.push_back(value(i, g, c));
  }
  return EmpiricalMeasure(dim, std::move(pts));
}

namespace {

void check_divergence(const std::vector<std::int64_t>& diverged_at, int n_traj, const std::string& what,
                      int& n_diverged) {
  n_diverged = 0;
  int first = -1;
  for (int i = 0; i < n_traj; ++i) {
    if (diverged_at[static_cast<std::size_t>(i)] >= 0) {
      ++n_diverged;
      if (first < 0) first = i;
    }
  }
  if (n_diverged > kMaxDivergedFraction * n_traj) {
    throw DivergenceError(what + ": " + std::to_string(n_diverged) + " of " + std::to_string(n_traj) +
                          " trajectories diverged (|X| > 1e8 or non-finite); first was trajectory " +
                          std::to_string(first) + " at step " +
                          std::to_string(diverged_at[static_cast<std::size_t>(first)]));
  }
}

}  // namespace

Ensemble simulate_ensemble(const ChainSpec& spec, int n_traj, double horizon_t,
                           const std::vector<std::int64_t>& record_grid, const RngStream& root) {
  check_spec_shape(spec);
  if (n_traj < 1) throw PreconditionError("n_traj must be >= 1");
  const std::int64_t k_total = steps_for_horizon(spec.eta, horizon_t);
  if (record_grid.empty()) throw PreconditionError("record grid is empty");
  for (std::size_t g = 0; g < record_grid.size(); ++g) {
    if (record_grid[g] < 0 || record_grid[g] > k_total) {
      throw PreconditionError("record grid step " + std::to_string(record_grid[g]) + " outside [0, " +
                              std::to_string(k_total) + "]");
    }
    if (g > 0 && record_grid[g] <= record_grid[g - 1]) throw PreconditionError("record grid must be increasing");
  }

  Ensemble ens;
  ens.n_traj = n_traj;
  ens.dim = spec.dim();
  ens.eta = spec.eta;
  ens.grid = record_grid;
  const std::size_t n_grid = record_grid.size();
  const auto d = static_cast<std::size_t>(ens.dim);
  ens.states.assign(static_cast<std::size_t>(n_traj) * n_grid * d, std::numeric_limits<double>::quiet_NaN());
  ens.valid.assign(static_cast<std::size_t>(n_traj), 1);
  std::vector<std::int64_t> diverged_at(static_cast<std::size_t>(n_traj), -1);
  const std::int64_t last = record_grid.back();

  parallel_for(static_cast<std::size_t>(n_traj), kTrajBlock, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Vec x = spec.x0;
      std::size_t g = 0;
      double* out = ens.states.data() + i * n_grid * d;
      for (std::int64_t k = 0;; ++k) {
        if (g < n_grid && record_grid[g] == k) {
          for (std::size_t c = 0; c < d; ++c) out[g * d + c] = x(static_cast<Eigen::Index>(c));
          ++g;
        }
        if (k == last) break;
        RngStream s = root.at(i, static_cast<std::uint64_t>(k), StreamRole::chain_noise);
        x = advance(spec, x, k, draw_noise(spec.noise, x, s));
        if (diverged(x)) {
          diverged_at[i] = k + 1;
          ens.valid[i] = 0;
          break;
        }
      }
    }
  });

  check_divergence(diverged_at, n_traj, "chain '" + spec.name + "'", ens.n_diverged);
  std::ostringstream lin;
  lin << "chain:" << spec.name << ";seed=" << root.root_seed() << ";role=chain_noise;n_traj=" << n_traj
      << ";eta=" << fmt(spec.eta) << ";K=" << k_total;
  ens.lineage = lin.str();
  return ens;
}

void check_window_thresholds(const ConstantsBundle& k, double l_window) {
  if (k.eta_bar() > 1.0) throw PreconditionError("S * eta <= 1 violated (S * eta = " + fmt(k.eta_bar()) + ")");
  if (l_window < k.l_window_main) {
    throw PreconditionError("window threshold violated: L = " + fmt(l_window) +
                            " < 1 + M0 + M + 2 M0^2 + M^2 + M^2 Meps^2 = " + fmt(k.l_window_main));
  }
  if (l_window < k.l_window_appendix) {
    throw PreconditionError("window threshold violated: L = " + fmt(l_window) + " < 1 + 10 M0^2 = " +
                            fmt(k.l_window_appendix));
  }
  if (l_window * k.eta_bar() > 1.0) {
    throw PreconditionError("window threshold violated: L * eta_bar = " + fmt(l_window * k.eta_bar()) + " > 1");
  }
}

std::vector<double> CoupledPair::mean_sq_gap() const {
  const std::size_t n_grid = coarse_grid.size();
  const auto d = static_cast<std::size_t>(dim);
  std::vector<double> out(n_grid, 0.0);
  int n_valid = 0;
  for (int i = 0; i < n_traj; ++i) {
    if (!valid[static_cast<std::size_t>(i)]) continue;
    ++n_valid;
    for (std::size_t g = 0; g < n_grid; ++g) {
      const std::size_t off = (static_cast<std::size_t>(i) * n_grid + g) * d;
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double gap = x_states[off + c] - y_states[off + c];
        s += gap * gap;
      }
      out[g] += s;
    }
  }
  for (auto& v : out) v /= std::max(n_valid, 1);
  return out;
}

CoupledPair simulate_coupled(const ChainSpec& spec, int s_batch, double l_window, int n_traj,
                             double horizon_t, const RngStream& root, const CoupledOptions& opts) {
  check_spec_shape(spec);
  if (s_batch < 1) throw PreconditionError("batch size S must be >= 1");
  if (n_traj < 1) throw PreconditionError("n_traj must be >= 1");
  if (!(l_window >= 0.0)) throw PreconditionError("window constant L must be >= 0");
  const double eta_bar = s_batch * spec.eta;
  if (eta_bar > 1.0) throw PreconditionError("S * eta <= 1 violated (S * eta = " + fmt(eta_bar) + ")");
  if (opts.enforce_thresholds) {
    const ConstantsBundle k = compute_constants(spec.constants, spec.eta, s_batch,
                                                {spec.x0.data(), static_cast<std::size_t>(spec.dim())},
                                                spec.noise.chi0());
    check_window_thresholds(k, l_window);
  }
  const std::int64_t k_total = steps_for_horizon(spec.eta, horizon_t);
  const std::int64_t n_coarse = k_total / s_batch;

  QuantileTable local_table;
  const QuantileTable* table = opts.table;
  if (spec.noise.kind != NoiseKind::gaussian && spec.noise.coupling == CouplingMode::quantile && table == nullptr) {
    local_table = QuantileTable::train(spec.noise, s_batch, 1 << 17,
                                       derive_seed(root.root_seed(), {static_cast<std::uint64_t>(s_batch), 0x7ab1e}));
    table = &local_table;
  }

  CoupledPair pair;
  pair.n_traj = n_traj;
  pair.dim = spec.dim();
  pair.s_batch = s_batch;
  pair.l_used = l_window;
  pair.eta_bar = eta_bar;
  for (std::int64_t k = 0; k <= n_coarse; ++k) pair.coarse_grid.push_back(k);
  const std::size_t n_grid = pair.coarse_grid.size();
  const auto d = static_cast<std::size_t>(pair.dim);
  pair.x_states.assign(static_cast<std::size_t>(n_traj) * n_grid * d, std::numeric_limits<double>::quiet_NaN());
  pair.y_states = pair.x_states;
  pair.valid.assign(static_cast<std::size_t>(n_traj), 1);
  std::vector<std::int64_t> diverged_at(static_cast<std::size_t>(n_traj), -1);

  const double y_scale = std::sqrt(eta_bar * std::pow(spec.eta, spec.gamma));
  const double pull = l_window * eta_bar;
  const bool rotate = spec.noise.state_rotation;

  parallel_for(static_cast<std::size_t>(n_traj), kTrajBlock, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Vec x = spec.x0;
      Vec y = spec.x0;
      double* xo = pair.x_states.data() + i * n_grid * d;
      double* yo = pair.y_states.data() + i * n_grid * d;
      auto record = [&](std::size_t g) {
        for (std::size_t c = 0; c < d; ++c) {
          xo[g * d + c] = x(static_cast<Eigen::Index>(c));
          yo[g * d + c] = y(static_cast<Eigen::Index>(c));
        }
      };
      record(0);
      for (std::int64_t k = 0; k < n_coarse; ++k) {
        const Vec xs = x;
        Vec base_sum = Vec::Zero(pair.dim);
        bool bad = false;
        for (int j = 0; j < s_batch; ++j) {
          const std::int64_t fine = k * s_batch + j;
          RngStream s = root.at(i, static_cast<std::uint64_t>(fine), StreamRole::chain_noise);
          const Vec base = draw_base(spec.noise, s);
          const Vec eps = rotate ? Vec(spec.noise.mixing(x) * base) : base;
          x = advance(spec, x, fine, eps);
          base_sum += base;
          if (diverged(x)) {
            diverged_at[i] = fine + 1;
            bad = true;
            break;
          }
        }
        if (bad) break;
        const Vec raw = rotate ? Vec(spec.noise.mixing(xs) * base_sum) : base_sum;
        RngStream tb = root.at(i, static_cast<std::uint64_t>(k), StreamRole::coupling);
        const Vec zeta = couple_gaussian(spec.noise, raw, s_batch, table, &xs,
                                         opts.randomized_tie_break || spec.noise.coupling == CouplingMode::independent
                                             ? &tb
                                             : nullptr);
        const Vec by = spec.drift(y);
        const Vec noise = spec.cov_coeff(y) * zeta;
        y = y + eta_bar * by + y_scale * noise - pull * (y - xs);
        if (diverged(y)) {
          diverged_at[i] = (k + 1) * s_batch;
          break;
        }
        record(static_cast<std::size_t>(k + 1));
      }
      if (diverged_at[i] >= 0) pair.valid[i] = 0;
    }
  });

  check_divergence(diverged_at, n_traj, "coupled chain '" + spec.name + "'", pair.n_diverged);
  return pair;
}

}  // namespace itolab
