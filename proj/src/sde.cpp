#include "itolab/sde.hpp"

#include "itolab/errors.hpp"
#include "itolab/io.hpp"
#include "itolab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace itolab {
namespace {

constexpr std::size_t kTrajBlock = 64;

bool diverged(const Vec& x) { return !x.allFinite() || x.norm() > kDivergenceNorm; }

}  // namespace

DiffusionSpec DiffusionSpec::from_chain(const ChainSpec& chain) {
  DiffusionSpec d;
  d.name = chain.name;
  d.drift = chain.drift;
  d.cov_coeff = chain.cov_coeff;
  d.gamma = chain.gamma;
  d.eta_for_scale = chain.eta;
  d.x0 = chain.x0;
  d.constants = chain.constants;
  return d;
}

double DiffusionSpec::noise_scale() const { return std::sqrt(std::pow(eta_for_scale, gamma)); }

Ensemble simulate_reference(const DiffusionSpec& spec, int n_traj, double horizon_t, int refinement,
                            const RngStream& root, const std::vector<std::int64_t>& record_grid) {
  if (!spec.drift || !spec.cov_coeff) throw ConfigurationError("diffusion spec needs drift and cov_coeff");
  check_dim(spec.dim());
  if (refinement < 16) throw PreconditionError("reference refinement must be >= 16 (got " + std::to_string(refinement) + ")");
  if (n_traj < 1) throw PreconditionError("n_traj must be >= 1");
  const double eta = spec.eta_for_scale;
  const std::int64_t k_total = steps_for_horizon(eta, horizon_t);

  std::vector<std::int64_t> grid = record_grid;
  if (grid.empty()) {
    for (std::int64_t k = 0; k <= k_total; ++k) grid.push_back(k);
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (grid[g] < 0 || grid[g] > k_total || (g > 0 && grid[g] <= grid[g - 1])) {
      throw PreconditionError("record grid must be increasing within [0, K]");
    }
  }

  Ensemble ens;
  ens.n_traj = n_traj;
  ens.dim = spec.dim();
  ens.eta = eta;
  ens.grid = grid;
  const std::size_t n_grid = grid.size();
  const auto d = static_cast<std::size_t>(ens.dim);
  ens.states.assign(static_cast<std::size_t>(n_traj) * n_grid * d, std::numeric_limits<double>::quiet_NaN());
  ens.valid.assign(static_cast<std::size_t>(n_traj), 1);
  std::vector<std::int64_t> diverged_at(static_cast<std::size_t>(n_traj), -1);

  const double h = eta / refinement;
  const double sqrt_h = std::sqrt(h);
  const double scale = spec.noise_scale();
  const std::int64_t last = grid.back();

  parallel_for(static_cast<std::size_t>(n_traj), kTrajBlock, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Vec z = spec.x0;
      std::size_t g = 0;
      double* out = ens.states.data() + i * n_grid * d;
      for (std::int64_t k = 0;; ++k) {
        if (g < n_grid && grid[g] == k) {
          for (std::size_t c = 0; c < d; ++c) out[g * d + c] = z(static_cast<Eigen::Index>(c));
          ++g;
        }
        if (k == last) break;
        RngStream s = root.at(i, static_cast<std::uint64_t>(k), StreamRole::brownian);
        Vec dw(ens.dim);
        for (int j = 0; j < refinement; ++j) {
          for (int c = 0; c < ens.dim; ++c) dw(c) = sqrt_h * s.normal();
          const Vec noise = spec.cov_coeff(z) * dw;
          z = z + h * spec.drift(z) + scale * noise;
        }
        if (diverged(z)) {
          diverged_at[i] = k + 1;
          ens.valid[i] = 0;
          break;
        }
      }
    }
  });

  int first = -1;
  for (int i = 0; i < n_traj; ++i) {
    if (diverged_at[static_cast<std::size_t>(i)] >= 0) {
      ++ens.n_diverged;
      if (first < 0) first = i;
    }
  }
  if (ens.n_diverged > kMaxDivergedFraction * n_traj) {
    throw DivergenceError("reference diffusion '" + spec.name + "': " + std::to_string(ens.n_diverged) + " of " +
                          std::to_string(n_traj) + " trajectories diverged; first was trajectory " +
                          std::to_string(first));
  }
  std::ostringstream lin;
  lin << "reference:" << spec.name << ";seed=" << root.root_seed() << ";role=brownian;n_traj=" << n_traj
      << ";eta=" << format_double(eta) << ";refinement=" << refinement << ";K=" << k_total;
  ens.lineage = lin.str();
  return ens;
}

GaussianLaw ou_exact_law(double a, double s, int gamma, double eta, const Vec& x0, double t) {
  if (!(t >= 0.0)) throw PreconditionError("time t must be >= 0");
  const auto d = x0.size();
  GaussianLaw law;
  law.mean = Eigen::VectorXd(d);
  for (Eigen::Index i = 0; i < d; ++i) law.mean(i) = x0(i) * std::exp(-a * t);
  const double noise = std::pow(eta, gamma) * s * s;
  // (1 - e^{-2at}) / (2a), written with expm1 so a -> 0 tends to t smoothly.
  const double var = a == 0.0 ? noise * t : noise * (-std::expm1(-2.0 * a * t)) / (2.0 * a);
  law.cov = var * Eigen::MatrixXd::Identity(d, d);
  return law;
}

std::vector<double> brownian_bridge(double target, int m, double h, RngStream& stream, double& sum) {
  if (m < 1) throw PreconditionError("bridge needs at least one fine step");
  std::vector<double> inc(static_cast<std::size_t>(m));
  const double sd = std::sqrt(h);
  double raw = 0.0;
  for (auto& v : inc) {
    v = sd * stream.normal();
    raw += v;
  }
  // Conditioning i.i.d. Gaussian steps on their sum shifts each by the mean residual.
  const double shift = (target - raw) / m;
  sum = 0.0;
  for (auto& v : inc) {
    v += shift;
    sum += v;
  }
  return inc;
}

std::string CascadeReport::to_csv() const {
  std::ostringstream os;
  os << "stage,t,gap,bound,margin\n";
  for (const auto& r : rows) {
    os << r.stage << ',' << format_double(r.t) << ',' << format_double(r.gap) << ',' << format_double(r.bound)
       << ',' << format_double(r.margin) << '\n';
  }
  return os.str();
}

CascadeReport simulate_interpolation_cascade(const ChainSpec& chain, int s_batch, double l_window, double l1,
                                             int n_traj, double horizon_t, const RngStream& root,
                                             const CascadeOptions& opts) {
  if (s_batch < 1) throw PreconditionError("batch size S must be >= 1");
  if (n_traj < 1) throw PreconditionError("n_traj must be >= 1");
  if (opts.refinement < 1) throw PreconditionError("cascade refinement must be >= 1");
  if (!(l_window >= 0.0) || !(l1 >= 0.0)) throw PreconditionError("L and L1 must be >= 0");
  const int d = chain.dim();
  const ConstantsBundle k = compute_constants(chain.constants, chain.eta, s_batch,
                                              {chain.x0.data(), static_cast<std::size_t>(d)}, chain.noise.chi0());
  if (opts.enforce_thresholds) {
    check_window_thresholds(k, l_window);
    if (l1 < k.l1_main) {
      throw PreconditionError("corrector threshold violated: L1 = " + format_double(l1) +
                              " < 2 M0 + 4 M0 eta^gamma = " + format_double(k.l1_main));
    }
    if (l1 < k.l1_appendix) {
      throw PreconditionError("corrector threshold violated: L1 = " + format_double(l1) +
                              " < 2 M0 + 4 M0^2 eta^gamma = " + format_double(k.l1_appendix));
    }
  }
  const double eta = chain.eta;
  const double eta_bar = k.eta_bar();
  const std::int64_t n_coarse = steps_for_horizon(eta, horizon_t) / s_batch;
  const int ref = opts.refinement;
  const int m = s_batch * ref;  // fine steps per window
  const double h = eta / ref;
  const std::size_t n_fine = static_cast<std::size_t>(n_coarse) * static_cast<std::size_t>(m);
  const double scale = std::sqrt(std::pow(eta, chain.gamma));
  const bool rotate = chain.noise.state_rotation;

  QuantileTable local_table;
  const QuantileTable* table = opts.table;
  if (chain.noise.kind != NoiseKind::gaussian && chain.noise.coupling == CouplingMode::quantile && table == nullptr) {
    local_table = QuantileTable::train(chain.noise, s_batch, 1 << 17,
                                       derive_seed(root.root_seed(), {static_cast<std::uint64_t>(s_batch), 0x7ab1e}));
    table = &local_table;
  }

  const std::size_t n_blocks = (static_cast<std::size_t>(n_traj) + kTrajBlock - 1) / kTrajBlock;
  struct Acc {
    std::vector<double> win, interp, corr;
    std::vector<double> win_sq, interp_sq, corr_sq;
    int n_valid = 0;
    double mismatch = 0.0;
  };
  std::vector<Acc> acc(n_blocks);

  parallel_for(static_cast<std::size_t>(n_traj), kTrajBlock, [&](std::size_t begin, std::size_t end) {
    Acc& a = acc[begin / kTrajBlock];
    a.win.assign(static_cast<std::size_t>(n_coarse) + 1, 0.0);
    a.interp.assign(n_fine + 1, 0.0);
    a.corr.assign(n_fine + 1, 0.0);
    a.win_sq.assign(a.win.size(), 0.0);
    a.interp_sq.assign(n_fine + 1, 0.0);
    a.corr_sq.assign(n_fine + 1, 0.0);
    std::vector<double> win(a.win.size()), interp(a.interp.size()), corr(a.corr.size());
    std::vector<std::vector<double>> dw(static_cast<std::size_t>(d));
    for (std::size_t i = begin; i < end; ++i) {
      Vec x = chain.x0, yx = chain.x0, y = chain.x0, z = chain.x0;
      std::fill(win.begin(), win.end(), 0.0);
      std::fill(interp.begin(), interp.end(), 0.0);
      std::fill(corr.begin(), corr.end(), 0.0);
      double mismatch = 0.0;
      bool ok = true;
      for (std::int64_t kc = 0; kc < n_coarse && ok; ++kc) {
        const Vec xs = x;
        Vec base_sum = Vec::Zero(d);
        for (int j = 0; j < s_batch; ++j) {
          const std::int64_t fine = kc * s_batch + j;
          RngStream s = root.at(i, static_cast<std::uint64_t>(fine), StreamRole::chain_noise);
          const Vec base = draw_base(chain.noise, s);
          const Vec eps = rotate ? Vec(chain.noise.mixing(x) * base) : base;
          x = step_with_noise(chain, x, fine, eps);
          base_sum += base;
        }
        const Vec raw = rotate ? Vec(chain.noise.mixing(xs) * base_sum) : base_sum;
        RngStream tb = root.at(i, static_cast<std::uint64_t>(kc), StreamRole::coupling);
        const Vec zeta = couple_gaussian(chain.noise, raw, s_batch, table, &xs, &tb);

        RngStream bs = root.at(i, static_cast<std::uint64_t>(kc), StreamRole::bridge);
        Vec dw_coarse(d);
        for (int c = 0; c < d; ++c) {
          double sum = 0.0;
          dw[static_cast<std::size_t>(c)] = brownian_bridge(std::sqrt(eta_bar) * zeta(c), m, h, bs, sum);
          dw_coarse(c) = sum;
        }

        const Vec g_s = l_window * (xs - yx);
        const Vec ladder_drift = chain.drift(yx) + g_s;
        const Mat ladder_sig = chain.cov_coeff(yx);
        const Vec yx_next = yx + eta_bar * chain.drift(yx) + scale * Vec(ladder_sig * dw_coarse) -
                            (l_window * eta_bar) * (yx - xs);

        Vec dwj(d);
        for (int j = 0; j < m; ++j) {
          for (int c = 0; c < d; ++c) dwj(c) = dw[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
          const Vec y_prev = y;
          y = y + h * ladder_drift + scale * Vec(ladder_sig * dwj);
          const Vec z_drift = chain.drift(z) + g_s - l1 * (z - y_prev);
          z = z + h * z_drift + scale * Vec(chain.cov_coeff(z) * dwj);
          const std::size_t f = static_cast<std::size_t>(kc) * static_cast<std::size_t>(m) + static_cast<std::size_t>(j) + 1;
          const Vec& anchor = (j + 1 == m) ? yx_next : yx;
          interp[f] = (anchor - y).squaredNorm();
          corr[f] = (y - z).squaredNorm();
        }
        yx = yx_next;
        mismatch = std::max(mismatch, (y - yx).norm());
        win[static_cast<std::size_t>(kc) + 1] = (x - yx).squaredNorm();
        if (diverged(x) || diverged(yx) || diverged(y) || diverged(z)) ok = false;
      }
      if (!ok) continue;
      ++a.n_valid;
      a.mismatch = std::max(a.mismatch, mismatch);
      for (std::size_t t = 0; t < win.size(); ++t) {
        a.win[t] += win[t];
        a.win_sq[t] += win[t] * win[t];
      }
      for (std::size_t t = 0; t < interp.size(); ++t) {
        a.interp[t] += interp[t];
        a.corr[t] += corr[t];
        a.interp_sq[t] += interp[t] * interp[t];
        a.corr_sq[t] += corr[t] * corr[t];
      }
    }
  });

  CascadeReport rep;
  rep.constants = k;
  rep.l_window = l_window;
  rep.l1 = l1;
  std::vector<double> win(static_cast<std::size_t>(n_coarse) + 1, 0.0), interp(n_fine + 1, 0.0), corr(n_fine + 1, 0.0);
  std::vector<double> win_sq(win.size(), 0.0), interp_sq(n_fine + 1, 0.0), corr_sq(n_fine + 1, 0.0);
  for (const Acc& a : acc) {
    rep.n_valid += a.n_valid;
    rep.max_grid_mismatch = std::max(rep.max_grid_mismatch, a.mismatch);
    for (std::size_t t = 0; t < win.size(); ++t) {
      win[t] += a.win[t];
      win_sq[t] += a.win_sq[t];
    }
    for (std::size_t t = 0; t < interp.size(); ++t) {
      interp[t] += a.interp[t];
      corr[t] += a.corr[t];
      interp_sq[t] += a.interp_sq[t];
      corr_sq[t] += a.corr_sq[t];
    }
  }
  const int n_diverged = n_traj - rep.n_valid;
  if (n_diverged > kMaxDivergedFraction * n_traj) {
    throw DivergenceError("interpolation cascade: " + std::to_string(n_diverged) + " of " + std::to_string(n_traj) +
                          " trajectories diverged");
  }
  const double inv = 1.0 / std::max(rep.n_valid, 1);
  for (auto& v : win) v *= inv;
  for (auto& v : interp) v *= inv;
  for (auto& v : corr) v *= inv;
  // Standard error of a mean from its first two moments.
  const double nv = std::max(rep.n_valid, 1);
  auto se = [&](double mean, double sum_sq) { return std::sqrt(std::max(sum_sq * inv - mean * mean, 0.0) / nv); };

  const double rate = k.window_rate_term();
  for (std::size_t kc = 0; kc < win.size(); ++kc) {
    const double t = static_cast<double>(kc) * eta_bar;
    const double bound = k.c_window * rate * k.r_sq(t);
    rep.rows.push_back({"window", t, win[kc], bound, bound - win[kc], se(win[kc], win_sq[kc])});
    rep.sup_window_gap = std::max(rep.sup_window_gap, win[kc]);
  }
  // Interpolation and corrector rows at chain steps, each the max over the fine times since the previous step.
  const double interp_scale = k.c2 * std::pow(eta_bar, 1.0 + chain.gamma);
  std::vector<double> prefix_sup(interp.size());
  double running_sup = 0.0;
  for (std::size_t f = 0; f < interp.size(); ++f) prefix_sup[f] = running_sup = std::max(running_sup, interp[f]);

  const std::size_t n_steps = n_fine / static_cast<std::size_t>(ref);
  std::vector<CascadeRow> corr_rows;
  for (std::size_t s = 0; s <= n_steps; ++s) {
    const std::size_t lo = s == 0 ? 0 : (s - 1) * static_cast<std::size_t>(ref) + 1;
    const std::size_t hi = s * static_cast<std::size_t>(ref);
    double gi = 0.0;
    std::size_t gi_at = lo;
    // Corrector: the fine time with the smallest margin against the interpolation sup so far.
    std::size_t worst = lo;
    for (std::size_t f = lo; f <= hi; ++f) {
      if (interp[f] > gi) {
        gi = interp[f];
        gi_at = f;
      }
      if (prefix_sup[f] - corr[f] < prefix_sup[worst] - corr[worst]) worst = f;
    }
    const double t = static_cast<double>(s) * eta;
    const double bound = interp_scale * k.r_sq(t);
    rep.rows.push_back({"interpolation", t, gi, bound, bound - gi, se(gi, interp_sq[gi_at])});
    corr_rows.push_back({"corrector", t, corr[worst], prefix_sup[worst], prefix_sup[worst] - corr[worst],
                         se(corr[worst], corr_sq[worst])});
    rep.sup_interpolation_gap = std::max(rep.sup_interpolation_gap, gi);
  }
  for (std::size_t f = 0; f < corr.size(); ++f) rep.sup_corrector_gap = std::max(rep.sup_corrector_gap, corr[f]);
  rep.rows.insert(rep.rows.end(), corr_rows.begin(), corr_rows.end());
  return rep;
}

double kl_bound(const ConstantsBundle& constants, double eta, int s_batch, double t) {
  if (eta != constants.eta || s_batch != constants.s_batch) {
    throw PreconditionError("kl_bound: eta and S must match the constants bundle");
  }
  const std::int64_t k = steps_for_horizon(eta, t);
  const double kt = static_cast<double>(k) * eta;
  return std::pow(eta, -constants.assumptions.gamma) * constants.c3 * kt * constants.r_sq(kt) *
         constants.window_rate_term();
}

}  // namespace itolab
