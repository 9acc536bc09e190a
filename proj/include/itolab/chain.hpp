#pragma once

#include "itolab/core.hpp"
#include "itolab/linalg.hpp"
#include "itolab/noise.hpp"
#include "itolab/rng.hpp"
#include "itolab/transport.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace itolab {

using DriftFn = std::function<Vec(const Vec&)>;
using BiasFn = std::function<Vec(const Vec&, std::int64_t k, double eta)>;
using CovFn = std::function<Mat(const Vec&)>;
using ShiftFn = std::function<Mat(const Vec&, std::int64_t k, double eta)>;

/// X_{k+1} = X_k + eta (b + delta_k) + eta^{(1+gamma)/2} (sigma + Delta_k) eps_k(X_k).
struct ChainSpec {
  std::string name;
  DriftFn drift;
  BiasFn bias;        // empty: delta = 0
  CovFn cov_coeff;
  ShiftFn cov_shift;  // empty: Delta = 0
  NoiseModel noise;
  double eta = 0.1;
  int gamma = 0;
  AssumptionConstants constants;
  Vec x0;

  [[nodiscard]] int dim() const { return static_cast<int>(x0.size()); }
  /// eta^{(1+gamma)/2}, computed as sqrt(eta * eta^gamma).
  [[nodiscard]] double noise_scale() const;
};

/// Divergence threshold on |X_k|.
inline constexpr double kDivergenceNorm = 1e8;
/// Fraction of diverged trajectories tolerated before a run aborts.
inline constexpr double kMaxDivergedFraction = 0.01;

/// One step of the chain. Throws DivergenceError on a non-finite result.
Vec step(const ChainSpec& spec, const Vec& state, std::int64_t k, RngStream stream);
/// One step with an injected noise vector (bypasses the noise model).
Vec step_with_noise(const ChainSpec& spec, const Vec& state, std::int64_t k, const Vec& eps);

struct ValidationOptions {
  int n_probe = 256;
  double radius = 0.0;  // 0: max(3, 2 |x0|)
  std::uint64_t seed = 0x9e0b;
};

/// Monte Carlo check of the model assumptions over probe states. Throws
/// ValidationError naming the first violated clause.
void validate_chain(const ChainSpec& spec, const ValidationOptions& opts = {});

/// Number of chain steps K with K eta = horizon_t; PreconditionError otherwise.
std::int64_t steps_for_horizon(double eta, double horizon_t);

/// Trajectory endpoints on a step grid. States are laid out [traj][grid][coord].
struct Ensemble {
  int n_traj = 0;
  int dim = 1;
  double eta = 0.0;
  std::vector<std::int64_t> grid;
  std::vector<double> states;
  std::vector<std::uint8_t> valid;
  int n_diverged = 0;
  std::string lineage;

  [[nodiscard]] double value(int traj, std::size_t g, int c) const {
    return states[(static_cast<std::size_t>(traj) * grid.size() + g) * static_cast<std::size_t>(dim) +
                  static_cast<std::size_t>(c)];
  }
  [[nodiscard]] Vec state(int traj, std::size_t g) const;
  /// Empirical law of valid trajectories at grid index g.
  [[nodiscard]] EmpiricalMeasure at(std::size_t g) const;
  /// Same, restricted to trajectories with index parity `parity` (0 or 1).
  [[nodiscard]] EmpiricalMeasure half(std::size_t g, int parity) const;
};

Ensemble simulate_ensemble(const ChainSpec& spec, int n_traj, double horizon_t,
                           const std::vector<std::int64_t>& record_grid, const RngStream& root);

struct CoupledOptions {
  /// Reject L below the window thresholds or L eta_bar > 1.
  bool enforce_thresholds = true;
  /// Trained table for non-Gaussian noise; trained on the fly when null.
  const QuantileTable* table = nullptr;
  /// Randomize the CDF level inside atoms so zeta is exactly normal.
  bool randomized_tie_break = true;
};

/// X at fine steps and the window-coupled Y^X at coarse steps k = 0..floor(K/S).
struct CoupledPair {
  int n_traj = 0;
  int dim = 1;
  int s_batch = 1;
  double l_used = 0.0;
  double eta_bar = 0.0;
  std::vector<std::int64_t> coarse_grid;
  std::vector<double> x_states;  // [traj][k][coord]
  std::vector<double> y_states;
  std::vector<std::uint8_t> valid;
  int n_diverged = 0;

  /// E|X_{Sk} - Y_k|^2 over valid trajectories, per coarse step.
  [[nodiscard]] std::vector<double> mean_sq_gap() const;
};

CoupledPair simulate_coupled(const ChainSpec& spec, int s_batch, double l_window, int n_traj,
                             double horizon_t, const RngStream& root, const CoupledOptions& opts = {});

/// Throws PreconditionError unless S eta <= 1, L >= both window thresholds and L eta_bar <= 1.
void check_window_thresholds(const ConstantsBundle& k, double l_window);

}  // namespace itolab
