#pragma once

#include "itolab/chain.hpp"
#include "itolab/core.hpp"
#include "itolab/transport.hpp"

#include <string>
#include <vector>

namespace itolab {

/// dZ = b(Z) dt + sqrt(eta^gamma) sigma(Z) dW.
struct DiffusionSpec {
  std::string name;
  DriftFn drift;
  CovFn cov_coeff;
  int gamma = 0;
  double eta_for_scale = 0.1;
  Vec x0;
  AssumptionConstants constants;

  static DiffusionSpec from_chain(const ChainSpec& chain);
  [[nodiscard]] int dim() const { return static_cast<int>(x0.size()); }
  [[nodiscard]] double noise_scale() const;
};

inline constexpr int kDefaultRefinement = 64;

/// Euler-Maruyama with step eta / refinement, recorded at chain steps
/// (every step 0..K when `record_grid` is empty).
Ensemble simulate_reference(const DiffusionSpec& spec, int n_traj, double horizon_t, int refinement,
                            const RngStream& root, const std::vector<std::int64_t>& record_grid = {});

/// Law at time t of dZ = -a Z dt + sqrt(eta^gamma) s dW, Z_0 = x0.
GaussianLaw ou_exact_law(double a, double s, int gamma, double eta, const Vec& x0, double t);

/// Splits a coarse Brownian increment `target` into m fine increments of
/// variance h each (Brownian bridge). Returns the fine increments; `sum`
/// receives their in-order sum, which is the coarse increment callers must use.
std::vector<double> brownian_bridge(double target, int m, double h, RngStream& stream, double& sum);

struct CascadeRow {
  std::string stage;  // window | interpolation | corrector
  double t = 0.0;
  double gap = 0.0;
  double bound = 0.0;
  double margin = 0.0;
  double std_error = 0.0;  // of the gap; not written to CSV
};

struct CascadeOptions {
  int refinement = 16;
  bool enforce_thresholds = true;
  const QuantileTable* table = nullptr;
};

struct CascadeReport {
  std::vector<CascadeRow> rows;
  double sup_window_gap = 0.0;
  double sup_interpolation_gap = 0.0;
  double sup_corrector_gap = 0.0;
  ConstantsBundle constants;
  double l_window = 0.0;
  double l1 = 0.0;
  int n_valid = 0;
  /// Largest |Y_t - Y^X| discrepancy observed at window ends (rounding only).
  double max_grid_mismatch = 0.0;

  [[nodiscard]] std::string to_csv() const;
};

/// Simulates X, Y^X, the ladder diffusion Y_t and the corrector Z^Y_t on one
/// probability space and reports mean-square gaps against their bounds.
CascadeReport simulate_interpolation_cascade(const ChainSpec& chain, int s_batch, double l_window, double l1,
                                             int n_traj, double horizon_t, const RngStream& root,
                                             const CascadeOptions& opts = {});

/// eta^{-gamma} C3 t R^2(t) (eta^{2 alpha} + eta^{gamma+beta}(1 - chi0)/S + eta_bar), t = k eta.
double kl_bound(const ConstantsBundle& constants, double eta, int s_batch, double t);

}  // namespace itolab
