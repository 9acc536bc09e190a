#pragma once

#include "itolab/linalg.hpp"
#include "itolab/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace itolab {

enum class NoiseKind { gaussian, rademacher, uniform, laplace, student_t };

enum class CouplingMode {
  quantile,     // per-coordinate comonotone transport
  independent,  // fresh Gaussian, ignores the batch sum (fallback for correlated coordinates)
};

NoiseKind parse_noise_kind(const std::string& name);
std::string to_string(NoiseKind kind);

/// Degrees of freedom of the Student-t kind.
inline constexpr int kStudentNu = 5;

/// Zero-mean, identity-covariance noise. With `state_rotation`, draws are
/// mixed by an orthogonal Q(x): a rotation of coordinates (0, 1) by
/// 0.5 * atan(x_0). This keeps unit covariance but makes the law depend on x.
struct NoiseModel {
  NoiseKind kind = NoiseKind::gaussian;
  int dim = 1;
  double declared_beta = 1.0;
  bool state_rotation = false;
  CouplingMode coupling = CouplingMode::quantile;

  [[nodiscard]] int chi0() const { return kind == NoiseKind::gaussian ? 1 : 0; }
  [[nodiscard]] Mat mixing(const Vec& state) const;
  /// Lipschitz constant of x -> Q(x) in operator norm.
  [[nodiscard]] double mixing_lipschitz() const { return state_rotation && dim >= 2 ? 0.5 : 0.0; }
};

/// One unmixed draw with i.i.d. coordinates.
Vec draw_base(const NoiseModel& model, RngStream& stream);
Vec draw_noise(const NoiseModel& model, const Vec& state, RngStream& stream);
/// Sum of S independent draws at the same state.
Vec batch_sum(const NoiseModel& model, const Vec& state, int s_batch, RngStream& stream);

/// Empirical per-coordinate CDF of the S-fold batch sum, stored as 4096-bin
/// quantile nodes with linear interpolation between them.
class QuantileTable {
 public:
  static constexpr int kBins = 4096;

  QuantileTable() = default;

  /// Trains on `n_train` batch sums (>= 10^4) drawn from streams derived from `seed`.
  static QuantileTable train(const NoiseModel& model, int s_batch, int n_train, std::uint64_t seed);
  /// Builds directly from per-coordinate samples (used by tests).
  static QuantileTable from_samples(NoiseKind kind, int s_batch, std::uint64_t seed,
                                    std::vector<std::vector<double>> samples);

  [[nodiscard]] bool trained() const { return !nodes_.empty(); }
  [[nodiscard]] NoiseKind kind() const { return kind_; }
  [[nodiscard]] int s_batch() const { return s_batch_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] int dim() const { return static_cast<int>(nodes_.size()); }
  [[nodiscard]] int n_train() const { return n_train_; }

  /// CDF interval [F(x-), F(x)] of coordinate `coord`; degenerate away from atoms.
  [[nodiscard]] std::pair<double, double> cdf_interval(int coord, double x) const;

  void save(const std::filesystem::path& path) const;
  static QuantileTable load(const std::filesystem::path& path);
  static std::filesystem::path cache_path(const std::filesystem::path& dir, NoiseKind kind,
                                          int s_batch, std::uint64_t seed);
  /// Loads the sidecar for (kind, S, seed) from `dir` if present, else trains and writes it.
  static QuantileTable load_or_train(const std::filesystem::path& dir, const NoiseModel& model,
                                     int s_batch, int n_train, std::uint64_t seed);

 private:
  NoiseKind kind_ = NoiseKind::gaussian;
  int s_batch_ = 1;
  std::uint64_t seed_ = 0;
  int n_train_ = 0;
  std::vector<std::vector<double>> nodes_;  // per coordinate, kBins + 1 nodes
};

/// Maps a batch sum to zeta ~ N(0, I). Gaussian kind: raw_sum / sqrt(S) exactly.
/// Otherwise un-mixes with Q(state)^T, transports each coordinate through its
/// quantile table and re-mixes. Inside an atom the CDF level is taken at the
/// interval midpoint, or uniformly within it when `tie_break` is given; the
/// latter makes the output exactly normal in law.
Vec couple_gaussian(const NoiseModel& model, const Vec& raw_sum, int s_batch,
                    const QuantileTable* table, const Vec* state = nullptr,
                    RngStream* tie_break = nullptr);

struct CltGapEstimate {
  double value = 0.0;      // summed over coordinates
  double std_error = 0.0;  // from 8 disjoint subsamples
  double floor = 0.0;      // same estimator on an exactly Gaussian sample
  int n = 0;
};

/// W2^2 between the law of the S-fold batch sum and N(0, S I), computed
/// coordinatewise from n batch sums against the exact Gaussian quantile function.
CltGapEstimate estimate_clt_gap(const NoiseModel& model, int s_batch, int n, std::uint64_t seed);

/// Tabulated upper bound of the coordinatewise CLT gap over all S >= 1.
double clt_gap_sup(NoiseKind kind);

}  // namespace itolab
