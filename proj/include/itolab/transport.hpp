#pragma once

#include "itolab/core.hpp"
#include "itolab/rng.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace itolab {

/// Weighted point cloud; points are stored row-major (n x d).
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  /// Uniform weights.
  EmpiricalMeasure(int dim, std::vector<double> points);
  EmpiricalMeasure(int dim, std::vector<double> points, std::vector<double> weights);

  static EmpiricalMeasure from_1d(std::vector<double> values);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] int size() const { return n_; }
  [[nodiscard]] bool uniform() const { return weights_.empty(); }
  [[nodiscard]] double weight(int i) const { return uniform() ? 1.0 / n_ : weights_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] double coord(int i, int c) const { return points_[static_cast<std::size_t>(i) * dim_ + c]; }
  [[nodiscard]] const std::vector<double>& points() const { return points_; }

  /// Projection onto a direction (length dim).
  [[nodiscard]] EmpiricalMeasure project(const std::vector<double>& direction) const;
  /// Sub-measure of the listed points, uniform weights.
  [[nodiscard]] EmpiricalMeasure subset(const std::vector<int>& idx) const;

 private:
  int dim_ = 1;
  int n_ = 0;
  std::vector<double> points_;
  std::vector<double> weights_;  // empty means uniform
};

struct W2Estimate {
  double value = 0.0;
  std::string method;       // exact-1d | exact-assignment | sliced | gaussian-closed-form
  double std_error = 0.0;   // bootstrap standard error; 0 when not computed
  int n_used = 0;
};

struct GaussianLaw {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline constexpr int kMaxAssignmentSize = 4096;
inline constexpr int kDefaultSlicedProjections = 128;

/// Quantile coupling in 1-D. `bootstrap` resamples (> 0) set the standard error.
W2Estimate w2_exact_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int bootstrap = 0);

/// Uniform-weight 1-D sample against N(mean, sd^2), integrating the Gaussian quantile exactly.
W2Estimate w2_1d_vs_gaussian(const EmpiricalMeasure& a, double mean, double sd);

/// Exact squared-Euclidean assignment between equal-size uniform clouds (n <= 4096).
W2Estimate w2_exact_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

/// Root-mean of squared 1-D W2 over random unit directions; std_error across projections.
W2Estimate w2_sliced(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                     int n_projections, RngStream stream);

/// Squared W2 between sorted uniform-weight 1-D samples and N(mean, variance).
double w2_sq_sorted_vs_gaussian(const std::vector<double>& sorted, double mean, double variance);

double w2_gaussian(const GaussianLaw& p, const GaussianLaw& q);

double kl_to_w2(double kl, double c_w);

/// eta^{gamma/2} sigma1 e^{M0 t} sqrt(2d/M0).
double c_w_bound(const AssumptionConstants& c, double t, double eta);

/// Chooses exact-1d for d = 1, exact assignment for n <= 4096, sliced otherwise.
W2Estimate w2_auto(const EmpiricalMeasure& a, const EmpiricalMeasure& b, std::uint64_t seed);

/// Minimum-cost assignment for a dense square cost matrix (row i -> column result[i]).
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace itolab
