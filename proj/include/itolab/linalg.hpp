#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace itolab {

// State vectors live on the stack: dimensions are small (desk-scale d <= 8).
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                          kMaxDim, kMaxDim>;

void check_dim(int dim);

Vec to_vec(std::span<const double> values);
std::vector<double> to_std(const Vec& v);

/// Symmetric positive semidefinite square root; eigenvalues below `floor` are clamped to it.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m, double floor = 1e-12);

}  // namespace itolab
