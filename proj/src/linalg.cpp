#include "itolab/linalg.hpp"

#include "itolab/errors.hpp"

#include <string>

namespace itolab {

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw DimensionError("state dimension must be in [1, " + std::to_string(kMaxDim) +
                         "], got " + std::to_string(dim));
  }
}

Vec to_vec(std::span<const double> values) {
  check_dim(static_cast<int>(values.size()));
  Vec v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
  return v;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace itolab
