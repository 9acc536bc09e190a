#include "itolab/transport.hpp"

#include "itolab/errors.hpp"
#include "itolab/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace itolab {
namespace {

constexpr std::uint64_t kBootstrapSeed = 0xB007'5EEDull;

struct Atom {
  double x;
  double w;
};

std::vector<Atom> sorted_atoms(const EmpiricalMeasure& m) {
  std::vector<Atom> atoms(static_cast<std::size_t>(m.size()));
  for (int i = 0; i < m.size(); ++i) atoms[static_cast<std::size_t>(i)] = {m.coord(i, 0), m.weight(i)};
  std::stable_sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
  return atoms;
}

// Squared W2 of the monotone coupling between two weighted 1-D laws.
double w2_sq_merge(const std::vector<Atom>& a, const std::vector<Atom>& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::size_t i = 0, j = 0;
  double end_a = a[0].w, end_b = b[0].w, prev = 0.0, total = 0.0;
  while (i < a.size() && j < b.size()) {
    const double next = std::min(end_a, end_b);
    const double gap = a[i].x - b[j].x;
    total += (next - prev) * gap * gap;
    prev = next;
    if (end_a <= next && ++i < a.size()) end_a += a[i].w;
    if (end_b <= next && ++j < b.size()) end_b += b[j].w;
  }
  return total;
}

double w2_sq_equal_sorted(const std::vector<double>& a, const std::vector<double>& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double gap = a[i] - b[i];
    total += gap * gap;
  }
  return total / static_cast<double>(a.size());
}

double w2_sq_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.uniform() && b.uniform() && a.size() == b.size()) {
    std::vector<double> x(a.points()), y(b.points());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    return w2_sq_equal_sorted(x, y);
  }
  return w2_sq_merge(sorted_atoms(a), sorted_atoms(b));
}

void check_same_dim(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("measures have different dimensions (" + std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()) + ")");
  }
  if (a.size() == 0 || b.size() == 0) throw DataError("empty empirical measure");
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(int dim, std::vector<double> points)
    : dim_(dim), points_(std::move(points)) {
  if (dim < 1) throw DimensionError("measure dimension must be >= 1");
  if (points_.size() % static_cast<std::size_t>(dim) != 0) {
    throw DataError("point buffer length is not a multiple of the dimension");
  }
  n_ = static_cast<int>(points_.size() / static_cast<std::size_t>(dim));
  for (double p : points_) {
    if (!std::isfinite(p)) throw DataError("empirical measure contains a non-finite point");
  }
}

EmpiricalMeasure::EmpiricalMeasure(int dim, std::vector<double> points, std::vector<double> weights)
    : EmpiricalMeasure(dim, std::move(points)) {
  if (static_cast<int>(weights.size()) != n_) throw DataError("weights and points differ in count");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DataError("weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DataError("weights must sum to 1");
  weights_ = std::move(weights);
}

EmpiricalMeasure EmpiricalMeasure::from_1d(std::vector<double> values) {
  return EmpiricalMeasure(1, std::move(values));
}

EmpiricalMeasure EmpiricalMeasure::project(const std::vector<double>& direction) const {
  if (static_cast<int>(direction.size()) != dim_) throw DimensionError("projection direction has wrong length");
  std::vector<double> out(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i) {
    double s = 0.0;
    for (int c = 0; c < dim_; ++c) s += coord(i, c) * direction[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(i)] = s;
  }
  if (uniform()) return EmpiricalMeasure(1, std::move(out));
  return EmpiricalMeasure(1, std::move(out), weights_);
}

EmpiricalMeasure EmpiricalMeasure::subset(const std::vector<int>& idx) const {
  std::vector<double> out;
  out.reserve(idx.size() * static_cast<std::size_t>(dim_));
  for (int i : idx) {
    for (int c = 0; c < dim_; ++c) out.push_back(coord(i, c));
  }
  return EmpiricalMeasure(dim_, std::move(out));
}

W2Estimate w2_exact_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int bootstrap) {
  check_same_dim(a, b);
  if (a.dim() != 1) throw DimensionError("w2_exact_1d needs d = 1, got d = " + std::to_string(a.dim()));
  W2Estimate est;
  est.method = "exact-1d";
  est.n_used = std::min(a.size(), b.size());
  est.value = std::sqrt(w2_sq_1d(a, b));
  if (bootstrap > 0) {
    if (!a.uniform() || !b.uniform()) throw DataError("bootstrap needs uniform weights");
    std::vector<double> reps(static_cast<std::size_t>(bootstrap));
    std::vector<double> x(static_cast<std::size_t>(a.size())), y(static_cast<std::size_t>(b.size()));
    for (int r = 0; r < bootstrap; ++r) {
      RngStream s(kBootstrapSeed, static_cast<std::uint64_t>(r), 0, StreamRole::bootstrap);
      for (auto& v : x) v = a.coord(static_cast<int>(s.next_u64() % static_cast<std::uint64_t>(a.size())), 0);
      for (auto& v : y) v = b.coord(static_cast<int>(s.next_u64() % static_cast<std::uint64_t>(b.size())), 0);
      reps[static_cast<std::size_t>(r)] =
          std::sqrt(w2_sq_1d(EmpiricalMeasure(1, x), EmpiricalMeasure(1, y)));
    }
    est.std_error = sample_sd(reps);
  }
  return est;
}

double w2_sq_sorted_vs_gaussian(const std::vector<double>& sorted, double mean, double variance) {
  const std::size_t n = sorted.size();
  if (n == 0) throw DataError("empty sample");
  if (!(variance >= 0.0)) throw ValidationError("Gaussian variance must be >= 0");
  const double s = std::sqrt(variance);
  const double w = 1.0 / static_cast<double>(n);
  // Cell [i/n, (i+1)/n] of the quantile coupling: the Gaussian quantile is
  // integrated exactly via  int z dPhi = -phi  and  int z^2 dPhi = Phi - z phi.
  double phi_lo = 0.0, zphi_lo = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double phi_hi = 0.0, zphi_hi = 0.0;
    if (i + 1 < n) {
      const double z = normal_quantile(static_cast<double>(i + 1) / static_cast<double>(n));
      phi_hi = normal_pdf(z);
      zphi_hi = z * phi_hi;
    }
    const double y = sorted[i] - mean;
    const double int_z = phi_lo - phi_hi;
    const double int_z2 = w - (zphi_hi - zphi_lo);
    total += y * y * w - 2.0 * y * s * int_z + variance * int_z2;
    phi_lo = phi_hi;
    zphi_lo = zphi_hi;
  }
  return std::max(total, 0.0);
}

W2Estimate w2_1d_vs_gaussian(const EmpiricalMeasure& a, double mean, double sd) {
  if (a.dim() != 1) throw DimensionError("w2_1d_vs_gaussian needs d = 1");
  if (!a.uniform()) throw DataError("w2_1d_vs_gaussian needs uniform weights");
  std::vector<double> x(a.points());
  std::sort(x.begin(), x.end());
  W2Estimate est;
  est.method = "exact-1d";
  est.n_used = a.size();
  est.value = std::sqrt(w2_sq_sorted_vs_gaussian(x, mean, sd * sd));
  return est;
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  // Shortest augmenting path with potentials (Kuhn-Munkres, O(n^3)).
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw SizeError("assignment cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  std::vector<double> minv(static_cast<std::size_t>(n) + 1);
  std::vector<char> used(static_cast<std::size_t>(n) + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) {
          u[static_cast<std::size_t>(p[sj])] += delta;
          v[sj] -= delta;
        } else {
          minv[sj] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) assignment[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return assignment;
}

W2Estimate w2_exact_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  check_same_dim(a, b);
  if (a.size() != b.size()) throw SizeError("exact assignment needs equal sample counts");
  if (!a.uniform() || !b.uniform()) throw DataError("exact assignment needs uniform weights");
  const int n = a.size();
  if (n > kMaxAssignmentSize) {
    throw SizeError("exact assignment is capped at n = " + std::to_string(kMaxAssignmentSize) +
                    " (got " + std::to_string(n) + "); use the sliced estimator");
  }
  const int d = a.dim();
  Eigen::MatrixXd cost(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) {
        const double g = a.coord(i, c) - b.coord(j, c);
        s += g * g;
      }
      cost(i, j) = s;
    }
  }
  const std::vector<int> match = solve_assignment(cost);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += cost(i, match[static_cast<std::size_t>(i)]);
  W2Estimate est;
  est.method = "exact-assignment";
  est.n_used = n;
  est.value = std::sqrt(std::max(total / n, 0.0));
  return est;
}

W2Estimate w2_sliced(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int n_projections,
                     RngStream stream) {
  check_same_dim(a, b);
  if (n_projections < 16) throw PreconditionError("sliced estimator needs >= 16 projections");
  const int d = a.dim();
  std::vector<double> sq(static_cast<std::size_t>(n_projections));
  std::vector<double> dir(static_cast<std::size_t>(d));
  for (int p = 0; p < n_projections; ++p) {
    RngStream s = stream.with_step(static_cast<std::uint64_t>(p)).with_role(StreamRole::projection);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& x : dir) {
        x = s.normal();
        norm += x * x;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& x : dir) x /= norm;
    sq[static_cast<std::size_t>(p)] = w2_sq_1d(a.project(dir), b.project(dir));
  }
  const double mean_sq = std::accumulate(sq.begin(), sq.end(), 0.0) / n_projections;
  W2Estimate est;
  est.method = "sliced";
  est.n_used = std::min(a.size(), b.size());
  est.value = std::sqrt(mean_sq);
  // Delta method: se(sqrt(m)) = se(m) / (2 sqrt(m)).
  est.std_error = est.value > 0.0 ? sample_sd(sq) / std::sqrt(static_cast<double>(n_projections)) / (2.0 * est.value) : 0.0;
  return est;
}

double w2_gaussian(const GaussianLaw& p, const GaussianLaw& q) {
  const auto d = p.mean.size();
  if (q.mean.size() != d || p.cov.rows() != d || p.cov.cols() != d || q.cov.rows() != d || q.cov.cols() != d) {
    throw DimensionError("Gaussian laws have inconsistent dimensions");
  }
  auto check_psd = [](const Eigen::MatrixXd& c, const char* name) {
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
      throw ValidationError(std::string("covariance ") + name + " is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw ValidationError(std::string("covariance ") + name + " is not positive semidefinite");
    }
  };
  check_psd(p.cov, "p");
  check_psd(q.cov, "q");
  auto psd_sqrt = [](const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return Eigen::MatrixXd(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
  };
  const Eigen::MatrixXd rq = psd_sqrt(q.cov);
  const Eigen::MatrixXd cross = psd_sqrt(rq * p.cov * rq);
  const double bures = p.cov.trace() + q.cov.trace() - 2.0 * cross.trace();
  const double mean_sq = (p.mean - q.mean).squaredNorm();
  return std::sqrt(std::max(mean_sq + bures, 0.0));
}

double kl_to_w2(double kl, double c_w) {
  if (!(kl >= 0.0)) throw PreconditionError("KL divergence must be >= 0");
  if (!(c_w >= 0.0)) throw PreconditionError("C_W must be >= 0");
  return c_w * (std::sqrt(kl) + std::pow(kl / 2.0, 0.25));
}

double c_w_bound(const AssumptionConstants& c, double t, double eta) {
  c.validate();
  check_stepsize(eta);
  if (!(t >= 0.0)) throw PreconditionError("time t must be >= 0");
  if (c.m0 == 0.0) throw ValidationError("degenerate constant: C_W divides by M0, which is 0");
  return std::pow(eta, 0.5 * c.gamma) * c.sigma1 * std::exp(c.m0 * t) * std::sqrt(2.0 * c.dim / c.m0);
}

W2Estimate w2_auto(const EmpiricalMeasure& a, const EmpiricalMeasure& b, std::uint64_t seed) {
  if (a.dim() == 1) return w2_exact_1d(a, b, 32);
  if (a.size() == b.size() && a.size() <= kMaxAssignmentSize) return w2_exact_assignment(a, b);
  return w2_sliced(a, b, kDefaultSlicedProjections, RngStream(seed, 0, 0, StreamRole::projection));
}

}  // namespace itolab
