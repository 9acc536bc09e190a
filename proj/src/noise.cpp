#include "itolab/noise.hpp"

#include "itolab/errors.hpp"
#include "itolab/normal.hpp"
#include "itolab/parallel.hpp"
#include "itolab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace itolab {
namespace {

constexpr char kTableMagic[8] = {'I', 'T', 'O', 'Q', 'T', 'B', '1', '\0'};

double draw_scalar(NoiseKind kind, RngStream& s) {
  switch (kind) {
    case NoiseKind::gaussian:
      return s.normal();
    case NoiseKind::rademacher:
      return (s.next_u64() >> 63) ? 1.0 : -1.0;
    case NoiseKind::uniform:
      return (2.0 * s.uniform() - 1.0) * std::sqrt(3.0);
    case NoiseKind::laplace: {
      const double u = s.uniform() - 0.5;
      const double b = 1.0 / std::sqrt(2.0);
      return (u < 0.0 ? b : -b) * std::log1p(-2.0 * std::abs(u));
    }
    case NoiseKind::student_t: {
      const double z = s.normal();
      double chi2 = 0.0;
      for (int i = 0; i < kStudentNu; ++i) {
        const double g = s.normal();
        chi2 += g * g;
      }
      const double t = z / std::sqrt(chi2 / kStudentNu);
      return t * std::sqrt((kStudentNu - 2.0) / kStudentNu);
    }
  }
  throw ConfigurationError("unsupported noise kind");
}

}  // namespace

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "gaussian") return NoiseKind::gaussian;
  if (name == "rademacher") return NoiseKind::rademacher;
  if (name == "uniform" || name == "centered-uniform") return NoiseKind::uniform;
  if (name == "laplace" || name == "centered-laplace") return NoiseKind::laplace;
  if (name == "student-t" || name == "student_t" || name == "student-t5") return NoiseKind::student_t;
  throw ConfigurationError("unsupported noise kind '" + name + "'");
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::rademacher: return "rademacher";
    case NoiseKind::uniform: return "centered-uniform";
    case NoiseKind::laplace: return "centered-laplace";
    case NoiseKind::student_t: return "student-t";
  }
  return "unknown";
}

Mat NoiseModel::mixing(const Vec& state) const {
  Mat q = Mat::Identity(dim, dim);
  if (state_rotation && dim >= 2) {
    const double angle = 0.5 * std::atan(state(0));
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    q(0, 0) = c;
    q(0, 1) = -s;
    q(1, 0) = s;
    q(1, 1) = c;
  }
  return q;
}

Vec draw_base(const NoiseModel& model, RngStream& stream) {
  Vec v(model.dim);
  for (int i = 0; i < model.dim; ++i) v(i) = draw_scalar(model.kind, stream);
  return v;
}

Vec draw_noise(const NoiseModel& model, const Vec& state, RngStream& stream) {
  Vec base = draw_base(model, stream);
  if (!model.state_rotation) return base;
  return model.mixing(state) * base;
}

Vec batch_sum(const NoiseModel& model, const Vec& state, int s_batch, RngStream& stream) {
  if (s_batch < 1) throw PreconditionError("batch size S must be >= 1");
  Vec sum = Vec::Zero(model.dim);
  for (int i = 0; i < s_batch; ++i) sum += draw_base(model, stream);
  if (!model.state_rotation) return sum;
  return model.mixing(state) * sum;
}

QuantileTable QuantileTable::from_samples(NoiseKind kind, int s_batch, std::uint64_t seed,
                                          std::vector<std::vector<double>> samples) {
  if (samples.empty()) throw DataError("quantile table needs at least one coordinate");
  QuantileTable t;
  t.kind_ = kind;
  t.s_batch_ = s_batch;
  t.seed_ = seed;
  t.n_train_ = static_cast<int>(samples.front().size());
  if (t.n_train_ < 2) throw DataError("quantile table needs at least two samples per coordinate");
  for (auto& col : samples) {
    if (static_cast<int>(col.size()) != t.n_train_) throw DataError("ragged quantile training samples");
    std::sort(col.begin(), col.end());
    std::vector<double> nodes(kBins + 1);
    const double span = static_cast<double>(col.size() - 1);
    for (int j = 0; j <= kBins; ++j) {
      const auto idx = static_cast<std::size_t>(std::llround(j * span / kBins));
      nodes[static_cast<std::size_t>(j)] = col[idx];
    }
    t.nodes_.push_back(std::move(nodes));
  }
  return t;
}

QuantileTable QuantileTable::train(const NoiseModel& model, int s_batch, int n_train,
                                   std::uint64_t seed) {
  if (s_batch < 1) throw PreconditionError("batch size S must be >= 1");
  if (n_train < 10000) throw PreconditionError("quantile table needs >= 10^4 training draws");
  const auto n = static_cast<std::size_t>(n_train);
  std::vector<std::vector<double>> samples(static_cast<std::size_t>(model.dim), std::vector<double>(n));
  const RngStream root(seed, 0, 0, StreamRole::training);
  parallel_for(n, 1024, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RngStream s = root.at(i, 0, StreamRole::training);
      Vec sum = Vec::Zero(model.dim);
      for (int k = 0; k < s_batch; ++k) sum += draw_base(model, s);
      for (int c = 0; c < model.dim; ++c) samples[static_cast<std::size_t>(c)][i] = sum(c);
    }
  });
  return from_samples(model.kind, s_batch, seed, std::move(samples));
}

std::pair<double, double> QuantileTable::cdf_interval(int coord, double x) const {
  if (!trained()) throw StateError("quantile table used before training");
  const auto& v = nodes_.at(static_cast<std::size_t>(coord));
  const double edge = 0.5 / n_train_;
  if (x < v.front()) return {edge, edge};
  if (x > v.back()) return {1.0 - edge, 1.0 - edge};
  const auto lo = std::lower_bound(v.begin(), v.end(), x);
  const auto hi = std::upper_bound(v.begin(), v.end(), x);
  const double bins = kBins;
  if (lo != hi) {
    const double jl = static_cast<double>(lo - v.begin());
    const double jh = static_cast<double>(hi - v.begin()) - 1.0;
    return {std::max(0.0, (jl - 0.5) / bins), std::min(1.0, (jh + 0.5) / bins)};
  }
  const auto j = static_cast<std::size_t>(lo - v.begin()) - 1;
  const double frac = (x - v[j]) / (v[j + 1] - v[j]);
  const double u = (static_cast<double>(j) + frac) / bins;
  return {u, u};
}

void QuantileTable::save(const std::filesystem::path& path) const {
  if (!trained()) throw StateError("cannot save an untrained quantile table");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write quantile table " + path.string());
  auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  out.write(kTableMagic, sizeof(kTableMagic));
  put(static_cast<std::int32_t>(kind_));
  put(static_cast<std::int32_t>(s_batch_));
  put(seed_);
  put(static_cast<std::int32_t>(n_train_));
  put(static_cast<std::int32_t>(nodes_.size()));
  put(static_cast<std::int32_t>(kBins));
  for (const auto& col : nodes_) out.write(reinterpret_cast<const char*>(col.data()),
                                           static_cast<std::streamsize>(col.size() * sizeof(double)));
}

QuantileTable QuantileTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read quantile table " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kTableMagic, sizeof(magic)) != 0) {
    throw DataError("not a quantile table: " + path.string());
  }
  auto get = [&](auto& v) { in.read(reinterpret_cast<char*>(&v), sizeof(v)); };
  std::int32_t kind, s, n_train, dim, bins;
  QuantileTable t;
  get(kind);
  get(s);
  get(t.seed_);
  get(n_train);
  get(dim);
  get(bins);
  if (!in || bins != kBins || dim < 1 || n_train < 2 || kind < 0 || kind > 4) {
    throw DataError("corrupt quantile table header: " + path.string());
  }
  t.kind_ = static_cast<NoiseKind>(kind);
  t.s_batch_ = s;
  t.n_train_ = n_train;
  t.nodes_.assign(static_cast<std::size_t>(dim), std::vector<double>(kBins + 1));
  for (auto& col : t.nodes_) {
    in.read(reinterpret_cast<char*>(col.data()), static_cast<std::streamsize>(col.size() * sizeof(double)));
  }
  if (!in) throw DataError("truncated quantile table: " + path.string());
  return t;
}

std::filesystem::path QuantileTable::cache_path(const std::filesystem::path& dir, NoiseKind kind,
                                                int s_batch, std::uint64_t seed) {
  return dir / ("qtable_" + to_string(kind) + "_S" + std::to_string(s_batch) + "_seed" +
                std::to_string(seed) + ".bin");
}

QuantileTable QuantileTable::load_or_train(const std::filesystem::path& dir, const NoiseModel& model,
                                           int s_batch, int n_train, std::uint64_t seed) {
  const auto path = cache_path(dir, model.kind, s_batch, seed);
  if (std::filesystem::exists(path)) {
    QuantileTable t = load(path);
    if (t.kind() == model.kind && t.s_batch() == s_batch && t.seed() == seed && t.dim() == model.dim) {
      return t;
    }
  }
  QuantileTable t = train(model, s_batch, n_train, seed);
  std::filesystem::create_directories(dir);
  t.save(path);
  return t;
}

Vec couple_gaussian(const NoiseModel& model, const Vec& raw_sum, int s_batch,
                    const QuantileTable* table, const Vec* state, RngStream* tie_break) {
  if (s_batch < 1) throw PreconditionError("batch size S must be >= 1");
  if (raw_sum.size() != model.dim) throw DimensionError("batch sum dimension does not match noise model");
  if (model.kind == NoiseKind::gaussian) return raw_sum / std::sqrt(static_cast<double>(s_batch));

  if (model.coupling == CouplingMode::independent) {
    if (tie_break == nullptr) throw StateError("independent coupling needs a random stream");
    Vec z(model.dim);
    for (int i = 0; i < model.dim; ++i) z(i) = tie_break->normal();
    return z;
  }

  if (table == nullptr || !table->trained()) {
    throw StateError("quantile table for " + to_string(model.kind) + " noise is not trained");
  }
  if (table->s_batch() != s_batch || table->dim() != model.dim || table->kind() != model.kind) {
    throw StateError("quantile table was trained for a different (kind, S, dim)");
  }
  const bool mixed = model.state_rotation && state != nullptr;
  const Mat q = mixed ? model.mixing(*state) : Mat::Identity(model.dim, model.dim);
  const Vec base = mixed ? Vec(q.transpose() * raw_sum) : raw_sum;
  Vec z(model.dim);
  for (int i = 0; i < model.dim; ++i) {
    const auto [lo, hi] = table->cdf_interval(i, base(i));
    const double v = tie_break != nullptr ? tie_break->uniform() : 0.5;
    z(i) = normal_quantile(lo + (hi - lo) * v);
  }
  return mixed ? Vec(q * z) : z;
}

CltGapEstimate estimate_clt_gap(const NoiseModel& model, int s_batch, int n, std::uint64_t seed) {
  if (s_batch < 1) throw PreconditionError("batch size S must be >= 1");
  if (n < 1000) throw PreconditionError("CLT gap estimate needs n >= 10^3");
  constexpr int kParts = 8;
  const auto nn = static_cast<std::size_t>(n);
  const auto dim = static_cast<std::size_t>(model.dim);
  std::vector<std::vector<double>> sums(dim, std::vector<double>(nn));
  std::vector<std::vector<double>> gauss(dim, std::vector<double>(nn));
  const RngStream root(seed, 0, 0, StreamRole::clt);
  const double sd = std::sqrt(static_cast<double>(s_batch));
  parallel_for(nn, 4096, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RngStream s = root.at(i, static_cast<std::uint64_t>(s_batch), StreamRole::clt);
      RngStream g = root.at(i, static_cast<std::uint64_t>(s_batch), StreamRole::probe);
      Vec sum = Vec::Zero(model.dim);
      for (int k = 0; k < s_batch; ++k) sum += draw_base(model, s);
      for (std::size_t c = 0; c < dim; ++c) {
        sums[c][i] = sum(static_cast<Eigen::Index>(c));
        gauss[c][i] = sd * g.normal();
      }
    }
  });

  const std::size_t part = nn / kParts;
  CltGapEstimate est;
  est.n = n;
  std::vector<double> part_values(kParts, 0.0);
  for (std::size_t c = 0; c < dim; ++c) {
    for (int p = 0; p < kParts; ++p) {
      std::vector<double> sub(sums[c].begin() + static_cast<std::ptrdiff_t>(p * part),
                              sums[c].begin() + static_cast<std::ptrdiff_t>((p + 1) * part));
      std::sort(sub.begin(), sub.end());
      part_values[static_cast<std::size_t>(p)] += w2_sq_sorted_vs_gaussian(sub, 0.0, s_batch);
    }
    std::sort(sums[c].begin(), sums[c].end());
    std::sort(gauss[c].begin(), gauss[c].end());
    est.value += w2_sq_sorted_vs_gaussian(sums[c], 0.0, s_batch);
    est.floor += w2_sq_sorted_vs_gaussian(gauss[c], 0.0, s_batch);
  }
  const double mean = std::accumulate(part_values.begin(), part_values.end(), 0.0) / kParts;
  double var = 0.0;
  for (double v : part_values) var += (v - mean) * (v - mean);
  var /= (kParts - 1);
  est.std_error = std::sqrt(var / kParts);
  return est;
}

double clt_gap_sup(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::gaussian: return 0.0;
    case NoiseKind::rademacher: return 0.41;
    case NoiseKind::uniform: return 0.05;
    case NoiseKind::laplace: return 0.04;
    case NoiseKind::student_t: return 0.035;
  }
  return 0.0;
}

}  // namespace itolab
