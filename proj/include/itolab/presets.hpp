#pragma once

#include "itolab/chain.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace itolab {

enum class Preset { gld, sgld, sgld_smoothing, sgd, sgda, sa_fp, sa, sgb, sglb, sglb_o };
enum class Problem { quadratic, double_well, bilinear, affine_map };

Preset parse_preset(const std::string& name);
std::string to_string(Preset p);
Problem parse_problem(const std::string& name);
std::string to_string(Problem p);
std::vector<Preset> all_presets();

/// (gamma, alpha, beta) of a method. Rows with alpha = infinity store
/// kAlphaInfinity and set bias_vanishes. GLD's beta is inert (Gaussian noise)
/// and stored as 1.
struct PresetRow {
  int gamma = 0;
  double alpha = 1.0;
  double beta = 1.0;
  bool bias_vanishes = false;
};
PresetRow preset_row(Preset p);

/// Rate listed for the method in the published comparison table, if any.
std::optional<double> reported_rate(Preset p, int chi0);

struct ProblemParams {
  Problem problem = Problem::quadratic;
  int dim = 1;
  /// Quadratic: diagonal of A (one value broadcasts). Bilinear: |B|. Double well: unused.
  std::vector<double> curvature{1.0};
  double tau = 1.0;        // inverse temperature
  double cov_scale = 1.0;  // Cov of the stochastic gradient is cov_scale * I
  NoiseKind noise = NoiseKind::gaussian;
  bool noise_rotation = false;
  bool projection_rotation = false;  // SGB/SGLB: P(x) = R(x) P R(x)^T
  double double_well_radius = 3.0;
  double sa_shift = 0.5;      // SA: b(x) = -A x - a with a = sa_shift * 1
  double contraction = 0.5;   // SA-FP: |G|
  std::vector<double> x0;     // empty: all ones
  double eta = 1.0 / 64.0;
  std::uint64_t problem_seed = 7;  // random P, B, G and the smoothing inner samples
};

ChainSpec make_preset(Preset p, const ProblemParams& params);

/// Gradient of the test objective and its Lipschitz constant (quadratic or double well).
struct Objective {
  DriftFn grad;
  double lipschitz = 0.0;
};
Objective make_objective(const ProblemParams& params);

}  // namespace itolab
