#pragma once

#include "itolab/chain.hpp"
#include "itolab/harness.hpp"
#include "itolab/presets.hpp"
#include "itolab/sde.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace itolab {

/// Flat experiment config. Unset optional fields are resolved from the preset.
struct ExperimentConfig {
  Preset preset = Preset::gld;
  ProblemParams problem;
  std::vector<double> eta_grid;  // empty: [problem.eta]
  double horizon_t = 1.0;
  int n_traj = 20000;
  int n_repeats = 5;
  int refinement = kDefaultRefinement;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  std::string s_policy = "corollary";  // corollary | explicit
  int s_batch = 0;
  std::string l_policy = "auto";       // auto | explicit
  double l_window = 0.0;
  double l1_corrector = 0.0;

  // Overrides of the declared model constants.
  std::optional<double> m0, m1, m_eps, sigma0, sigma1, alpha, beta, b0;

  std::optional<double> synthetic_coeff, synthetic_exponent;
  int n_clt = 200000;
  std::vector<int> clt_batches{1, 4, 16, 64};
  int cascade_refinement = 16;
};

/// Parses YAML text. Unknown keys and malformed values throw ConfigurationError.
ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Preset chain at step size eta with the constant overrides applied and validated.
ChainSpec build_chain(const ExperimentConfig& cfg, double eta);

/// Batch size at eta under the config's S policy.
int resolve_s_batch(const ExperimentConfig& cfg, const ChainSpec& spec);

SweepPlan to_sweep_plan(const ExperimentConfig& cfg);
VerifyOptions to_verify_options(const ExperimentConfig& cfg);

/// YAML with every auto value expanded at the config's first step size.
std::string resolved_yaml(const ExperimentConfig& cfg);

}  // namespace itolab
