#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>

namespace itolab {

/// Role tag in a stream path. Values are part of the reproducibility contract.
enum class StreamRole : std::uint32_t {
  chain_noise = 1,
  brownian = 2,
  coupling = 3,
  bridge = 4,
  inner_mc = 5,
  training = 6,
  projection = 7,
  bootstrap = 8,
  probe = 9,
  clt = 10,
  synthetic = 11,
};

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

/// Hashes a seed and a path of integers into a new seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// Counter-based random stream addressed by (root_seed, traj, step, role).
///
/// The key is derived from (root_seed, traj); the Philox counter carries
/// (draw index, role, step). Two streams with the same address produce the
/// same draws bit-for-bit, independent of which thread evaluates them.
class RngStream {
 public:
  explicit RngStream(std::uint64_t root_seed = 0, std::uint64_t traj = 0, std::uint64_t step = 0,
                     StreamRole role = StreamRole::chain_noise);

  [[nodiscard]] RngStream at(std::uint64_t traj, std::uint64_t step, StreamRole role) const {
    return RngStream(root_seed_, traj, step, role);
  }
  [[nodiscard]] RngStream with_step(std::uint64_t step) const {
    return RngStream(root_seed_, traj_, step, role_);
  }
  [[nodiscard]] RngStream with_role(StreamRole role) const {
    return RngStream(root_seed_, traj_, step_, role);
  }

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  [[nodiscard]] std::uint64_t root_seed() const { return root_seed_; }
  [[nodiscard]] std::uint64_t traj() const { return traj_; }
  [[nodiscard]] std::uint64_t step() const { return step_; }
  [[nodiscard]] StreamRole role() const { return role_; }
  [[nodiscard]] std::string path_string() const;

  // UniformRandomBitGenerator
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

 private:
  void refill();

  std::uint64_t root_seed_;
  std::uint64_t traj_;
  std::uint64_t step_;
  StreamRole role_;
  std::array<std::uint32_t, 2> key_{};
  std::uint32_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace itolab
