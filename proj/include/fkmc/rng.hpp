#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace fkmc {

/// Identifies one independent random stream.  The stream content is a pure
/// function of (master_seed, path_index): workers may claim paths in any
/// order without changing any sampled value.
struct RandomnessSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t path_index = 0;
};

/// Philox4x32-10 counter block function (Salmon et al., SC 2011).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Standard-normal stream over a Philox counter sequence.  Uniforms come from
/// 64-bit counter output, normals from the Box-Muller transform (fixed choice;
/// golden outputs depend on it).
class NormalStream {
 public:
  explicit NormalStream(RandomnessSpec spec, std::uint32_t domain = 0);

  double next();
  void fill(std::span<double> out);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> base_;
  std::uint64_t block_ = 0;
  std::array<double, 2> cache_{};
  int have_ = 0;
};

}  // namespace fkmc
