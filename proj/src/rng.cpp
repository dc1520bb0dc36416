#include "fkmc/rng.hpp"

#include <cmath>
#include <numbers>

namespace fkmc {

namespace {
constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void round_once(std::array<std::uint32_t, 4>& c,
                       std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  k[0] += kW0;
  k[1] += kW1;
}
}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) {
  for (int r = 0; r < 10; ++r) round_once(counter, key);
  return counter;
}

NormalStream::NormalStream(RandomnessSpec spec, std::uint32_t domain) {
  key_ = {static_cast<std::uint32_t>(spec.master_seed),
          static_cast<std::uint32_t>(spec.master_seed >> 32)};
  base_ = {0u, domain, static_cast<std::uint32_t>(spec.path_index),
           static_cast<std::uint32_t>(spec.path_index >> 32)};
}

void NormalStream::refill() {
  std::array<std::uint32_t, 4> ctr = base_;
  ctr[0] = static_cast<std::uint32_t>(block_);
  ctr[1] = base_[1] ^ static_cast<std::uint32_t>(block_ >> 32);
  ++block_;
  const auto w = philox4x32(ctr, key_);
  const std::uint64_t b0 =
      (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
  const std::uint64_t b1 =
      (static_cast<std::uint64_t>(w[2]) << 32) | w[3];
  // u1 in (0,1], u2 in [0,1)
  const double u1 = static_cast<double>((b0 >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(b1 >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  cache_[0] = r * std::cos(th);
  cache_[1] = r * std::sin(th);
  have_ = 2;
}

double NormalStream::next() {
  if (have_ == 0) refill();
  return cache_[2 - have_--];
}

void NormalStream::fill(std::span<double> out) {
  for (auto& v : out) v = next();
}

}  // namespace fkmc
