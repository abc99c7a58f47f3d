#include "ssae/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ssae {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kPcgMult = 6364136223846793005ULL;

std::uint64_t splitmix64_next(std::uint64_t& x) {
  x += kGolden;
  return splitmix64_mix(x);
}

} // namespace

std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix_ids(std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t id : ids) {
    h = splitmix64_mix(h + kGolden + splitmix64_mix(id));
  }
  return h;
}

RngStream::RngStream(std::uint64_t root_seed, std::uint64_t stream_id)
    : root_seed_(root_seed), stream_id_(stream_id) {
  std::uint64_t sm = root_seed ^ stream_id;
  const std::uint64_t init_state = splitmix64_next(sm);
  const std::uint64_t init_seq = splitmix64_next(sm);
  // pcg32_srandom_r
  state_ = 0;
  inc_ = (init_seq << 1u) | 1u;
  next_u32();
  state_ += init_state;
  next_u32();
}

std::uint32_t RngStream::next_u32() {
  const std::uint64_t old = state_;
  state_ = old * kPcgMult + inc_;
  const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
  const auto rot = static_cast<std::uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double RngStream::uniform() {
  const std::uint64_t a = next_u32() >> 5;  // 27 bits
  const std::uint64_t b = next_u32() >> 6;  // 26 bits
  return static_cast<double>(a * 67108864ULL + b) * (1.0 / 9007199254740992.0);
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint32_t RngStream::below(std::uint32_t bound) {
  if (bound == 0) throw std::invalid_argument("RngStream::below: bound must be positive");
  // pcg32_boundedrand_r
  const std::uint32_t threshold = (0u - bound) % bound;
  for (;;) {
    const std::uint32_t r = next_u32();
    if (r >= threshold) return r % bound;
  }
}

double RngStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngStream::fork(std::uint64_t label) const {
  return RngStream(root_seed_, mix_ids({stream_id_, label}));
}

void RngStream::restore(std::uint64_t state, std::uint64_t increment) {
  if ((increment & 1u) == 0) throw std::invalid_argument("RngStream::restore: increment must be odd");
  state_ = state;
  inc_ = increment;
}

RngStream derive_stream(std::uint64_t root_seed, std::uint64_t stream_id) {
  return RngStream(root_seed, stream_id);
}

} // namespace ssae
