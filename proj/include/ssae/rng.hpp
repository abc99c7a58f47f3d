#pragma once

#include <cstdint>
#include <initializer_list>

namespace ssae {

/// SplitMix64 output finalizer (the mixing half of the SplitMix64 step).
std::uint64_t splitmix64_mix(std::uint64_t z);

/// Combine a sequence of labels into one 64-bit stream id.
std::uint64_t mix_ids(std::initializer_list<std::uint64_t> ids);

/// PCG32 (XSH-RR) stream seeded through SplitMix64.
///
/// The sequence is a pure function of (root_seed, stream_id): the value
/// root_seed ^ stream_id seeds a SplitMix64 generator whose first two outputs
/// become the PCG32 initial state and sequence selector.  Streams are
/// single-owner; copy one explicitly if a replay is needed.
class RngStream {
public:
  RngStream(std::uint64_t root_seed, std::uint64_t stream_id);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer on [0, bound); bound must be positive.
  std::uint32_t below(std::uint32_t bound);
  /// Standard normal deviate (Box-Muller, one value per call).
  double normal();

  /// Child stream that depends on this stream's identity, not its position.
  RngStream fork(std::uint64_t label) const;

  std::uint64_t root_seed() const { return root_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t state() const { return state_; }
  std::uint64_t increment() const { return inc_; }

  /// Restore a generator position captured from state()/increment().
  void restore(std::uint64_t state, std::uint64_t increment);

private:
  std::uint64_t root_seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 1;
};

RngStream derive_stream(std::uint64_t root_seed, std::uint64_t stream_id);

} // namespace ssae
