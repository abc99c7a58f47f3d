#pragma once

#include <cstdint>

// Stream labels.  Every random decision in the pipeline draws from
// derive_stream(root_seed, mix_ids({label, ...})); changing a label changes
// every corpus and checkpoint produced from it.
namespace ssae::streams {

inline constexpr std::uint64_t kSource = 0x534f5552;      // source image generation
inline constexpr std::uint64_t kCrop = 0x43524f50;        // patch crop placement
inline constexpr std::uint64_t kSplit = 0x53504c54;       // train/val assignment
inline constexpr std::uint64_t kEpochOps = 0x4f505331;    // per-epoch pretext synthesis
inline constexpr std::uint64_t kShuffle = 0x53485546;     // per-epoch patch order
inline constexpr std::uint64_t kInit = 0x494e4954;        // parameter initialization
inline constexpr std::uint64_t kEvalSet = 0x4556414c;     // synthetic aesthetic set
inline constexpr std::uint64_t kProbe = 0x50524f42;       // probe init and order
inline constexpr std::uint64_t kSubsample = 0x53554253;   // low-data subsampling
inline constexpr std::uint64_t kHeldOut = 0x484f4c44;     // held-out pretext evaluation

} // namespace ssae::streams
