#include "ssae/pretext_data.hpp"

#include <algorithm>
#include <stdexcept>

#include "ssae/parallel.hpp"
#include "ssae/pixel_ops.hpp"

namespace ssae {

namespace {

constexpr std::uint64_t kRenderLabel = 0x52454e44;  // "REND"

} // namespace

ExtractedPatch extract_patch_with_rect(const Image& img, RngStream& rng, int resize_short, int crop) {
  if (img.empty()) throw std::invalid_argument("extract_patch: empty image");
  if (crop < 1 || resize_short < crop) throw std::invalid_argument("extract_patch: need 1 <= crop <= resize_short");
  int h = img.height(), w = img.width();
  if (h <= w) {
    w = static_cast<int>(round_half_away(static_cast<double>(w) * resize_short / h));
    h = resize_short;
  } else {
    h = static_cast<int>(round_half_away(static_cast<double>(h) * resize_short / w));
    w = resize_short;
  }
  const Image resized = bilinear_resize(img, h, w);
  const int oy = static_cast<int>(rng.below(static_cast<std::uint32_t>(h - crop + 1)));
  const int ox = static_cast<int>(rng.below(static_cast<std::uint32_t>(w - crop + 1)));
  Image patch(crop, crop, img.channels());
  for (int y = 0; y < crop; ++y) {
    for (int x = 0; x < crop; ++x) {
      for (int c = 0; c < img.channels(); ++c) patch.at(y, x, c) = resized.at(oy + y, ox + x, c);
    }
  }
  return {std::move(patch), CropRect{ox, oy, crop, crop}};
}

Image extract_patch(const Image& img, RngStream& rng, int resize_short, int crop) {
  return extract_patch_with_rect(img, rng, resize_short, crop).patch;
}

std::vector<int> allowed_classes(std::span<const AttributeGroup> excluded) {
  std::vector<int> out;
  for (const auto& spec : catalog()) {
    if (spec.family == OpFamily::None) continue;
    const auto g = attribute_group(spec.family);
    if (std::find(excluded.begin(), excluded.end(), g) != excluded.end()) continue;
    out.push_back(spec.class_index);
  }
  return out;
}

std::vector<int> plan_patch_ops(RngStream& patch_rng, int ops_per_patch, std::span<const int> allowed) {
  if (ops_per_patch < 1 || ops_per_patch > kNumClasses - 1) {
    throw std::invalid_argument("plan_patch_ops: ops_per_patch must be in [1, 21]");
  }
  if (static_cast<std::size_t>(ops_per_patch) > allowed.size()) {
    throw std::invalid_argument("plan_patch_ops: fewer allowed classes than ops_per_patch");
  }
  std::vector<int> pool(allowed.begin(), allowed.end());
  for (int i = 0; i < ops_per_patch; ++i) {
    const auto j = i + patch_rng.below(static_cast<std::uint32_t>(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(ops_per_patch);
  // None joins at the per-class rate of the drawn classes, so over many
  // patches it is as frequent as any single degradation class.
  const double none_rate = static_cast<double>(ops_per_patch) / static_cast<double>(allowed.size());
  if (patch_rng.uniform() < none_rate) pool.push_back(0);
  return pool;
}

RngStream patch_stream(const RngStream& batch_rng, std::uint64_t patch_id) { return batch_rng.fork(patch_id); }

Image render_manipulation(const ManipulationSpec& spec, const Image& patch, const RngStream& patch_rng,
                          const Image* partner) {
  RngStream op_rng = patch_rng.fork(kRenderLabel + static_cast<std::uint64_t>(spec.class_index));
  return apply(spec, patch, op_rng, partner);
}

SynthBatch synth_batch(std::span<const Image> patches, const RngStream& rng, int ops_per_patch,
                       std::span<const std::uint64_t> patch_ids, std::span<const int> allowed) {
  if (patches.empty()) throw std::invalid_argument("synth_batch: empty patch list");
  if (!patch_ids.empty() && patch_ids.size() != patches.size()) {
    throw std::invalid_argument("synth_batch: patch_ids length mismatch");
  }
  std::vector<int> all_classes;
  if (allowed.empty()) {
    all_classes = allowed_classes();
    allowed = all_classes;
  }
  const auto& cat = catalog();
  const std::size_t n = patches.size();

  std::vector<SynthBatch> per_patch(n);
  parallel_for(n, [&](std::size_t i) {
    const std::uint64_t id = patch_ids.empty() ? i : patch_ids[i];
    const Image& p = patches[i];
    const Image& partner = patches[(i + 1) % n];
    const RngStream prng = patch_stream(rng, id);
    RngStream plan_rng = prng;
    const auto classes = plan_patch_ops(plan_rng, ops_per_patch, allowed);

    SynthBatch& out = per_patch[i];
    std::vector<OpFamily> paired;
    for (int cls : classes) {
      const ManipulationSpec& spec = cat[cls];
      out.instances.push_back({id, i, render_manipulation(spec, p, prng, &partner), cls, spec});
      const OrderedPair* pair = find_pair(spec.family);
      if (pair == nullptr || std::find(paired.begin(), paired.end(), spec.family) != paired.end()) continue;
      paired.push_back(spec.family);
      Image mild = render_manipulation(pair->mild, p, prng, &partner);
      Image severe = render_manipulation(pair->severe, p, prng, &partner);
      out.triplets.push_back({id, i, p, std::move(mild), std::move(severe), *pair});
    }
  });

  SynthBatch batch;
  for (auto& b : per_patch) {
    std::move(b.instances.begin(), b.instances.end(), std::back_inserter(batch.instances));
    std::move(b.triplets.begin(), b.triplets.end(), std::back_inserter(batch.triplets));
  }
  return batch;
}

} // namespace ssae
