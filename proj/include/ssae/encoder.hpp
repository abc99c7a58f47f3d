#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssae/image.hpp"
#include "ssae/tensor.hpp"

namespace ssae {

enum class Pool { None, Max2 };

struct BlockConfig {
  int out_channels = 16;
  int kernel = 3;
  Pool pool = Pool::Max2;
  bool operator==(const BlockConfig&) const = default;
};

/// Conv trunk (conv3x3 -> ReLU -> optional 2x2 max-pool per block), global
/// average pool, then a classification head and an L2-normalized embedding head.
struct EncoderConfig {
  std::vector<BlockConfig> blocks = {
      {16, 3, Pool::Max2}, {32, 3, Pool::Max2}, {64, 3, Pool::Max2}, {64, 3, Pool::Max2}, {64, 3, Pool::None}};
  int in_channels = 3;
  int embed_dim = 32;
  int num_classes = 22;
  int input_size = 64;

  bool operator==(const EncoderConfig&) const = default;

  /// Throws std::invalid_argument when the configuration cannot be built.
  void validate() const;
  /// Spatial side length of block b's output (0-based).
  int block_output_size(std::size_t b) const;
};

/// Activations retained by forward() for backward().
struct ForwardTrace {
  std::size_t batch = 0;
  Tensor input;                          // [N, C, H, W]
  std::vector<Tensor> pre_pool;          // per block, post-ReLU [N, C, H, W]
  std::vector<Tensor> activations;       // per block output (after optional pool)
  std::vector<std::vector<std::uint32_t>> pool_argmax;  // flat index into pre_pool, per pooled output
  Tensor features;                       // [N, C_last], global average pool
  Tensor logits;                         // [N, num_classes]
  Tensor embedding_raw;                  // [N, embed_dim]
  Tensor embedding;                      // [N, embed_dim], unit rows
  std::vector<double> embedding_norm;    // [N]
};

/// Parameter names: block{k}.weight [out, in, 3, 3], block{k}.bias [out],
/// cls.weight [classes, C], cls.bias, emb.weight [embed_dim, C], emb.bias.
ParamSet init_params(const EncoderConfig& cfg, std::uint64_t root_seed);

/// Pack images (all input_size x input_size x in_channels) into [N, C, H, W],
/// shifted from [0, 1] to [-0.5, 0.5].
Tensor images_to_batch(std::span<const Image> images);
Tensor images_to_batch(std::span<const Image* const> images);

ForwardTrace forward(const ParamSet& params, const EncoderConfig& cfg, const Tensor& batch);

/// Trunk-only forward that stops after block `block_index` (1-based) and
/// returns its output activation [N, C, h, w].
Tensor forward_trunk(const ParamSet& params, const EncoderConfig& cfg, const Tensor& batch, int block_index);

/// Reverse pass.  d_logits [N, classes] and d_embedding [N, embed_dim] are
/// the loss gradients with respect to the two head outputs; either may be
/// empty (treated as zero).  Returns gradients with the layout of params.
ParamSet backward(const ParamSet& params, const EncoderConfig& cfg, const ForwardTrace& trace,
                  const Tensor& d_logits, const Tensor& d_embedding);

/// Bit pattern of every ReLU on/off decision and max-pool choice.  Two points
/// with equal signatures lie in the same smooth piece of the network.
std::uint64_t activation_signature(const ForwardTrace& trace);

} // namespace ssae
