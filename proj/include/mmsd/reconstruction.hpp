#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "mmsd/config.hpp"
#include "mmsd/metrics.hpp"
#include "mmsd/nn/layers.hpp"

namespace mmsd {

/// Residual trunk, two ×2 sub-pixel blocks and a 3×3 output conv, added to a
/// bicubic ×4 copy of the low-quality center frame and clamped to [0, 1].
template <typename Scalar>
class Reconstruction {
 public:
  struct Trace {
    std::vector<typename nn::ResidualBlock<Scalar>::Trace> blocks;
    std::array<typename nn::UpsampleBlock<Scalar>::Trace, 2> upsample;
    FeatureMaps<Scalar> head_input;
    FeatureMaps<Scalar> unclamped;
  };

  Reconstruction() = default;
  explicit Reconstruction(const ModelConfig& config)
      : config_(config), head_(config.features, 3, 3) {
    for (int i = 0; i < config.recon_res_blocks; ++i) blocks_.emplace_back(config.features);
    for (auto& u : upsample_) u = nn::UpsampleBlock<Scalar>(config.features, config.features);
  }

  void init(std::mt19937_64& rng) {
    for (auto& b : blocks_) b.init(rng);
    for (auto& u : upsample_) u.init(rng);
    head_.init(rng, 0.1);
  }

  FeatureMaps<Scalar> forward(const FeatureMaps<Scalar>& fvae, const FeatureMaps<Scalar>& lq_center,
                              Trace* trace = nullptr) const {
    require_tag(fvae, MapTag::kTrimodal, "reconstruct");
    require(fvae.channels() == config_.features, "reconstruct: channel mismatch");
    require_shape(lq_center, 3, fvae.height, fvae.width, "reconstruct lq_center");
    return forward_unchecked(fvae, lq_center, trace);
  }

  /// Skips the tag check so sub-networks can be probed with arbitrary maps.
  FeatureMaps<Scalar> forward_unchecked(const FeatureMaps<Scalar>& features, const FeatureMaps<Scalar>& lq_center,
                                        Trace* trace = nullptr) const {
    FeatureMaps<Scalar> x = features;
    if (trace) trace->blocks.resize(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b) x = blocks_[b].forward(x, trace ? &trace->blocks[b] : nullptr);
    for (int i = 0; i < 2; ++i) x = upsample_[i].forward(x, trace ? &trace->upsample[i] : nullptr);
    FeatureMaps<Scalar> out = head_.forward(x);
    out.data += bicubic_upscale(lq_center, config_.scale).data;
    if (trace) {
      trace->head_input = std::move(x);
      trace->unclamped = out;
    }
    out.data = out.data.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
    return out;
  }

  /// Gradient w.r.t. the fused features; the clamp passes gradient only inside [0, 1].
  FeatureMaps<Scalar> backward(const Trace& trace, const FeatureMaps<Scalar>& grad_out) {
    FeatureMaps<Scalar> g = grad_out;
    g.data = (trace.unclamped.data.array() >= Scalar(0) && trace.unclamped.data.array() <= Scalar(1))
                 .select(grad_out.data.array(), Scalar(0))
                 .matrix();
    g = head_.backward(trace.head_input, g);
    for (int i = 1; i >= 0; --i) g = upsample_[i].backward(trace.upsample[i], g);
    for (int b = static_cast<int>(blocks_.size()) - 1; b >= 0; --b) g = blocks_[b].backward(trace.blocks[b], g);
    g.tag = MapTag::kTrimodal;
    return g;
  }

  void parameters(nn::ParameterList<Scalar>& list, const std::string& prefix) {
    for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b].parameters(list, prefix + ".res" + std::to_string(b));
    for (int i = 0; i < 2; ++i) upsample_[i].parameters(list, prefix + ".up" + std::to_string(i));
    head_.parameters(list, prefix + ".head");
  }

 private:
  ModelConfig config_;
  std::vector<nn::ResidualBlock<Scalar>> blocks_;
  std::array<nn::UpsampleBlock<Scalar>, 2> upsample_;
  nn::Conv2d<Scalar> head_;
};

}  // namespace mmsd
