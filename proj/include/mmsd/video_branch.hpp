#pragma once

#include <random>
#include <string>
#include <vector>

#include "mmsd/config.hpp"
#include "mmsd/nn/deform_conv.hpp"
#include "mmsd/nn/layers.hpp"

namespace mmsd {

/// Deformable feature alignment of one neighbor stack onto the center stack:
/// a 3×3 conv on [center, neighbor] predicts per-tap offsets, then a
/// deformable 3×3 conv samples the neighbor at those offsets.
template <typename Scalar>
class FeatureAligner {
 public:
  struct Trace {
    FeatureMaps<Scalar> pair;     // [center; neighbor]
    FeatureMaps<Scalar> offsets;
    FeatureMaps<Scalar> neighbor;
  };

  FeatureAligner() = default;
  FeatureAligner(int channels, bool plain) : channels_(channels), plain_(plain),
      offset_conv_(2 * channels, 18, 3), deform_(channels, channels, 3) {}

  void init(std::mt19937_64& rng) {
    offset_conv_.init(rng, 0.05);
    deform_.init(rng);
  }

  bool plain() const { return plain_; }
  void set_plain(bool plain) { plain_ = plain; }

  FeatureMaps<Scalar> forward(const FeatureMaps<Scalar>& center, const FeatureMaps<Scalar>& neighbor,
                              Trace* trace = nullptr) const {
    require(center.same_shape(neighbor), "align_features: center/neighbor shape mismatch");
    require(center.channels() == channels_, "align_features: channel mismatch");
    if (plain_) {
      if (trace) trace->neighbor = neighbor;
      return deform_.forward_plain(neighbor);
    }
    FeatureMaps<Scalar> pair = concat_channels(center, neighbor);
    FeatureMaps<Scalar> offsets = offset_conv_.forward(pair);
    FeatureMaps<Scalar> out = deform_.forward(neighbor, offsets);
    if (trace) {
      trace->pair = std::move(pair);
      trace->offsets = std::move(offsets);
      trace->neighbor = neighbor;
    }
    return out;
  }

  /// Returns (grad center, grad neighbor).
  std::pair<FeatureMaps<Scalar>, FeatureMaps<Scalar>> backward(const Trace& trace,
                                                               const FeatureMaps<Scalar>& grad_out) {
    if (plain_) {
      FeatureMaps<Scalar> g_neighbor = deform_.backward_plain(trace.neighbor, grad_out);
      FeatureMaps<Scalar> g_center(channels_, grad_out.height, grad_out.width);
      return {std::move(g_center), std::move(g_neighbor)};
    }
    auto [g_neighbor, g_offsets] = deform_.backward(trace.neighbor, trace.offsets, grad_out);
    FeatureMaps<Scalar> g_pair = offset_conv_.backward(trace.pair, g_offsets);
    FeatureMaps<Scalar> g_center(channels_, grad_out.height, grad_out.width);
    g_center.data = g_pair.data.topRows(channels_);
    g_neighbor.data += g_pair.data.bottomRows(channels_);
    return {std::move(g_center), std::move(g_neighbor)};
  }

  void parameters(nn::ParameterList<Scalar>& list, const std::string& prefix) {
    offset_conv_.parameters(list, prefix + ".offset_conv");
    deform_.parameters(list, prefix + ".deform");
  }

  nn::Conv2d<Scalar>& offset_conv() { return offset_conv_; }
  nn::DeformConv2d<Scalar>& deform() { return deform_; }

 private:
  int channels_ = 0;
  bool plain_ = false;
  nn::Conv2d<Scalar> offset_conv_;
  nn::DeformConv2d<Scalar> deform_;
};

/// Video branch: shared 3×3 stem per frame, alignment of every frame to the
/// center, 1×1 temporal fusion, four residual blocks. Produces f_V.
template <typename Scalar>
class VideoBranch {
 public:
  struct Trace {
    std::vector<FeatureMaps<Scalar>> frames;
    std::vector<FeatureMaps<Scalar>> stems;  // post-ReLU
    std::vector<typename FeatureAligner<Scalar>::Trace> aligned;
    FeatureMaps<Scalar> stacked;
    std::vector<typename nn::ResidualBlock<Scalar>::Trace> blocks;
  };

  VideoBranch() = default;
  explicit VideoBranch(const ModelConfig& config)
      : config_(config),
        stem_(3, config.features, 3),
        aligner_(config.features, config.plain_alignment),
        temporal_fuse_(config.window_length() * config.features, config.features, 1) {
    for (int i = 0; i < config.video_res_blocks; ++i) blocks_.emplace_back(config.features);
  }

  void init(std::mt19937_64& rng) {
    stem_.init(rng);
    aligner_.init(rng);
    temporal_fuse_.init(rng, 0.5);
    for (auto& b : blocks_) b.init(rng);
  }

  /// Per-frame stems with shared weights. Frames are (3, lq_h, lq_w) in [0, 1].
  std::vector<FeatureMaps<Scalar>> shallow_embed(const std::vector<FeatureMaps<Scalar>>& frames) const {
    std::vector<FeatureMaps<Scalar>> stems;
    stems.reserve(frames.size());
    for (const auto& f : frames) {
      require_shape(f, 3, config_.lq_height, config_.lq_width, "shallow_embed frame");
      FeatureMaps<Scalar> s = stem_.forward(f);
      s.data = nn::relu(s.data);
      stems.push_back(std::move(s));
    }
    return stems;
  }

  FeatureMaps<Scalar> align_features(const FeatureMaps<Scalar>& center, const FeatureMaps<Scalar>& neighbor) const {
    require_shape(center, config_.features, config_.lq_height, config_.lq_width, "align_features center");
    return aligner_.forward(center, neighbor);
  }

  FeatureMaps<Scalar> forward(const std::vector<FeatureMaps<Scalar>>& frames, Trace* trace = nullptr) const {
    if (static_cast<int>(frames.size()) != config_.window_length())
      throw ValidationError("video branch: expected " + std::to_string(config_.window_length()) +
                            " frames, got " + std::to_string(frames.size()));
    std::vector<FeatureMaps<Scalar>> stems = shallow_embed(frames);
    const int center = config_.half_window;
    FeatureMaps<Scalar> stacked(config_.window_length() * config_.features, config_.lq_height, config_.lq_width);
    if (trace) trace->aligned.resize(frames.size());
    for (std::size_t i = 0; i < stems.size(); ++i) {
      FeatureMaps<Scalar> a = aligner_.forward(stems[center], stems[i], trace ? &trace->aligned[i] : nullptr);
      stacked.data.middleRows(static_cast<Eigen::Index>(i) * config_.features, config_.features) = a.data;
    }
    FeatureMaps<Scalar> x = temporal_fuse_.forward(stacked);
    if (trace) trace->blocks.resize(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b)
      x = blocks_[b].forward(x, trace ? &trace->blocks[b] : nullptr);
    if (trace) {
      trace->frames = frames;
      trace->stems = std::move(stems);
      trace->stacked = std::move(stacked);
    }
    x.tag = MapTag::kVideo;
    return x;
  }

  /// Accumulates parameter gradients. Input frames are data, so no input gradient is returned.
  std::vector<FeatureMaps<Scalar>> backward(const Trace& trace, const FeatureMaps<Scalar>& grad_out) {
    FeatureMaps<Scalar> g = grad_out;
    for (int b = static_cast<int>(blocks_.size()) - 1; b >= 0; --b) g = blocks_[b].backward(trace.blocks[b], g);
    const FeatureMaps<Scalar> g_stacked = temporal_fuse_.backward(trace.stacked, g);
    const int c = config_.features;
    const int center = config_.half_window;
    std::vector<FeatureMaps<Scalar>> g_stems(trace.stems.size(), FeatureMaps<Scalar>(c, g.height, g.width));
    for (std::size_t i = 0; i < trace.stems.size(); ++i) {
      FeatureMaps<Scalar> g_a(c, g.height, g.width);
      g_a.data = g_stacked.data.middleRows(static_cast<Eigen::Index>(i) * c, c);
      auto [g_center, g_neighbor] = aligner_.backward(trace.aligned[i], g_a);
      g_stems[center].data += g_center.data;
      g_stems[i].data += g_neighbor.data;
    }
    std::vector<FeatureMaps<Scalar>> g_frames;
    for (std::size_t i = 0; i < trace.stems.size(); ++i) {
      FeatureMaps<Scalar> gs = g_stems[i];
      gs.data = nn::relu_backward(trace.stems[i].data, g_stems[i].data);
      g_frames.push_back(stem_.backward(trace.frames[i], gs));
    }
    return g_frames;
  }

  void parameters(nn::ParameterList<Scalar>& list, const std::string& prefix) {
    stem_.parameters(list, prefix + ".stem");
    aligner_.parameters(list, prefix + ".align");
    temporal_fuse_.parameters(list, prefix + ".temporal_fuse");
    for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b].parameters(list, prefix + ".res" + std::to_string(b));
  }

  FeatureAligner<Scalar>& aligner() { return aligner_; }
  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  nn::Conv2d<Scalar> stem_;
  FeatureAligner<Scalar> aligner_;
  nn::Conv2d<Scalar> temporal_fuse_;
  std::vector<nn::ResidualBlock<Scalar>> blocks_;
};

}  // namespace mmsd
