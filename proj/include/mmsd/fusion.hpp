#pragma once

#include <random>
#include <string>

#include "mmsd/config.hpp"
#include "mmsd/emotion.hpp"
#include "mmsd/nn/layers.hpp"

namespace mmsd {

/// Spatial audio-video attention. θ and φ are separate 1×1 embeddings; the
/// gate at each pixel is sigmoid(⟨θ(f_V), φ(f_A)⟩). The audio maps are gated
/// by it and fused with the video maps through a 1×1 conv to give f_VA.
template <typename Scalar>
class AudioVideoFusion {
 public:
  struct WeightTrace {
    FeatureMaps<Scalar> video, audio;
    FeatureMaps<Scalar> theta, phi;
    RowMatrix<Scalar> weights;  // 1 × pixels
  };
  struct FuseTrace {
    FeatureMaps<Scalar> audio;
    RowMatrix<Scalar> weights;
    FeatureMaps<Scalar> stacked;
  };
  struct Trace {
    WeightTrace weight;
    FuseTrace fuse;
  };

  AudioVideoFusion() = default;
  AudioVideoFusion(int channels, int embed)
      : channels_(channels), theta_(channels, embed, 1), phi_(channels, embed, 1), fuse_(2 * channels, channels, 1) {}

  void init(std::mt19937_64& rng) {
    theta_.init(rng, 0.5);
    phi_.init(rng, 0.5);
    fuse_.init(rng, 0.7);
  }

  /// Attention map as a 1 × (h·w) row; every entry in (0, 1).
  RowMatrix<Scalar> attention_weights(const FeatureMaps<Scalar>& fv, const FeatureMaps<Scalar>& fa,
                                      WeightTrace* trace = nullptr) const {
    check_inputs(fv, fa, "attention_weights");
    FeatureMaps<Scalar> th = theta_.forward(fv);
    FeatureMaps<Scalar> ph = phi_.forward(fa);
    RowMatrix<Scalar> w = nn::sigmoid(th.data.cwiseProduct(ph.data).colwise().sum());
    if (trace) {
      trace->video = fv;
      trace->audio = fa;
      trace->theta = std::move(th);
      trace->phi = std::move(ph);
      trace->weights = w;
    }
    return w;
  }

  /// Returns (grad f_V, grad f_A).
  std::pair<FeatureMaps<Scalar>, FeatureMaps<Scalar>> attention_weights_backward(const WeightTrace& t,
                                                                                 const RowMatrix<Scalar>& grad_w) {
    const RowMatrix<Scalar> g_inner = nn::sigmoid_backward(t.weights, grad_w);
    FeatureMaps<Scalar> g_theta = t.theta, g_phi = t.phi;
    g_theta.data = t.phi.data.array().rowwise() * g_inner.row(0).array();
    g_phi.data = t.theta.data.array().rowwise() * g_inner.row(0).array();
    return {theta_.backward(t.video, g_theta), phi_.backward(t.audio, g_phi)};
  }

  FeatureMaps<Scalar> fuse(const FeatureMaps<Scalar>& fv, const FeatureMaps<Scalar>& fa, const RowMatrix<Scalar>& w,
                           FuseTrace* trace = nullptr) const {
    check_inputs(fv, fa, "fuse_audio_video");
    require(w.rows() == 1 && w.cols() == fv.pixels(), "fuse_audio_video: attention map size mismatch");
    FeatureMaps<Scalar> gated = fa;
    gated.data = fa.data.array().rowwise() * w.row(0).array();
    FeatureMaps<Scalar> stacked = concat_channels(fv, gated);
    FeatureMaps<Scalar> out = fuse_.forward(stacked);
    out.tag = MapTag::kAudioVideo;
    if (trace) {
      trace->audio = fa;
      trace->weights = w;
      trace->stacked = std::move(stacked);
    }
    return out;
  }

  struct FuseGrad {
    FeatureMaps<Scalar> video, audio;
    RowMatrix<Scalar> weights;
  };

  FuseGrad fuse_backward(const FuseTrace& t, const FeatureMaps<Scalar>& grad_out) {
    const FeatureMaps<Scalar> g_stacked = fuse_.backward(t.stacked, grad_out);
    FuseGrad g;
    g.video = FeatureMaps<Scalar>(channels_, grad_out.height, grad_out.width);
    g.video.data = g_stacked.data.topRows(channels_);
    const auto g_gated = g_stacked.data.bottomRows(channels_);
    g.audio = FeatureMaps<Scalar>(channels_, grad_out.height, grad_out.width);
    g.audio.data = g_gated.array().rowwise() * t.weights.row(0).array();
    g.weights = g_gated.cwiseProduct(t.audio.data).colwise().sum();
    return g;
  }

  FeatureMaps<Scalar> forward(const FeatureMaps<Scalar>& fv, const FeatureMaps<Scalar>& fa, Trace* trace = nullptr) const {
    RowMatrix<Scalar> w = attention_weights(fv, fa, trace ? &trace->weight : nullptr);
    return fuse(fv, fa, w, trace ? &trace->fuse : nullptr);
  }

  /// Returns (grad f_V, grad f_A).
  std::pair<FeatureMaps<Scalar>, FeatureMaps<Scalar>> backward(const Trace& t, const FeatureMaps<Scalar>& grad_out) {
    FuseGrad g = fuse_backward(t.fuse, grad_out);
    auto [gv, ga] = attention_weights_backward(t.weight, g.weights);
    gv.data += g.video.data;
    ga.data += g.audio.data;
    return {std::move(gv), std::move(ga)};
  }

  void parameters(nn::ParameterList<Scalar>& list, const std::string& prefix) {
    theta_.parameters(list, prefix + ".theta");
    phi_.parameters(list, prefix + ".phi");
    fuse_.parameters(list, prefix + ".fuse");
  }

  nn::Conv2d<Scalar>& theta() { return theta_; }
  nn::Conv2d<Scalar>& phi() { return phi_; }
  nn::Conv2d<Scalar>& fuse_conv() { return fuse_; }

 private:
  void check_inputs(const FeatureMaps<Scalar>& fv, const FeatureMaps<Scalar>& fa, const char* what) const {
    require_tag(fv, MapTag::kVideo, what);
    require_tag(fa, MapTag::kAudio, what);
    require(fv.same_shape(fa), std::string(what) + ": f_V " + fv.shape_string() + " and f_A " +
                                   fa.shape_string() + " differ");
    require(fv.channels() == channels_, std::string(what) + ": channel mismatch");
  }

  int channels_ = 0;
  nn::Conv2d<Scalar> theta_, phi_, fuse_;
};

/// Channel-gated f_VA concatenated with the spatially tiled emotion one-hot,
/// projected back to the feature width by a 1×1 conv (f_VAE).
template <typename Scalar>
class TrimodalFusion {
 public:
  struct Trace {
    FeatureMaps<Scalar> audio_video;
    Vector<Scalar> gate;
    FeatureMaps<Scalar> stacked;
  };
  struct Grad {
    FeatureMaps<Scalar> audio_video;
    Vector<Scalar> gate;
  };

  TrimodalFusion() = default;
  explicit TrimodalFusion(int channels) : channels_(channels), fuse_(channels + kEmotionStates, channels, 1) {}

  void init(std::mt19937_64& rng) { fuse_.init(rng, 0.7); }

  FeatureMaps<Scalar> forward(const FeatureMaps<Scalar>& fva, const Vector<Scalar>& gate, const EmotionState& s,
                              Trace* trace = nullptr) const {
    require_tag(fva, MapTag::kAudioVideo, "fuse_trimodal");
    require(fva.channels() == channels_, "fuse_trimodal: f_VA channel mismatch");
    require(gate.size() == channels_, "fuse_trimodal: channel attention length mismatch");
    FeatureMaps<Scalar> scaled = fva;
    scaled.data = gate.asDiagonal() * fva.data;
    FeatureMaps<Scalar> stacked = concat_channels(scaled, tile<Scalar>(s.onehot<Scalar>(), fva.height, fva.width));
    FeatureMaps<Scalar> out = fuse_.forward(stacked);
    out.tag = MapTag::kTrimodal;
    if (trace) {
      trace->audio_video = fva;
      trace->gate = gate;
      trace->stacked = std::move(stacked);
    }
    return out;
  }

  Grad backward(const Trace& t, const FeatureMaps<Scalar>& grad_out) {
    const FeatureMaps<Scalar> g_stacked = fuse_.backward(t.stacked, grad_out);
    Grad g;
    const auto g_scaled = g_stacked.data.topRows(channels_);
    g.audio_video = FeatureMaps<Scalar>(channels_, grad_out.height, grad_out.width, MapTag::kAudioVideo);
    g.audio_video.data = t.gate.asDiagonal() * g_scaled;
    g.gate = g_scaled.cwiseProduct(t.audio_video.data).rowwise().sum();
    return g;
  }

  void parameters(nn::ParameterList<Scalar>& list, const std::string& prefix) { fuse_.parameters(list, prefix + ".fuse"); }

  nn::Conv2d<Scalar>& fuse_conv() { return fuse_; }

 private:
  int channels_ = 0;
  nn::Conv2d<Scalar> fuse_;
};

}  // namespace mmsd
