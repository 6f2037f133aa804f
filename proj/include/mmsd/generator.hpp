#pragma once

#include <random>
#include <string>
#include <vector>

#include "mmsd/audio_branch.hpp"
#include "mmsd/config.hpp"
#include "mmsd/dataset.hpp"
#include "mmsd/emotion_branch.hpp"
#include "mmsd/fusion.hpp"
#include "mmsd/reconstruction.hpp"
#include "mmsd/video_branch.hpp"

namespace mmsd {

/// Network-ready view of a SampleWindow.
template <typename Scalar>
struct WindowInput {
  std::vector<FeatureMaps<Scalar>> frames;  // 2N+1 × (3, lq_h, lq_w)
  typename AudioBranch<Scalar>::Matrix mfcc;  // (2N+1) × 13
  EmotionState emotion{0};

  static WindowInput from(const SampleWindow& w) {
    WindowInput in;
    for (const Frame& f : w.lq_window) in.frames.push_back(to_maps<Scalar>(f));
    in.mfcc = w.mfcc_window.cast<Scalar>();
    in.emotion = w.emotion;
    return in;
  }

  const FeatureMaps<Scalar>& center() const { return frames[frames.size() / 2]; }
};

/// Every intermediate of one forward pass, for invariant assertions.
template <typename Scalar>
struct Intermediates {
  FeatureMaps<Scalar> video, audio, audio_video, trimodal;
  RowMatrix<Scalar> attention;       // 1 × pixels
  Vector<Scalar> channel_attention;  // features
};

template <typename Scalar>
struct Restoration {
  FeatureMaps<Scalar> frame;  // (3, 4·lq_h, 4·lq_w) in [0, 1]
  Vector<Scalar> predicted_au;
};

/// Throws NumericalError if any attention leaves (0, 1) or any map is non-finite.
template <typename Scalar>
void check_intermediates(const Intermediates<Scalar>& m) {
  auto finite = [](const FeatureMaps<Scalar>& f, const char* name) {
    if (!f.all_finite()) throw NumericalError(std::string(name) + " contains non-finite values");
  };
  finite(m.video, "f_V");
  finite(m.audio, "f_A");
  finite(m.audio_video, "f_VA");
  finite(m.trimodal, "f_VAE");
  if (!(m.attention.minCoeff() > Scalar(0) && m.attention.maxCoeff() < Scalar(1)))
    throw NumericalError("attention map left (0, 1)");
  if (!(m.channel_attention.minCoeff() > Scalar(0) && m.channel_attention.maxCoeff() < Scalar(1)))
    throw NumericalError("channel attention left (0, 1)");
}

/// The full restoration network: video, audio and emotion branches, the two
/// fusion stages and the reconstruction head.
template <typename Scalar>
class Generator {
 public:
  struct Trace {
    typename VideoBranch<Scalar>::Trace video;
    typename AudioBranch<Scalar>::Trace audio;
    typename EmotionBranch<Scalar>::AuTrace au;
    typename EmotionBranch<Scalar>::AttentionTrace attention;
    typename AudioVideoFusion<Scalar>::Trace audio_video;
    typename TrimodalFusion<Scalar>::Trace trimodal;
    typename Reconstruction<Scalar>::Trace reconstruction;
  };

  Generator() = default;
  explicit Generator(const ModelConfig& config)
      : config_(config), video_(config), audio_(config), emotion_(config),
        audio_video_(config.features, config.embed), trimodal_(config.features), reconstruction_(config) {}

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    video_.init(rng);
    audio_.init(rng);
    emotion_.init(rng);
    audio_video_.init(rng);
    trimodal_.init(rng);
    reconstruction_.init(rng);
  }

  const ModelConfig& config() const { return config_; }

  /// `rng` non-null runs in train mode (dropout active).
  Restoration<Scalar> forward(const WindowInput<Scalar>& in, std::mt19937_64* rng = nullptr, Trace* trace = nullptr,
                              Intermediates<Scalar>* debug = nullptr) const {
    FeatureMaps<Scalar> fv = video_.forward(in.frames, trace ? &trace->video : nullptr);
    FeatureMaps<Scalar> fa = audio_.forward(in.mfcc, trace ? &trace->audio : nullptr);
    Restoration<Scalar> out;
    out.predicted_au = emotion_.predict_aus(in.emotion, fv, rng, trace ? &trace->au : nullptr);
    Vector<Scalar> gate = emotion_.channel_attention(out.predicted_au, trace ? &trace->attention : nullptr);
    typename AudioVideoFusion<Scalar>::Trace av_local;
    typename AudioVideoFusion<Scalar>::Trace* av_trace = trace ? &trace->audio_video : (debug ? &av_local : nullptr);
    FeatureMaps<Scalar> fva = audio_video_.forward(fv, fa, av_trace);
    FeatureMaps<Scalar> fvae = trimodal_.forward(fva, gate, in.emotion, trace ? &trace->trimodal : nullptr);
    out.frame = reconstruction_.forward(fvae, in.center(), trace ? &trace->reconstruction : nullptr);
    if (debug) {
      debug->video = std::move(fv);
      debug->audio = std::move(fa);
      debug->audio_video = std::move(fva);
      debug->trimodal = std::move(fvae);
      debug->attention = av_trace->weight.weights;
      debug->channel_attention = std::move(gate);
    }
    return out;
  }

  /// Accumulates gradients given dLoss/dframe and the direct dLoss/dAU.
  void backward(const Trace& t, const FeatureMaps<Scalar>& grad_frame, const Vector<Scalar>& grad_au) {
    const FeatureMaps<Scalar> g_fvae = reconstruction_.backward(t.reconstruction, grad_frame);
    auto g_tri = trimodal_.backward(t.trimodal, g_fvae);
    const Vector<Scalar> g_au = grad_au + emotion_.channel_attention_backward(t.attention, g_tri.gate);
    FeatureMaps<Scalar> g_fv = emotion_.predict_aus_backward(t.au, g_au);
    auto [g_fv2, g_fa] = audio_video_.backward(t.audio_video, g_tri.audio_video);
    g_fv.data += g_fv2.data;
    audio_.backward(t.audio, g_fa);
    video_.backward(t.video, g_fv);
  }

  void parameters(nn::ParameterList<Scalar>& list) {
    video_.parameters(list, "video");
    audio_.parameters(list, "audio");
    emotion_.parameters(list, "emotion");
    audio_video_.parameters(list, "fusion.av");
    trimodal_.parameters(list, "fusion.tri");
    reconstruction_.parameters(list, "recon");
  }

  nn::ParameterList<Scalar> parameters() {
    nn::ParameterList<Scalar> list;
    parameters(list);
    return list;
  }

  VideoBranch<Scalar>& video() { return video_; }
  AudioBranch<Scalar>& audio() { return audio_; }
  EmotionBranch<Scalar>& emotion() { return emotion_; }
  AudioVideoFusion<Scalar>& audio_video() { return audio_video_; }
  TrimodalFusion<Scalar>& trimodal() { return trimodal_; }
  Reconstruction<Scalar>& reconstruction() { return reconstruction_; }

 private:
  ModelConfig config_;
  VideoBranch<Scalar> video_;
  AudioBranch<Scalar> audio_;
  EmotionBranch<Scalar> emotion_;
  AudioVideoFusion<Scalar> audio_video_;
  TrimodalFusion<Scalar> trimodal_;
  Reconstruction<Scalar> reconstruction_;
};

}  // namespace mmsd
