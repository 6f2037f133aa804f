#pragma once

#include <array>
#include <random>
#include <string>

#include "mmsd/config.hpp"
#include "mmsd/emotion.hpp"
#include "mmsd/nn/layers.hpp"

namespace mmsd {

/// Predicts 17 action-unit intensities from the emotion one-hot and the
/// pooled video features, and turns the prediction into a per-channel gate.
template <typename Scalar>
class EmotionBranch {
 public:
  struct AuTrace {
    int height = 0, width = 0;
    std::array<Vector<Scalar>, 4> inputs;  // input of each linear layer
    std::array<Vector<Scalar>, 3> activations;  // post-ReLU, pre-dropout
    std::array<nn::DropoutMask<Scalar>, 3> masks;
  };
  struct AttentionTrace {
    std::array<Vector<Scalar>, 3> inputs;
    Vector<Scalar> output;
  };

  EmotionBranch() = default;
  explicit EmotionBranch(const ModelConfig& config) : config_(config) {
    int in = config.features + kEmotionStates;
    for (int i = 0; i < 3; ++i) {
      au_layers_[i] = nn::Linear<Scalar>(in, config.au_hidden[i]);
      in = config.au_hidden[i];
    }
    au_layers_[3] = nn::Linear<Scalar>(in, kActionUnits);
    attention_[0] = nn::Linear<Scalar>(kActionUnits, config.attention_hidden[0]);
    attention_[1] = nn::Linear<Scalar>(config.attention_hidden[0], config.attention_hidden[1]);
    attention_[2] = nn::Linear<Scalar>(config.attention_hidden[1], config.features);
  }

  void init(std::mt19937_64& rng) {
    for (auto& l : au_layers_) l.init(rng);
    for (auto& l : attention_) l.init(rng);
  }

  /// `rng` non-null enables dropout (train mode).
  Vector<Scalar> predict_aus(const EmotionState& s, const FeatureMaps<Scalar>& fv,
                             std::mt19937_64* rng = nullptr, AuTrace* trace = nullptr) const {
    require_tag(fv, MapTag::kVideo, "predict_aus");
    require(fv.channels() == config_.features, "predict_aus: channel mismatch");
    Vector<Scalar> x(config_.features + kEmotionStates);
    x.head(config_.features) = global_average_pool(fv);
    x.tail(kEmotionStates) = s.onehot<Scalar>();
    AuTrace local;
    AuTrace& t = trace ? *trace : local;
    t.height = fv.height;
    t.width = fv.width;
    for (int i = 0; i < 3; ++i) {
      t.inputs[i] = x;
      t.activations[i] = nn::relu(au_layers_[i].forward(x));
      x = nn::dropout<Scalar>(t.activations[i], config_.au_dropout, rng, &t.masks[i]);
    }
    t.inputs[3] = x;
    return au_layers_[3].forward(x);
  }

  /// Gradient w.r.t. f_V.
  FeatureMaps<Scalar> predict_aus_backward(const AuTrace& t, const Vector<Scalar>& grad_out) {
    Vector<Scalar> g = au_layers_[3].backward(t.inputs[3], grad_out);
    for (int i = 2; i >= 0; --i) {
      g = nn::dropout_backward(t.masks[i], g);
      g = nn::relu_backward(t.activations[i], g);
      g = au_layers_[i].backward(t.inputs[i], g);
    }
    FeatureMaps<Scalar> out = global_average_pool_backward<Scalar>(g.head(config_.features), t.height, t.width);
    out.tag = MapTag::kVideo;
    return out;
  }

  /// Per-channel gate in (0, 1), one entry per feature channel.
  Vector<Scalar> channel_attention(const Vector<Scalar>& predicted_au, AttentionTrace* trace = nullptr) const {
    require(predicted_au.size() == kActionUnits, "channel_attention: expected 17 action units");
    AttentionTrace local;
    AttentionTrace& t = trace ? *trace : local;
    Vector<Scalar> x = predicted_au;
    for (int i = 0; i < 2; ++i) {
      t.inputs[i] = x;
      x = nn::relu(attention_[i].forward(x));
    }
    t.inputs[2] = x;
    t.output = nn::sigmoid(attention_[2].forward(x));
    return t.output;
  }

  /// Gradient w.r.t. the predicted AUs.
  Vector<Scalar> channel_attention_backward(const AttentionTrace& t, const Vector<Scalar>& grad_out) {
    Vector<Scalar> g = nn::sigmoid_backward(t.output, grad_out);
    g = attention_[2].backward(t.inputs[2], g);
    for (int i = 1; i >= 0; --i) {
      g = nn::relu_backward(t.inputs[i + 1], g);
      g = attention_[i].backward(t.inputs[i], g);
    }
    return g;
  }

  void parameters(nn::ParameterList<Scalar>& list, const std::string& prefix) {
    for (int i = 0; i < 4; ++i) au_layers_[i].parameters(list, prefix + ".au" + std::to_string(i));
    for (int i = 0; i < 3; ++i) attention_[i].parameters(list, prefix + ".attn" + std::to_string(i));
  }

  nn::Linear<Scalar>& au_layer(int i) { return au_layers_[i]; }
  nn::Linear<Scalar>& attention_layer(int i) { return attention_[i]; }

 private:
  ModelConfig config_;
  std::array<nn::Linear<Scalar>, 4> au_layers_;
  std::array<nn::Linear<Scalar>, 3> attention_;
};

/// Squared L2 distance between predicted and target action units.
template <typename Scalar>
Scalar au_loss(const Vector<Scalar>& predicted, const Vector<Scalar>& target) {
  require(predicted.size() == target.size(), "au_loss: dimension mismatch");
  return (predicted - target).squaredNorm();
}

template <typename Scalar>
Vector<Scalar> au_loss_gradient(const Vector<Scalar>& predicted, const Vector<Scalar>& target) {
  return Scalar(2) * (predicted - target);
}

}  // namespace mmsd
