#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mmsd/config.hpp"
#include "mmsd/emotion.hpp"
#include "mmsd/nn/layers.hpp"

namespace mmsd {

/// Emotion-conditioned discriminator: the one-hot is tiled to image size and
/// stacked under the RGB planes, then four stride-2 4×4 conv blocks with
/// leaky ReLU, global average pooling, a linear unit and a sigmoid.
template <typename Scalar>
class Discriminator {
 public:
  struct Trace {
    std::array<FeatureMaps<Scalar>, 4> inputs;
    FeatureMaps<Scalar> last;  // output of the last conv block
    Vector<Scalar> pooled;
    Scalar probability = 0;
  };

  Discriminator() = default;
  explicit Discriminator(const ModelConfig& config) : config_(config), head_(config.disc_widths[3], 1) {
    int in = 3 + kEmotionStates;
    for (int i = 0; i < 4; ++i) {
      blocks_[i] = nn::Conv2d<Scalar>(in, config.disc_widths[i], 4, 2, 1);
      in = config.disc_widths[i];
    }
  }

  void init(std::mt19937_64& rng) {
    for (auto& b : blocks_) b.init(rng);
    head_.init(rng, 0.5);
  }

  /// Probability in (0, 1) that `image` is a real frame in emotion state `s`.
  Scalar forward(const FeatureMaps<Scalar>& image, const EmotionState& s, Trace* trace = nullptr) const {
    require_shape(image, 3, config_.hq_height(), config_.hq_width(), "discriminate");
    FeatureMaps<Scalar> x = concat_channels(image, tile<Scalar>(s.onehot<Scalar>(), image.height, image.width));
    for (int i = 0; i < 4; ++i) {
      if (trace) trace->inputs[i] = x;
      x = blocks_[i].forward(x);
      x.data = nn::leaky_relu(x.data);
    }
    Vector<Scalar> pooled = global_average_pool(x);
    const Scalar p = nn::sigmoid(head_.forward(pooled)[0]);
    if (trace) {
      trace->last = std::move(x);
      trace->pooled = std::move(pooled);
      trace->probability = p;
    }
    return p;
  }

  /// Backpropagates dLoss/dp; returns the gradient w.r.t. the RGB image.
  FeatureMaps<Scalar> backward(const Trace& t, Scalar grad_p) {
    Vector<Scalar> g_logit(1);
    g_logit[0] = grad_p * t.probability * (1 - t.probability);
    const Vector<Scalar> g_pooled = head_.backward(t.pooled, g_logit);
    FeatureMaps<Scalar> g = global_average_pool_backward<Scalar>(g_pooled, t.last.height, t.last.width);
    for (int i = 3; i >= 0; --i) {
      const FeatureMaps<Scalar>& out = i == 3 ? t.last : t.inputs[i + 1];
      g.data = nn::leaky_relu_backward(out.data, g.data);
      g = blocks_[i].backward(t.inputs[i], g);
    }
    FeatureMaps<Scalar> g_image(3, g.height, g.width);
    g_image.data = g.data.topRows(3);
    return g_image;
  }

  void parameters(nn::ParameterList<Scalar>& list, const std::string& prefix) {
    for (int i = 0; i < 4; ++i) blocks_[i].parameters(list, prefix + ".block" + std::to_string(i));
    head_.parameters(list, prefix + ".head");
  }

  nn::Conv2d<Scalar>& block(int i) { return blocks_[i]; }
  nn::Linear<Scalar>& head() { return head_; }

 private:
  ModelConfig config_;
  std::array<nn::Conv2d<Scalar>, 4> blocks_;
  nn::Linear<Scalar> head_;
};

/// Floor applied to probabilities before taking logs.
inline constexpr double kProbabilityFloor = 1e-8;

template <typename Scalar>
Scalar floored_neg_log(Scalar p) {
  return -std::log(std::max(p, static_cast<Scalar>(kProbabilityFloor)));
}

/// d/dp of floored_neg_log; zero where the floor is active.
template <typename Scalar>
Scalar floored_neg_log_derivative(Scalar p) {
  return p > static_cast<Scalar>(kProbabilityFloor) ? -Scalar(1) / p : Scalar(0);
}

/// Non-saturating generator loss −log D(G(x), s).
template <typename Scalar>
Scalar generator_adv_loss(Scalar p) {
  return floored_neg_log(p);
}

template <typename Scalar>
Scalar generator_adv_loss(const std::vector<Scalar>& ps) {
  require(!ps.empty(), "generator_adv_loss: empty batch");
  Scalar total = 0;
  for (Scalar p : ps) total += generator_adv_loss(p);
  return total / static_cast<Scalar>(ps.size());
}

/// −log D(real) − log(1 − D(fake)).
template <typename Scalar>
Scalar discriminator_loss(Scalar p_real, Scalar p_fake) {
  return floored_neg_log(p_real) + floored_neg_log(Scalar(1) - p_fake);
}

template <typename Scalar>
Scalar discriminator_loss(const std::vector<Scalar>& real, const std::vector<Scalar>& fake) {
  require(!real.empty() && real.size() == fake.size(), "discriminator_loss: batch size mismatch");
  Scalar total = 0;
  for (std::size_t i = 0; i < real.size(); ++i) total += discriminator_loss(real[i], fake[i]);
  return total / static_cast<Scalar>(real.size());
}

struct LossWeights {
  double adversarial = 0.01;  // λ1
  double emotion = 0.001;     // λ2
};

template <typename Scalar>
struct LossBreakdown {
  Scalar l1 = 0;
  Scalar l_adv = 0;
  Scalar l_e = 0;
  Scalar total = 0;
  Scalar lambda1 = 0;
  Scalar lambda2 = 0;
};

/// Mean absolute error over every pixel and channel.
template <typename Scalar>
Scalar l1_loss(const FeatureMaps<Scalar>& restored, const FeatureMaps<Scalar>& target) {
  require(restored.same_shape(target), "l1_loss: shape mismatch");
  return (restored.data - target.data).cwiseAbs().sum() / static_cast<Scalar>(restored.data.size());
}

template <typename Scalar>
FeatureMaps<Scalar> l1_loss_gradient(const FeatureMaps<Scalar>& restored, const FeatureMaps<Scalar>& target) {
  FeatureMaps<Scalar> g = restored;
  const Scalar n = static_cast<Scalar>(restored.data.size());
  g.data = (restored.data - target.data).unaryExpr([n](Scalar d) {
    return d > 0 ? Scalar(1) / n : (d < 0 ? Scalar(-1) / n : Scalar(0));
  });
  return g;
}

/// Full generator objective. `p_fake` is ignored unless `adv_enabled`.
template <typename Scalar>
LossBreakdown<Scalar> total_loss(const FeatureMaps<Scalar>& restored, const FeatureMaps<Scalar>& target,
                                 std::optional<Scalar> p_fake, const Vector<Scalar>& au_pred,
                                 const Vector<Scalar>& au_target, LossWeights weights, bool adv_enabled) {
  LossBreakdown<Scalar> out;
  out.lambda1 = static_cast<Scalar>(weights.adversarial);
  out.lambda2 = static_cast<Scalar>(weights.emotion);
  out.l1 = l1_loss(restored, target);
  if (adv_enabled) {
    require(p_fake.has_value(), "total_loss: adversarial term enabled without a discriminator score");
    out.l_adv = generator_adv_loss(*p_fake);
  }
  out.l_e = (au_pred - au_target).squaredNorm();
  out.total = out.l1 + out.lambda1 * out.l_adv + out.lambda2 * out.l_e;
  return out;
}

}  // namespace mmsd
