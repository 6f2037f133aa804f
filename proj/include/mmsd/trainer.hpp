#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mmsd/adversary.hpp"
#include "mmsd/generator.hpp"
#include "mmsd/train_config.hpp"

namespace mmsd {

/// Adam with bias correction. Moments are kept per parameter, in list order.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(double lr, double beta1, double beta2, double epsilon) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void step(const nn::ParameterList<Scalar>& params) {
    if (first_moment.empty()) reset(params);
    require(first_moment.size() == params.size(), "adam: parameter list changed");
    ++steps;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps));
    const Scalar b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
    const Scalar step_size = static_cast<Scalar>(lr_ / c1);
    const Scalar inv_c2 = static_cast<Scalar>(1.0 / c2);
    const Scalar eps = static_cast<Scalar>(eps_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i].param;
      auto& m = first_moment[i];
      auto& v = second_moment[i];
      m = b1 * m + (Scalar(1) - b1) * p.grad;
      v = b2 * v + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= step_size * m.array() / ((v.array() * inv_c2).sqrt() + eps);
    }
  }

  void reset(const nn::ParameterList<Scalar>& params) {
    first_moment.clear();
    second_moment.clear();
    for (const auto& p : params) {
      first_moment.push_back(RowMatrix<Scalar>::Zero(p.param->value.rows(), p.param->value.cols()));
      second_moment.push_back(RowMatrix<Scalar>::Zero(p.param->value.rows(), p.param->value.cols()));
    }
    steps = 0;
  }

  std::int64_t steps = 0;
  std::vector<RowMatrix<Scalar>> first_moment, second_moment;

 private:
  double lr_ = 1e-4, beta1_ = 0.5, beta2_ = 0.9, eps_ = 1e-8;
};

/// Everything needed to continue training bit-for-bit.
template <typename Scalar>
struct TrainState {
  ModelConfig model;
  TrainConfig train;
  Generator<Scalar> generator;
  Discriminator<Scalar> discriminator;
  Adam<Scalar> generator_opt;
  Adam<Scalar> discriminator_opt;
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  std::int64_t batch_in_epoch = 0;
  std::mt19937_64 rng;

  TrainState() = default;
  TrainState(const ModelConfig& m, const TrainConfig& t)
      : model(m), train(t), generator(m), discriminator(m),
        generator_opt(t.lr, t.beta1, t.beta2, t.adam_epsilon),
        discriminator_opt(t.lr, t.beta1, t.beta2, t.adam_epsilon) {}

  /// Fresh state with seeded weights.
  static TrainState initial(const ModelConfig& m, const TrainConfig& t) {
    m.validate();
    t.validate();
    TrainState s(m, t);
    std::seed_seq seq{t.seed, std::uint64_t{0x6d6d7364}};
    std::mt19937_64 seeder(seq);
    s.generator.init(seeder());
    std::mt19937_64 disc_rng(seeder());
    s.discriminator.init(disc_rng);
    s.rng.seed(seeder());
    return s;
  }

  bool adversarial() const { return epoch >= train.warmup_epochs; }
};

struct StepReport {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  bool adversarial = false;
  LossBreakdown<double> loss;  // batch means
  double discriminator_loss = 0.0;
};

/// One optimisation step: with the adversarial term active the discriminator
/// is updated first, then the generator on l1 + λ1·l_adv + λ2·l_e. During the
/// warmup epochs the discriminator is never touched and l_adv is reported as 0.
template <typename Scalar>
StepReport train_step(TrainState<Scalar>& state, const std::vector<SampleWindow>& batch) {
  require(!batch.empty(), "train_step: empty batch");
  const bool adv = state.adversarial();
  const auto n = static_cast<Scalar>(batch.size());
  const LossWeights weights{state.train.lambda1, state.train.lambda2};
  auto g_params = state.generator.parameters();
  nn::ParameterList<Scalar> d_params;
  state.discriminator.parameters(d_params, "disc");

  std::vector<std::uint64_t> dropout_seeds(batch.size());
  for (auto& s : dropout_seeds) s = state.rng();

  std::vector<WindowInput<Scalar>> inputs;
  std::vector<FeatureMaps<Scalar>> targets;
  for (const auto& w : batch) {
    inputs.push_back(WindowInput<Scalar>::from(w));
    targets.push_back(to_maps<Scalar>(w.hq_center));
  }

  auto describe = [&](std::size_t i) {
    return "step " + std::to_string(state.step) + ", batch sample " + std::to_string(i) + " (clip '" +
           batch[i].clip_id + "', frame " + std::to_string(batch[i].t) + ")";
  };

  StepReport report;
  report.step = state.step;
  report.epoch = state.epoch;
  report.adversarial = adv;

  if (adv) {
    nn::zero_grads(d_params);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      std::mt19937_64 dropout_rng(dropout_seeds[i]);
      const FeatureMaps<Scalar> fake = state.generator.forward(inputs[i], &dropout_rng).frame;
      typename Discriminator<Scalar>::Trace real_trace, fake_trace;
      const Scalar p_real = state.discriminator.forward(targets[i], inputs[i].emotion, &real_trace);
      const Scalar p_fake = state.discriminator.forward(fake, inputs[i].emotion, &fake_trace);
      const Scalar loss = discriminator_loss(p_real, p_fake);
      if (!std::isfinite(static_cast<double>(loss)))
        throw NumericalError("non-finite discriminator loss at " + describe(i));
      report.discriminator_loss += static_cast<double>(loss) / batch.size();
      state.discriminator.backward(real_trace, floored_neg_log_derivative(p_real) / n);
      state.discriminator.backward(fake_trace, -floored_neg_log_derivative(Scalar(1) - p_fake) / n);
    }
    state.discriminator_opt.step(d_params);
  }

  nn::zero_grads(g_params);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::mt19937_64 dropout_rng(dropout_seeds[i]);
    typename Generator<Scalar>::Trace trace;
    const Restoration<Scalar> out = state.generator.forward(inputs[i], &dropout_rng, &trace);
    const Vector<Scalar> au_target = batch[i].au_target.template cast<Scalar>();
    std::optional<Scalar> p_fake;
    typename Discriminator<Scalar>::Trace d_trace;
    if (adv) p_fake = state.discriminator.forward(out.frame, inputs[i].emotion, &d_trace);
    const LossBreakdown<Scalar> loss =
        total_loss(out.frame, targets[i], p_fake, out.predicted_au, au_target, weights, adv);
    if (!std::isfinite(static_cast<double>(loss.total)))
      throw NumericalError("non-finite generator loss at " + describe(i));
    report.loss.l1 += static_cast<double>(loss.l1) / batch.size();
    report.loss.l_adv += static_cast<double>(loss.l_adv) / batch.size();
    report.loss.l_e += static_cast<double>(loss.l_e) / batch.size();

    FeatureMaps<Scalar> g_frame = l1_loss_gradient(out.frame, targets[i]);
    if (adv) {
      const FeatureMaps<Scalar> g_adv = state.discriminator.backward(d_trace, floored_neg_log_derivative(*p_fake));
      g_frame.data += loss.lambda1 * g_adv.data;
    }
    g_frame.data /= n;
    const Vector<Scalar> g_au = (loss.lambda2 / n) * au_loss_gradient(out.predicted_au, au_target);
    state.generator.backward(trace, g_frame, g_au);
  }
  if (adv) nn::zero_grads(d_params);  // generator pass must not leak into the discriminator
  state.generator_opt.step(g_params);

  report.loss.lambda1 = state.train.lambda1;
  report.loss.lambda2 = state.train.lambda2;
  report.loss.total = report.loss.l1 + report.loss.lambda1 * report.loss.l_adv + report.loss.lambda2 * report.loss.l_e;
  ++state.step;
  ++state.batch_in_epoch;
  return report;
}

/// Sample visiting order for one epoch; a pure function of (seed, epoch).
inline std::vector<std::size_t> epoch_order(std::size_t samples, std::uint64_t seed, std::int64_t epoch) {
  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{seed, static_cast<std::uint64_t>(epoch), std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  for (std::size_t i = samples; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}

struct TrainCallbacks {
  std::function<void(const StepReport&)> on_step;
  /// Called after every completed epoch (counters already advanced).
  std::function<void()> on_epoch_end;
  /// Stop once this many steps have run in this call (0 = no limit).
  std::int64_t max_steps = 0;
};

/// Runs epochs until `state.train.epochs`, resuming mid-epoch from the
/// state's counters. An epoch is one pass over `samples`.
template <typename Scalar>
void train_epochs(TrainState<Scalar>& state, const std::vector<SampleWindow>& samples, const TrainCallbacks& cb = {}) {
  require(!samples.empty(), "train: no training samples");
  const auto batch_size = static_cast<std::size_t>(state.train.batch_size);
  const std::int64_t batches = static_cast<std::int64_t>((samples.size() + batch_size - 1) / batch_size);
  std::int64_t done = 0;
  while (state.epoch < state.train.epochs) {
    const auto order = epoch_order(samples.size(), state.train.seed, state.epoch);
    while (state.batch_in_epoch < batches) {
      if (cb.max_steps > 0 && done >= cb.max_steps) return;
      const std::size_t begin = static_cast<std::size_t>(state.batch_in_epoch) * batch_size;
      const std::size_t end = std::min(samples.size(), begin + batch_size);
      std::vector<SampleWindow> batch;
      for (std::size_t k = begin; k < end; ++k) batch.push_back(samples[order[k]]);
      const StepReport r = train_step(state, batch);
      ++done;
      if (cb.on_step) cb.on_step(r);
    }
    ++state.epoch;
    state.batch_in_epoch = 0;
    if (cb.on_epoch_end) cb.on_epoch_end();
  }
}

}  // namespace mmsd
