#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <unistd.h>

#include "checks.hpp"
#include "mmsd/checkpoint.hpp"
#include "mmsd/metrics.hpp"

namespace mmsd::testing {

namespace {

bool bit_equal(const nn::ParameterList<double>& a, const nn::ParameterList<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i].param->value;
    const auto& y = b[i].param->value;
    if (x.rows() != y.rows() || x.cols() != y.cols() ||
        std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0)
      return false;
  }
  return true;
}

nn::ParameterList<double> disc_params(TrainState<double>& s) {
  nn::ParameterList<double> list;
  s.discriminator.parameters(list, "disc");
  return list;
}

bool same_state(TrainState<double>& a, TrainState<double>& b) {
  return bit_equal(a.generator.parameters(), b.generator.parameters()) && bit_equal(disc_params(a), disc_params(b)) &&
         a.step == b.step && a.epoch == b.epoch && a.rng == b.rng;
}

std::vector<SampleWindow> training_windows(const ModelConfig& config, int frames) {
  return windows(fixture_clip(config, frames), config.half_window);
}

}  // namespace

CheckResult check_warmup() {
  CheckResult r;
  const ModelConfig config = ModelConfig::miniature();
  TrainConfig train;
  train.batch_size = 2;
  train.warmup_epochs = 2;
  train.epochs = 3;
  train.seed = 3;
  auto state = TrainState<double>::initial(config, train);
  const auto samples = training_windows(config, 4);  // 2 steps per epoch
  auto initial = TrainState<double>::initial(config, train);
  bool unchanged = true, zero_adv = true, adv_after = true, changed_after = true;
  int warm_steps = 0, adv_steps = 0;
  TrainCallbacks cb;
  cb.on_step = [&](const StepReport& rep) {
    if (rep.epoch < 2) {
      ++warm_steps;
      zero_adv = zero_adv && rep.loss.l_adv == 0.0 && !rep.adversarial;
      unchanged = unchanged && bit_equal(disc_params(state), disc_params(initial));
    } else {
      ++adv_steps;
      adv_after = adv_after && rep.adversarial && rep.loss.l_adv > 0.0;
      changed_after = changed_after && !bit_equal(disc_params(state), disc_params(initial));
    }
  };
  train_epochs(state, samples, cb);
  r.expect(warm_steps == 4, "epochs 0-1 ran " + std::to_string(warm_steps) + " steps");
  r.expect(zero_adv, "reported l_adv == 0 for every epoch 0-1 step");
  r.expect(unchanged, "discriminator parameters bit-unchanged through epochs 0-1");
  r.expect(adv_steps == 2 && adv_after && changed_after, "epoch 2 enables l_adv > 0 and updates the discriminator");
  return r;
}

CheckResult check_overfit() {
  CheckResult r;
  const auto start = std::chrono::steady_clock::now();
  const ModelConfig config = ModelConfig::miniature();
  TrainConfig train;
  train.batch_size = 1;
  train.lr = 1e-3;
  train.epochs = 1000;
  train.warmup_epochs = 1000;  // adversarial term stays off
  train.seed = 1;
  auto state = TrainState<double>::initial(config, train);
  const auto samples = training_windows(config, 6);
  const std::vector<SampleWindow> batch{samples[2]};
  double first = 0, last = 0;
  for (int i = 0; i < 200; ++i) {
    const StepReport rep = train_step(state, batch);
    if (i == 0) first = rep.loss.l1;
    last = rep.loss.l1;
  }
  const WindowInput<double> in = WindowInput<double>::from(batch[0]);
  const FeatureMaps<double> restored = state.generator.forward(in).frame;
  const FeatureMaps<double> target = to_maps<double>(batch[0].hq_center);
  FeatureMaps<double> bicubic = bicubic_upscale(in.center(), 4);
  bicubic.data = bicubic.data.cwiseMax(0.0).cwiseMin(1.0);
  const Rect face = batch[0].face_box;
  const double ours = psnr(restored, target, face), baseline = psnr(bicubic, target, face);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.expect(last <= 0.5 * first, "L1 " + format_double(first, 4) + " -> " + format_double(last, 4) + " (" +
                                    format_double(100 * (1 - last / first), 3) + "% drop, need >= 50%)");
  r.expect(ours > baseline, "face PSNR " + format_double(ours, 4) + " dB > bicubic " + format_double(baseline, 4) + " dB");
  r.expect(seconds < 300, "runtime " + format_double(seconds, 3) + " s < 300 s");
  return r;
}

CheckResult check_determinism() {
  CheckResult r;
  const ModelConfig config = ModelConfig::miniature();
  TrainConfig train;
  train.batch_size = 2;
  train.warmup_epochs = 1;
  train.epochs = 4;
  train.seed = 11;
  const auto samples = training_windows(config, 6);  // 3 steps per epoch

  auto a = TrainState<double>::initial(config, train);
  auto b = TrainState<double>::initial(config, train);
  TrainCallbacks ten;
  ten.max_steps = 10;
  train_epochs(a, samples, ten);
  train_epochs(b, samples, ten);
  r.expect(a.step == 10 && same_state(a, b), "identical seeds give bit-identical states after 10 steps");

  // Interrupted: 5 steps, checkpoint, reload, 5 more (crosses the warmup boundary).
  auto c = TrainState<double>::initial(config, train);
  TrainCallbacks five;
  five.max_steps = 5;
  train_epochs(c, samples, five);
  const auto dir = std::filesystem::temp_directory_path() / ("mmsd_resume_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  save_checkpoint(c, dir / "a.ckpt");
  auto resumed = load_checkpoint<double>(dir / "a.ckpt");
  save_checkpoint(resumed, dir / "b.ckpt");
  auto read = [](const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  };
  const std::string bytes_a = read(dir / "a.ckpt");
  r.expect(bytes_a == read(dir / "b.ckpt"), "save -> load -> save is byte-identical");
  r.expect(bytes_a.size() < 50u * 1024 * 1024, "miniature checkpoint " + std::to_string(bytes_a.size() / 1024) + " KiB < 50 MB");
  train_epochs(resumed, samples, five);
  r.expect(same_state(resumed, a), "save/load/resume 5 steps equals uninterrupted 10 steps bit-for-bit");
  std::filesystem::remove_all(dir);

  const DegradedClip clip = fixture_clip(config, 3);
  const WindowInput<double> in = WindowInput<double>::from(window_at(clip, 1, config.half_window));
  const auto first = a.generator.forward(in), second = a.generator.forward(in);
  r.expect(first.frame.data == second.frame.data && first.predicted_au == second.predicted_au,
           "eval-mode restoration is bit-reproducible");
  return r;
}

}  // namespace mmsd::testing
