#pragma once

#include <array>
#include <string>

#include "mmsd/errors.hpp"

namespace mmsd {

inline constexpr int kEmotionStates = 15;
inline constexpr int kActionUnits = 17;
inline constexpr int kMfccCoefficients = 13;

/// Every width and resolution of the network. `paper()` is the full-size
/// model; `miniature()` shrinks it for CI and gradient checks.
struct ModelConfig {
  int lq_height = 72;
  int lq_width = 120;
  int scale = 4;
  int half_window = 2;  // N: the window holds 2N+1 frames
  int features = 64;

  int lstm_hidden = 128;
  int lstm_layers = 3;
  int audio_grid_channels = 15;
  int audio_grid_height = 9;
  int audio_grid_width = 15;
  std::array<int, 3> audio_upsample_widths{32, 64, 64};

  int video_res_blocks = 4;
  int recon_res_blocks = 10;

  std::array<int, 3> au_hidden{128, 128, 64};
  double au_dropout = 0.5;
  std::array<int, 2> attention_hidden{64, 64};
  int embed = 32;

  std::array<int, 4> disc_widths{64, 128, 256, 512};

  bool plain_alignment = false;

  static ModelConfig paper() { return {}; }

  static ModelConfig miniature() {
    ModelConfig c;
    c.lq_height = 24;
    c.lq_width = 40;
    c.half_window = 1;
    c.features = 8;
    c.lstm_hidden = 16;
    c.audio_grid_height = 3;
    c.audio_grid_width = 5;
    c.audio_upsample_widths = {4, 8, 8};
    c.au_hidden = {16, 16, 8};
    c.attention_hidden = {8, 8};
    c.embed = 4;
    c.disc_widths = {8, 16, 32, 64};
    return c;
  }

  int window_length() const { return 2 * half_window + 1; }
  int hq_height() const { return lq_height * scale; }
  int hq_width() const { return lq_width * scale; }

  void validate() const {
    require(half_window >= 0, "config: half_window must be >= 0");
    require(features > 0 && lstm_hidden > 0 && lstm_layers > 0 && embed > 0, "config: widths must be positive");
    require(scale == 4, "config: reconstruction upsamples by exactly 4");
    require(audio_grid_height * 8 == lq_height && audio_grid_width * 8 == lq_width,
            "config: audio grid times 8 must equal the low-quality frame size");
    require(audio_upsample_widths[2] == features, "config: last audio upsampling width must equal features");
    require(lq_height % 2 == 0 && lq_width % 2 == 0, "config: frame size must be even");
  }
};

}  // namespace mmsd
