#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "mmsd/config.hpp"
#include "mmsd/nn/layers.hpp"
#include "mmsd/nn/lstm.hpp"

namespace mmsd {

/// Reshapes a flat vector into (channels, rows, cols), channel-major then row-major.
template <typename Scalar>
FeatureMaps<Scalar> reshape_to_grid(const Vector<Scalar>& v, int channels, int rows, int cols) {
  require(v.size() == static_cast<Eigen::Index>(channels) * rows * cols, "reshape_to_grid: size mismatch");
  FeatureMaps<Scalar> grid(channels, rows, cols);
  for (int c = 0; c < channels; ++c)
    grid.data.row(c) = v.segment(static_cast<Eigen::Index>(c) * rows * cols, rows * cols).transpose();
  return grid;
}

template <typename Scalar>
Vector<Scalar> flatten_grid(const FeatureMaps<Scalar>& grid) {
  Vector<Scalar> v(grid.data.size());
  for (int c = 0; c < grid.channels(); ++c)
    v.segment(static_cast<Eigen::Index>(c) * grid.pixels(), grid.pixels()) = grid.data.row(c).transpose();
  return v;
}

/// Audio branch: a stacked bidirectional LSTM encodes the MFCC window into a
/// 1-D vector; a fully connected layer and three ×2 sub-pixel blocks lift it
/// to maps with the same spatial size as the video features (f_A).
template <typename Scalar>
class AudioBranch {
 public:
  using Matrix = typename nn::BiLstm<Scalar>::Matrix;

  struct LiftTrace {
    Vector<Scalar> vector;
    FeatureMaps<Scalar> grid;
    std::array<typename nn::UpsampleBlock<Scalar>::Trace, 3> blocks;
  };
  struct Trace {
    typename nn::BiLstm<Scalar>::Trace lstm;
    LiftTrace lift;
  };

  AudioBranch() = default;
  explicit AudioBranch(const ModelConfig& config)
      : config_(config),
        lstm_(kMfccCoefficients, config.lstm_hidden, config.lstm_layers),
        fc_(2 * config.lstm_hidden,
            config.audio_grid_channels * config.audio_grid_height * config.audio_grid_width) {
    int in = config.audio_grid_channels;
    for (int i = 0; i < 3; ++i) {
      upsample_[i] = nn::UpsampleBlock<Scalar>(in, config.audio_upsample_widths[i]);
      in = config.audio_upsample_widths[i];
    }
  }

  void init(std::mt19937_64& rng) {
    lstm_.init(rng);
    fc_.init(rng);
    for (auto& u : upsample_) u.init(rng);
  }

  int feature_size() const { return lstm_.output_size(); }

  /// MFCC window is (2N+1) rows × 13 coefficients.
  Vector<Scalar> encode(const Matrix& mfcc_window, typename nn::BiLstm<Scalar>::Trace* trace = nullptr) const {
    if (mfcc_window.cols() != kMfccCoefficients)
      throw ValidationError("encode_audio: rows must have " + std::to_string(kMfccCoefficients) +
                            " coefficients, got " + std::to_string(mfcc_window.cols()));
    if (mfcc_window.rows() != config_.window_length())
      throw ValidationError("encode_audio: expected " + std::to_string(config_.window_length()) +
                            " rows, got " + std::to_string(mfcc_window.rows()));
    return lstm_.forward(mfcc_window.transpose(), trace);
  }

  FeatureMaps<Scalar> lift(const Vector<Scalar>& v, LiftTrace* trace = nullptr) const {
    require(v.size() == feature_size(), "lift_to_maps: feature length mismatch");
    FeatureMaps<Scalar> grid = reshape_to_grid<Scalar>(fc_.forward(v), config_.audio_grid_channels,
                                                       config_.audio_grid_height, config_.audio_grid_width);
    FeatureMaps<Scalar> x = grid;
    for (int i = 0; i < 3; ++i) x = upsample_[i].forward(x, trace ? &trace->blocks[i] : nullptr);
    if (trace) {
      trace->vector = v;
      trace->grid = std::move(grid);
    }
    x.tag = MapTag::kAudio;
    return x;
  }

  /// Gradient w.r.t. the lifted vector.
  Vector<Scalar> lift_backward(const LiftTrace& trace, const FeatureMaps<Scalar>& grad_out) {
    FeatureMaps<Scalar> g = grad_out;
    for (int i = 2; i >= 0; --i) g = upsample_[i].backward(trace.blocks[i], g);
    return fc_.backward(trace.vector, flatten_grid(g));
  }

  FeatureMaps<Scalar> forward(const Matrix& mfcc_window, Trace* trace = nullptr) const {
    Vector<Scalar> v = encode(mfcc_window, trace ? &trace->lstm : nullptr);
    return lift(v, trace ? &trace->lift : nullptr);
  }

  /// Returns the gradient w.r.t. the MFCC window (rows × 13).
  Matrix backward(const Trace& trace, const FeatureMaps<Scalar>& grad_out) {
    const Vector<Scalar> gv = lift_backward(trace.lift, grad_out);
    return lstm_.backward(trace.lstm, gv).transpose();
  }

  void parameters(nn::ParameterList<Scalar>& list, const std::string& prefix) {
    lstm_.parameters(list, prefix + ".lstm");
    fc_.parameters(list, prefix + ".fc");
    for (int i = 0; i < 3; ++i) upsample_[i].parameters(list, prefix + ".up" + std::to_string(i));
  }

  nn::BiLstm<Scalar>& lstm() { return lstm_; }
  nn::Linear<Scalar>& fc() { return fc_; }
  nn::UpsampleBlock<Scalar>& upsample(int i) { return upsample_[i]; }

 private:
  ModelConfig config_;
  nn::BiLstm<Scalar> lstm_;
  nn::Linear<Scalar> fc_;
  std::array<nn::UpsampleBlock<Scalar>, 3> upsample_;
};

}  // namespace mmsd
