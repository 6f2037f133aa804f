#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "mmsd/nn/layers.hpp"

namespace mmsd::nn {

/// Deformable K×K convolution (stride 1, same padding). Each tap k at output
/// pixel p samples the input bilinearly at its regular grid position shifted
/// by (offsets[2k](p), offsets[2k+1](p)) = (dy, dx). Samples outside the
/// input read zero.
template <typename Scalar>
class DeformConv2d {
 public:
  DeformConv2d() = default;
  DeformConv2d(int in_channels, int out_channels, int kernel = 3)
      : in_(in_channels), out_(out_channels), kernel_(kernel),
        weight(out_channels, static_cast<Eigen::Index>(in_channels) * kernel * kernel),
        bias(out_channels, 1) {}

  void init(std::mt19937_64& rng, double gain = 1.0) {
    fill_normal(weight, gain * std::sqrt(2.0 / (in_ * kernel_ * kernel_)), rng);
    bias.value.setZero();
  }

  int kernel() const { return kernel_; }
  int offset_channels() const { return 2 * kernel_ * kernel_; }

  FeatureMaps<Scalar> forward(const FeatureMaps<Scalar>& in, const FeatureMaps<Scalar>& offsets) const {
    check(in, offsets);
    FeatureMaps<Scalar> out;
    out.height = in.height;
    out.width = in.width;
    out.data.noalias() = weight.value * sample_columns(in, offsets);
    out.data.colwise() += bias.value.col(0);
    return out;
  }

  /// The same weights applied as a regular convolution (all offsets zero).
  FeatureMaps<Scalar> forward_plain(const FeatureMaps<Scalar>& in) const {
    FeatureMaps<Scalar> out;
    out.height = in.height;
    out.width = in.width;
    out.data.noalias() = weight.value * im2col(in, kernel_, 1, kernel_ / 2);
    out.data.colwise() += bias.value.col(0);
    return out;
  }

  FeatureMaps<Scalar> backward_plain(const FeatureMaps<Scalar>& in, const FeatureMaps<Scalar>& grad_out) {
    const RowMatrix<Scalar> cols = im2col(in, kernel_, 1, kernel_ / 2);
    weight.grad.noalias() += grad_out.data * cols.transpose();
    bias.grad.col(0) += grad_out.data.rowwise().sum();
    const RowMatrix<Scalar> grad_cols = weight.value.transpose() * grad_out.data;
    return col2im(grad_cols, in_, in.height, in.width, kernel_, 1, kernel_ / 2);
  }

  /// Returns (grad w.r.t. input, grad w.r.t. offsets); accumulates weight grads.
  std::pair<FeatureMaps<Scalar>, FeatureMaps<Scalar>> backward(const FeatureMaps<Scalar>& in,
                                                               const FeatureMaps<Scalar>& offsets,
                                                               const FeatureMaps<Scalar>& grad_out) {
    check(in, offsets);
    const RowMatrix<Scalar> cols = sample_columns(in, offsets);
    weight.grad.noalias() += grad_out.data * cols.transpose();
    bias.grad.col(0) += grad_out.data.rowwise().sum();
    const RowMatrix<Scalar> grad_cols = weight.value.transpose() * grad_out.data;

    FeatureMaps<Scalar> grad_in(in_, in.height, in.width);
    FeatureMaps<Scalar> grad_off(offset_channels(), in.height, in.width);
    const int taps = kernel_ * kernel_;
    const int pad = kernel_ / 2;
    for (int k = 0; k < taps; ++k) {
      const int ky = k / kernel_, kx = k % kernel_;
      for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
          const Eigen::Index p = static_cast<Eigen::Index>(y) * in.width + x;
          const Sample s = locate(in, y - pad + ky + offsets.data(2 * k, p),
                                  x - pad + kx + offsets.data(2 * k + 1, p));
          Scalar g_dy = 0, g_dx = 0;
          for (int c = 0; c < in_; ++c) {
            const Scalar g = grad_cols(static_cast<Eigen::Index>(c) * taps + k, p);
            if (g == Scalar(0)) continue;
            const Scalar v00 = s.read(in, c, 0), v01 = s.read(in, c, 1);
            const Scalar v10 = s.read(in, c, 2), v11 = s.read(in, c, 3);
            g_dy += g * ((1 - s.lx) * (v10 - v00) + s.lx * (v11 - v01));
            g_dx += g * ((1 - s.ly) * (v01 - v00) + s.ly * (v11 - v10));
            s.scatter(grad_in, c, g);
          }
          grad_off.data(2 * k, p) = g_dy;
          grad_off.data(2 * k + 1, p) = g_dx;
        }
      }
    }
    return {std::move(grad_in), std::move(grad_off)};
  }

  void parameters(ParameterList<Scalar>& list, const std::string& prefix) {
    list.push_back({prefix + ".weight", &weight});
    list.push_back({prefix + ".bias", &bias});
  }

 private:
  struct Sample {
    int y0 = 0, x0 = 0;
    Scalar ly = 0, lx = 0;
    bool inside[4] = {false, false, false, false};
    Eigen::Index index[4] = {0, 0, 0, 0};

    Scalar read(const FeatureMaps<Scalar>& in, int c, int corner) const {
      return inside[corner] ? in.data(c, index[corner]) : Scalar(0);
    }
    Scalar weight(int corner) const {
      switch (corner) {
        case 0: return (1 - ly) * (1 - lx);
        case 1: return (1 - ly) * lx;
        case 2: return ly * (1 - lx);
        default: return ly * lx;
      }
    }
    Scalar interpolate(const FeatureMaps<Scalar>& in, int c) const {
      return weight(0) * read(in, c, 0) + weight(1) * read(in, c, 1) + weight(2) * read(in, c, 2) +
             weight(3) * read(in, c, 3);
    }
    void scatter(FeatureMaps<Scalar>& grad_in, int c, Scalar g) const {
      for (int corner = 0; corner < 4; ++corner)
        if (inside[corner]) grad_in.data(c, index[corner]) += weight(corner) * g;
    }
  };

  static Sample locate(const FeatureMaps<Scalar>& in, Scalar py, Scalar px) {
    Sample s;
    const Scalar fy = std::floor(py), fx = std::floor(px);
    s.y0 = static_cast<int>(fy);
    s.x0 = static_cast<int>(fx);
    s.ly = py - fy;
    s.lx = px - fx;
    for (int corner = 0; corner < 4; ++corner) {
      const int yy = s.y0 + corner / 2, xx = s.x0 + corner % 2;
      s.inside[corner] = yy >= 0 && yy < in.height && xx >= 0 && xx < in.width;
      s.index[corner] = s.inside[corner] ? static_cast<Eigen::Index>(yy) * in.width + xx : 0;
    }
    return s;
  }

  void check(const FeatureMaps<Scalar>& in, const FeatureMaps<Scalar>& offsets) const {
    require(in.channels() == in_, "deform_conv: input channel mismatch");
    require_shape(offsets, offset_channels(), in.height, in.width, "deform_conv offsets");
  }

  RowMatrix<Scalar> sample_columns(const FeatureMaps<Scalar>& in, const FeatureMaps<Scalar>& offsets) const {
    const int taps = kernel_ * kernel_;
    const int pad = kernel_ / 2;
    RowMatrix<Scalar> cols(static_cast<Eigen::Index>(in_) * taps, in.pixels());
    for (int k = 0; k < taps; ++k) {
      const int ky = k / kernel_, kx = k % kernel_;
      for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
          const Eigen::Index p = static_cast<Eigen::Index>(y) * in.width + x;
          const Sample s = locate(in, y - pad + ky + offsets.data(2 * k, p),
                                  x - pad + kx + offsets.data(2 * k + 1, p));
          for (int c = 0; c < in_; ++c) cols(static_cast<Eigen::Index>(c) * taps + k, p) = s.interpolate(in, c);
        }
      }
    }
    return cols;
  }

  int in_ = 0, out_ = 0, kernel_ = 3;

 public:
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
};

}  // namespace mmsd::nn
