#pragma once

#include <algorithm>
#include <array>
#include <vector>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "mmsd/tensor.hpp"

namespace mmsd {

/// Axis-aligned pixel rectangle.
struct Rect {
  int x = 0, y = 0, width = 0, height = 0;
  bool operator==(const Rect&) const = default;
};

enum class MetricChannel { kLuma, kRgbMean };

/// Bicubic convolution kernel with a = -0.5.
inline double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

namespace detail {

struct CubicTaps {
  std::array<int, 4> index;
  std::array<double, 4> weight;
};

/// Half-pixel-centre mapping from output to input coordinates, clamped at the edges.
inline CubicTaps cubic_taps(int out, int factor, int in_size) {
  const double src = (out + 0.5) / factor - 0.5;
  const int base = static_cast<int>(std::floor(src));
  const double frac = src - base;
  CubicTaps taps;
  for (int k = 0; k < 4; ++k) {
    taps.index[k] = std::clamp(base - 1 + k, 0, in_size - 1);
    taps.weight[k] = cubic_weight(frac - (k - 1));
  }
  return taps;
}

}  // namespace detail

/// Separable bicubic upscaling by an integer factor, edge-replicated.
template <typename Scalar>
FeatureMaps<Scalar> bicubic_upscale(const FeatureMaps<Scalar>& in, int factor) {
  const int out_h = in.height * factor, out_w = in.width * factor;
  std::vector<detail::CubicTaps> xs(out_w), ys(out_h);
  for (int x = 0; x < out_w; ++x) xs[x] = detail::cubic_taps(x, factor, in.width);
  for (int y = 0; y < out_h; ++y) ys[y] = detail::cubic_taps(y, factor, in.height);
  FeatureMaps<Scalar> horizontal(in.channels(), in.height, out_w);
  for (int c = 0; c < in.channels(); ++c)
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < out_w; ++x) {
        double acc = 0;
        for (int k = 0; k < 4; ++k) acc += xs[x].weight[k] * static_cast<double>(in.at(c, y, xs[x].index[k]));
        horizontal.at(c, y, x) = static_cast<Scalar>(acc);
      }
  FeatureMaps<Scalar> out(in.channels(), out_h, out_w);
  for (int c = 0; c < in.channels(); ++c)
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x) {
        double acc = 0;
        for (int k = 0; k < 4; ++k) acc += ys[y].weight[k] * static_cast<double>(horizontal.at(c, ys[y].index[k], x));
        out.at(c, y, x) = static_cast<Scalar>(acc);
      }
  return out;
}

/// BT.601 luma (or RGB mean) of a (3, h, w) image as an h × w matrix.
Eigen::MatrixXd luma(const FeatureMaps<double>& rgb, MetricChannel channel = MetricChannel::kLuma);

/// Masked PSNR with peak 1.0. Identical inputs give +infinity.
double psnr(const FeatureMaps<double>& a, const FeatureMaps<double>& b, const Rect& mask,
            MetricChannel channel = MetricChannel::kLuma);

/// Single-scale SSIM, 11×11 Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03,
/// averaged over every window lying entirely inside the mask.
double ssim(const FeatureMaps<double>& a, const FeatureMaps<double>& b, const Rect& mask,
            MetricChannel channel = MetricChannel::kLuma);

double psnr_plane(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Rect& mask);
double ssim_plane(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Rect& mask);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

inline bool is_infinite_psnr(double v) { return std::isinf(v) && v > 0; }

}  // namespace mmsd
