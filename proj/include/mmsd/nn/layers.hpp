#pragma once

#include <cmath>
#include <random>
#include <string>
#include <type_traits>

#include "mmsd/nn/parameter.hpp"
#include "mmsd/tensor.hpp"

namespace mmsd::nn {

inline int conv_output_size(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

/// Unfolds K×K patches into columns: row c·K² + ky·K + kx, column oy·out_w + ox.
template <typename Scalar>
RowMatrix<Scalar> im2col(const FeatureMaps<Scalar>& in, int kernel, int stride, int pad) {
  const int out_h = conv_output_size(in.height, kernel, stride, pad);
  const int out_w = conv_output_size(in.width, kernel, stride, pad);
  RowMatrix<Scalar> cols(static_cast<Eigen::Index>(in.channels()) * kernel * kernel,
                         static_cast<Eigen::Index>(out_h) * out_w);
  for (int c = 0; c < in.channels(); ++c) {
    const Scalar* plane = in.data.row(c).data();
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        Scalar* dst = cols.row((static_cast<Eigen::Index>(c) * kernel + ky) * kernel + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          Scalar* row_dst = dst + static_cast<Eigen::Index>(oy) * out_w;
          if (iy < 0 || iy >= in.height) {
            std::fill(row_dst, row_dst + out_w, Scalar(0));
            continue;
          }
          const Scalar* src = plane + static_cast<Eigen::Index>(iy) * in.width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            row_dst[ox] = (ix >= 0 && ix < in.width) ? src[ix] : Scalar(0);
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatters column gradients back onto an input-shaped stack.
template <typename Scalar>
FeatureMaps<Scalar> col2im(const RowMatrix<Scalar>& cols, int channels, int h, int w, int kernel,
                           int stride, int pad) {
  const int out_h = conv_output_size(h, kernel, stride, pad);
  const int out_w = conv_output_size(w, kernel, stride, pad);
  FeatureMaps<Scalar> out(channels, h, w);
  for (int c = 0; c < channels; ++c) {
    Scalar* plane = out.data.row(c).data();
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const Scalar* src = cols.row((static_cast<Eigen::Index>(c) * kernel + ky) * kernel + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          Scalar* dst = plane + static_cast<Eigen::Index>(iy) * w;
          const Scalar* row_src = src + static_cast<Eigen::Index>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += row_src[ox];
          }
        }
      }
    }
  }
  return out;
}

/// 2D convolution with zero padding; weights are (out, in·K²).
template <typename Scalar>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride = 1, int pad = -1)
      : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride),
        pad_(pad < 0 ? kernel / 2 : pad),
        weight(out_channels, static_cast<Eigen::Index>(in_channels) * kernel * kernel),
        bias(out_channels, 1) {}

  /// He-normal weights scaled by `gain`; zero bias.
  void init(std::mt19937_64& rng, double gain = 1.0) {
    fill_normal(weight, gain * std::sqrt(2.0 / (in_ * kernel_ * kernel_)), rng);
    bias.value.setZero();
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return kernel_; }
  int stride() const { return stride_; }
  int pad() const { return pad_; }

  FeatureMaps<Scalar> forward(const FeatureMaps<Scalar>& in) const {
    if (in.channels() != in_)
      throw ValidationError("conv: expected " + std::to_string(in_) + " input channels, got " +
                            std::to_string(in.channels()));
    FeatureMaps<Scalar> out;
    out.height = conv_output_size(in.height, kernel_, stride_, pad_);
    out.width = conv_output_size(in.width, kernel_, stride_, pad_);
    if (pointwise()) {
      out.data.noalias() = weight.value * in.data;
    } else {
      out.data.noalias() = weight.value * im2col(in, kernel_, stride_, pad_);
    }
    out.data.colwise() += bias.value.col(0);
    return out;
  }

  /// Accumulates parameter gradients and returns the gradient w.r.t. `in`.
  FeatureMaps<Scalar> backward(const FeatureMaps<Scalar>& in, const FeatureMaps<Scalar>& grad_out) {
    bias.grad.col(0) += grad_out.data.rowwise().sum();
    if (pointwise()) {
      weight.grad.noalias() += grad_out.data * in.data.transpose();
      FeatureMaps<Scalar> grad_in;
      grad_in.height = in.height;
      grad_in.width = in.width;
      grad_in.data.noalias() = weight.value.transpose() * grad_out.data;
      return grad_in;
    }
    const RowMatrix<Scalar> cols = im2col(in, kernel_, stride_, pad_);
    weight.grad.noalias() += grad_out.data * cols.transpose();
    const RowMatrix<Scalar> grad_cols = weight.value.transpose() * grad_out.data;
    return col2im(grad_cols, in_, in.height, in.width, kernel_, stride_, pad_);
  }

  void parameters(ParameterList<Scalar>& list, const std::string& prefix) {
    list.push_back({prefix + ".weight", &weight});
    list.push_back({prefix + ".bias", &bias});
  }

 private:
  bool pointwise() const { return kernel_ == 1 && stride_ == 1 && pad_ == 0; }

  int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;

 public:
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
};

template <typename Scalar>
class Linear {
 public:
  Linear() = default;
  Linear(int in_features, int out_features)
      : in_(in_features), out_(out_features), weight(out_features, in_features), bias(out_features, 1) {}

  void init(std::mt19937_64& rng, double gain = 1.0) {
    fill_normal(weight, gain * std::sqrt(2.0 / in_), rng);
    bias.value.setZero();
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  Vector<Scalar> forward(const Vector<Scalar>& x) const {
    if (x.size() != in_)
      throw ValidationError("linear: expected input of length " + std::to_string(in_) + ", got " +
                            std::to_string(x.size()));
    return weight.value * x + bias.value.col(0);
  }

  Vector<Scalar> backward(const Vector<Scalar>& x, const Vector<Scalar>& grad_out) {
    weight.grad.noalias() += grad_out * x.transpose();
    bias.grad.col(0) += grad_out;
    return weight.value.transpose() * grad_out;
  }

  void parameters(ParameterList<Scalar>& list, const std::string& prefix) {
    list.push_back({prefix + ".weight", &weight});
    list.push_back({prefix + ".bias", &bias});
  }

 private:
  int in_ = 0, out_ = 0;

 public:
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
};

// Activations. Backward passes take the forward output, which is enough for all three.

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

template <typename Derived, typename GradDerived>
auto relu_backward(const Eigen::MatrixBase<Derived>& out, const Eigen::MatrixBase<GradDerived>& grad) {
  using S = typename Derived::Scalar;
  return (out.array() > S(0)).select(grad.array(), S(0)).matrix();
}

template <typename Scalar>
  requires std::is_floating_point_v<Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([](S v) { return sigmoid(v); });
}

template <typename Derived, typename GradDerived>
auto sigmoid_backward(const Eigen::MatrixBase<Derived>& out, const Eigen::MatrixBase<GradDerived>& grad) {
  using S = typename Derived::Scalar;
  return (grad.array() * out.array() * (S(1) - out.array())).matrix();
}

template <typename Scalar>
constexpr Scalar kLeakySlope = Scalar(0.2);

template <typename Derived>
auto leaky_relu(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return (x.array() > S(0)).select(x.array(), x.array() * kLeakySlope<S>).matrix();
}

template <typename Derived, typename GradDerived>
auto leaky_relu_backward(const Eigen::MatrixBase<Derived>& out, const Eigen::MatrixBase<GradDerived>& grad) {
  using S = typename Derived::Scalar;
  return (out.array() > S(0)).select(grad.array(), grad.array() * kLeakySlope<S>).matrix();
}

/// (C·r², H, W) → (C, H·r, W·r); out[c, y·r+i, x·r+j] = in[c·r² + i·r + j, y, x].
template <typename Scalar>
FeatureMaps<Scalar> pixel_shuffle(const FeatureMaps<Scalar>& in, int r) {
  require(in.channels() % (r * r) == 0, "pixel_shuffle: channels not divisible by r^2");
  const int c_out = in.channels() / (r * r);
  FeatureMaps<Scalar> out(c_out, in.height * r, in.width * r);
  for (int c = 0; c < c_out; ++c)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        const int src_c = c * r * r + i * r + j;
        for (int y = 0; y < in.height; ++y)
          for (int x = 0; x < in.width; ++x) out.at(c, y * r + i, x * r + j) = in.at(src_c, y, x);
      }
  return out;
}

template <typename Scalar>
FeatureMaps<Scalar> pixel_unshuffle(const FeatureMaps<Scalar>& in, int r) {
  const int h = in.height / r, w = in.width / r;
  FeatureMaps<Scalar> out(in.channels() * r * r, h, w);
  for (int c = 0; c < in.channels(); ++c)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        const int dst_c = c * r * r + i * r + j;
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) out.at(dst_c, y, x) = in.at(c, y * r + i, x * r + j);
      }
  return out;
}

/// conv3×3 → ReLU → conv3×3, plus identity skip.
template <typename Scalar>
class ResidualBlock {
 public:
  struct Trace {
    FeatureMaps<Scalar> input;
    FeatureMaps<Scalar> hidden;  // post-ReLU
  };

  ResidualBlock() = default;
  explicit ResidualBlock(int channels) : conv1_(channels, channels, 3), conv2_(channels, channels, 3) {}

  void init(std::mt19937_64& rng) {
    conv1_.init(rng);
    conv2_.init(rng, 0.1);
  }

  FeatureMaps<Scalar> forward(const FeatureMaps<Scalar>& x, Trace* trace = nullptr) const {
    FeatureMaps<Scalar> h = conv1_.forward(x);
    h.data = relu(h.data);
    FeatureMaps<Scalar> y = conv2_.forward(h);
    y.data += x.data;
    if (trace) {
      trace->input = x;
      trace->hidden = std::move(h);
    }
    return y;
  }

  FeatureMaps<Scalar> backward(const Trace& trace, const FeatureMaps<Scalar>& grad_out) {
    FeatureMaps<Scalar> g_hidden = conv2_.backward(trace.hidden, grad_out);
    g_hidden.data = relu_backward(trace.hidden.data, g_hidden.data);
    FeatureMaps<Scalar> g_in = conv1_.backward(trace.input, g_hidden);
    g_in.data += grad_out.data;
    return g_in;
  }

  void parameters(ParameterList<Scalar>& list, const std::string& prefix) {
    conv1_.parameters(list, prefix + ".conv1");
    conv2_.parameters(list, prefix + ".conv2");
  }

  Conv2d<Scalar>& conv1() { return conv1_; }
  Conv2d<Scalar>& conv2() { return conv2_; }

 private:
  Conv2d<Scalar> conv1_, conv2_;
};

/// ×2 sub-pixel upsampling: conv3×3 to 4·out channels → pixel shuffle → ReLU.
template <typename Scalar>
class UpsampleBlock {
 public:
  struct Trace {
    FeatureMaps<Scalar> input;
    FeatureMaps<Scalar> output;
  };

  UpsampleBlock() = default;
  UpsampleBlock(int in_channels, int out_channels) : conv_(in_channels, out_channels * 4, 3) {}

  void init(std::mt19937_64& rng) { conv_.init(rng); }

  FeatureMaps<Scalar> forward(const FeatureMaps<Scalar>& x, Trace* trace = nullptr) const {
    FeatureMaps<Scalar> y = pixel_shuffle(conv_.forward(x), 2);
    y.data = relu(y.data);
    if (trace) {
      trace->input = x;
      trace->output = y;
    }
    return y;
  }

  FeatureMaps<Scalar> backward(const Trace& trace, const FeatureMaps<Scalar>& grad_out) {
    FeatureMaps<Scalar> g = grad_out;
    g.data = relu_backward(trace.output.data, grad_out.data);
    return conv_.backward(trace.input, pixel_unshuffle(g, 2));
  }

  void parameters(ParameterList<Scalar>& list, const std::string& prefix) {
    conv_.parameters(list, prefix + ".conv");
  }

  Conv2d<Scalar>& conv() { return conv_; }

 private:
  Conv2d<Scalar> conv_;
};

/// Inverted dropout; the mask is kept so backward replays it.
template <typename Scalar>
struct DropoutMask {
  Vector<Scalar> scale;  // 0 or 1/(1-rate); empty in eval mode
};

template <typename Scalar>
Vector<Scalar> dropout(const Vector<Scalar>& x, double rate, std::mt19937_64* rng, DropoutMask<Scalar>* mask) {
  if (rng == nullptr || rate <= 0.0) {
    if (mask) mask->scale.resize(0);
    return x;
  }
  std::bernoulli_distribution keep(1.0 - rate);
  Vector<Scalar> scale(x.size());
  const Scalar kept = static_cast<Scalar>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < x.size(); ++i) scale[i] = keep(*rng) ? kept : Scalar(0);
  Vector<Scalar> y = x.cwiseProduct(scale);
  if (mask) mask->scale = std::move(scale);
  return y;
}

template <typename Scalar>
Vector<Scalar> dropout_backward(const DropoutMask<Scalar>& mask, const Vector<Scalar>& grad) {
  if (mask.scale.size() == 0) return grad;
  return grad.cwiseProduct(mask.scale);
}

}  // namespace mmsd::nn
