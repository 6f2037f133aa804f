#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "mmsd/errors.hpp"

namespace mmsd {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Which stage of the network produced a stack of maps.
enum class MapTag { kNone, kVideo, kAudio, kAudioVideo, kTrimodal };

inline const char* tag_name(MapTag tag) {
  switch (tag) {
    case MapTag::kVideo: return "f_V";
    case MapTag::kAudio: return "f_A";
    case MapTag::kAudioVideo: return "f_VA";
    case MapTag::kTrimodal: return "f_VAE";
    default: return "untagged";
  }
}

/// Channel-major stack of 2D maps. Row c of `data` is channel c laid out
/// row by row, so pixel (y, x) lives in column y * width + x.
template <typename Scalar>
struct FeatureMaps {
  RowMatrix<Scalar> data;
  int height = 0;
  int width = 0;
  MapTag tag = MapTag::kNone;

  FeatureMaps() = default;
  FeatureMaps(int channels, int h, int w, MapTag t = MapTag::kNone)
      : data(RowMatrix<Scalar>::Zero(channels, static_cast<Eigen::Index>(h) * w)),
        height(h), width(w), tag(t) {}

  static FeatureMaps zeros(int channels, int h, int w) { return FeatureMaps(channels, h, w); }

  int channels() const { return static_cast<int>(data.rows()); }
  int pixels() const { return height * width; }

  Scalar& at(int c, int y, int x) { return data(c, static_cast<Eigen::Index>(y) * width + x); }
  Scalar at(int c, int y, int x) const { return data(c, static_cast<Eigen::Index>(y) * width + x); }

  bool same_shape(const FeatureMaps& other) const {
    return channels() == other.channels() && height == other.height && width == other.width;
  }
  bool all_finite() const { return data.allFinite(); }

  std::string shape_string() const {
    return "(" + std::to_string(channels()) + "," + std::to_string(height) + "," +
           std::to_string(width) + ")";
  }

  template <typename Other>
  FeatureMaps<Other> cast() const {
    FeatureMaps<Other> out;
    out.data = data.template cast<Other>();
    out.height = height;
    out.width = width;
    out.tag = tag;
    return out;
  }
};

template <typename Scalar>
void require_shape(const FeatureMaps<Scalar>& maps, int channels, int h, int w, const char* what) {
  if (maps.channels() != channels || maps.height != h || maps.width != w) {
    throw ValidationError(std::string(what) + ": expected shape (" + std::to_string(channels) + "," +
                          std::to_string(h) + "," + std::to_string(w) + "), got " +
                          maps.shape_string());
  }
}

template <typename Scalar>
void require_tag(const FeatureMaps<Scalar>& maps, MapTag tag, const char* what) {
  if (maps.tag != tag) {
    throw ValidationError(std::string(what) + ": expected maps tagged " + tag_name(tag) +
                          ", got " + tag_name(maps.tag));
  }
}

/// Stacks channels of `a` on top of channels of `b`.
template <typename Scalar>
FeatureMaps<Scalar> concat_channels(const FeatureMaps<Scalar>& a, const FeatureMaps<Scalar>& b) {
  require(a.height == b.height && a.width == b.width, "concat_channels: spatial mismatch");
  FeatureMaps<Scalar> out(a.channels() + b.channels(), a.height, a.width);
  out.data.topRows(a.channels()) = a.data;
  out.data.bottomRows(b.channels()) = b.data;
  return out;
}

/// A vector replicated over every pixel: (len(v), h, w).
template <typename Scalar>
FeatureMaps<Scalar> tile(const Vector<Scalar>& v, int h, int w) {
  FeatureMaps<Scalar> out(static_cast<int>(v.size()), h, w);
  out.data.colwise() = v;
  return out;
}

template <typename Scalar>
Vector<Scalar> global_average_pool(const FeatureMaps<Scalar>& maps) {
  return maps.data.rowwise().mean();
}

/// Inverse of global_average_pool w.r.t. its input.
template <typename Scalar>
FeatureMaps<Scalar> global_average_pool_backward(const Vector<Scalar>& grad, int h, int w) {
  FeatureMaps<Scalar> out = tile<Scalar>(grad, h, w);
  out.data /= static_cast<Scalar>(h * w);
  return out;
}

}  // namespace mmsd
