#pragma once

#include <array>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Core>

#include "mmsd/config.hpp"

namespace mmsd {

/// The eight emotion classes, in index order.
inline constexpr std::array<std::string_view, 8> kEmotionTypes{
    "neutral", "calm", "happy", "sad", "angry", "fearful", "disgust", "surprised"};

/// One of 15 emotion states: neutral (no intensity) plus 7 classes × {normal, strong}.
/// Index layout: 0 = neutral; class k ≥ 1 maps to 2k-1 (normal) and 2k (strong).
class EmotionState {
 public:
  explicit EmotionState(int index);

  int index() const { return index_; }
  const std::string& type() const;
  std::string intensity() const;
  /// "neutral", "happy-normal", "happy-strong", ...
  std::string name() const;

  template <typename Scalar>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> onehot() const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(kEmotionStates);
    v[index_] = Scalar(1);
    return v;
  }

  bool operator==(const EmotionState& other) const { return index_ == other.index_; }

 private:
  int index_;
};

EmotionState encode_emotion(std::string_view type, std::string_view intensity);
std::pair<std::string, std::string> decode_emotion(const EmotionState& state);

/// Parses a state name as produced by EmotionState::name().
EmotionState emotion_from_name(std::string_view name);
/// All 15 names, comma separated, for error messages.
std::string emotion_state_names();

}  // namespace mmsd
