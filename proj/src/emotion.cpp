#include "mmsd/emotion.hpp"

#include <algorithm>

#include "mmsd/errors.hpp"

namespace mmsd {

namespace {

int type_index(std::string_view type) {
  const auto it = std::find(kEmotionTypes.begin(), kEmotionTypes.end(), type);
  if (it == kEmotionTypes.end())
    throw ValidationError("unknown emotion type '" + std::string(type) + "'");
  return static_cast<int>(it - kEmotionTypes.begin());
}

}  // namespace

EmotionState::EmotionState(int index) : index_(index) {
  if (index < 0 || index >= kEmotionStates)
    throw ValidationError("emotion index " + std::to_string(index) + " outside [0, 15)");
}

const std::string& EmotionState::type() const {
  static const std::array<std::string, 8> names = [] {
    std::array<std::string, 8> out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::string(kEmotionTypes[i]);
    return out;
  }();
  return names[(index_ + 1) / 2];
}

std::string EmotionState::intensity() const {
  if (index_ == 0) return "normal";
  return index_ % 2 == 1 ? "normal" : "strong";
}

std::string EmotionState::name() const {
  if (index_ == 0) return "neutral";
  return type() + "-" + intensity();
}

EmotionState encode_emotion(std::string_view type, std::string_view intensity) {
  const int t = type_index(type);
  if (intensity != "normal" && intensity != "strong")
    throw ValidationError("unknown emotion intensity '" + std::string(intensity) + "'");
  if (t == 0) {
    if (intensity == "strong") throw ValidationError("neutral emotion has no strong intensity");
    return EmotionState(0);
  }
  return EmotionState(intensity == "normal" ? 2 * t - 1 : 2 * t);
}

std::pair<std::string, std::string> decode_emotion(const EmotionState& state) {
  return {state.type(), state.intensity()};
}

EmotionState emotion_from_name(std::string_view name) {
  for (int i = 0; i < kEmotionStates; ++i) {
    EmotionState s(i);
    if (s.name() == name) return s;
  }
  throw ValidationError("unknown emotion state '" + std::string(name) + "'; expected one of: " +
                        emotion_state_names());
}

std::string emotion_state_names() {
  std::string out;
  for (int i = 0; i < kEmotionStates; ++i) {
    if (i) out += ", ";
    out += EmotionState(i).name();
  }
  return out;
}

}  // namespace mmsd
