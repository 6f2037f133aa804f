#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mmsd/config.hpp"
#include "mmsd/emotion.hpp"
#include "mmsd/metrics.hpp"
#include "mmsd/tensor.hpp"

namespace mmsd {

/// 8-bit RGB image, interleaved row-major (h × w × 3).
struct Frame {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;

  Frame() = default;
  Frame(int h, int w) : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, 0) {}

  std::uint8_t& at(int y, int x, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool operator==(const Frame&) const = default;
};

/// (3, h, w) planes scaled to [0, 1].
template <typename Scalar>
FeatureMaps<Scalar> to_maps(const Frame& frame) {
  FeatureMaps<Scalar> out(3, frame.height, frame.width);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = static_cast<Scalar>(frame.at(y, x, c)) / Scalar(255);
  return out;
}

/// Rounds and clamps [0, 1] planes back to 8 bits.
template <typename Scalar>
Frame to_frame(const FeatureMaps<Scalar>& maps) {
  require(maps.channels() == 3, "to_frame: expected 3 channels");
  Frame out(maps.height, maps.width);
  for (int y = 0; y < maps.height; ++y)
    for (int x = 0; x < maps.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(maps.at(c, y, x)), 0.0, 1.0);
        out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  return out;
}

/// Mono waveform in [-1, 1].
struct Audio {
  int rate = 16000;
  std::vector<float> samples;
  double duration() const { return static_cast<double>(samples.size()) / rate; }
};

inline constexpr int kAudioRate = 16000;

using AUVector = Eigen::Matrix<double, kActionUnits, 1>;

/// OpenFace intensity column names of the 17 action units, in vector order.
extern const std::array<std::string, kActionUnits> kActionUnitColumns;

struct SourceClip {
  std::string id;
  std::vector<Frame> frames;
  Audio audio;
  double fps = 25.0;
  EmotionState emotion{0};
  std::vector<AUVector> au_targets;
  std::vector<Rect> face_boxes;
};

/// Throws ValidationError describing the first violated invariant.
/// When `expected` is given, frames must be exactly that height × width.
void check_source_clip(const SourceClip& clip, std::optional<std::pair<int, int>> expected = std::nullopt);

struct DegradedClip {
  std::string id;
  std::vector<Frame> lq_frames;
  std::vector<Frame> hq_frames;
  Audio audio;
  Eigen::MatrixXd mfcc;  // one row of 13 coefficients per frame
  double fps = 25.0;
  EmotionState emotion{0};
  std::vector<AUVector> au_targets;
  std::vector<Rect> face_boxes;
  std::optional<int> crf;  // empty when no codec round trip was applied
  double bitrate_kbps = 0.0;
};

struct SampleWindow {
  std::string clip_id;
  int t = 0;
  std::vector<Frame> lq_window;
  Eigen::MatrixXd mfcc_window;  // (2N+1) × 13
  EmotionState emotion{0};
  AUVector au_target = AUVector::Zero();
  Frame hq_center;
  Rect face_box;
};

/// Frame indices of the window centered on t, edge-replicated at clip ends.
std::vector<int> window_indices(int t, int n, int length);

SampleWindow window_at(const DegradedClip& clip, int t, int n);

/// One window per frame.
std::vector<SampleWindow> windows(const DegradedClip& clip, int n);

// ---- raw video container --------------------------------------------------

/// Uncompressed RGB24 frames behind a one-line text header:
/// "MMSDRGB1 <width> <height> <frames> <fps>\n".
struct RawVideo {
  std::vector<Frame> frames;
  double fps = 25.0;
};

RawVideo read_raw_video(const std::filesystem::path& path);
void write_raw_video(const std::filesystem::path& path, const RawVideo& video);

// ---- audio ----------------------------------------------------------------

/// Reads 16-bit PCM or 32-bit float WAV; channels are averaged.
Audio read_wav(const std::filesystem::path& path);
/// Writes 16-bit PCM mono.
void write_wav(const std::filesystem::path& path, const Audio& audio);
/// Band-limited (windowed sinc) resampling.
Audio resample(const Audio& audio, int target_rate);

// ---- action units and face boxes -------------------------------------------

struct AuLoadStats {
  int rows = 0;
  int clamped = 0;
};

std::vector<AUVector> load_au_file(const std::filesystem::path& path, AuLoadStats* stats = nullptr);
void write_au_file(const std::filesystem::path& path, const std::vector<AUVector>& rows);

std::vector<Rect> load_face_boxes(const std::filesystem::path& path);
void write_face_boxes(const std::filesystem::path& path, const std::vector<Rect>& boxes);

// ---- manifest ---------------------------------------------------------------

struct ManifestRecord {
  std::string id;
  std::filesystem::path hq_video;
  std::filesystem::path audio;
  std::filesystem::path au_file;
  std::filesystem::path face_boxes;
  int emotion_index = 0;
  std::string split;  // "train" or "val"
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::vector<ManifestRecord> split(const std::string& tag) const;
};

/// JSON-lines manifest; relative paths resolve against the manifest's directory.
/// When `check_files`, every referenced file must exist.
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);
/// Paths are written relative to the manifest's directory when possible.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Loads video, audio (resampled to 16 kHz), AU targets and face boxes.
SourceClip load_source_clip(const ManifestRecord& record);

// ---- synthetic fixtures -------------------------------------------------------

struct FixtureOptions {
  std::uint64_t seed = 7;
  int n_clips = 4;
  int n_frames = 12;
  int height = 288;
  int width = 480;
  double fps = 25.0;
};

/// Writes tiny deterministic talking-face clips plus manifest.jsonl into `dir`.
DatasetManifest make_fixture(const std::filesystem::path& dir, const FixtureOptions& options);

/// The in-memory clip make_fixture would write for index `i`.
SourceClip synthesize_clip(const FixtureOptions& options, int index);

}  // namespace mmsd
