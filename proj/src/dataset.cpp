#include "mmsd/dataset.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "mmsd/errors.hpp"

namespace mmsd {

namespace fs = std::filesystem;

void check_source_clip(const SourceClip& clip, std::optional<std::pair<int, int>> expected) {
  const std::string where = "clip '" + clip.id + "': ";
  require(!clip.frames.empty(), where + "no frames");
  require(clip.fps > 0, where + "fps must be positive");
  require(clip.au_targets.size() == clip.frames.size(),
          where + "AU rows (" + std::to_string(clip.au_targets.size()) + ") != frames (" +
              std::to_string(clip.frames.size()) + ")");
  require(clip.face_boxes.size() == clip.frames.size(),
          where + "face boxes (" + std::to_string(clip.face_boxes.size()) + ") != frames (" +
              std::to_string(clip.frames.size()) + ")");
  const int h = clip.frames.front().height, w = clip.frames.front().width;
  if (expected)
    require(h == expected->first && w == expected->second,
            where + "frames are " + std::to_string(h) + "x" + std::to_string(w) + ", expected " +
                std::to_string(expected->first) + "x" + std::to_string(expected->second));
  for (const Frame& f : clip.frames)
    require(f.height == h && f.width == w && f.rgb.size() == static_cast<std::size_t>(h) * w * 3,
            where + "frames differ in size");
  require(clip.audio.duration() + 1e-9 >= clip.frames.size() / clip.fps, where + "audio shorter than video");
  for (const AUVector& au : clip.au_targets)
    require(au.allFinite() && au.minCoeff() >= 0.0 && au.maxCoeff() <= 5.0, where + "AU value outside [0, 5]");
  for (const Rect& r : clip.face_boxes)
    require(r.width > 0 && r.height > 0 && r.x >= 0 && r.y >= 0 && r.x + r.width <= w && r.y + r.height <= h,
            where + "face box outside frame");
}

std::vector<int> window_indices(int t, int n, int length) {
  std::vector<int> idx;
  idx.reserve(2 * n + 1);
  for (int d = -n; d <= n; ++d) idx.push_back(std::clamp(t + d, 0, length - 1));
  return idx;
}

SampleWindow window_at(const DegradedClip& clip, int t, int n) {
  require(n >= 0, "windows: n must be >= 0");
  const int length = static_cast<int>(clip.lq_frames.size());
  require(t >= 0 && t < length, "windows: frame index out of range");
  require(clip.mfcc.rows() == length, "windows: MFCC rows must match frame count");
  SampleWindow w;
  w.clip_id = clip.id;
  w.t = t;
  const auto idx = window_indices(t, n, length);
  w.mfcc_window.resize(static_cast<Eigen::Index>(idx.size()), clip.mfcc.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    w.lq_window.push_back(clip.lq_frames[idx[i]]);
    w.mfcc_window.row(static_cast<Eigen::Index>(i)) = clip.mfcc.row(idx[i]);
  }
  w.emotion = clip.emotion;
  w.au_target = clip.au_targets.at(t);
  w.hq_center = clip.hq_frames.at(t);
  w.face_box = clip.face_boxes.at(t);
  return w;
}

std::vector<SampleWindow> windows(const DegradedClip& clip, int n) {
  std::vector<SampleWindow> out;
  for (int t = 0; t < static_cast<int>(clip.lq_frames.size()); ++t) out.push_back(window_at(clip, t, n));
  return out;
}

std::vector<ManifestRecord> DatasetManifest::split(const std::string& tag) const {
  std::vector<ManifestRecord> out;
  for (const auto& r : records)
    if (r.split == tag) out.push_back(r);
  return out;
}

DatasetManifest load_manifest(const fs::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  DatasetManifest manifest;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + e.what());
    }
    static const std::set<std::string> known{"id", "hq_video", "audio", "au_file", "face_boxes", "emotion_index", "split"};
    for (const auto& [key, value] : j.items())
      if (!known.count(key)) throw FormatError(where + "unknown field '" + key + "'");
    for (const auto& key : known)
      if (!j.contains(key)) throw FormatError(where + "missing field '" + key + "'");
    ManifestRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.hq_video = resolve(j.at("hq_video").get<std::string>());
      r.audio = resolve(j.at("audio").get<std::string>());
      r.au_file = resolve(j.at("au_file").get<std::string>());
      r.face_boxes = resolve(j.at("face_boxes").get<std::string>());
      r.emotion_index = j.at("emotion_index").get<int>();
      r.split = j.at("split").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + e.what());
    }
    EmotionState check(r.emotion_index);
    (void)check;
    if (r.split != "train" && r.split != "val") throw FormatError(where + "split must be train or val");
    if (!ids.insert(r.id).second) throw FormatError(where + "duplicate clip id '" + r.id + "'");
    if (check_files)
      for (const auto* p : {&r.hq_video, &r.audio, &r.au_file, &r.face_boxes})
        if (!fs::exists(*p)) throw ValidationError(where + "missing file " + p->string());
    manifest.records.push_back(std::move(r));
  }
  return manifest;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw EnvironmentError("cannot write " + path.string());
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) {
    const fs::path r = base.empty() ? p : p.lexically_relative(base);
    return (r.empty() ? p : r).generic_string();
  };
  for (const auto& r : manifest.records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["hq_video"] = rel(r.hq_video);
    j["audio"] = rel(r.audio);
    j["au_file"] = rel(r.au_file);
    j["face_boxes"] = rel(r.face_boxes);
    j["emotion_index"] = r.emotion_index;
    j["split"] = r.split;
    out << j.dump() << '\n';
  }
}

SourceClip load_source_clip(const ManifestRecord& record) {
  SourceClip clip;
  clip.id = record.id;
  RawVideo video = read_raw_video(record.hq_video);
  clip.frames = std::move(video.frames);
  clip.fps = video.fps;
  clip.audio = resample(read_wav(record.audio), kAudioRate);
  clip.emotion = EmotionState(record.emotion_index);
  clip.au_targets = load_au_file(record.au_file);
  clip.face_boxes = load_face_boxes(record.face_boxes);
  check_source_clip(clip);
  return clip;
}

}  // namespace mmsd
