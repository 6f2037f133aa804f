#include <cmath>
#include <random>

#include "mmsd/dataset.hpp"
#include "mmsd/errors.hpp"

namespace mmsd {

namespace fs = std::filesystem;

namespace {

double syllable_envelope(double t, double phase) { return 0.5 + 0.5 * std::sin(2.0 * M_PI * 3.0 * t + phase); }

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

struct ClipStyle {
  double skin[3];
  double background[3];
  double pitch_hz;
  double phase;
  double sway;
  int emotion;
  AUVector au_base;
};

ClipStyle draw_style(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ClipStyle s{};
  const double tone = 150 + 70 * u(rng);
  s.skin[0] = tone + 40;
  s.skin[1] = tone;
  s.skin[2] = tone - 30;
  for (double& c : s.background) c = 30 + 90 * u(rng);
  s.pitch_hz = 120 + 100 * u(rng);
  s.phase = 2 * M_PI * u(rng);
  s.sway = 0.5 + u(rng);
  s.emotion = static_cast<int>(u(rng) * kEmotionStates) % kEmotionStates;
  for (int k = 0; k < kActionUnits; ++k) s.au_base[k] = 3.0 * u(rng);
  return s;
}

}  // namespace

SourceClip synthesize_clip(const FixtureOptions& o, int index) {
  require(o.n_frames > 0 && o.height > 0 && o.width > 0 && o.fps > 0, "fixture: invalid options");
  std::seed_seq seq{o.seed, static_cast<std::uint64_t>(index)};
  std::mt19937_64 rng(seq);
  const ClipStyle style = draw_style(rng);
  std::normal_distribution<double> noise(0.0, 0.15);

  SourceClip clip;
  char id[32];
  std::snprintf(id, sizeof(id), "clip%03d", index);
  clip.id = id;
  clip.fps = o.fps;
  clip.emotion = EmotionState(style.emotion);

  const double h = o.height, w = o.width;
  for (int t = 0; t < o.n_frames; ++t) {
    const double time = (t + 0.5) / o.fps;
    const double mouth = syllable_envelope(time, style.phase);
    const double cx = w / 2 + 0.06 * w * std::sin(2 * M_PI * style.sway * time);
    const double cy = h / 2 + 0.03 * h * std::cos(2 * M_PI * style.sway * time);
    const double rx = 0.17 * w, ry = 0.36 * h;
    Frame f(o.height, o.width);
    for (int y = 0; y < o.height; ++y) {
      for (int x = 0; x < o.width; ++x) {
        const double nx = (x + 0.5 - cx) / rx, ny = (y + 0.5 - cy) / ry;
        double rgb[3];
        const double stripe = ((x / 6 + y / 6) % 2) ? 12.0 : -12.0;
        for (int c = 0; c < 3; ++c) rgb[c] = style.background[c] + 40.0 * y / h + stripe;
        if (nx * nx + ny * ny <= 1.0) {
          const double shade = 1.0 - 0.25 * (nx * nx + ny * ny);
          for (int c = 0; c < 3; ++c) rgb[c] = style.skin[c] * shade;
          // eyes
          for (double side : {-0.4, 0.4}) {
            const double ex = nx - side, ey = ny + 0.3;
            if (ex * ex + 1.6 * ey * ey < 0.02) rgb[0] = rgb[1] = rgb[2] = 25.0;
            else if (ex * ex + 1.6 * ey * ey < 0.045) rgb[0] = rgb[1] = rgb[2] = 235.0;
          }
          // brows
          if (std::abs(ny + 0.52) < 0.035 && std::abs(std::abs(nx) - 0.4) < 0.2)
            rgb[0] = rgb[1] = rgb[2] = 40.0;
          // mouth opens with the syllable envelope
          const double mx = nx / 0.35, my = (ny - 0.45) / (0.04 + 0.12 * mouth);
          if (mx * mx + my * my <= 1.0) {
            rgb[0] = 120.0;
            rgb[1] = 20.0;
            rgb[2] = 30.0;
          }
        }
        for (int c = 0; c < 3; ++c) f.at(y, x, c) = to_byte(rgb[c]);
      }
    }
    clip.frames.push_back(std::move(f));

    const int bx = std::max(0, static_cast<int>(std::floor(cx - rx)));
    const int by = std::max(0, static_cast<int>(std::floor(cy - ry)));
    const int bx1 = std::min(o.width, static_cast<int>(std::ceil(cx + rx)));
    const int by1 = std::min(o.height, static_cast<int>(std::ceil(cy + ry)));
    clip.face_boxes.push_back({bx, by, bx1 - bx, by1 - by});

    AUVector au;
    for (int k = 0; k < kActionUnits; ++k) au[k] = std::clamp(style.au_base[k] + noise(rng), 0.0, 5.0);
    au[14] = std::clamp(4.0 * mouth, 0.0, 5.0);  // AU25 lips part
    au[15] = std::clamp(3.0 * mouth, 0.0, 5.0);  // AU26 jaw drop
    clip.au_targets.push_back(au);
  }

  const double seconds = o.n_frames / o.fps + 0.1;
  clip.audio.rate = kAudioRate;
  clip.audio.samples.resize(static_cast<std::size_t>(std::ceil(seconds * kAudioRate)));
  for (std::size_t i = 0; i < clip.audio.samples.size(); ++i) {
    const double time = static_cast<double>(i) / kAudioRate;
    const double env = syllable_envelope(time, style.phase);
    const double voice = 0.3 * std::sin(2 * M_PI * style.pitch_hz * time) +
                         0.15 * std::sin(2 * M_PI * 2 * style.pitch_hz * time) +
                         0.05 * std::sin(2 * M_PI * 3 * style.pitch_hz * time);
    clip.audio.samples[i] = static_cast<float>(env * voice);
  }
  return clip;
}

DatasetManifest make_fixture(const fs::path& dir, const FixtureOptions& options) {
  require(options.n_clips > 0, "fixture: n_clips must be positive");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw EnvironmentError("cannot create " + dir.string() + ": " + ec.message());
  DatasetManifest manifest;
  for (int i = 0; i < options.n_clips; ++i) {
    const SourceClip clip = synthesize_clip(options, i);
    ManifestRecord r;
    r.id = clip.id;
    r.hq_video = dir / (clip.id + ".rgbv");
    r.audio = dir / (clip.id + ".wav");
    r.au_file = dir / (clip.id + ".au.csv");
    r.face_boxes = dir / (clip.id + ".boxes.csv");
    r.emotion_index = clip.emotion.index();
    r.split = (i % 4 == 3) ? "val" : "train";
    write_raw_video(r.hq_video, {clip.frames, clip.fps});
    write_wav(r.audio, clip.audio);
    write_au_file(r.au_file, clip.au_targets);
    write_face_boxes(r.face_boxes, clip.face_boxes);
    manifest.records.push_back(std::move(r));
  }
  write_manifest(dir / "manifest.jsonl", manifest);
  return manifest;
}

}  // namespace mmsd
