#include "mmsd/degrade.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "mmsd/errors.hpp"
#include "mmsd/mfcc.hpp"

namespace mmsd {

namespace fs = std::filesystem;

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

std::string expand(std::string tpl, const std::vector<std::pair<std::string, std::string>>& vars) {
  for (const auto& [key, value] : vars) {
    const std::string token = "{" + key + "}";
    for (auto pos = tpl.find(token); pos != std::string::npos; pos = tpl.find(token, pos + value.size()))
      tpl.replace(pos, token.size(), value);
  }
  return tpl;
}

/// Scratch directory removed on scope exit.
class ScratchDir {
 public:
  ScratchDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("mmsd-codec-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void run(const std::string& command, const std::string& what) {
  const int status = std::system(command.c_str());
  if (status != 0) throw std::runtime_error(what + " failed (status " + std::to_string(status) + "): " + command);
}

}  // namespace

bool is_protocol_crf(int crf) { return crf == 15 || crf == 32 || crf == 40; }

std::optional<fs::path> find_executable(const std::string& name) {
  if (name.find('/') != std::string::npos) {
    if (::access(name.c_str(), X_OK) == 0) return fs::path(name);
    return std::nullopt;
  }
  const char* env = std::getenv("PATH");
  std::stringstream ss(env ? env : "");
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (dir.empty()) continue;
    const fs::path candidate = fs::path(dir) / name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  return std::nullopt;
}

Frame downsample(const Frame& frame, int scale) {
  require(scale >= 1, "downsample: scale must be >= 1");
  if (frame.height % scale != 0 || frame.width % scale != 0)
    throw ValidationError("downsample: frame " + std::to_string(frame.height) + "x" + std::to_string(frame.width) +
                          " not divisible by scale " + std::to_string(scale));
  Frame out(frame.height / scale, frame.width / scale);
  const int area = scale * scale;
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 3; ++c) {
        int acc = 0;
        for (int dy = 0; dy < scale; ++dy)
          for (int dx = 0; dx < scale; ++dx) acc += frame.at(y * scale + dy, x * scale + dx, c);
        out.at(y, x, c) = static_cast<std::uint8_t>((acc + area / 2) / area);
      }
  return out;
}

CodecResult codec_round_trip(const std::vector<Frame>& frames, double fps, int crf, const EncoderConfig& encoder) {
  require(!frames.empty(), "codec: no frames");
  const auto exe = find_executable(encoder.executable);
  if (!exe)
    throw EnvironmentError("video encoder executable '" + encoder.executable +
                           "' not found on PATH (required for H.264 degradation)");
  ScratchDir scratch;
  const fs::path raw_in = scratch.path() / "in.rgb";
  const fs::path bitstream = scratch.path() / "out.h264";
  const fs::path raw_out = scratch.path() / "decoded.rgb";
  {
    std::ofstream out(raw_in, std::ios::binary);
    for (const Frame& f : frames)
      out.write(reinterpret_cast<const char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
  }
  const int w = frames.front().width, h = frames.front().height;
  char fps_text[64];
  std::snprintf(fps_text, sizeof(fps_text), "%.17g", fps);
  const std::vector<std::pair<std::string, std::string>> common{
      {"exe", shell_quote(exe->string())}, {"width", std::to_string(w)}, {"height", std::to_string(h)},
      {"fps", fps_text}, {"crf", std::to_string(crf)}};
  auto vars = common;
  vars.push_back({"input", shell_quote(raw_in.string())});
  vars.push_back({"output", shell_quote(bitstream.string())});
  run(expand(encoder.encode_template, vars), "encode");
  vars = common;
  vars.push_back({"input", shell_quote(bitstream.string())});
  vars.push_back({"output", shell_quote(raw_out.string())});
  run(expand(encoder.decode_template, vars), "decode");

  CodecResult result;
  result.bitstream_bytes = fs::file_size(bitstream);
  std::ifstream in(raw_out, std::ios::binary);
  const std::size_t frame_bytes = static_cast<std::size_t>(w) * h * 3;
  const std::size_t decoded = fs::file_size(raw_out) / frame_bytes;
  if (decoded != frames.size())
    throw std::runtime_error("codec round trip returned " + std::to_string(decoded) + " frames, expected " +
                             std::to_string(frames.size()));
  for (std::size_t i = 0; i < decoded; ++i) {
    Frame f(h, w);
    in.read(reinterpret_cast<char*>(f.rgb.data()), static_cast<std::streamsize>(frame_bytes));
    result.frames.push_back(std::move(f));
  }
  return result;
}

DegradedClip degrade_clip(const SourceClip& src, int crf, int scale, const EncoderConfig& encoder) {
  require(!src.frames.empty(), "degrade_clip: clip has no frames");
  if (encoder.codec && !encoder.allow_nonstandard_crf && !is_protocol_crf(crf))
    throw ValidationError("degrade_clip: CRF " + std::to_string(crf) +
                          " is not one of 15, 32, 40 (enable nonstandard CRFs to override)");
  require(encoder.codec ? (crf >= 0 && crf <= 51) : true, "degrade_clip: CRF must be in [0, 51]");
  DegradedClip out;
  out.id = src.id;
  out.hq_frames = src.frames;
  out.audio = src.audio;
  out.fps = src.fps;
  out.emotion = src.emotion;
  out.au_targets = src.au_targets;
  out.face_boxes = src.face_boxes;
  std::vector<Frame> small;
  small.reserve(src.frames.size());
  for (const Frame& f : src.frames) small.push_back(downsample(f, scale));
  if (encoder.codec) {
    CodecResult coded = codec_round_trip(small, src.fps, crf, encoder);
    out.lq_frames = std::move(coded.frames);
    out.crf = crf;
    out.bitrate_kbps = coded.bitstream_bytes * 8.0 / (src.frames.size() / src.fps) / 1000.0;
  } else {
    out.lq_frames = std::move(small);
  }
  out.mfcc = extract_mfcc(src.audio, src.fps, static_cast<int>(src.frames.size()));
  return out;
}

}  // namespace mmsd
