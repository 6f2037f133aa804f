#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mmsd/dataset.hpp"
#include "mmsd/errors.hpp"

namespace mmsd {

namespace fs = std::filesystem;

const std::array<std::string, kActionUnits> kActionUnitColumns{
    "AU01_r", "AU02_r", "AU04_r", "AU05_r", "AU06_r", "AU07_r", "AU09_r", "AU10_r", "AU12_r",
    "AU14_r", "AU15_r", "AU17_r", "AU20_r", "AU23_r", "AU25_r", "AU26_r", "AU45_r"};

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EnvironmentError("cannot write " + path.string());
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

// ---- raw video ----------------------------------------------------------------

RawVideo read_raw_video(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  int width = 0, height = 0, count = 0;
  double fps = 0;
  hs >> magic >> width >> height >> count >> fps;
  if (magic != "MMSDRGB1" || !hs || width <= 0 || height <= 0 || count < 0 || fps <= 0)
    throw FormatError(path.string() + ": not an MMSDRGB1 raw video");
  RawVideo video;
  video.fps = fps;
  video.frames.reserve(count);
  for (int i = 0; i < count; ++i) {
    Frame f(height, width);
    in.read(reinterpret_cast<char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
    if (!in) throw FormatError(path.string() + ": truncated at frame " + std::to_string(i));
    video.frames.push_back(std::move(f));
  }
  return video;
}

void write_raw_video(const fs::path& path, const RawVideo& video) {
  const int width = video.frames.empty() ? 1 : video.frames.front().width;
  const int height = video.frames.empty() ? 1 : video.frames.front().height;
  std::ofstream out = open_out(path);
  char fps[64];
  std::snprintf(fps, sizeof(fps), "%.17g", video.fps);
  out << "MMSDRGB1 " << width << ' ' << height << ' ' << video.frames.size() << ' ' << fps << '\n';
  for (const Frame& f : video.frames) {
    require(f.width == width && f.height == height, "write_raw_video: frames differ in size");
    out.write(reinterpret_cast<const char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
  }
  if (!out) throw EnvironmentError("failed writing " + path.string());
}

// ---- WAV ------------------------------------------------------------------------

Audio read_wav(const fs::path& path) {
  std::ifstream in = open_in(path);
  char riff[4], wave[4];
  in.read(riff, 4);
  read_le<std::uint32_t>(in);
  in.read(wave, 4);
  if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
    throw FormatError(path.string() + ": not a RIFF/WAVE file");
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (in) {
    char id[4];
    in.read(id, 4);
    const auto size = read_le<std::uint32_t>(in);
    if (!in) break;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);
      read_le<std::uint16_t>(in);
      bits = read_le<std::uint16_t>(in);
      in.seekg(size - 16 + (size & 1), std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt || channels == 0) throw FormatError(path.string() + ": data chunk before fmt chunk");
      const bool pcm16 = format == 1 && bits == 16;
      const bool float32 = format == 3 && bits == 32;
      if (!pcm16 && !float32) throw FormatError(path.string() + ": only 16-bit PCM or 32-bit float WAV supported");
      const std::size_t bytes_per = bits / 8;
      const std::size_t frames = size / (bytes_per * channels);
      Audio audio;
      audio.rate = static_cast<int>(rate);
      audio.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0;
        for (int c = 0; c < channels; ++c)
          acc += pcm16 ? read_le<std::int16_t>(in) / 32768.0 : static_cast<double>(read_le<float>(in));
        audio.samples[i] = static_cast<float>(acc / channels);
      }
      if (!in) throw FormatError(path.string() + ": truncated data chunk");
      return audio;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  throw FormatError(path.string() + ": no data chunk");
}

void write_wav(const fs::path& path, const Audio& audio) {
  std::ofstream out = open_out(path);
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.rate));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.rate * 2));
  write_le<std::uint16_t>(out, 2);
  write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);
  for (float s : audio.samples) {
    const double clamped = std::clamp(static_cast<double>(s), -1.0, 32767.0 / 32768.0);
    write_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(clamped * 32768.0)));
  }
  if (!out) throw EnvironmentError("failed writing " + path.string());
}

Audio resample(const Audio& audio, int target_rate) {
  require(target_rate > 0 && audio.rate > 0, "resample: rates must be positive");
  if (audio.rate == target_rate) return audio;
  constexpr int kZeroCrossings = 16;
  const double ratio = static_cast<double>(target_rate) / audio.rate;
  const double cutoff = std::min(1.0, ratio);  // relative to the input Nyquist
  const double half_width = kZeroCrossings / cutoff;
  const auto n_out = static_cast<std::size_t>(std::floor(audio.samples.size() * ratio));
  Audio out;
  out.rate = target_rate;
  out.samples.resize(n_out);
  const long n_in = static_cast<long>(audio.samples.size());
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = i / ratio;
    const long lo = static_cast<long>(std::ceil(pos - half_width));
    const long hi = static_cast<long>(std::floor(pos + half_width));
    double acc = 0;
    for (long j = std::max(0L, lo); j <= std::min(n_in - 1, hi); ++j) {
      const double d = (pos - j) * cutoff;
      const double sinc = d == 0 ? 1.0 : std::sin(M_PI * d) / (M_PI * d);
      const double hann = 0.5 + 0.5 * std::cos(M_PI * (pos - j) / half_width);
      acc += audio.samples[j] * sinc * hann * cutoff;
    }
    out.samples[i] = static_cast<float>(acc);
  }
  return out;
}

// ---- AU tables ----------------------------------------------------------------------

std::vector<AUVector> load_au_file(const fs::path& path, AuLoadStats* stats) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty AU file");
  const auto header = split_csv(line);
  std::array<std::size_t, kActionUnits> columns{};
  std::string missing;
  for (int k = 0; k < kActionUnits; ++k) {
    const auto it = std::find(header.begin(), header.end(), kActionUnitColumns[k]);
    if (it == header.end()) {
      missing += (missing.empty() ? "" : ", ") + kActionUnitColumns[k];
    } else {
      columns[k] = static_cast<std::size_t>(it - header.begin());
    }
  }
  if (!missing.empty()) throw FormatError(path.string() + ": missing AU columns: " + missing);
  AuLoadStats local;
  std::vector<AUVector> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    AUVector v;
    for (int k = 0; k < kActionUnits; ++k) {
      if (columns[k] >= cells.size())
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": row too short");
      double value = 0;
      try {
        value = std::stod(cells[columns[k]]);
      } catch (const std::exception&) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cells[columns[k]] + "'");
      }
      if (!std::isfinite(value))
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": non-finite AU value");
      if (value < 0.0 || value > 5.0) {
        ++local.clamped;
        value = std::clamp(value, 0.0, 5.0);
      }
      v[k] = value;
    }
    rows.push_back(v);
  }
  local.rows = static_cast<int>(rows.size());
  if (stats) *stats = local;
  return rows;
}

void write_au_file(const fs::path& path, const std::vector<AUVector>& rows) {
  std::ofstream out = open_out(path);
  out << "frame";
  for (const auto& name : kActionUnitColumns) out << ", " << name;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << i + 1;
    for (int k = 0; k < kActionUnits; ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", rows[i][k]);
      out << ", " << buf;
    }
    out << '\n';
  }
}

// ---- face boxes ----------------------------------------------------------------------

std::vector<Rect> load_face_boxes(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::vector<Rect> boxes;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 5) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected t,x,y,w,h");
    try {
      const int t = std::stoi(cells[0]);
      if (t != static_cast<int>(boxes.size()))
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": frame index out of order");
      boxes.push_back({std::stoi(cells[1]), std::stoi(cells[2]), std::stoi(cells[3]), std::stoi(cells[4])});
    } catch (const std::invalid_argument&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad integer");
    }
  }
  return boxes;
}

void write_face_boxes(const fs::path& path, const std::vector<Rect>& boxes) {
  std::ofstream out = open_out(path);
  for (std::size_t t = 0; t < boxes.size(); ++t)
    out << t << ',' << boxes[t].x << ',' << boxes[t].y << ',' << boxes[t].width << ',' << boxes[t].height << '\n';
}

}  // namespace mmsd
