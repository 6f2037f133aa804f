#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "mmsd/dataset.hpp"

namespace mmsd {

/// How the H.264 round trip is run. Templates expand {exe}, {input},
/// {output}, {width}, {height}, {fps} and {crf}; paths are shell-quoted.
struct EncoderConfig {
  std::string executable = "ffmpeg";
  std::string encode_template =
      "{exe} -nostdin -hide_banner -loglevel error -y -f rawvideo -pix_fmt rgb24 -s {width}x{height} "
      "-r {fps} -i {input} -c:v libx264 -preset medium -crf {crf} -pix_fmt yuv420p -threads 1 -f h264 {output}";
  std::string decode_template =
      "{exe} -nostdin -hide_banner -loglevel error -y -threads 1 -f h264 -i {input} -fps_mode passthrough "
      "-f rawvideo -pix_fmt rgb24 {output}";
  /// When false, frames are only downsampled (no codec); the clip's crf is left empty.
  bool codec = true;
  /// Permits CRF values outside {15, 32, 40}.
  bool allow_nonstandard_crf = false;
};

bool is_protocol_crf(int crf);

/// PATH lookup (or the path itself when it contains a slash).
std::optional<std::filesystem::path> find_executable(const std::string& name);

/// Box-filter downsampling by an integer factor.
Frame downsample(const Frame& frame, int scale);

struct CodecResult {
  std::vector<Frame> frames;
  std::size_t bitstream_bytes = 0;
};

/// Encodes then decodes frames through the external encoder.
CodecResult codec_round_trip(const std::vector<Frame>& frames, double fps, int crf, const EncoderConfig& encoder);

/// lq = decode(encode(downsample(frames, scale), crf)); MFCC rows are
/// extracted from the clip audio, one per frame.
DegradedClip degrade_clip(const SourceClip& src, int crf, int scale, const EncoderConfig& encoder);

}  // namespace mmsd
