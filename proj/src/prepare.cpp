#include "mmsd/prepare.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mmsd {

namespace fs = std::filesystem;

namespace {

nlohmann::ordered_json file_stamp(const fs::path& p) {
  nlohmann::ordered_json j;
  j["path"] = p.string();
  j["size"] = fs::file_size(p);
  j["mtime"] = static_cast<std::int64_t>(fs::last_write_time(p).time_since_epoch().count());
  return j;
}

nlohmann::ordered_json source_stamp(const ManifestRecord& r, std::optional<int> crf, const PrepareOptions& o) {
  nlohmann::ordered_json j;
  j["hq_video"] = file_stamp(r.hq_video);
  j["audio"] = file_stamp(r.audio);
  j["crf"] = crf ? nlohmann::ordered_json(*crf) : nlohmann::ordered_json();
  j["scale"] = o.scale;
  j["codec"] = o.encoder.codec;
  if (o.encoder.codec) {
    j["encode"] = o.encoder.encode_template;
    j["decode"] = o.encoder.decode_template;
  }
  return j;
}

struct VariantPaths {
  fs::path video, mfcc, stamp;
};

VariantPaths variant_paths(const fs::path& dir, const std::string& id) {
  return {dir / (id + ".rgbv"), dir / (id + ".mfcc.csv"), dir / (id + ".json")};
}

nlohmann::json read_json_file(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw ValidationError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

bool up_to_date(const VariantPaths& paths, const nlohmann::ordered_json& stamp) {
  if (!fs::exists(paths.video) || !fs::exists(paths.mfcc) || !fs::exists(paths.stamp)) return false;
  try {
    const nlohmann::json existing = read_json_file(paths.stamp);
    return existing.contains("source") && existing["source"] == nlohmann::json(stamp);
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

std::string variant_name(std::optional<int> crf) { return crf ? "crf" + std::to_string(*crf) : "nocodec"; }

void write_mfcc(const fs::path& path, const Eigen::MatrixXd& mfcc) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  char buf[32];
  for (Eigen::Index r = 0; r < mfcc.rows(); ++r) {
    for (Eigen::Index c = 0; c < mfcc.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", mfcc(r, c));
      os << (c ? "," : "") << buf;
    }
    os << "\n";
  }
}

Eigen::MatrixXd read_mfcc(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError(path.string() + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(row.size()) != kMfccCoefficients)
      throw FormatError(path.string() + ": expected " + std::to_string(kMfccCoefficients) + " coefficients per row");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), kMfccCoefficients);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < kMfccCoefficients; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][c];
  return m;
}

PrepareSummary prepare_dataset(const fs::path& manifest, const fs::path& out_dir, const PrepareOptions& options,
                               const EventLog& log) {
  require(options.scale >= 1, "prepare-data: scale must be >= 1");
  std::vector<std::optional<int>> variants;
  if (options.encoder.codec) {
    require(!options.crfs.empty(), "prepare-data: no CRF values given");
    for (int crf : options.crfs) {
      if (!options.encoder.allow_nonstandard_crf && !is_protocol_crf(crf))
        throw ValidationError("prepare-data: CRF " + std::to_string(crf) + " is not one of 15, 32, 40");
      variants.emplace_back(crf);
    }
    if (!find_executable(options.encoder.executable))
      throw EnvironmentError("prepare-data: encoder executable '" + options.encoder.executable + "' not found on PATH");
  } else {
    variants.emplace_back(std::nullopt);
  }

  const DatasetManifest m = load_manifest(manifest, false);
  PrepareSummary summary;
  auto emit = [&](nlohmann::ordered_json j) {
    if (log) log(j);
  };
  for (const ManifestRecord& record : m.records) {
    std::optional<SourceClip> source;
    for (const auto& crf : variants) {
      const std::string label = record.id + "/" + variant_name(crf);
      const fs::path dir = out_dir / variant_name(crf);
      const VariantPaths paths = variant_paths(dir, record.id);
      try {
        const nlohmann::ordered_json stamp = source_stamp(record, crf, options);
        if (up_to_date(paths, stamp)) {
          ++summary.skipped;
          emit({{"event", "prepare.skip"}, {"clip", record.id}, {"variant", variant_name(crf)}});
          continue;
        }
        if (!source) source = load_source_clip(record);
        const DegradedClip clip = degrade_clip(*source, crf.value_or(0), options.scale, options.encoder);
        fs::create_directories(dir);
        write_raw_video(paths.video, RawVideo{clip.lq_frames, clip.fps});
        write_mfcc(paths.mfcc, clip.mfcc);
        nlohmann::ordered_json meta;
        meta["source"] = stamp;
        meta["frames"] = clip.lq_frames.size();
        meta["bitrate_kbps"] = clip.bitrate_kbps;
        std::ofstream(paths.stamp) << meta.dump(2) << "\n";
        ++summary.written;
        emit({{"event", "prepare.write"}, {"clip", record.id}, {"variant", variant_name(crf)},
              {"frames", clip.lq_frames.size()}, {"bitrate_kbps", clip.bitrate_kbps}});
      } catch (const std::exception& e) {
        summary.failures.emplace_back(label, e.what());
        emit({{"event", "prepare.fail"}, {"clip", record.id}, {"variant", variant_name(crf)}, {"error", e.what()}});
        break;  // the remaining variants of this clip would fail the same way
      }
    }
  }
  return summary;
}

std::vector<DegradedClip> load_prepared(const fs::path& manifest, const fs::path& data_dir, std::optional<int> crf,
                                        const std::string& split) {
  const DatasetManifest m = load_manifest(manifest, true);
  const std::vector<ManifestRecord> records = split.empty() ? m.records : m.split(split);
  require(!records.empty(), "no clips in split '" + split + "' of " + manifest.string());
  std::vector<DegradedClip> clips;
  for (const ManifestRecord& record : records) {
    const VariantPaths paths = variant_paths(data_dir / variant_name(crf), record.id);
    if (!fs::exists(paths.video) || !fs::exists(paths.mfcc))
      throw ValidationError("clip '" + record.id + "' has no prepared " + variant_name(crf) + " variant under " +
                            data_dir.string() + " (run prepare-data first)");
    SourceClip src = load_source_clip(record);
    RawVideo lq = read_raw_video(paths.video);
    DegradedClip clip;
    clip.id = src.id;
    clip.hq_frames = std::move(src.frames);
    clip.lq_frames = std::move(lq.frames);
    clip.audio = std::move(src.audio);
    clip.fps = src.fps;
    clip.emotion = src.emotion;
    clip.au_targets = std::move(src.au_targets);
    clip.face_boxes = std::move(src.face_boxes);
    clip.mfcc = read_mfcc(paths.mfcc);
    clip.crf = crf;
    if (fs::exists(paths.stamp)) clip.bitrate_kbps = read_json_file(paths.stamp).value("bitrate_kbps", 0.0);
    require(clip.lq_frames.size() == clip.hq_frames.size() && clip.mfcc.rows() == static_cast<Eigen::Index>(clip.lq_frames.size()),
            "clip '" + clip.id + "': prepared frame/MFCC counts do not match the source");
    clips.push_back(std::move(clip));
  }
  return clips;
}

}  // namespace mmsd
