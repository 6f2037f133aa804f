#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmsd/dataset.hpp"
#include "mmsd/degrade.hpp"

namespace mmsd {

struct PrepareOptions {
  std::vector<int> crfs{15, 32, 40};
  int scale = 4;
  EncoderConfig encoder;
};

struct PrepareSummary {
  int written = 0;
  int skipped = 0;  // outputs already up to date
  std::vector<std::pair<std::string, std::string>> failures;  // (clip/variant, reason)
};

using EventLog = std::function<void(const nlohmann::ordered_json&)>;

/// Directory name of one degradation variant: "crf32", or "nocodec" without a codec pass.
std::string variant_name(std::optional<int> crf);

/// Degrades every manifest clip at every CRF into `out_dir/<variant>/<id>.{rgbv,mfcc.csv,json}`.
/// Per-clip failures are collected and the run continues.
PrepareSummary prepare_dataset(const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
                               const PrepareOptions& options, const EventLog& log = {});

void write_mfcc(const std::filesystem::path& path, const Eigen::MatrixXd& mfcc);
Eigen::MatrixXd read_mfcc(const std::filesystem::path& path);

/// Reassembles degraded clips of one split from the manifest and a prepared directory.
/// An empty `split` loads every clip.
std::vector<DegradedClip> load_prepared(const std::filesystem::path& manifest, const std::filesystem::path& data_dir,
                                        std::optional<int> crf, const std::string& split);

}  // namespace mmsd
