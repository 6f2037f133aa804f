#include "mmsd/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <map>

#include <json.hpp>

namespace mmsd {

std::vector<Frame> restore_frames(const Generator<double>& generator, const std::vector<Frame>& lq_frames,
                                  const Eigen::MatrixXd& mfcc, const EmotionState& emotion) {
  const ModelConfig& config = generator.config();
  const int length = static_cast<int>(lq_frames.size());
  require(length > 0, "restore: no frames");
  require(mfcc.rows() == length && mfcc.cols() == kMfccCoefficients,
          "restore: need one 13-coefficient MFCC row per frame");
  for (const Frame& f : lq_frames)
    require(f.height == config.lq_height && f.width == config.lq_width,
            "restore: frames are " + std::to_string(f.height) + "x" + std::to_string(f.width) + ", model expects " +
                std::to_string(config.lq_height) + "x" + std::to_string(config.lq_width));
  std::vector<FeatureMaps<double>> maps;
  maps.reserve(lq_frames.size());
  for (const Frame& f : lq_frames) maps.push_back(to_maps<double>(f));

  std::vector<Frame> out;
  out.reserve(lq_frames.size());
  for (int t = 0; t < length; ++t) {
    WindowInput<double> in;
    const auto idx = window_indices(t, config.half_window, length);
    in.mfcc.resize(static_cast<Eigen::Index>(idx.size()), kMfccCoefficients);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      in.frames.push_back(maps[idx[i]]);
      in.mfcc.row(static_cast<Eigen::Index>(i)) = mfcc.row(idx[i]);
    }
    in.emotion = emotion;
    out.push_back(to_frame(generator.forward(in).frame));
  }
  return out;
}

std::vector<Frame> bicubic_frames(const std::vector<Frame>& lq_frames, int scale) {
  std::vector<Frame> out;
  out.reserve(lq_frames.size());
  for (const Frame& f : lq_frames) out.push_back(to_frame(bicubic_upscale(to_maps<double>(f), scale)));
  return out;
}

ClipScore score_clip(const DegradedClip& clip, const std::vector<Frame>& restored, const std::string& method,
                     const EvalOptions& options) {
  require(restored.size() == clip.hq_frames.size(), "evaluate: restored frame count differs from ground truth");
  ClipScore s;
  s.clip_id = clip.id;
  s.method = method;
  s.crf = clip.crf;
  double psnr_sum = 0, ssim_sum = 0;
  for (std::size_t t = 0; t < restored.size(); ++t) {
    const FeatureMaps<double> a = to_maps<double>(restored[t]);
    const FeatureMaps<double> b = to_maps<double>(clip.hq_frames[t]);
    const Rect mask = options.face_mask ? clip.face_boxes.at(t) : Rect{0, 0, b.width, b.height};
    const double p = psnr(a, b, mask, options.channel);
    if (is_infinite_psnr(p))
      ++s.infinite_psnr_frames;
    else
      psnr_sum += p;
    ssim_sum += ssim(a, b, mask, options.channel);
    ++s.frames;
  }
  const int finite = s.frames - s.infinite_psnr_frames;
  s.psnr = finite > 0 ? psnr_sum / finite : std::numeric_limits<double>::infinity();
  s.ssim = ssim_sum / s.frames;
  return s;
}

EvalReport evaluate(const std::vector<DegradedClip>& clips, const Generator<double>* generator,
                    const EvalOptions& options) {
  EvalReport report;
  for (const DegradedClip& clip : clips) {
    const int scale = clip.hq_frames.at(0).height / clip.lq_frames.at(0).height;
    report.clips.push_back(score_clip(clip, bicubic_frames(clip.lq_frames, scale), "bicubic", options));
    if (generator)
      report.clips.push_back(
          score_clip(clip, restore_frames(*generator, clip.lq_frames, clip.mfcc, clip.emotion), "mmsd", options));
  }
  return report;
}

std::vector<AggregateScore> EvalReport::aggregates() const {
  std::vector<AggregateScore> rows;
  std::vector<int> finite_clips;
  for (const ClipScore& c : clips) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const AggregateScore& a) { return a.method == c.method && a.crf == c.crf; });
    if (it == rows.end()) {
      rows.push_back({c.method, c.crf});
      finite_clips.push_back(0);
      it = rows.end() - 1;
    }
    const std::size_t i = static_cast<std::size_t>(it - rows.begin());
    if (std::isfinite(c.psnr)) {
      it->psnr += c.psnr;
      ++finite_clips[i];
    }
    it->ssim += c.ssim;
    ++it->clips;
    it->frames += c.frames;
    it->infinite_psnr_frames += c.infinite_psnr_frames;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].psnr = finite_clips[i] > 0 ? rows[i].psnr / finite_clips[i] : std::numeric_limits<double>::infinity();
    rows[i].ssim /= rows[i].clips;
  }
  return rows;
}

int EvalReport::total_frames(const std::string& method) const {
  int n = 0;
  for (const ClipScore& c : clips)
    if (c.method == method) n += c.frames;
  return n;
}

namespace {

std::string crf_label(const std::optional<int>& crf) { return crf ? "CRF=" + std::to_string(*crf) : "no codec"; }

std::string method_label(const std::string& method) { return method == "mmsd" ? "MMSD" : "Bicubic"; }

std::string fixed(double v, int digits) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

nlohmann::ordered_json crf_json(const std::optional<int>& crf) { return crf ? nlohmann::ordered_json(*crf) : nlohmann::ordered_json(); }

}  // namespace

void EvalReport::write_table(std::ostream& os, const std::vector<int>& crf_columns) const {
  const auto rows = aggregates();
  std::vector<std::optional<int>> columns(crf_columns.begin(), crf_columns.end());
  for (const auto& r : rows)
    if (std::find(columns.begin(), columns.end(), r.crf) == columns.end()) columns.push_back(r.crf);
  std::vector<std::string> methods;
  for (const auto& r : rows)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);

  os << std::left << std::setw(10) << "Methods";
  for (const auto& c : columns) os << " | " << std::setw(15) << (crf_label(c) + " (4x)");
  os << "\n" << std::setw(10) << "";
  for (std::size_t i = 0; i < columns.size(); ++i) os << " | " << std::setw(7) << "PSNR" << " " << std::setw(7) << "SSIM";
  os << "\n";
  for (const auto& m : methods) {
    os << std::setw(10) << method_label(m);
    for (const auto& c : columns) {
      auto it = std::find_if(rows.begin(), rows.end(), [&](const AggregateScore& a) { return a.method == m && a.crf == c; });
      if (it == rows.end())
        os << " | " << std::setw(7) << "-" << " " << std::setw(7) << "-";
      else
        os << " | " << std::setw(7) << fixed(it->psnr, 2) << " " << std::setw(7) << fixed(it->ssim, 3);
    }
    os << "\n";
  }
  for (const auto& r : rows)
    if (r.infinite_psnr_frames > 0)
      os << "note: " << method_label(r.method) << " " << crf_label(r.crf) << ": " << r.infinite_psnr_frames
         << " frame(s) with infinite PSNR excluded from the mean\n";
  os << std::right;
}

void EvalReport::write_jsonl(std::ostream& os) const {
  for (const ClipScore& c : clips) {
    nlohmann::ordered_json j;
    j["record"] = "clip";
    j["clip"] = c.clip_id;
    j["method"] = c.method;
    j["crf"] = crf_json(c.crf);
    j["psnr"] = std::isfinite(c.psnr) ? nlohmann::ordered_json(c.psnr) : nlohmann::ordered_json("inf");
    j["ssim"] = c.ssim;
    j["frames"] = c.frames;
    j["infinite_psnr_frames"] = c.infinite_psnr_frames;
    os << j.dump() << "\n";
  }
  for (const AggregateScore& a : aggregates()) {
    nlohmann::ordered_json j;
    j["record"] = "aggregate";
    j["method"] = a.method;
    j["crf"] = crf_json(a.crf);
    j["psnr"] = std::isfinite(a.psnr) ? nlohmann::ordered_json(a.psnr) : nlohmann::ordered_json("inf");
    j["ssim"] = a.ssim;
    j["clips"] = a.clips;
    j["frames"] = a.frames;
    j["infinite_psnr_frames"] = a.infinite_psnr_frames;
    os << j.dump() << "\n";
  }
}

}  // namespace mmsd
