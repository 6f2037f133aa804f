#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mmsd/dataset.hpp"
#include "mmsd/generator.hpp"
#include "mmsd/metrics.hpp"

namespace mmsd {

/// Restores every frame of a low-quality clip (edge-replicated windows).
/// `mfcc` holds one row per frame.
std::vector<Frame> restore_frames(const Generator<double>& generator, const std::vector<Frame>& lq_frames,
                                  const Eigen::MatrixXd& mfcc, const EmotionState& emotion);

/// Bicubic ×scale of each frame, clamped and rounded to 8 bits.
std::vector<Frame> bicubic_frames(const std::vector<Frame>& lq_frames, int scale);

struct ClipScore {
  std::string clip_id;
  std::string method;      // "bicubic" or "mmsd"
  std::optional<int> crf;  // empty for codec-free degradations
  double psnr = 0.0;       // mean over frames with finite PSNR
  double ssim = 0.0;       // mean over all frames
  int frames = 0;
  int infinite_psnr_frames = 0;  // identical to ground truth inside the mask; excluded from the PSNR mean
};

struct AggregateScore {
  std::string method;
  std::optional<int> crf;
  double psnr = 0.0;  // mean of per-clip values
  double ssim = 0.0;
  int clips = 0;
  int frames = 0;
  int infinite_psnr_frames = 0;
};

struct EvalReport {
  std::vector<ClipScore> clips;

  /// One row per (method, crf), in first-seen order.
  std::vector<AggregateScore> aggregates() const;
  int total_frames(const std::string& method) const;

  /// Methods × CRF columns ("PSNR/SSIM" pairs), shaped like the paper's comparison table.
  void write_table(std::ostream& os, const std::vector<int>& crf_columns = {15, 32, 40}) const;
  /// One JSON object per (clip, method, crf), then one per aggregate.
  void write_jsonl(std::ostream& os) const;
};

struct EvalOptions {
  MetricChannel channel = MetricChannel::kLuma;
  /// Masks are the per-frame face boxes; false uses the whole frame.
  bool face_mask = true;
};

/// Scores restored frames against the clip's ground truth, frame by frame.
ClipScore score_clip(const DegradedClip& clip, const std::vector<Frame>& restored, const std::string& method,
                     const EvalOptions& options = {});

/// Bicubic for every clip, plus the network when `generator` is given.
EvalReport evaluate(const std::vector<DegradedClip>& clips, const Generator<double>* generator,
                    const EvalOptions& options = {});

}  // namespace mmsd
