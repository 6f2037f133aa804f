#include <doctest.h>

#include <sstream>

#include "mmsd/evaluate.hpp"
#include "support/checks.hpp"

using namespace mmsd;

TEST_CASE("metric arguments are validated") {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Constant(20, 20, 0.5), b = Eigen::MatrixXd::Constant(20, 20, 0.25);
  CHECK_THROWS_AS(psnr_plane(a, b, {0, 0, 0, 5}), ValidationError);
  CHECK_THROWS_AS(psnr_plane(a, b, {15, 0, 10, 5}), ValidationError);
  CHECK_THROWS_AS(psnr_plane(a, Eigen::MatrixXd::Zero(20, 19), {0, 0, 5, 5}), ValidationError);
  CHECK_THROWS_WITH_AS(ssim_plane(a, b, {0, 0, 10, 10}), doctest::Contains("11"), ValidationError);
  CHECK(psnr_plane(a, b, {2, 3, 10, 10}) == doctest::Approx(-10 * std::log10(0.0625)));
}

TEST_CASE("luma and RGB-mean channels") {
  FeatureMaps<double> img(3, 1, 2);
  img.data << 1, 0, 0, 1, 0, 0;
  const auto y = luma(img);
  // pixel 0 is pure red, pixel 1 pure green
  CHECK(y(0, 0) == doctest::Approx(0.299));
  CHECK(y(0, 1) == doctest::Approx(0.587));
  CHECK(luma(img, MetricChannel::kRgbMean)(0, 1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("bicubic upscale reproduces constants and sizes") {
  FeatureMaps<double> in(2, 5, 7);
  in.data.setConstant(0.37);
  const auto out = bicubic_upscale(in, 4);
  CHECK(out.height == 20);
  CHECK(out.width == 28);
  CHECK((out.data.array() - 0.37).abs().maxCoeff() < 1e-12);
}

TEST_CASE("evaluation covers every frame and fills the table") {
  const ModelConfig config = ModelConfig::miniature();
  std::vector<DegradedClip> clips;
  int expected_frames = 0;
  for (int i = 0; i < 2; ++i) {
    DegradedClip c = mmsd::testing::fixture_clip(config, 3 + i, 7 + i);
    c.id = "clip" + std::to_string(i);
    c.crf = i == 0 ? std::optional<int>(15) : std::optional<int>(40);
    expected_frames += static_cast<int>(c.lq_frames.size());
    clips.push_back(c);
  }
  Generator<double> gen(config);
  gen.init(3);
  const EvalReport report = evaluate(clips, &gen);
  CHECK(report.clips.size() == 4);
  CHECK(report.total_frames("bicubic") == expected_frames);
  CHECK(report.total_frames("mmsd") == expected_frames);
  for (const auto& s : report.clips) {
    CHECK(std::isfinite(s.psnr));
    CHECK(s.ssim <= 1.0);
  }
  const auto agg = report.aggregates();
  CHECK(agg.size() == 4);

  std::ostringstream table;
  report.write_table(table);
  const std::string t = table.str();
  CHECK(t.find("CRF=15 (4x)") != std::string::npos);
  CHECK(t.find("CRF=32 (4x)") != std::string::npos);
  CHECK(t.find("CRF=40 (4x)") != std::string::npos);
  CHECK(t.find("Bicubic") != std::string::npos);
  CHECK(t.find("MMSD") != std::string::npos);
  CHECK(t.find("-") != std::string::npos);  // CRF=32 was not evaluated

  std::ostringstream jsonl;
  report.write_jsonl(jsonl);
  int lines = 0;
  std::string line;
  std::istringstream in(jsonl.str());
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 4 + 4);
}

TEST_CASE("bicubic-only evaluation and infinite PSNR bookkeeping") {
  const ModelConfig config = ModelConfig::miniature();
  DegradedClip c = mmsd::testing::fixture_clip(config, 2);
  // ground truth equal to the bicubic output makes every frame exact
  c.hq_frames = bicubic_frames(c.lq_frames, 4);
  const EvalReport report = evaluate({c}, nullptr);
  REQUIRE(report.clips.size() == 1);
  CHECK(report.clips[0].method == "bicubic");
  CHECK(report.clips[0].infinite_psnr_frames == 2);
  CHECK(report.clips[0].ssim == doctest::Approx(1.0));
  std::ostringstream table;
  report.write_table(table);
  CHECK(table.str().find("infinite PSNR excluded") != std::string::npos);
}

TEST_CASE("restore_frames is deterministic and 4x") {
  const ModelConfig config = ModelConfig::miniature();
  const DegradedClip c = mmsd::testing::fixture_clip(config, 3);
  Generator<double> gen(config);
  gen.init(5);
  const auto a = restore_frames(gen, c.lq_frames, c.mfcc, c.emotion);
  const auto b = restore_frames(gen, c.lq_frames, c.mfcc, c.emotion);
  REQUIRE(a.size() == 3);
  CHECK(a[0].height == 4 * config.lq_height);
  CHECK(a[0].width == 4 * config.lq_width);
  CHECK(a == b);
  CHECK_THROWS_AS(restore_frames(gen, c.lq_frames, c.mfcc.topRows(2), c.emotion), ValidationError);
}
