#include <doctest.h>

#include <random>
#include <set>

#include "mmsd/adversary.hpp"
#include "mmsd/generator.hpp"
#include "support/gradcheck.hpp"

using namespace mmsd;
using mmsd::testing::random_maps;

namespace {

std::vector<FeatureMaps<double>> random_window(const ModelConfig& c, std::mt19937_64& rng) {
  std::vector<FeatureMaps<double>> frames;
  for (int i = 0; i < c.window_length(); ++i) frames.push_back(random_maps(3, c.lq_height, c.lq_width, rng, MapTag::kNone, 0.0, 1.0));
  return frames;
}

}  // namespace

TEST_CASE("video branch produces tagged f_V at the paper size") {
  const ModelConfig c = ModelConfig::paper();
  VideoBranch<double> video(c);
  std::mt19937_64 rng(1);
  video.init(rng);
  const auto fv = video.forward(random_window(c, rng));
  CHECK(fv.channels() == 64);
  CHECK(fv.height == 72);
  CHECK(fv.width == 120);
  CHECK(fv.tag == MapTag::kVideo);
  CHECK(fv.all_finite());
}

TEST_CASE("video branch shares one stem and one aligner across the window") {
  const ModelConfig c = ModelConfig::miniature();
  VideoBranch<double> video(c);
  std::mt19937_64 rng(2);
  video.init(rng);
  nn::ParameterList<double> params;
  video.parameters(params, "video");
  std::set<std::string> names;
  for (const auto& p : params) names.insert(p.name);
  CHECK(names.size() == params.size());
  CHECK(names.count("video.stem.weight") == 1);
  for (const auto& n : names) CHECK(n.find("stem1") == std::string::npos);

  const auto frame = random_maps(3, c.lq_height, c.lq_width, rng, MapTag::kNone, 0.0, 1.0);
  const auto stems = video.shallow_embed({frame, frame, frame});
  CHECK(stems[0].data == stems[2].data);
}

TEST_CASE("video branch rejects malformed windows") {
  const ModelConfig c = ModelConfig::miniature();
  VideoBranch<double> video(c);
  std::mt19937_64 rng(3);
  video.init(rng);
  auto frames = random_window(c, rng);
  frames.pop_back();
  CHECK_THROWS_AS(video.forward(frames), ValidationError);
  frames = random_window(c, rng);
  frames[1] = FeatureMaps<double>(3, c.lq_height, c.lq_width + 1);
  CHECK_THROWS_AS(video.forward(frames), ValidationError);
}

TEST_CASE("audio branch encodes to 2H and lifts to f_A") {
  const ModelConfig c = ModelConfig::paper();
  AudioBranch<double> audio(c);
  std::mt19937_64 rng(4);
  audio.init(rng);
  const Eigen::MatrixXd mfcc = Eigen::MatrixXd::Random(5, 13);
  const auto v = audio.encode(mfcc);
  CHECK(v.size() == 256);
  const auto fa = audio.lift(v);
  CHECK(fa.channels() == 64);
  CHECK(fa.height == 72);
  CHECK(fa.width == 120);
  CHECK(fa.tag == MapTag::kAudio);
  CHECK_THROWS_AS(audio.encode(Eigen::MatrixXd::Zero(5, 12)), ValidationError);
  CHECK_THROWS_AS(audio.encode(Eigen::MatrixXd::Zero(4, 13)), ValidationError);
}

TEST_CASE("audio lift of a zero vector is the bias cascade") {
  const ModelConfig c = ModelConfig::miniature();
  AudioBranch<double> audio(c);
  std::mt19937_64 rng(5);
  audio.init(rng);
  nn::fill_uniform(audio.fc().bias, 0.5, rng);
  FeatureMaps<double> x = reshape_to_grid<double>(audio.fc().bias.value.col(0), c.audio_grid_channels,
                                                  c.audio_grid_height, c.audio_grid_width);
  for (int i = 0; i < 3; ++i) x = audio.upsample(i).forward(x);
  const auto lifted = audio.lift(Vector<double>::Zero(audio.feature_size()));
  CHECK(lifted.data == x.data);
  CHECK(lifted.data.maxCoeff() > 0.0);
}

TEST_CASE("emotion branch: eval is deterministic, train dropout follows the seed") {
  const ModelConfig c = ModelConfig::miniature();
  EmotionBranch<double> emotion(c);
  std::mt19937_64 rng(6);
  emotion.init(rng);
  const auto fv = random_maps(c.features, c.lq_height, c.lq_width, rng, MapTag::kVideo, 0.0, 1.0);
  const EmotionState s(7);
  const auto a = emotion.predict_aus(s, fv), b = emotion.predict_aus(s, fv);
  CHECK(a.size() == kActionUnits);
  CHECK(a == b);
  std::mt19937_64 r1(99), r2(99), r3(100);
  const auto t1 = emotion.predict_aus(s, fv, &r1), t2 = emotion.predict_aus(s, fv, &r2);
  const auto t3 = emotion.predict_aus(s, fv, &r3);
  CHECK(t1 == t2);
  CHECK(t1 != t3);
  CHECK(t1 != a);

  const auto gate = emotion.channel_attention(a);
  CHECK(gate.size() == c.features);
  CHECK(gate.minCoeff() > 0.0);
  CHECK(gate.maxCoeff() < 1.0);

  auto untagged = fv;
  untagged.tag = MapTag::kNone;
  CHECK_THROWS(emotion.predict_aus(s, untagged));
}

TEST_CASE("discriminator probability: range, zero weights, emotion dependence") {
  const ModelConfig c = ModelConfig::miniature();
  Discriminator<double> disc(c);
  std::mt19937_64 rng(8);
  disc.init(rng);
  nn::fill_uniform(disc.head().bias, 0.2, rng);
  const auto image = random_maps(3, c.hq_height(), c.hq_width(), rng, MapTag::kNone, 0.0, 1.0);
  std::set<double> seen;
  for (int s = 0; s < kEmotionStates; ++s) {
    const double p = disc.forward(image, EmotionState(s));
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    seen.insert(p);
  }
  CHECK(seen.size() > 1);

  nn::ParameterList<double> params;
  disc.parameters(params, "disc");
  nn::set_zero(params);
  CHECK(disc.forward(image, EmotionState(3)) == 0.5);
  CHECK_THROWS_AS(disc.forward(FeatureMaps<double>(3, 8, 8), EmotionState(0)), ValidationError);
}

TEST_CASE("generator forward at the miniature size") {
  const ModelConfig c = ModelConfig::miniature();
  Generator<double> gen(c);
  gen.init(17);
  std::mt19937_64 rng(9);
  WindowInput<double> in;
  in.frames = random_window(c, rng);
  in.mfcc = Eigen::MatrixXd::Random(c.window_length(), 13);
  in.emotion = EmotionState(4);
  Intermediates<double> debug;
  const auto out = gen.forward(in, nullptr, nullptr, &debug);
  CHECK(out.frame.channels() == 3);
  CHECK(out.frame.height == c.hq_height());
  CHECK(out.frame.width == c.hq_width());
  CHECK(out.frame.data.minCoeff() >= 0.0);
  CHECK(out.frame.data.maxCoeff() <= 1.0);
  CHECK(out.predicted_au.size() == kActionUnits);
  CHECK(debug.trimodal.tag == MapTag::kTrimodal);
  CHECK(debug.audio_video.tag == MapTag::kAudioVideo);
  CHECK_NOTHROW(check_intermediates(debug));

  Generator<double> again(c);
  again.init(17);
  CHECK(again.forward(in).frame.data == out.frame.data);
}
