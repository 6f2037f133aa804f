#include <chrono>
#include <sstream>

#include "gradcheck.hpp"
#include "checks.hpp"
#include "mmsd/adversary.hpp"
#include "mmsd/generator.hpp"

namespace mmsd::testing {

namespace {

constexpr double kTolerance = 1e-4;

using Maps = FeatureMaps<double>;

struct Suite {
  CheckResult result;
  void add(const std::string& name, const GradResult& r) {
    std::ostringstream os;
    os << name << ": rel err " << format_double(r.rel_error, 2) << " over " << r.probes << " probes";
    if (!r.where.empty()) os << " (worst " << r.where << ")";
    result.expect(r.rel_error < kTolerance, os.str());
  }
};

nn::ParameterList<double> params_of(auto& module, const std::string& prefix) {
  nn::ParameterList<double> list;
  module.parameters(list, prefix);
  nn::zero_grads(list);
  return list;
}

void attention_map(Suite& s, std::mt19937_64& rng) {
  AudioVideoFusion<double> fusion(8, 4);
  fusion.init(rng);
  Maps fv = random_maps(8, 4, 4, rng, MapTag::kVideo), fa = random_maps(8, 4, 4, rng, MapTag::kAudio);
  const RowMatrix<double> r = random_matrix(1, 16, rng);
  auto loss = [&] { return dot(fusion.attention_weights(fv, fa), r); };
  nn::ParameterList<double> params;
  fusion.theta().parameters(params, "theta");
  fusion.phi().parameters(params, "phi");
  nn::zero_grads(params);
  typename AudioVideoFusion<double>::WeightTrace t;
  fusion.attention_weights(fv, fa, &t);
  auto [gv, ga] = fusion.attention_weights_backward(t, r);
  s.add("attention map (Eq. 2) wrt f_V", finite_difference(loss, fv.data, gv.data));
  s.add("attention map (Eq. 2) wrt f_A", finite_difference(loss, fa.data, ga.data));
  s.add("attention map (Eq. 2) wrt theta/phi", check_parameters(loss, params));
}

void audio_video_fusion(Suite& s, std::mt19937_64& rng) {
  AudioVideoFusion<double> fusion(8, 4);
  fusion.init(rng);
  Maps fv = random_maps(8, 4, 4, rng, MapTag::kVideo), fa = random_maps(8, 4, 4, rng, MapTag::kAudio);
  RowMatrix<double> w = random_matrix(1, 16, rng, 0.05, 0.95);
  const RowMatrix<double> r = random_matrix(8, 16, rng);
  {
    auto loss = [&] { return dot(fusion.fuse(fv, fa, w).data, r); };
    auto params = params_of(fusion, "av");
    typename AudioVideoFusion<double>::FuseTrace t;
    fusion.fuse(fv, fa, w, &t);
    Maps g_out(8, 4, 4);
    g_out.data = r;
    auto g = fusion.fuse_backward(t, g_out);
    s.add("gated fusion (Eq. 3) wrt f_V", finite_difference(loss, fv.data, g.video.data));
    s.add("gated fusion (Eq. 3) wrt f_A", finite_difference(loss, fa.data, g.audio.data));
    s.add("gated fusion (Eq. 3) wrt attention map", finite_difference(loss, w, g.weights));
    nn::ParameterList<double> fuse_params;
    fusion.fuse_conv().parameters(fuse_params, "fuse");
    s.add("gated fusion (Eq. 3) wrt 1x1 conv", check_parameters(loss, fuse_params));
  }
  {
    auto loss = [&] { return dot(fusion.forward(fv, fa).data, r); };
    auto params = params_of(fusion, "av");
    typename AudioVideoFusion<double>::Trace t;
    fusion.forward(fv, fa, &t);
    Maps g_out(8, 4, 4);
    g_out.data = r;
    auto [gv, ga] = fusion.backward(t, g_out);
    s.add("audio-video fusion composite wrt f_V", finite_difference(loss, fv.data, gv.data));
    s.add("audio-video fusion composite wrt f_A", finite_difference(loss, fa.data, ga.data));
    s.add("audio-video fusion composite wrt parameters", check_parameters(loss, params));
  }
}

void emotion_paths(Suite& s, std::mt19937_64& rng) {
  ModelConfig config = micro_config();
  EmotionBranch<double> branch(config);
  branch.init(rng);
  {
    Vector<double> au = random_matrix(kActionUnits, 1, rng, 0.0, 3.0);
    const Vector<double> r = random_matrix(config.features, 1, rng);
    auto loss = [&] { return branch.channel_attention(au).dot(r); };
    auto params = params_of(branch, "emotion");
    typename EmotionBranch<double>::AttentionTrace t;
    branch.channel_attention(au, &t);
    const Vector<double> g = branch.channel_attention_backward(t, r);
    s.add("channel attention (Eq. 5) wrt AUs", finite_difference(loss, au, g));
    nn::ParameterList<double> attention;
    for (int i = 0; i < 3; ++i) branch.attention_layer(i).parameters(attention, "att" + std::to_string(i));
    s.add("channel attention (Eq. 5) wrt parameters", check_parameters(loss, attention));
  }
  {
    Maps fv = random_maps(config.features, 4, 4, rng, MapTag::kVideo);
    const EmotionState state(9);
    const Vector<double> r = random_matrix(kActionUnits, 1, rng);
    // Fixed dropout masks: every evaluation reseeds the generator.
    auto loss = [&] {
      std::mt19937_64 drop(11);
      return branch.predict_aus(state, fv, &drop).dot(r);
    };
    auto params = params_of(branch, "emotion");
    typename EmotionBranch<double>::AuTrace t;
    std::mt19937_64 drop(11);
    branch.predict_aus(state, fv, &drop, &t);
    const Maps g = branch.predict_aus_backward(t, r);
    s.add("AU regressor (train-mode dropout) wrt f_V", finite_difference(loss, fv.data, g.data));
    nn::ParameterList<double> au;
    for (int i = 0; i < 4; ++i) branch.au_layer(i).parameters(au, "au" + std::to_string(i));
    s.add("AU regressor wrt parameters", check_parameters(loss, au));
  }
}

void trimodal(Suite& s, std::mt19937_64& rng) {
  TrimodalFusion<double> fusion(8);
  fusion.init(rng);
  Maps fva = random_maps(8, 4, 4, rng, MapTag::kAudioVideo);
  Vector<double> gate = random_matrix(8, 1, rng, 0.05, 0.95);
  const EmotionState state(4);
  const RowMatrix<double> r = random_matrix(8, 16, rng);
  auto loss = [&] { return dot(fusion.forward(fva, gate, state).data, r); };
  auto params = params_of(fusion, "tri");
  typename TrimodalFusion<double>::Trace t;
  fusion.forward(fva, gate, state, &t);
  Maps g_out(8, 4, 4);
  g_out.data = r;
  auto g = fusion.backward(t, g_out);
  s.add("trimodal fusion wrt f_VA", finite_difference(loss, fva.data, g.audio_video.data));
  s.add("trimodal fusion wrt channel attention", finite_difference(loss, gate, g.gate));
  s.add("trimodal fusion wrt parameters", check_parameters(loss, params));
}

void deformable(Suite& s, std::mt19937_64& rng) {
  nn::DeformConv2d<double> deform(3, 4, 3);
  deform.init(rng);
  Maps in = random_maps(3, 4, 4, rng);
  Maps offsets = random_maps(18, 4, 4, rng, MapTag::kNone, -1.5, 1.5);
  const RowMatrix<double> r = random_matrix(4, 16, rng);
  auto loss = [&] { return dot(deform.forward(in, offsets).data, r); };
  auto params = params_of(deform, "deform");
  Maps g_out(4, 4, 4);
  g_out.data = r;
  auto [g_in, g_off] = deform.backward(in, offsets, g_out);
  s.add("deformable conv (4x4 crop) wrt input", finite_difference(loss, in.data, g_in.data, 48));
  s.add("deformable conv (4x4 crop) wrt offsets", finite_difference(loss, offsets.data, g_off.data, 96));
  s.add("deformable conv (4x4 crop) wrt parameters", check_parameters(loss, params));

  FeatureAligner<double> aligner(4, false);
  aligner.init(rng);
  Maps center = random_maps(4, 5, 5, rng), neighbor = random_maps(4, 5, 5, rng);
  const RowMatrix<double> r2 = random_matrix(4, 25, rng);
  auto loss2 = [&] { return dot(aligner.forward(center, neighbor).data, r2); };
  auto aligner_params = params_of(aligner, "align");
  typename FeatureAligner<double>::Trace t;
  aligner.forward(center, neighbor, &t);
  Maps g2(4, 5, 5);
  g2.data = r2;
  auto [gc, gn] = aligner.backward(t, g2);
  s.add("feature alignment wrt center", finite_difference(loss2, center.data, gc.data));
  s.add("feature alignment wrt neighbor", finite_difference(loss2, neighbor.data, gn.data));
  s.add("feature alignment wrt parameters", check_parameters(loss2, aligner_params));
}

void convolution(Suite& s, std::mt19937_64& rng) {
  nn::Conv2d<double> conv(3, 5, 4, 2, 1);
  conv.init(rng);
  Maps in = random_maps(3, 8, 6, rng);
  const Maps probe = conv.forward(in);
  const RowMatrix<double> r = random_matrix(probe.channels(), probe.pixels(), rng);
  auto loss = [&] { return dot(conv.forward(in).data, r); };
  auto params = params_of(conv, "conv");
  Maps g_out = probe;
  g_out.data = r;
  const Maps g_in = conv.backward(in, g_out);
  s.add("strided 4x4 conv wrt input", finite_difference(loss, in.data, g_in.data));
  s.add("strided 4x4 conv wrt parameters", check_parameters(loss, params));
}

void recurrent(Suite& s, std::mt19937_64& rng) {
  nn::BiLstm<double> lstm(kMfccCoefficients, 6, 3);
  lstm.init(rng);
  RowMatrix<double> x = random_matrix(kMfccCoefficients, 5, rng);
  const Vector<double> r = random_matrix(12, 1, rng);
  auto loss = [&] { return lstm.forward(x).dot(r); };
  auto params = params_of(lstm, "lstm");
  typename nn::BiLstm<double>::Trace t;
  lstm.forward(x, &t);
  const RowMatrix<double> g = lstm.backward(t, r);
  s.add("3-layer BiLSTM wrt MFCC window", finite_difference(loss, x, g));
  s.add("3-layer BiLSTM wrt parameters", check_parameters(loss, params, 8));
}

void audio_lift(Suite& s, std::mt19937_64& rng) {
  const ModelConfig config = ModelConfig::miniature();
  AudioBranch<double> audio(config);
  audio.init(rng);
  Vector<double> v = random_matrix(audio.feature_size(), 1, rng);
  const FeatureMaps<double> probe = audio.lift(v);
  const RowMatrix<double> r = random_matrix(probe.channels(), probe.pixels(), rng);
  auto loss = [&] { return dot(audio.lift(v).data, r); };
  auto params = params_of(audio, "audio");
  typename AudioBranch<double>::LiftTrace t;
  audio.lift(v, &t);
  Maps g_out = probe;
  g_out.data = r;
  const Vector<double> g = audio.lift_backward(t, g_out);
  s.add("audio lift (miniature 3x5 grid) wrt v", finite_difference(loss, v, g, 32));
  nn::ParameterList<double> lift_params;
  audio.fc().parameters(lift_params, "fc");
  for (int i = 0; i < 3; ++i) audio.upsample(i).parameters(lift_params, "up" + std::to_string(i));
  s.add("audio lift wrt parameters", check_parameters(loss, lift_params));
}

void reconstruction(Suite& s, std::mt19937_64& rng) {
  ModelConfig config = micro_config();
  config.recon_res_blocks = 2;
  Reconstruction<double> recon(config);
  recon.init(rng);
  Maps features = random_maps(config.features, 3, 4, rng, MapTag::kTrimodal);
  const Maps lq = random_maps(3, 3, 4, rng, MapTag::kNone, 0.3, 0.7);
  const Maps probe = recon.forward(features, lq);
  const RowMatrix<double> r = random_matrix(3, probe.pixels(), rng);
  auto loss = [&] { return dot(recon.forward(features, lq).data, r); };
  auto params = params_of(recon, "recon");
  typename Reconstruction<double>::Trace t;
  recon.forward(features, lq, &t);
  Maps g_out = probe;
  g_out.data = r;
  const Maps g = recon.backward(t, g_out);
  s.add("reconstruction (2 res blocks + upsampling) wrt features", finite_difference(loss, features.data, g.data));
  s.add("reconstruction wrt parameters", check_parameters(loss, params));
}

void discriminator(Suite& s, std::mt19937_64& rng) {
  const ModelConfig config = micro_config();
  Discriminator<double> disc(config);
  disc.init(rng);
  Maps image = random_maps(3, config.hq_height(), config.hq_width(), rng, MapTag::kNone, 0.0, 1.0);
  const EmotionState state(6);
  auto loss = [&] { return floored_neg_log(disc.forward(image, state)); };
  auto params = params_of(disc, "disc");
  typename Discriminator<double>::Trace t;
  const double p = disc.forward(image, state, &t);
  const Maps g = disc.backward(t, floored_neg_log_derivative(p));
  s.add("discriminator -log p wrt image", finite_difference(loss, image.data, g.data));
  s.add("discriminator -log p wrt parameters", check_parameters(loss, params));
}

void video_jvp(Suite& s, std::mt19937_64& rng) {
  const ModelConfig config = micro_config();
  VideoBranch<double> video(config);
  video.init(rng);
  std::vector<Maps> frames, direction;
  for (int i = 0; i < config.window_length(); ++i) {
    frames.push_back(random_maps(3, config.lq_height, config.lq_width, rng, MapTag::kNone, 0.0, 1.0));
    direction.push_back(random_maps(3, config.lq_height, config.lq_width, rng));
  }
  const Maps probe = video.forward(frames);
  const RowMatrix<double> r = random_matrix(probe.channels(), probe.pixels(), rng);
  auto loss_at = [&](double step) {
    std::vector<Maps> moved = frames;
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i].data += step * direction[i].data;
    return dot(video.forward(moved).data, r);
  };
  auto params = params_of(video, "video");
  typename VideoBranch<double>::Trace t;
  video.forward(frames, &t);
  Maps g_out = probe;
  g_out.data = r;
  const std::vector<Maps> g = video.backward(t, g_out);
  double analytic = 0;
  for (std::size_t i = 0; i < g.size(); ++i) analytic += dot(g[i].data, direction[i].data);
  const double h = 1e-6;
  const double numeric = (loss_at(h) - loss_at(-h)) / (2 * h);
  GradResult jvp;
  jvp.probes = 1;
  jvp.rel_error = std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric));
  s.add("video branch JVP (3 frames, 8x8)", jvp);
  auto loss = [&] { return loss_at(0.0); };
  s.add("video branch wrt parameters", check_parameters(loss, params, 6));
}

void generator(Suite& s, std::mt19937_64& rng) {
  const ModelConfig config = micro_config();
  Generator<double> gen(config);
  gen.init(rng());
  WindowInput<double> in;
  for (int i = 0; i < config.window_length(); ++i)
    in.frames.push_back(random_maps(3, config.lq_height, config.lq_width, rng, MapTag::kNone, 0.3, 0.7));
  in.mfcc = random_matrix(config.window_length(), kMfccCoefficients, rng);
  in.emotion = EmotionState(12);
  const Maps target = random_maps(3, config.hq_height(), config.hq_width(), rng, MapTag::kNone, 0.0, 1.0);
  const Vector<double> au_target = random_matrix(kActionUnits, 1, rng, 0.0, 5.0);
  const LossWeights weights;
  auto loss = [&] {
    std::mt19937_64 drop(5);
    const Restoration<double> out = gen.forward(in, &drop);
    // Smooth surrogate for the pixel term: finite differences across |·| kinks are meaningless.
    return 0.5 * (out.frame.data - target.data).squaredNorm() / target.data.size() +
           weights.emotion * au_loss(out.predicted_au, au_target);
  };
  auto params = gen.parameters();
  nn::zero_grads(params);
  typename Generator<double>::Trace t;
  std::mt19937_64 drop(5);
  const Restoration<double> out = gen.forward(in, &drop, &t);
  Maps g_frame = out.frame;
  g_frame.data = (out.frame.data - target.data) / static_cast<double>(target.data.size());
  gen.backward(t, g_frame, weights.emotion * au_loss_gradient(out.predicted_au, au_target));
  s.add("full generator (micro config) wrt every parameter, best of h in {1e-4, 1e-5, 1e-6}",
        check_parameters(loss, params, 4, {1e-4, 1e-5, 1e-6}));
}

}  // namespace

CheckResult check_gradients() {
  const auto start = std::chrono::steady_clock::now();
  Suite s;
  std::mt19937_64 rng(2024);
  attention_map(s, rng);
  audio_video_fusion(s, rng);
  emotion_paths(s, rng);
  trimodal(s, rng);
  deformable(s, rng);
  convolution(s, rng);
  recurrent(s, rng);
  audio_lift(s, rng);
  reconstruction(s, rng);
  discriminator(s, rng);
  video_jvp(s, rng);
  generator(s, rng);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  s.result.expect(seconds < 120.0, "runtime " + format_double(seconds, 3) + " s < 120 s");
  return s.result;
}

}  // namespace mmsd::testing
