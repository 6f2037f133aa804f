// Command-line entry point: fixtures, prepare-data, train, eval, restore.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmsd/checkpoint.hpp"
#include "mmsd/evaluate.hpp"
#include "mmsd/mfcc.hpp"
#include "mmsd/prepare.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace mmsd;

namespace {

enum ExitCode { kOk = 0, kValidation = 2, kEnvironment = 3, kRuntime = 4 };

void log_event(const ordered_json& j) { std::cerr << j.dump() << std::endl; }

struct RunConfig {
  std::string command;
  fs::path manifest, data, out, checkpoint, resume;
  std::vector<int> crf;
  bool codec = true;
  bool allow_nonstandard_crf = false;
  std::string encoder = "ffmpeg";
  int scale = 4;
  std::string split;
  bool deterministic = false;
  bool miniature = false;
  std::int64_t max_steps = 0;
  // fixtures
  int clips = 4, frames = 12, height = 288, width = 480;
  double fps = 25.0;
  // restore
  fs::path video, audio, output;
  std::string emotion;

  TrainConfig train;
  ModelConfig model;
  std::set<std::string> train_keys;  // explicitly set TrainConfig fields
  nlohmann::json model_overrides = nlohmann::json::object();
};

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["command"] = c.command;
  auto path = [](const fs::path& p) { return p.empty() ? ordered_json() : ordered_json(p.string()); };
  if (c.command == "fixtures") {
    j["out"] = path(c.out);
    j["clips"] = c.clips;
    j["frames"] = c.frames;
    j["height"] = c.height;
    j["width"] = c.width;
    j["fps"] = c.fps;
    j["seed"] = c.train.seed;
    j["miniature"] = c.miniature;
    return j;
  }
  if (c.command == "restore") {
    j["checkpoint"] = path(c.checkpoint);
    j["video"] = path(c.video);
    j["audio"] = path(c.audio);
    j["emotion"] = c.emotion;
    j["output"] = path(c.output);
    j["deterministic"] = c.deterministic;
    return j;
  }
  j["manifest"] = path(c.manifest);
  if (c.command != "prepare-data") j["data"] = path(c.data);
  j["out"] = path(c.out);
  j["crf"] = c.crf;
  j["codec"] = c.codec;
  if (c.command == "prepare-data") {
    j["scale"] = c.scale;
    j["encoder"] = c.encoder;
    j["allow_nonstandard_crf"] = c.allow_nonstandard_crf;
    return j;
  }
  j["split"] = c.split;
  j["deterministic"] = c.deterministic;
  if (c.command == "eval") {
    j["checkpoint"] = path(c.checkpoint);
    return j;
  }
  j["resume"] = path(c.resume);
  j["max_steps"] = c.max_steps;
  j["miniature"] = c.miniature;
  j["train"] = mmsd::to_json(c.train);
  j["model"] = mmsd::to_json(c.model);
  return j;
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

/// Config-file layer; flags are applied on top afterwards.
void apply_config_file(RunConfig& c, const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw ValidationError("cannot open config file " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config file " + file.string() + ": " + e.what());
  }
  require(j.is_object(), "config file must hold a JSON object");
  static const std::set<std::string> known = {
      "manifest", "data", "out", "checkpoint", "resume", "crf", "codec", "allow_nonstandard_crf", "encoder",
      "scale", "split", "deterministic", "miniature", "max_steps", "clips", "frames", "height", "width", "fps",
      "video", "audio", "output", "emotion", "seed", "train", "model"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ValidationError("config file: unknown key '" + key + "'");
  try {
    auto path_key = [&](const char* key, fs::path& out) {
      if (j.contains(key)) out = j.at(key).get<std::string>();
    };
    path_key("manifest", c.manifest);
    path_key("data", c.data);
    path_key("out", c.out);
    path_key("checkpoint", c.checkpoint);
    path_key("resume", c.resume);
    path_key("video", c.video);
    path_key("audio", c.audio);
    path_key("output", c.output);
    if (j.contains("crf")) c.crf = j["crf"].is_array() ? j["crf"].get<std::vector<int>>() : std::vector<int>{j["crf"].get<int>()};
    take(j, "codec", c.codec);
    take(j, "allow_nonstandard_crf", c.allow_nonstandard_crf);
    take(j, "encoder", c.encoder);
    take(j, "scale", c.scale);
    take(j, "split", c.split);
    take(j, "deterministic", c.deterministic);
    take(j, "miniature", c.miniature);
    take(j, "max_steps", c.max_steps);
    take(j, "clips", c.clips);
    take(j, "frames", c.frames);
    take(j, "height", c.height);
    take(j, "width", c.width);
    take(j, "fps", c.fps);
    take(j, "emotion", c.emotion);
    if (j.contains("seed")) {
      c.train.seed = j["seed"].get<std::uint64_t>();
      c.train_keys.insert("seed");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config file: ") + e.what());
  }
  if (j.contains("train")) {
    update_from_json(c.train, j["train"]);
    for (const auto& [key, value] : j["train"].items()) c.train_keys.insert(key);
  }
  if (j.contains("model")) c.model_overrides = j["model"];
}

// ---- commands ---------------------------------------------------------------

int cmd_fixtures(RunConfig& c) {
  require(!c.out.empty(), "fixtures: --out is required");
  FixtureOptions o;
  if (c.train_keys.count("seed")) o.seed = c.train.seed;
  c.train.seed = o.seed;
  o.n_clips = c.clips;
  o.n_frames = c.frames;
  if (c.miniature) {
    const ModelConfig m = ModelConfig::miniature();
    c.height = m.hq_height();
    c.width = m.hq_width();
  }
  o.height = c.height;
  o.width = c.width;
  o.fps = c.fps;
  log_event({{"event", "config"}, {"config", to_json(c)}});
  const DatasetManifest m = make_fixture(c.out, o);
  log_event({{"event", "fixtures.done"}, {"clips", m.records.size()}, {"manifest", (c.out / "manifest.jsonl").string()}});
  return kOk;
}

int cmd_prepare(RunConfig& c) {
  require(!c.manifest.empty() && !c.out.empty(), "prepare-data: --manifest and --out are required");
  if (c.crf.empty() && c.codec) c.crf = {15, 32, 40};
  log_event({{"event", "config"}, {"config", to_json(c)}});
  PrepareOptions o;
  o.crfs = c.crf;
  o.scale = c.scale;
  o.encoder.executable = c.encoder;
  o.encoder.codec = c.codec;
  o.encoder.allow_nonstandard_crf = c.allow_nonstandard_crf;
  const PrepareSummary s = prepare_dataset(c.manifest, c.out, o, log_event);
  ordered_json failures = ordered_json::array();
  for (const auto& [clip, why] : s.failures) failures.push_back({{"clip", clip}, {"error", why}});
  log_event({{"event", "prepare.summary"}, {"written", s.written}, {"skipped", s.skipped},
             {"failed", s.failures.size()}, {"failures", failures}});
  return s.failures.empty() ? kOk : kRuntime;
}

std::optional<int> single_variant(const RunConfig& c) {
  if (!c.codec) return std::nullopt;
  require(c.crf.size() == 1, "train: exactly one --crf variant is trained on");
  return c.crf[0];
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::vector<std::string> lines;
  std::ifstream is(p);
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  return lines;
}

int cmd_train(RunConfig& c) {
  require(!c.manifest.empty() && !c.data.empty() && !c.out.empty(), "train: --manifest, --data and --out are required");
  if (c.crf.empty()) c.crf = {32};
  if (c.split.empty()) c.split = "train";
  TrainState<double> state;
  if (!c.resume.empty()) {
    state = load_checkpoint<double>(c.resume);
    const ordered_json saved = mmsd::to_json(state.train);
    const ordered_json wanted = mmsd::to_json(c.train);
    for (const std::string& key : c.train_keys)
      if (key != "epochs" && saved.at(key) != wanted.at(key))
        throw ValidationError("train: '" + key + "' cannot change when resuming (checkpoint has " + saved.at(key).dump() + ")");
    require(c.model_overrides.empty(), "train: model settings cannot change when resuming");
    if (c.train_keys.count("epochs")) state.train.epochs = c.train.epochs;
    state.train.validate();
    c.train = state.train;
    c.model = state.model;
    c.miniature = state.train.miniature;
  } else {
    c.train.miniature = c.train.miniature || c.miniature;
    c.miniature = c.train.miniature;
    c.model = c.miniature ? ModelConfig::miniature() : ModelConfig::paper();
    update_from_json(c.model, c.model_overrides);
    c.model.validate();
    c.train.validate();
    state = TrainState<double>::initial(c.model, c.train);
  }
  log_event({{"event", "config"}, {"config", to_json(c)}});

  const auto clips = load_prepared(c.manifest, c.data, single_variant(c), c.split);
  std::vector<SampleWindow> samples;
  for (const DegradedClip& clip : clips) {
    require(clip.lq_frames[0].height == c.model.lq_height && clip.lq_frames[0].width == c.model.lq_width,
            "train: clip '" + clip.id + "' is " + std::to_string(clip.lq_frames[0].width) + "x" +
                std::to_string(clip.lq_frames[0].height) + " but the model expects " + std::to_string(c.model.lq_width) +
                "x" + std::to_string(c.model.lq_height) + " (use fixtures --miniature for the miniature model)");
    for (SampleWindow& w : windows(clip, c.model.half_window)) samples.push_back(std::move(w));
  }
  log_event({{"event", "train.data"}, {"clips", clips.size()}, {"samples", samples.size()},
             {"start_step", state.step}, {"start_epoch", state.epoch}});

  fs::create_directories(c.out);
  const fs::path log_path = c.out / "loss_log.csv";
  const std::string header = "step,epoch,adversarial,l1,l_adv,l_e,total,d_loss";
  std::vector<std::string> kept{header};
  if (!c.resume.empty() && fs::exists(log_path)) {
    // Drop rows past the checkpoint so step numbers stay unique.
    for (const std::string& line : read_lines(log_path)) {
      if (line.empty() || line == header) continue;
      if (std::stoll(line.substr(0, line.find(','))) < state.step) kept.push_back(line);
    }
  }
  std::ofstream loss_log(log_path, std::ios::trunc);
  for (const std::string& line : kept) loss_log << line << "\n";

  char row[256];
  TrainCallbacks cb;
  cb.max_steps = c.max_steps;
  cb.on_step = [&](const StepReport& r) {
    std::snprintf(row, sizeof(row), "%lld,%lld,%d,%.10g,%.10g,%.10g,%.10g,%.10g", static_cast<long long>(r.step),
                  static_cast<long long>(r.epoch), r.adversarial ? 1 : 0, r.loss.l1, r.loss.l_adv, r.loss.l_e,
                  r.loss.total, r.discriminator_loss);
    loss_log << row << "\n" << std::flush;
  };
  cb.on_epoch_end = [&] {
    save_checkpoint(state, c.out / ("epoch_" + std::to_string(state.epoch) + ".ckpt"));
    save_checkpoint(state, c.out / "latest.ckpt");
    log_event({{"event", "train.epoch"}, {"epoch", state.epoch}, {"step", state.step}});
  };
  const auto start = std::chrono::steady_clock::now();
  train_epochs(state, samples, cb);
  save_checkpoint(state, c.out / "latest.ckpt");
  log_event({{"event", "train.done"}, {"step", state.step}, {"epoch", state.epoch},
             {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
             {"checkpoint", (c.out / "latest.ckpt").string()}});
  return kOk;
}

int cmd_eval(RunConfig& c) {
  require(!c.manifest.empty() && !c.data.empty(), "eval: --manifest and --data are required");
  if (c.split.empty()) c.split = "val";
  if (c.crf.empty() && c.codec) c.crf = {15, 32, 40};
  log_event({{"event", "config"}, {"config", to_json(c)}});
  std::optional<Generator<double>> generator;
  if (!c.checkpoint.empty()) generator = load_checkpoint<double>(c.checkpoint).generator;

  EvalReport report;
  std::vector<std::optional<int>> variants;
  if (c.codec)
    for (int crf : c.crf) variants.emplace_back(crf);
  else
    variants.emplace_back(std::nullopt);
  for (const auto& crf : variants) {
    const auto clips = load_prepared(c.manifest, c.data, crf, c.split);
    EvalReport part = evaluate(clips, generator ? &*generator : nullptr);
    report.clips.insert(report.clips.end(), part.clips.begin(), part.clips.end());
    int frames = 0;
    for (const auto& clip : clips) frames += static_cast<int>(clip.hq_frames.size());
    log_event({{"event", "eval.variant"}, {"variant", variant_name(crf)}, {"clips", clips.size()}, {"frames", frames}});
  }
  std::ostringstream table;
  report.write_table(table, c.crf.empty() ? std::vector<int>{} : c.crf);
  std::cout << table.str();
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    std::ofstream(c.out / "eval_table.txt") << table.str();
    std::ofstream records(c.out / "eval.jsonl");
    report.write_jsonl(records);
  }
  log_event({{"event", "eval.done"}, {"records", report.clips.size()}});
  return kOk;
}

int cmd_restore(RunConfig& c) {
  if (c.emotion.empty())
    throw ValidationError("restore: --emotion is required; one of: " + emotion_state_names());
  require(!c.checkpoint.empty() && !c.video.empty() && !c.audio.empty() && !c.output.empty(),
          "restore: --checkpoint, --video, --audio and --output are required");
  const EmotionState emotion = emotion_from_name(c.emotion);
  log_event({{"event", "config"}, {"config", to_json(c)}});
  const Generator<double> generator = load_checkpoint<double>(c.checkpoint).generator;
  const RawVideo lq = read_raw_video(c.video);
  require(!lq.frames.empty(), "restore: input video has no frames");
  Audio audio = read_wav(c.audio);
  if (audio.rate != kAudioRate) audio = resample(audio, kAudioRate);
  const Eigen::MatrixXd mfcc = extract_mfcc(audio, lq.fps, static_cast<int>(lq.frames.size()));
  const std::vector<Frame> out = restore_frames(generator, lq.frames, mfcc, emotion);
  if (c.output.has_parent_path()) fs::create_directories(c.output.parent_path());
  write_raw_video(c.output, RawVideo{out, lq.fps});
  log_event({{"event", "restore.done"}, {"frames", out.size()}, {"width", out[0].width}, {"height", out[0].height},
             {"output", c.output.string()}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal soft decoding of compressed talking-face video"};
  app.require_subcommand(1);
  RunConfig c;
  std::string config_file;

  struct Flags {
    std::optional<std::string> manifest, data, out, checkpoint, resume, encoder, split, video, audio, output, emotion;
    std::optional<std::vector<int>> crf;
    std::optional<int> scale, clips, frames, height, width, batch_size, epochs, warmup_epochs;
    std::optional<double> fps, lr, lambda1, lambda2;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> max_steps;
    bool no_codec = false, allow_nonstandard_crf = false, miniature = false, deterministic = false;
  } f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "JSON config file (flags take precedence)");
  };
  auto* fixtures = app.add_subcommand("fixtures", "Write synthetic talking-face clips and a manifest");
  common(fixtures);
  fixtures->add_option("--out", f.out, "Output directory");
  fixtures->add_option("--seed", f.seed);
  fixtures->add_option("--clips", f.clips);
  fixtures->add_option("--frames", f.frames);
  fixtures->add_option("--height", f.height);
  fixtures->add_option("--width", f.width);
  fixtures->add_option("--fps", f.fps);
  fixtures->add_flag("--miniature", f.miniature, "Size clips for the miniature model");

  auto* prepare = app.add_subcommand("prepare-data", "Downsample and H.264-degrade every clip");
  common(prepare);
  prepare->add_option("--manifest", f.manifest);
  prepare->add_option("--out", f.out);
  prepare->add_option("--crf", f.crf, "CRF values")->delimiter(',');
  prepare->add_option("--scale", f.scale);
  prepare->add_option("--encoder", f.encoder, "Encoder executable");
  prepare->add_flag("--no-codec", f.no_codec, "Downsample only (no H.264 round trip)");
  prepare->add_flag("--allow-nonstandard-crf", f.allow_nonstandard_crf);

  auto* train = app.add_subcommand("train", "Train the restoration network");
  common(train);
  train->add_option("--manifest", f.manifest);
  train->add_option("--data", f.data, "Directory written by prepare-data");
  train->add_option("--out", f.out);
  train->add_option("--crf", f.crf, "CRF variant to train on")->delimiter(',');
  train->add_flag("--no-codec", f.no_codec, "Train on the downsample-only variant");
  train->add_option("--split", f.split);
  train->add_option("--resume", f.resume, "Checkpoint to continue from");
  train->add_option("--seed", f.seed);
  train->add_option("--batch-size,--batch_size", f.batch_size);
  train->add_option("--epochs", f.epochs);
  train->add_option("--warmup-epochs,--warmup_epochs", f.warmup_epochs);
  train->add_option("--lr", f.lr);
  train->add_option("--lambda1", f.lambda1);
  train->add_option("--lambda2", f.lambda2);
  train->add_option("--max-steps,--max_steps", f.max_steps, "Stop after this many steps in this run");
  train->add_flag("--miniature", f.miniature);
  train->add_flag("--deterministic", f.deterministic);

  auto* eval = app.add_subcommand("eval", "Face-region PSNR/SSIM against the bicubic baseline");
  common(eval);
  eval->add_option("--manifest", f.manifest);
  eval->add_option("--data", f.data);
  eval->add_option("--out", f.out);
  eval->add_option("--checkpoint", f.checkpoint, "Omit to report the bicubic baseline only");
  eval->add_option("--crf", f.crf)->delimiter(',');
  eval->add_flag("--no-codec", f.no_codec);
  eval->add_option("--split", f.split);
  eval->add_flag("--deterministic", f.deterministic);

  auto* restore = app.add_subcommand("restore", "Restore a low-quality clip");
  common(restore);
  restore->add_option("--checkpoint", f.checkpoint);
  restore->add_option("--video", f.video, "Low-quality .rgbv video");
  restore->add_option("--audio", f.audio, "WAV audio track");
  restore->add_option("--emotion", f.emotion, "Emotion state, e.g. neutral or happy-strong");
  restore->add_option("--output", f.output, "Restored .rgbv video");
  restore->add_flag("--deterministic", f.deterministic);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    c.command = app.get_subcommands().front()->get_name();
    if (!config_file.empty()) apply_config_file(c, config_file);
    auto set_path = [](const std::optional<std::string>& v, fs::path& out) {
      if (v) out = *v;
    };
    set_path(f.manifest, c.manifest);
    set_path(f.data, c.data);
    set_path(f.out, c.out);
    set_path(f.checkpoint, c.checkpoint);
    set_path(f.resume, c.resume);
    set_path(f.video, c.video);
    set_path(f.audio, c.audio);
    set_path(f.output, c.output);
    if (f.encoder) c.encoder = *f.encoder;
    if (f.split) c.split = *f.split;
    if (f.emotion) c.emotion = *f.emotion;
    if (f.crf) c.crf = *f.crf;
    if (f.scale) c.scale = *f.scale;
    if (f.clips) c.clips = *f.clips;
    if (f.frames) c.frames = *f.frames;
    if (f.height) c.height = *f.height;
    if (f.width) c.width = *f.width;
    if (f.fps) c.fps = *f.fps;
    if (f.max_steps) c.max_steps = *f.max_steps;
    if (f.no_codec) c.codec = false;
    if (f.allow_nonstandard_crf) c.allow_nonstandard_crf = true;
    if (f.miniature) c.miniature = true;
    if (f.deterministic) c.deterministic = true;
    auto set_train = [&](const char* key, auto& field, const auto& value) {
      if (value) {
        field = *value;
        c.train_keys.insert(key);
      }
    };
    set_train("seed", c.train.seed, f.seed);
    set_train("batch_size", c.train.batch_size, f.batch_size);
    set_train("epochs", c.train.epochs, f.epochs);
    set_train("warmup_epochs", c.train.warmup_epochs, f.warmup_epochs);
    set_train("lr", c.train.lr, f.lr);
    set_train("lambda1", c.train.lambda1, f.lambda1);
    set_train("lambda2", c.train.lambda2, f.lambda2);
    if (c.deterministic) Eigen::setNbThreads(1);

    if (c.command == "fixtures") return cmd_fixtures(c);
    if (c.command == "prepare-data") return cmd_prepare(c);
    if (c.command == "train") return cmd_train(c);
    if (c.command == "eval") return cmd_eval(c);
    return cmd_restore(c);
  } catch (const ValidationError& e) {
    log_event({{"event", "error"}, {"kind", "validation"}, {"message", e.what()}});
    return kValidation;
  } catch (const EnvironmentError& e) {
    log_event({{"event", "error"}, {"kind", "environment"}, {"message", e.what()}});
    return kEnvironment;
  } catch (const std::exception& e) {
    log_event({{"event", "error"}, {"kind", "runtime"}, {"message", e.what()}});
    return kRuntime;
  }
}
