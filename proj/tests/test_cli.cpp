#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <fstream>
#include <sstream>

#include "mmsd/dataset.hpp"
#include "mmsd/degrade.hpp"
#include "support/tempdir.hpp"

using namespace mmsd;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

class Workspace {
 public:
  Workspace() : dir_("cli") {}

  RunResult run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = quote(MMSD_CLI) + " " + args + " > " + quote(out.string()) + " 2> " + quote(err.string());
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  fs::path path(const std::string& leaf) const { return dir_ / leaf; }
  std::string arg(const std::string& leaf) const { return quote(path(leaf).string()); }

  bool codec() const { return codec_; }
  std::string variant_flags() const { return codec_ ? "" : " --no-codec"; }
  std::string variant_dir() const { return codec_ ? "crf32" : "nocodec"; }
  int variants_per_clip() const { return codec_ ? 3 : 1; }

  // fixtures (4 miniature clips of 6 frames) and their prepared variants
  const RunResult& prepared() {
    if (!prepared_) {
      REQUIRE(run("fixtures --miniature --frames 6 --out " + arg("fx")).code == 0);
      prepared_ = run("prepare-data --manifest " + arg("fx/manifest.jsonl") + " --out " + arg("data") + variant_flags());
    }
    return *prepared_;
  }

  std::string data_args() {
    prepared();
    return " --manifest " + arg("fx/manifest.jsonl") + " --data " + arg("data") +
           (codec_ ? " --crf 32" : " --no-codec");
  }

  const RunResult& trained() {
    if (!trained_) {
      const auto start = std::chrono::steady_clock::now();
      trained_ = run("train --miniature --epochs 2 --warmup-epochs 1 --batch-size 4 --seed 3 --out " + arg("run") +
                     data_args());
      train_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return *trained_;
  }
  double train_seconds() const { return train_seconds_; }

 private:
  mmsd::testing::TempDir dir_;
  bool codec_ = find_executable(EncoderConfig{}.executable).has_value();
  std::optional<RunResult> prepared_, trained_;
  double train_seconds_ = 0;
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("prepare-data writes every variant once and is idempotent") {
  auto& w = workspace();
  const RunResult& first = w.prepared();
  REQUIRE(first.code == 0);
  const int expected = 4 * w.variants_per_clip();
  CHECK(first.err.find("\"written\":" + std::to_string(expected)) != std::string::npos);
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(w.path("data")))
    if (e.path().extension() == ".rgbv") ++files;
  CHECK(files == expected);

  const RunResult again =
      w.run("prepare-data --manifest " + w.arg("fx/manifest.jsonl") + " --out " + w.arg("data") + w.variant_flags());
  CHECK(again.code == 0);
  CHECK(again.err.find("\"written\":0,\"skipped\":" + std::to_string(expected)) != std::string::npos);
}

TEST_CASE("prepare-data reports a corrupt clip and exits nonzero") {
  auto& w = workspace();
  w.prepared();
  fs::copy(w.path("fx"), w.path("fx_bad"), fs::copy_options::recursive);
  const auto manifest = load_manifest(w.path("fx_bad/manifest.jsonl"));
  const fs::path victim = manifest.records[1].hq_video;
  fs::resize_file(victim, fs::file_size(victim) / 2);
  const RunResult r =
      w.run("prepare-data --manifest " + w.arg("fx_bad/manifest.jsonl") + " --out " + w.arg("data_bad") + w.variant_flags());
  CHECK(r.code == 4);
  CHECK(r.err.find("\"failed\":1") != std::string::npos);
  CHECK(r.err.find("\"clip\":\"" + manifest.records[1].id + "\"") != std::string::npos);
  CHECK(r.err.find("\"written\":" + std::to_string(3 * w.variants_per_clip())) != std::string::npos);
}

TEST_CASE("miniature training runs two epochs and logs every loss term") {
  auto& w = workspace();
  const RunResult& r = w.trained();
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(w.train_seconds() < 300);
  CHECK(fs::exists(w.path("run/epoch_1.ckpt")));
  CHECK(fs::exists(w.path("run/epoch_2.ckpt")));
  CHECK(fs::exists(w.path("run/latest.ckpt")));
  const auto log = lines(slurp(w.path("run/loss_log.csv")));
  REQUIRE(log.size() > 2);
  CHECK(log[0] == "step,epoch,adversarial,l1,l_adv,l_e,total,d_loss");
  // 3 train clips x 6 windows, batch 4 -> 5 steps per epoch
  CHECK(log.size() == 1 + 10);
  CHECK(log[1].rfind("0,0,0,", 0) == 0);
  CHECK(log.back().rfind("9,1,1,", 0) == 0);
}

TEST_CASE("an interrupted run resumes to the same checkpoint") {
  auto& w = workspace();
  REQUIRE(w.trained().code == 0);
  const std::string common = "train --miniature --epochs 2 --warmup-epochs 1 --batch-size 4 --seed 3 --out " + w.arg("split");
  REQUIRE(w.run(common + " --max-steps 7" + w.data_args()).code == 0);
  const RunResult resumed = w.run("train --resume " + w.arg("split/latest.ckpt") + " --out " + w.arg("split") + w.data_args());
  REQUIRE_MESSAGE(resumed.code == 0, resumed.err);
  CHECK(resumed.err.find("\"start_step\":7") != std::string::npos);
  const auto log = lines(slurp(w.path("split/loss_log.csv")));
  REQUIRE(log.size() == 11);
  for (int s = 0; s < 10; ++s) CHECK(log[s + 1].rfind(std::to_string(s) + ",", 0) == 0);
  CHECK(slurp(w.path("split/latest.ckpt")) == slurp(w.path("run/latest.ckpt")));

  const RunResult changed =
      w.run("train --resume " + w.arg("split/latest.ckpt") + " --lr 0.5 --out " + w.arg("split") + w.data_args());
  CHECK(changed.code == 2);
  CHECK(changed.err.find("'lr' cannot change") != std::string::npos);
}

TEST_CASE("eval prints the comparison table") {
  auto& w = workspace();
  REQUIRE(w.trained().code == 0);
  const RunResult r = w.run("eval --checkpoint " + w.arg("run/latest.ckpt") + " --out " + w.arg("eval") +
                            " --manifest " + w.arg("fx/manifest.jsonl") + " --data " + w.arg("data") +
                            (w.codec() ? "" : " --no-codec"));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("Bicubic") != std::string::npos);
  CHECK(r.out.find("MMSD") != std::string::npos);
  if (w.codec()) CHECK(r.out.find("CRF=40 (4x)") != std::string::npos);
  CHECK(slurp(w.path("eval/eval_table.txt")) == r.out);
  CHECK(fs::exists(w.path("eval/eval.jsonl")));
}

TEST_CASE("restore upsamples 4x, deterministically") {
  auto& w = workspace();
  REQUIRE(w.trained().code == 0);
  const auto manifest = load_manifest(w.path("fx/manifest.jsonl"));
  const std::string id = manifest.records[3].id;
  const std::string base = "restore --checkpoint " + w.arg("run/latest.ckpt") + " --video " +
                           w.arg("data/" + w.variant_dir() + "/" + id + ".rgbv") + " --audio " +
                           quote(manifest.records[3].audio.string());
  const RunResult a = w.run(base + " --emotion happy-strong --output " + w.arg("restored_a.rgbv"));
  REQUIRE_MESSAGE(a.code == 0, a.err);
  const RunResult b = w.run(base + " --emotion happy-strong --output " + w.arg("restored_b.rgbv"));
  REQUIRE(b.code == 0);
  const RawVideo lq = read_raw_video(w.path("data/" + w.variant_dir() + "/" + id + ".rgbv"));
  const RawVideo out = read_raw_video(w.path("restored_a.rgbv"));
  CHECK(out.frames.size() == lq.frames.size());
  CHECK(out.frames[0].height == 4 * lq.frames[0].height);
  CHECK(out.frames[0].width == 4 * lq.frames[0].width);
  CHECK(slurp(w.path("restored_a.rgbv")) == slurp(w.path("restored_b.rgbv")));

  const RunResult missing = w.run(base + " --output " + w.arg("restored_c.rgbv"));
  CHECK(missing.code == 2);
  CHECK(missing.err.find("neutral") != std::string::npos);
  CHECK(missing.err.find("surprised-strong") != std::string::npos);
  CHECK_FALSE(fs::exists(w.path("restored_c.rgbv")));
  CHECK(w.run(base + " --emotion elated --output " + w.arg("restored_c.rgbv")).code == 2);
}

TEST_CASE("config files: unknown keys rejected, flags take precedence") {
  auto& w = workspace();
  w.prepared();
  std::ofstream(w.path("bad.json")) << R"({"manifest": "m.jsonl", "learning_rate": 0.1})";
  const RunResult bad = w.run("train --config " + w.arg("bad.json") + " --out " + w.arg("cfg"));
  CHECK(bad.code == 2);
  CHECK(bad.err.find("unknown key 'learning_rate'") != std::string::npos);

  std::ofstream(w.path("good.json")) << R"({"train": {"epochs": 3, "lr": 0.0002}, "max_steps": 1})";
  const RunResult r =
      w.run("train --miniature --config " + w.arg("good.json") + " --epochs 5 --out " + w.arg("cfg") + w.data_args());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.err.find("\"epochs\":5") != std::string::npos);
  CHECK(r.err.find("\"lr\":0.0002") != std::string::npos);
  CHECK(lines(slurp(w.path("cfg/loss_log.csv"))).size() == 2);
}

TEST_CASE("exit codes for bad usage and a missing encoder") {
  auto& w = workspace();
  CHECK(w.run("train --no-such-flag").code == 2);
  CHECK(w.run("").code == 2);
  CHECK(w.run("train --out " + w.arg("x")).code == 2);
  w.prepared();
  const RunResult r = w.run("prepare-data --manifest " + w.arg("fx/manifest.jsonl") + " --out " + w.arg("enc") +
                            " --encoder no-such-encoder-mmsd");
  CHECK(r.code == 3);
  CHECK(r.err.find("no-such-encoder-mmsd") != std::string::npos);
  const RunResult crf = w.run("prepare-data --manifest " + w.arg("fx/manifest.jsonl") + " --out " + w.arg("enc") +
                              " --crf 23");
  CHECK(crf.code == 2);
}
