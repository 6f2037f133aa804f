#include <doctest.h>

#include <cmath>

#include "mmsd/mfcc.hpp"

using namespace mmsd;

namespace {

Audio tone(double hz, double seconds, double amplitude = 0.5) {
  Audio a;
  a.rate = kAudioRate;
  const int n = static_cast<int>(seconds * a.rate);
  for (int i = 0; i < n; ++i) a.samples.push_back(static_cast<float>(amplitude * std::sin(2 * M_PI * hz * i / a.rate)));
  return a;
}

// Frame k computed with a direct O(n^2) DFT and an explicit DCT sum.
Eigen::VectorXd reference_row(const Audio& audio, double fps, int k) {
  const MfccOptions o;
  const int window = 400, n = o.fft_size;
  const long center = std::lround((k + 0.5) / fps * audio.rate);
  const long start = center - window / 2;
  auto sample = [&](long i) { return i >= 0 && i < long(audio.samples.size()) ? double(audio.samples[i]) : 0.0; };
  std::vector<double> x(n, 0.0);
  for (int i = 0; i < window; ++i) {
    const double w = 0.54 - 0.46 * std::cos(2 * M_PI * i / (window - 1));
    x[i] = (sample(start + i) - 0.97 * sample(start + i - 1)) * w;
  }
  const Eigen::MatrixXd bank = mel_filterbank(audio.rate, o);
  Eigen::VectorXd power(n / 2 + 1);
  for (int b = 0; b <= n / 2; ++b) {
    double re = 0, im = 0;
    for (int i = 0; i < n; ++i) {
      re += x[i] * std::cos(2 * M_PI * b * i / n);
      im -= x[i] * std::sin(2 * M_PI * b * i / n);
    }
    power[b] = re * re + im * im;
  }
  Eigen::VectorXd logmel = (bank * power).array().max(o.energy_floor).log();
  Eigen::VectorXd out(o.coefficients);
  for (int c = 0; c < o.coefficients; ++c) {
    double acc = 0;
    for (int m = 0; m < o.mel_filters; ++m) acc += logmel[m] * std::cos(M_PI * c * (m + 0.5) / o.mel_filters);
    out[c] = acc * std::sqrt((c == 0 ? 1.0 : 2.0) / o.mel_filters);
  }
  return out;
}

}  // namespace

TEST_CASE("one row of 13 coefficients per video frame") {
  const auto m = extract_mfcc(tone(440, 3.0), 25.0, 75);
  CHECK(m.rows() == 75);
  CHECK(m.cols() == 13);
  CHECK(m.allFinite());
}

TEST_CASE("MFCC matches a direct DFT reference") {
  Audio a = tone(440, 0.5);
  for (std::size_t i = 0; i < a.samples.size(); ++i) a.samples[i] += static_cast<float>(0.1 * std::sin(i * 0.7));
  const auto m = extract_mfcc(a, 25.0, 12);
  for (int k : {0, 5, 11}) CHECK((m.row(k).transpose() - reference_row(a, 25.0, k)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("a stationary tone gives identical rows") {
  // 500 Hz repeats exactly every 40 ms hop, so every analysis window sees the same samples
  const auto m = extract_mfcc(tone(500, 2.0), 25.0, 50);
  for (int k = 1; k < 50; ++k) CHECK((m.row(k) - m.row(0)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("delaying the audio by one video frame delays the rows by one") {
  const Audio a = tone(440, 2.0);
  Audio delayed = a;
  delayed.samples.insert(delayed.samples.begin(), 640, 0.0f);
  const auto m = extract_mfcc(a, 25.0, 40), d = extract_mfcc(delayed, 25.0, 41);
  CHECK((d.bottomRows(40) - m).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("silence maps to the log floor row") {
  Audio silent;
  silent.rate = kAudioRate;
  silent.samples.assign(16000, 0.0f);
  const auto m = extract_mfcc(silent, 25.0, 25);
  const double floor = mfcc_log_floor();
  // DCT of a constant vector: only c0 is nonzero, c0 = sqrt(M) * floor.
  for (int k = 0; k < 25; ++k) {
    CHECK(m(k, 0) == doctest::Approx(std::sqrt(26.0) * floor));
    CHECK(m.row(k).tail(12).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("mel filterbank rows are triangles inside the band") {
  const auto bank = mel_filterbank(kAudioRate);
  CHECK(bank.rows() == 26);
  CHECK(bank.cols() == 257);
  CHECK(bank.minCoeff() >= 0.0);
  CHECK(bank.maxCoeff() <= 1.0);
  for (int m = 0; m < 26; ++m) CHECK(bank.row(m).maxCoeff() > 0.0);
}

TEST_CASE("audio shorter than the video is rejected") {
  CHECK_THROWS_AS(extract_mfcc(tone(440, 0.3), 25.0, 10), ValidationError);
}
