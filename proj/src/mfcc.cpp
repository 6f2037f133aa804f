#include "mmsd/mfcc.hpp"

#include <cmath>
#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "mmsd/errors.hpp"

namespace mmsd {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

double mfcc_log_floor(const MfccOptions& options) { return std::log(options.energy_floor); }

Eigen::MatrixXd mel_filterbank(int rate, const MfccOptions& options) {
  const int bins = options.fft_size / 2 + 1;
  Eigen::MatrixXd bank = Eigen::MatrixXd::Zero(options.mel_filters, bins);
  const double lo = hz_to_mel(options.low_hz);
  const double hi = hz_to_mel(std::min(options.high_hz, rate / 2.0));
  std::vector<double> edges(options.mel_filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / (options.mel_filters + 1));
  for (int m = 0; m < options.mel_filters; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int b = 0; b < bins; ++b) {
      const double hz = static_cast<double>(b) * rate / options.fft_size;
      if (hz > left && hz < center) bank(m, b) = (hz - left) / (center - left);
      else if (hz >= center && hz < right) bank(m, b) = (right - hz) / (right - center);
    }
  }
  return bank;
}

Eigen::MatrixXd extract_mfcc(const Audio& audio, double fps, int n_frames, const MfccOptions& options) {
  require(fps > 0 && n_frames >= 0, "extract_mfcc: invalid fps or frame count");
  const double needed = n_frames / fps;
  if (audio.duration() + 1e-9 < needed)
    throw ValidationError("extract_mfcc: audio lasts " + std::to_string(audio.duration()) + " s but " +
                          std::to_string(n_frames) + " frames at " + std::to_string(fps) + " fps need " +
                          std::to_string(needed) + " s");
  const int window = static_cast<int>(std::lround(options.window_seconds * audio.rate));
  require(window <= options.fft_size, "extract_mfcc: analysis window longer than the FFT");
  const int bins = options.fft_size / 2 + 1;
  const Eigen::MatrixXd bank = mel_filterbank(audio.rate, options);

  Eigen::VectorXd hamming(window);
  for (int i = 0; i < window; ++i) hamming[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (window - 1));

  // Orthonormal DCT-II rows.
  Eigen::MatrixXd dct(options.coefficients, options.mel_filters);
  for (int k = 0; k < options.coefficients; ++k)
    for (int m = 0; m < options.mel_filters; ++m)
      dct(k, m) = std::sqrt((k == 0 ? 1.0 : 2.0) / options.mel_filters) *
                  std::cos(M_PI * k * (m + 0.5) / options.mel_filters);

  Eigen::FFT<double> fft;
  std::vector<double> frame(options.fft_size);
  std::vector<std::complex<double>> spectrum;
  Eigen::MatrixXd out(n_frames, options.coefficients);
  const long total = static_cast<long>(audio.samples.size());
  for (int k = 0; k < n_frames; ++k) {
    const long center = std::lround((k + 0.5) / fps * audio.rate);
    const long start = center - window / 2;
    std::fill(frame.begin(), frame.end(), 0.0);
    double previous = (start - 1 >= 0 && start - 1 < total) ? audio.samples[start - 1] : 0.0;
    for (int i = 0; i < window; ++i) {
      const long idx = start + i;
      const double s = (idx >= 0 && idx < total) ? audio.samples[idx] : 0.0;
      frame[i] = (s - options.preemphasis * previous) * hamming[i];
      previous = s;
    }
    fft.fwd(spectrum, frame);
    Eigen::VectorXd power(bins);
    for (int b = 0; b < bins; ++b) power[b] = std::norm(spectrum[b]);
    Eigen::VectorXd energies = bank * power;
    for (int m = 0; m < options.mel_filters; ++m)
      energies[m] = std::log(std::max(energies[m], options.energy_floor));
    out.row(k) = (dct * energies).transpose();
  }
  return out;
}

}  // namespace mmsd
