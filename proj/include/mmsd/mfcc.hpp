#pragma once

#include <Eigen/Core>

#include "mmsd/dataset.hpp"

namespace mmsd {

struct MfccOptions {
  int coefficients = kMfccCoefficients;
  double window_seconds = 0.025;
  int fft_size = 512;
  int mel_filters = 26;
  double low_hz = 0.0;
  double high_hz = 8000.0;
  double preemphasis = 0.97;
  double energy_floor = 1e-10;
};

/// log(energy_floor): the log filterbank value of a silent window.
double mfcc_log_floor(const MfccOptions& options = {});

/// Triangular HTK-mel filters over the one-sided spectrum, (filters × fft/2+1).
Eigen::MatrixXd mel_filterbank(int rate, const MfccOptions& options = {});

/// One row of coefficients per video frame; row k analyses the window
/// centred at (k + 0.5) / fps seconds (pre-emphasis, Hamming, power
/// spectrum, log mel energies, orthonormal DCT-II).
Eigen::MatrixXd extract_mfcc(const Audio& audio, double fps, int n_frames, const MfccOptions& options = {});

}  // namespace mmsd
