#include "mmsd/metrics.hpp"

#include <string>

#include "mmsd/errors.hpp"

namespace mmsd {

namespace {

void check_mask(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Rect& mask) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "metric: image dimensions differ");
  require(mask.width > 0 && mask.height > 0, "metric: empty mask");
  require(mask.x >= 0 && mask.y >= 0 && mask.x + mask.width <= a.cols() && mask.y + mask.height <= a.rows(),
          "metric: mask outside image bounds");
}

Eigen::Matrix<double, kSsimWindow, kSsimWindow> gaussian_window() {
  Eigen::Matrix<double, kSsimWindow, kSsimWindow> w;
  const int r = kSsimWindow / 2;
  for (int i = 0; i < kSsimWindow; ++i)
    for (int j = 0; j < kSsimWindow; ++j)
      w(i, j) = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / (2.0 * kSsimSigma * kSsimSigma));
  return w / w.sum();
}

}  // namespace

Eigen::MatrixXd luma(const FeatureMaps<double>& rgb, MetricChannel channel) {
  require(rgb.channels() == 3, "luma: expected a 3-channel image");
  Eigen::MatrixXd out(rgb.height, rgb.width);
  const double wr = channel == MetricChannel::kLuma ? 0.299 : 1.0 / 3.0;
  const double wg = channel == MetricChannel::kLuma ? 0.587 : 1.0 / 3.0;
  const double wb = channel == MetricChannel::kLuma ? 0.114 : 1.0 / 3.0;
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x)
      out(y, x) = wr * rgb.at(0, y, x) + wg * rgb.at(1, y, x) + wb * rgb.at(2, y, x);
  return out;
}

double psnr_plane(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Rect& mask) {
  check_mask(a, b, mask);
  const double mse =
      (a.block(mask.y, mask.x, mask.height, mask.width) - b.block(mask.y, mask.x, mask.height, mask.width))
          .squaredNorm() /
      (static_cast<double>(mask.width) * mask.height);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim_plane(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Rect& mask) {
  check_mask(a, b, mask);
  if (mask.width < kSsimWindow || mask.height < kSsimWindow)
    throw ValidationError("ssim: mask " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                          " smaller than the 11x11 window");
  const auto w = gaussian_window();
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  int count = 0;
  for (int y = mask.y; y + kSsimWindow <= mask.y + mask.height; ++y) {
    for (int x = mask.x; x + kSsimWindow <= mask.x + mask.width; ++x) {
      const auto pa = a.block<kSsimWindow, kSsimWindow>(y, x);
      const auto pb = b.block<kSsimWindow, kSsimWindow>(y, x);
      const double mu_a = w.cwiseProduct(pa).sum();
      const double mu_b = w.cwiseProduct(pb).sum();
      const double var_a = w.cwiseProduct(pa.cwiseProduct(pa)).sum() - mu_a * mu_a;
      const double var_b = w.cwiseProduct(pb.cwiseProduct(pb)).sum() - mu_b * mu_b;
      const double cov = w.cwiseProduct(pa.cwiseProduct(pb)).sum() - mu_a * mu_b;
      total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++count;
    }
  }
  return total / count;
}

double psnr(const FeatureMaps<double>& a, const FeatureMaps<double>& b, const Rect& mask, MetricChannel channel) {
  require(a.same_shape(b), "psnr: image shapes differ");
  return psnr_plane(luma(a, channel), luma(b, channel), mask);
}

double ssim(const FeatureMaps<double>& a, const FeatureMaps<double>& b, const Rect& mask, MetricChannel channel) {
  require(a.same_shape(b), "ssim: image shapes differ");
  return ssim_plane(luma(a, channel), luma(b, channel), mask);
}

}  // namespace mmsd
