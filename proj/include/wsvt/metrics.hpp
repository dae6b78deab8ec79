#pragma once

// Image-quality and detection metrics for recovered foregrounds.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wsvt/frame.hpp"

namespace wsvt {

/// Peak signal-to-noise ratio in dB with peak value 255. Returns +infinity
/// when the frames are identical.
double psnr(const Frame& estimate, const Frame& truth);

/// Local SSIM over the valid region: an 11x11 Gaussian window (sigma 1.5) is
/// placed only where it fits, so the map is (width - 10) x (height - 10).
struct SsimMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  ///< row-major
};

SsimMap ssim_map(const Frame& estimate, const Frame& truth);
/// Mean of the SSIM map.
double mssim(const Frame& estimate, const Frame& truth);

/// 255 where |pixel| >= eps1, 0 elsewhere.
Frame foreground_mask(const Frame& foreground, double eps1);

struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// {0, 15, 20, 25, 30} followed by 31, 33.5, ..., 253.5.
std::vector<double> default_roc_thresholds();

/// Scores predict foreground where score >= t. `labels` are nonzero for
/// positives. Confusion counts are pooled across all samples. Thresholds must
/// be ascending; at least one positive and one negative label are required.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                const std::vector<double>& thresholds);
/// Pools over aligned frame sequences; a mask pixel is positive when nonzero.
std::vector<RocPoint> roc_curve(const std::vector<Frame>& scores, const std::vector<Frame>& masks,
                                const std::vector<double>& thresholds);

/// Trapezoidal area under the points sorted by FPR (ties by TPR). Needs >= 2 points.
double auc(std::vector<RocPoint> points);

struct MetricsReport {
  std::vector<double> psnr;  ///< +infinity for exact frames
  double mean_psnr_finite = 0.0;  ///< NaN if every frame is exact
  int inf_count = 0;
  std::vector<double> mssim;
  double mean_mssim = 0.0;
  std::vector<RocPoint> roc;
  double auc = 0.0;
};

/// `truth` holds ground-truth foreground masks. PSNR and MSSIM compare the
/// thresholded `estimates` against them; ROC and AUC rank the unthresholded `scores`.
MetricsReport evaluate(const std::vector<Frame>& estimates, const std::vector<Frame>& scores,
                       const std::vector<Frame>& truth, const std::vector<double>& thresholds);

/// {"psnr", "mean_psnr_finite", "inf_count", "mssim", "mean_mssim", "roc", "auc"};
/// infinite or NaN values are written as null.
std::string metrics_json(const MetricsReport& report);

/// CSV with header threshold,tpr,fpr,tp,fp,tn,fn.
void write_roc_csv(const std::filesystem::path& path, const std::vector<RocPoint>& points);

}  // namespace wsvt
