#include "wsvt/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "wsvt/errors.hpp"
#include "wsvt/file_util.hpp"

namespace wsvt {

namespace {

constexpr int kWindow = 11;
constexpr int kRadius = kWindow / 2;
constexpr double kWindowSigma = 1.5;
constexpr double kPeak = 255.0;
constexpr double kC1 = (0.01 * kPeak) * (0.01 * kPeak);
constexpr double kC2 = (0.03 * kPeak) * (0.03 * kPeak);

void require_same_shape(const Frame& a, const Frame& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height())
    throw_invalid(std::string(what) + ": frame dimensions differ (" + std::to_string(a.width()) + "x" +
                  std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()) +
                  ")");
}

std::array<double, kWindow> gaussian_kernel() {
  std::array<double, kWindow> g{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kRadius;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Valid-region separable Gaussian filter of a row-major w x h image.
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h) {
  static const auto g = gaussian_kernel();
  const int ow = w - 2 * kRadius, oh = h - 2 * kRadius;
  std::vector<double> rows(static_cast<std::size_t>(ow) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < kWindow; ++t)
        s += g[static_cast<std::size_t>(t)] * img[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                                                  static_cast<std::size_t>(x + t)];
      rows[static_cast<std::size_t>(y) * static_cast<std::size_t>(ow) + static_cast<std::size_t>(x)] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh));
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < kWindow; ++t)
        s += g[static_cast<std::size_t>(t)] * rows[static_cast<std::size_t>(y + t) * static_cast<std::size_t>(ow) +
                                                   static_cast<std::size_t>(x)];
      out[static_cast<std::size_t>(y) * static_cast<std::size_t>(ow) + static_cast<std::size_t>(x)] = s;
    }
  return out;
}

nlohmann::json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

double psnr(const Frame& estimate, const Frame& truth) {
  require_same_shape(estimate, truth, "psnr");
  double sse = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double d = estimate.pixels()[i] - truth.pixels()[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(estimate.size());
  return 10.0 * std::log10(kPeak * kPeak / mse);
}

SsimMap ssim_map(const Frame& estimate, const Frame& truth) {
  require_same_shape(estimate, truth, "ssim");
  const int w = estimate.width(), h = estimate.height();
  if (w < kWindow || h < kWindow)
    throw_invalid("ssim: frame " + std::to_string(w) + "x" + std::to_string(h) + " is smaller than the 11x11 window");

  const auto& a = estimate.pixels();
  const auto& b = truth.pixels();
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, w, h);
  const auto mu_b = filter_valid(b, w, h);
  const auto e_aa = filter_valid(aa, w, h);
  const auto e_bb = filter_valid(bb, w, h);
  const auto e_ab = filter_valid(ab, w, h);

  SsimMap map{w - 2 * kRadius, h - 2 * kRadius, std::vector<double>(mu_a.size())};
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    map.values[i] = ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
  }
  return map;
}

double mssim(const Frame& estimate, const Frame& truth) {
  const SsimMap map = ssim_map(estimate, truth);
  double sum = 0.0;
  for (double v : map.values) sum += v;
  return sum / static_cast<double>(map.values.size());
}

Frame foreground_mask(const Frame& foreground, double eps1) {
  std::vector<double> px(foreground.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = std::abs(foreground.pixels()[i]) >= eps1 ? 255.0 : 0.0;
  return Frame(foreground.width(), foreground.height(), std::move(px));
}

std::vector<double> default_roc_thresholds() {
  std::vector<double> t{0.0, 15.0, 20.0, 25.0, 30.0};
  for (int k = 0; 31.0 + 2.5 * k <= 255.0; ++k) t.push_back(31.0 + 2.5 * k);
  return t;
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                const std::vector<double>& thresholds) {
  if (scores.size() != labels.size()) throw_invalid("roc: scores and labels differ in length");
  if (thresholds.empty()) throw_invalid("roc: no thresholds");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) throw_invalid("roc: thresholds must be ascending");

  std::int64_t positives = 0;
  for (auto l : labels) positives += l != 0;
  const auto negatives = static_cast<std::int64_t>(labels.size()) - positives;
  if (positives == 0) throw_degenerate("roc: ground truth has no foreground pixels; TPR undefined");
  if (negatives == 0) throw_degenerate("roc: ground truth has no background pixels; FPR undefined");

  std::vector<RocPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    RocPoint p;
    p.threshold = t;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool predicted = scores[i] >= t;
      if (labels[i] != 0)
        predicted ? ++p.tp : ++p.fn;
      else
        predicted ? ++p.fp : ++p.tn;
    }
    p.tpr = static_cast<double>(p.tp) / static_cast<double>(positives);
    p.fpr = static_cast<double>(p.fp) / static_cast<double>(negatives);
    out.push_back(p);
  }
  return out;
}

std::vector<RocPoint> roc_curve(const std::vector<Frame>& scores, const std::vector<Frame>& masks,
                                const std::vector<double>& thresholds) {
  if (scores.size() != masks.size()) throw_invalid("roc: frame and mask counts differ");
  std::vector<double> flat;
  std::vector<std::uint8_t> labels;
  for (std::size_t f = 0; f < scores.size(); ++f) {
    require_same_shape(scores[f], masks[f], "roc");
    for (std::size_t i = 0; i < scores[f].size(); ++i) {
      flat.push_back(scores[f].pixels()[i]);
      labels.push_back(masks[f].pixels()[i] != 0.0 ? 1 : 0);
    }
  }
  return roc_curve(flat, labels, thresholds);
}

double auc(std::vector<RocPoint> points) {
  if (points.size() < 2) throw_invalid("auc: need at least two ROC points");
  std::sort(points.begin(), points.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr;
  });
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].fpr - points[i - 1].fpr) * 0.5 * (points[i].tpr + points[i - 1].tpr);
  return area;
}

MetricsReport evaluate(const std::vector<Frame>& estimates, const std::vector<Frame>& scores,
                       const std::vector<Frame>& truth, const std::vector<double>& thresholds) {
  if (estimates.size() != truth.size() || scores.size() != truth.size())
    throw_invalid("metrics: estimate, score and ground-truth counts differ");
  if (truth.empty()) throw_invalid("metrics: no frames");

  MetricsReport r;
  double finite_sum = 0.0, mssim_sum = 0.0;
  for (std::size_t f = 0; f < truth.size(); ++f) {
    const double p = psnr(estimates[f], truth[f]);
    r.psnr.push_back(p);
    if (std::isinf(p))
      ++r.inf_count;
    else
      finite_sum += p;
    const double s = mssim(estimates[f], truth[f]);
    r.mssim.push_back(s);
    mssim_sum += s;
  }
  const auto finite = static_cast<double>(r.psnr.size()) - r.inf_count;
  r.mean_psnr_finite = finite > 0 ? finite_sum / finite : std::numeric_limits<double>::quiet_NaN();
  r.mean_mssim = mssim_sum / static_cast<double>(truth.size());
  r.roc = roc_curve(scores, truth, thresholds);
  r.auc = auc(r.roc);
  return r;
}

std::string metrics_json(const MetricsReport& report) {
  nlohmann::json j;
  nlohmann::json psnr = nlohmann::json::array();
  for (double v : report.psnr) psnr.push_back(number_or_null(v));
  j["psnr"] = std::move(psnr);
  j["mean_psnr_finite"] = number_or_null(report.mean_psnr_finite);
  j["inf_count"] = report.inf_count;
  j["mssim"] = report.mssim;
  j["mean_mssim"] = number_or_null(report.mean_mssim);
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& p : report.roc) roc.push_back({{"threshold", p.threshold}, {"tpr", p.tpr}, {"fpr", p.fpr}});
  j["roc"] = std::move(roc);
  j["auc"] = report.auc;
  return j.dump(2) + "\n";
}

void write_roc_csv(const std::filesystem::path& path, const std::vector<RocPoint>& points) {
  std::string out = "threshold,tpr,fpr,tp,fp,tn,fn\n";
  for (const auto& p : points)
    out += format_double(p.threshold) + ',' + format_double(p.tpr) + ',' + format_double(p.fpr) + ',' +
           std::to_string(p.tp) + ',' + std::to_string(p.fp) + ',' + std::to_string(p.tn) + ',' +
           std::to_string(p.fn) + '\n';
  write_file_atomic(path, out);
}

}  // namespace wsvt
