#include "wsvt/weight_learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <json.hpp>

#include "wsvt/errors.hpp"

namespace wsvt {

namespace {

constexpr double kBackgroundZero = 1e-12;

long long score_key(double s) { return std::llround(s * 100.0); }

}  // namespace

CoarseEstimate coarse_estimate(const Matrix& X, const WsvtParams& params) {
  WsvtParams p = params;
  p.max_iter = 2;
  p.epsilon = 0.0;
  const Matrix I = Matrix::Identity(X.cols(), X.cols());
  WsvtSolution sol = wsvt_solve(X, I, p);
  CoarseEstimate est;
  est.F_in = X - sol.B;
  est.B_in = std::move(sol.B);
  return est;
}

double epsilon1_from_histogram(const Matrix& F_in, int bins) {
  if (bins < 2) throw_invalid("epsilon1: need at least 2 histogram bins");
  if (!F_in.allFinite()) throw_degenerate("epsilon1: foreground has non-finite entries");
  const double top = F_in.cwiseAbs().maxCoeff();
  if (!(top > 0.0)) throw_degenerate("epsilon1: coarse foreground is identically zero");

  // Smallest magnitude per bin; positive entries only.
  std::vector<double> bin_min(static_cast<std::size_t>(bins), std::numeric_limits<double>::infinity());
  for (Eigen::Index j = 0; j < F_in.cols(); ++j) {
    for (Eigen::Index i = 0; i < F_in.rows(); ++i) {
      const double a = std::abs(F_in(i, j));
      if (a <= 0.0) continue;
      const auto b = std::min(static_cast<int>(std::floor(a / top * bins)), bins - 1);
      auto& slot = bin_min[static_cast<std::size_t>(b)];
      slot = std::min(slot, a);
    }
  }
  int seen = 0;
  for (double v : bin_min) {
    if (std::isinf(v)) continue;
    if (++seen == 2) return v;
  }
  throw_degenerate("epsilon1: fewer than two occupied histogram bins in |F_in|");
}

PercentageScores percentage_scores(const Matrix& F_in, const Matrix& B_in, double eps1) {
  if (F_in.rows() != B_in.rows() || F_in.cols() != B_in.cols())
    throw_invalid("percentage_scores: F_in and B_in shapes differ");
  if (!(eps1 > 0.0)) throw_invalid("percentage_scores: eps1 must be positive");

  PercentageScores out;
  out.scores.reserve(static_cast<std::size_t>(F_in.cols()));
  for (Eigen::Index j = 0; j < F_in.cols(); ++j) {
    const auto fg = (F_in.col(j).array().abs() >= eps1).count();
    const auto bg = (B_in.col(j).array().abs() > kBackgroundZero).count();
    if (bg == 0) {
      out.scores.push_back(std::numeric_limits<double>::infinity());
      out.flagged.push_back(j);
    } else {
      out.scores.push_back(100.0 * static_cast<double>(fg) / static_cast<double>(bg));
    }
  }
  return out;
}

double epsilon2_mode(const std::vector<double>& scores) {
  std::map<long long, int> counts;
  for (double s : scores)
    if (std::isfinite(s)) ++counts[score_key(s)];
  if (counts.empty()) throw_degenerate("epsilon2: no finite percentage scores");
  // std::map iterates keys ascending, so strict > keeps the smallest mode.
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it)
    if (it->second > best->second) best = it;
  return static_cast<double>(best->first) / 100.0;
}

std::vector<Eigen::Index> select_background_indices(const std::vector<double>& scores, double eps2) {
  std::vector<Eigen::Index> out;
  const long long limit = score_key(eps2);
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (std::isfinite(scores[i]) && score_key(scores[i]) <= limit) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

Matrix build_weight_matrix(Eigen::Index n, const WeightSpec& spec) {
  if (n < 1) throw_invalid("build_weight_matrix: n must be positive");
  if (!(spec.lambda_tilde >= 1.0) || !std::isfinite(spec.lambda_tilde))
    throw_invalid("build_weight_matrix: lambda_tilde must be >= 1");
  if (spec.indices.empty())
    throw_invalid("build_weight_matrix: empty background index set; fall back to W = I");
  Vector d = Vector::Ones(n);
  for (Eigen::Index i : spec.indices) {
    if (i < 0 || i >= n) throw_invalid("build_weight_matrix: index " + std::to_string(i) + " out of range");
    d(i) = spec.lambda_tilde;
  }
  return d.asDiagonal();
}

Matrix LearnedWeights::weight_matrix() const {
  if (identity_fallback) return Matrix::Identity(spec.n, spec.n);
  return build_weight_matrix(spec.n, spec);
}

LearnedWeights learn_weights(const Matrix& X, const WsvtParams& params, const WeightLearningOptions& options) {
  if (!(options.lambda_tilde >= 1.0)) throw_invalid("lambda_tilde must be >= 1");
  LearnedWeights out;
  out.coarse = coarse_estimate(X, params);
  out.epsilon1 = options.eps1_override ? *options.eps1_override
                                       : epsilon1_from_histogram(out.coarse.F_in, options.eps1_bins);
  if (!(out.epsilon1 > 0.0)) throw_invalid("epsilon1 must be positive");
  out.scores = percentage_scores(out.coarse.F_in, out.coarse.B_in, out.epsilon1);
  out.epsilon2 = epsilon2_mode(out.scores.scores);
  out.spec.indices = select_background_indices(out.scores.scores, out.epsilon2);
  out.spec.lambda_tilde = options.lambda_tilde;
  out.spec.n = X.cols();
  if (out.spec.indices.empty()) {
    out.identity_fallback = true;
    out.warning = "no frame qualified as background; using W = I";
  }
  return out;
}

std::string weights_json(const LearnedWeights& learned) {
  nlohmann::json j;
  j["epsilon1"] = learned.epsilon1;
  j["epsilon2"] = learned.epsilon2;
  nlohmann::json scores = nlohmann::json::array();
  for (double s : learned.scores.scores) {
    if (std::isfinite(s))
      scores.push_back(s);
    else
      scores.push_back(nullptr);
  }
  j["scores"] = std::move(scores);
  j["indices"] = learned.spec.indices;
  j["lambda_tilde"] = learned.spec.lambda_tilde;
  j["flagged"] = learned.scores.flagged;
  if (learned.identity_fallback) j["warning"] = learned.warning;
  return j.dump(2) + "\n";
}

}  // namespace wsvt
