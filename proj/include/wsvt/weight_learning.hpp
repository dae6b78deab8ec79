#pragma once

// Data-driven diagonal weights for background estimation. A short unweighted
// solve separates a coarse background from a coarse foreground; frames whose
// foreground is nearly empty are then up-weighted by lambda_tilde.

#include <optional>
#include <string>
#include <vector>

#include "wsvt/matrix_core.hpp"
#include "wsvt/solvers.hpp"

namespace wsvt {

struct CoarseEstimate {
  Matrix B_in;
  Matrix F_in;  ///< X - B_in
};

/// WSVT with W = I for exactly two iterations and the stopping rule disabled.
CoarseEstimate coarse_estimate(const Matrix& X, const WsvtParams& params);

/// Threshold separating the noise floor from object intensities.
///
/// The positive magnitudes |F_in| are binned into `bins` equal-width bins
/// over [0, max]. The result is the smallest magnitude that falls in the
/// second non-empty bin. Throws DegenerateInput when fewer than two bins are
/// occupied.
double epsilon1_from_histogram(const Matrix& F_in, int bins = 10);

struct PercentageScores {
  /// 100 * #{|F_in| >= eps1} / #{|B_in| > 1e-12} per column; +infinity for
  /// columns whose background count is zero.
  std::vector<double> scores;
  std::vector<Eigen::Index> flagged;  ///< columns with the +infinity sentinel
};

PercentageScores percentage_scores(const Matrix& F_in, const Matrix& B_in, double eps1);

/// Mode of the finite scores after rounding to two decimals; ties resolve to
/// the smallest value. Throws DegenerateInput if no finite score remains.
double epsilon2_mode(const std::vector<double>& scores);

/// Columns whose score, rounded to two decimals, is <= eps2. Sorted ascending.
std::vector<Eigen::Index> select_background_indices(const std::vector<double>& scores, double eps2);

struct WeightSpec {
  std::vector<Eigen::Index> indices;  ///< sorted, unique, < n
  double lambda_tilde = 5.0;          ///< >= 1
  Eigen::Index n = 0;
};

/// diag(w) with w_i = lambda_tilde for i in the index set, else 1.
/// Throws InvalidArgument for an empty index set (callers should fall back to W = I).
Matrix build_weight_matrix(Eigen::Index n, const WeightSpec& spec);

struct WeightLearningOptions {
  double lambda_tilde = 5.0;
  int eps1_bins = 10;
  std::optional<double> eps1_override;
};

struct LearnedWeights {
  CoarseEstimate coarse;
  double epsilon1 = 0.0;
  double epsilon2 = 0.0;
  PercentageScores scores;
  WeightSpec spec;
  /// True when no frame qualified; W is then the identity.
  bool identity_fallback = false;
  std::string warning;

  Matrix weight_matrix() const;
};

/// Full procedure: coarse estimate, epsilon1, scores, epsilon2, index set, W.
LearnedWeights learn_weights(const Matrix& X, const WsvtParams& params, const WeightLearningOptions& options = {});

/// {"epsilon1", "epsilon2", "scores" (null for infinite), "indices", "lambda_tilde"}.
std::string weights_json(const LearnedWeights& learned);

}  // namespace wsvt
