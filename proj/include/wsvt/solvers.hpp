#pragma once

// Low-rank solvers: weighted singular value thresholding (WSVT) by an
// augmented Lagrangian / alternating direction scheme, its closed-form
// W = I special case, rank-r PCA, and two robust PCA baselines.

#include <filesystem>
#include <optional>
#include <vector>

#include "wsvt/matrix_core.hpp"

namespace wsvt {

/// Parameters of the WSVT iteration
///   min_B 1/2 ||(X - B) W||_F^2 + tau ||B||_*.
/// Defaults are the background-estimation settings.
struct WsvtParams {
  double tau = 4500.0;     ///< nuclear-norm weight
  double mu0 = 5.0;        ///< initial penalty
  double rho = 1.1;        ///< penalty growth factor, > 1
  double epsilon = 1e-7;   ///< stop when |L_{k+1} - L_k| < epsilon; 0 disables
  int max_iter = 30;
  double mu_max = 1e12;    ///< mu stops growing here
  /// Recompute L_k and ||Y_k||_2 from independent SVDs instead of the
  /// iteration's own factors. Costs two extra SVDs per iteration.
  bool audit = false;

  void validate() const;
};

/// One row of the solver trace. Record k describes the iterates after the
/// k-th pass (k >= 1):
///   mu          = mu_k (the penalty the next pass will use)
///   lagrangian  = L(C_k, D_k, Y_{k-1}, mu_{k-1})
///   coupling_residual = ||D_k - C_k W^{-1}||_F
///   y_spectral  = ||Y_k||_2
///   objective   = 1/2 ||XW - C_k||_F^2 + tau ||D_k||_*
struct IterationRecord {
  int k = 0;
  double mu = 0.0;
  double lagrangian = 0.0;
  double coupling_residual = 0.0;
  double y_spectral = 0.0;
  double objective = 0.0;
};

struct SolveTrace {
  double tau = 0.0;
  double mu0 = 0.0;
  std::vector<IterationRecord> records;

  /// Penalty used to produce record k (mu_{k-1}); record numbering starts at 1.
  double mu_before(std::size_t k) const;
};

struct WsvtSolution {
  Matrix B;  ///< C W^{-1}
  Matrix C;
  Matrix D;
  Matrix Y;
  SolveTrace trace;
  bool converged = false;

  int iterations() const { return static_cast<int>(trace.records.size()); }
};

/// Errors: InvalidArgument on bad parameters or shapes; DegenerateInput on
/// non-finite X or a singular / ill-conditioned W (condition number > 1e12);
/// Numerical on SVD failure or a non-finite Lagrangian (carries the iteration).
WsvtSolution wsvt_solve(const Matrix& X, const Matrix& W, const WsvtParams& params);

/// L(C, D, Y, mu) = 1/2 ||XW - C||_F^2 + tau ||D||_* + <Y, D - C W^{-1}> + mu/2 ||D - C W^{-1}||_F^2
double augmented_lagrangian(const Matrix& C, const Matrix& D, const Matrix& Y, double mu, const Matrix& X,
                            const Matrix& W, double tau);

/// Closed-form minimizer of 1/2 ||X - B||_F^2 + tau ||B||_* (WSVT with W = I).
Matrix svt_solve(const Matrix& X, double tau);

/// Best rank-r approximation of X.
Matrix pca_solve(const Matrix& X, Eigen::Index r);

/// Condition number of W in the spectral norm (infinity when singular).
double weight_condition_number(const Matrix& W);

// ---------------------------------------------------------------------------
// Robust PCA baselines: min ||L||_* + lambda ||S||_1  s.t.  X = L + S.

struct RpcaParams {
  /// Defaults to 1 / sqrt(max(m, n)).
  std::optional<double> lambda;
  /// Inexact ALM starts at mu / ||X||_2, so the value is independent of the data scale.
  double mu = 1.5;
  double rho = 1.25;
  /// Stop when ||X - L - S||_F / ||X||_F < epsilon.
  double epsilon = 1e-7;
  int max_iter = 1000;

  void validate() const;
  double resolved_lambda(Eigen::Index rows, Eigen::Index cols) const;
};

struct RpcaRecord {
  int k = 0;
  double mu = 0.0;
  double residual = 0.0;  ///< ||X - L - S||_F / ||X||_F
  Eigen::Index rank = 0;
};

struct RpcaSolution {
  Matrix lowrank;
  Matrix sparse;
  std::vector<RpcaRecord> trace;
  bool converged = false;
};

/// Inexact augmented Lagrange multiplier method.
RpcaSolution rpca_iealm(const Matrix& X, const RpcaParams& params);

/// Accelerated proximal gradient with continuation on the relaxation weight.
/// Uses lambda, epsilon and max_iter from `params`; the continuation schedule
/// starts at 0.99 ||X||_2 and shrinks by 0.9 per iteration.
RpcaSolution rpca_apg(const Matrix& X, const RpcaParams& params);

// ---------------------------------------------------------------------------
// Empirical checks of the WSVT convergence theory on a recorded trace.

struct BoundOptions {
  double tail_fraction = 0.5;     ///< diagnostics use the final half of the trace
  double bounded_ratio = 20.0;    ///< max <= ratio * median over the tail
  double lagrangian_tol = 1e-9;
  double dual_tol = 1e-6;
  double sandwich_tol = 1e-7;
};

struct BoundReport {
  // (a) mu_k * ||D_k - C_k W^{-1}||_F stays bounded.
  double alpha = 0.0;  ///< max over all k
  double tail_max = 0.0;
  double tail_median = 0.0;
  bool coupling_bounded = false;

  // (b) L_{k+1} - L_k <= (mu_k + mu_{k-1}) / 2 * ||D_k - C_k W^{-1}||_F^2 + tol.
  int lagrangian_checked = 0;
  int lagrangian_violations = 0;
  double lagrangian_worst_excess = 0.0;  ///< largest (lhs - rhs), may be negative
  bool lagrangian_ok = false;

  // (c) ||Y_k||_2 <= tau + tol.
  int dual_violations = 0;
  double max_y_spectral = 0.0;
  bool dual_ok = false;

  // (d) -beta / mu_{k-1}^2 - tol <= objective_k - f_inf <= gamma / mu_{k-1} + tol over the tail.
  double f_inf = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  bool sandwich_ok = false;

  bool all_passed() const { return coupling_bounded && lagrangian_ok && dual_ok && sandwich_ok; }
};

/// Requires at least 5 records (InvalidArgument otherwise).
BoundReport diagnose_bounds(const SolveTrace& trace, const BoundOptions& options = {});

/// CSV with header k,mu,L,coupling_residual,y_spectral,objective.
void write_trace_csv(const std::filesystem::path& path, const SolveTrace& trace);
/// CSV with header k,mu,residual,rank.
void write_rpca_trace_csv(const std::filesystem::path& path, const std::vector<RpcaRecord>& trace);

}  // namespace wsvt
