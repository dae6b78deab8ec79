#include "wsvt/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wsvt/errors.hpp"
#include "wsvt/file_util.hpp"

namespace wsvt {

namespace {

constexpr double kMaxWeightCondition = 1e12;

bool is_diagonal(const Matrix& W) {
  for (Eigen::Index j = 0; j < W.cols(); ++j)
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      if (i != j && W(i, j) != 0.0) return false;
  return true;
}

// Applies the products and solves with a fixed nonsingular W that the
// C-update needs. Explicit inverses are never formed: diagonal W uses
// reciprocals, general W an LU factorization plus one eigendecomposition of
// W^T W for the (I + mu (W^T W)^{-1})^{-1} factor.
class WeightOperator {
 public:
  explicit WeightOperator(const Matrix& W) {
    if (W.rows() != W.cols()) throw_invalid("weight matrix must be square");
    if (!W.allFinite()) throw_degenerate("weight matrix has non-finite entries");
    condition_ = weight_condition_number(W);
    if (!(condition_ <= kMaxWeightCondition))
      throw_degenerate("weight matrix is singular or ill-conditioned (condition number " +
                       format_double(condition_) + " > 1e12)");
    diagonal_ = is_diagonal(W);
    if (diagonal_) {
      d_ = W.diagonal();
      d_inv_ = d_.cwiseInverse();
      d_sq_ = d_.cwiseAbs2();
    } else {
      W_ = W;
      lu_.compute(W);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(W.transpose() * W);
      if (eig.info() != Eigen::Success) throw Error(ErrorKind::Numerical, "eigendecomposition of W^T W failed");
      gram_vectors_ = eig.eigenvectors();
      gram_values_ = eig.eigenvalues();
    }
  }

  Eigen::Index size() const { return diagonal_ ? d_.size() : W_.rows(); }
  double condition() const { return condition_; }

  // X W
  Matrix times(const Matrix& X) const {
    if (diagonal_) return X * d_.asDiagonal();
    return X * W_;
  }

  // C W^{-1}
  Matrix solve(const Matrix& C) const {
    if (diagonal_) return C * d_inv_.asDiagonal();
    const Matrix rhs = C.transpose();
    const Matrix sol = lu_.transpose().solve(rhs);
    return sol.transpose();
  }

  // M W^{-T}
  Matrix solve_transpose(const Matrix& M) const {
    if (diagonal_) return M * d_inv_.asDiagonal();
    const Matrix sol = lu_.solve(M.transpose());
    return sol.transpose();
  }

  // R (I + mu (W^T W)^{-1})^{-1} = R Q diag(l / (l + mu)) Q^T with W^T W = Q diag(l) Q^T.
  Matrix gram_filter(const Matrix& R, double mu) const {
    if (diagonal_) {
      Vector f = d_sq_.array() / (d_sq_.array() + mu);
      return R * f.asDiagonal();
    }
    Vector f = gram_values_.array() / (gram_values_.array() + mu);
    return ((R * gram_vectors_) * f.asDiagonal()) * gram_vectors_.transpose();
  }

 private:
  bool diagonal_ = false;
  double condition_ = 1.0;
  Vector d_, d_inv_, d_sq_;
  Matrix W_;
  Eigen::PartialPivLU<Matrix> lu_;
  Matrix gram_vectors_;
  Vector gram_values_;
};

double inner(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

SvdFactors svd_at(const Matrix& m, int iteration) {
  try {
    return svd(m);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Numerical || e.kind() == ErrorKind::DegenerateInput)
      throw Error(ErrorKind::Numerical, std::string(e.what()) + " at iteration " + std::to_string(iteration),
                  iteration);
    throw;
  }
}

Matrix soft_threshold_entries(const Matrix& m, double tau) {
  return m.unaryExpr([tau](double x) { return soft_threshold(x, tau); });
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

void WsvtParams::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw_invalid("tau must be positive");
  if (!(mu0 > 0.0) || !std::isfinite(mu0)) throw_invalid("mu0 must be positive");
  if (!(rho > 1.0) || !std::isfinite(rho)) throw_invalid("rho must exceed 1");
  if (!(epsilon >= 0.0)) throw_invalid("epsilon must be nonnegative");
  if (max_iter < 1) throw_invalid("max_iter must be positive");
  if (!(mu_max >= mu0)) throw_invalid("mu_max must be at least mu0");
}

double SolveTrace::mu_before(std::size_t k) const {
  if (k <= 1) return mu0;
  return records.at(k - 2).mu;
}

double weight_condition_number(const Matrix& W) {
  if (W.size() == 0) return std::numeric_limits<double>::infinity();
  if (is_diagonal(W)) {
    const Vector d = W.diagonal().cwiseAbs();
    const double lo = d.minCoeff();
    if (lo == 0.0) return std::numeric_limits<double>::infinity();
    return d.maxCoeff() / lo;
  }
  Eigen::BDCSVD<Matrix> dec(W);
  const Vector& s = dec.singularValues();
  const double lo = s(s.size() - 1);
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / lo;
}

WsvtSolution wsvt_solve(const Matrix& X, const Matrix& W, const WsvtParams& params) {
  params.validate();
  if (X.size() == 0) throw_invalid("wsvt_solve: empty data matrix");
  if (!X.allFinite()) throw_degenerate("wsvt_solve: data matrix has non-finite entries");
  if (W.rows() != X.cols() || W.cols() != X.cols())
    throw_invalid("wsvt_solve: weight matrix must be " + std::to_string(X.cols()) + "x" + std::to_string(X.cols()));

  const WeightOperator weight(W);
  const double tau = params.tau;
  const Matrix XW = weight.times(X);

  WsvtSolution sol;
  sol.trace.tau = tau;
  sol.trace.mu0 = params.mu0;
  sol.trace.records.reserve(static_cast<std::size_t>(params.max_iter));

  Matrix C = XW;
  Matrix D = X;
  Matrix Y = Matrix::Zero(X.rows(), X.cols());
  Matrix C_winv = X;
  double mu = params.mu0;
  double prev_lagrangian = 0.0;

  for (int k = 1; k <= params.max_iter; ++k) {
    C = weight.gram_filter(XW + weight.solve_transpose(mu * D + Y), mu);
    C_winv = weight.solve(C);

    const SvdFactors f = svd_at(C_winv - Y / mu, k);
    const Vector shrunk = (f.sigma.array() - tau / mu).max(0.0).matrix();
    D = f.U * shrunk.asDiagonal() * f.V.transpose();

    const Matrix residual = D - C_winv;
    const double fit = 0.5 * (XW - C).squaredNorm();
    const double nuclear = shrunk.sum();
    double lagrangian = fit + tau * nuclear + inner(Y, residual) + 0.5 * mu * residual.squaredNorm();
    if (params.audit) lagrangian = augmented_lagrangian(C, D, Y, mu, X, W, tau);

    // Y + mu (D - C W^{-1}) = mu (D - A) for A = C W^{-1} - Y / mu, evaluated
    // through the factors of A so that large mu does not amplify rounding.
    const Vector clipped = (mu * f.sigma.array()).min(tau).matrix();
    Y = -(f.U * clipped.asDiagonal() * f.V.transpose());
    double y_spectral = clipped.size() > 0 ? clipped.maxCoeff() : 0.0;
    if (params.audit) y_spectral = spectral_norm(Y);

    if (!std::isfinite(lagrangian))
      throw Error(ErrorKind::Numerical, "wsvt_solve: augmented Lagrangian diverged at iteration " + std::to_string(k),
                  k);

    mu = std::min(mu * params.rho, params.mu_max);
    sol.trace.records.push_back({k, mu, lagrangian, residual.norm(), y_spectral, fit + tau * nuclear});

    if (k >= 2 && std::abs(lagrangian - prev_lagrangian) < params.epsilon) {
      sol.converged = true;
      break;
    }
    prev_lagrangian = lagrangian;
  }

  sol.B = std::move(C_winv);
  sol.C = std::move(C);
  sol.D = std::move(D);
  sol.Y = std::move(Y);
  return sol;
}

double augmented_lagrangian(const Matrix& C, const Matrix& D, const Matrix& Y, double mu, const Matrix& X,
                            const Matrix& W, double tau) {
  const Eigen::Index m = X.rows(), n = X.cols();
  auto same = [m, n](const Matrix& a) { return a.rows() == m && a.cols() == n; };
  if (!same(C) || !same(D) || !same(Y) || W.rows() != n || W.cols() != n)
    throw_invalid("augmented_lagrangian: inconsistent shapes");
  const WeightOperator weight(W);
  const Matrix residual = D - weight.solve(C);
  return 0.5 * (weight.times(X) - C).squaredNorm() + tau * nuclear_norm(D) + inner(Y, residual) +
         0.5 * mu * residual.squaredNorm();
}

Matrix svt_solve(const Matrix& X, double tau) {
  if (!(tau > 0.0)) throw_invalid("svt_solve: tau must be positive");
  return svt_shrink(X, tau);
}

Matrix pca_solve(const Matrix& X, Eigen::Index r) { return hard_threshold_rank(X, r); }

// ---------------------------------------------------------------------------

void RpcaParams::validate() const {
  if (lambda && !(*lambda > 0.0)) throw_invalid("lambda must be positive");
  if (!(mu > 0.0)) throw_invalid("mu must be positive");
  if (!(rho > 1.0)) throw_invalid("rho must exceed 1");
  if (!(epsilon > 0.0)) throw_invalid("epsilon must be positive");
  if (max_iter < 1) throw_invalid("max_iter must be positive");
}

double RpcaParams::resolved_lambda(Eigen::Index rows, Eigen::Index cols) const {
  if (lambda) return *lambda;
  return 1.0 / std::sqrt(static_cast<double>(std::max(rows, cols)));
}

namespace {

RpcaSolution rpca_zero(const Matrix& X) {
  RpcaSolution sol;
  sol.lowrank = Matrix::Zero(X.rows(), X.cols());
  sol.sparse = Matrix::Zero(X.rows(), X.cols());
  sol.converged = true;
  return sol;
}

void check_rpca_input(const Matrix& X, const RpcaParams& params) {
  params.validate();
  if (X.size() == 0) throw_invalid("rpca: empty data matrix");
  if (!X.allFinite()) throw_degenerate("rpca: data matrix has non-finite entries");
}

}  // namespace

RpcaSolution rpca_iealm(const Matrix& X, const RpcaParams& params) {
  check_rpca_input(X, params);
  const double x_norm = X.norm();
  if (x_norm == 0.0) return rpca_zero(X);

  const double lambda = params.resolved_lambda(X.rows(), X.cols());
  const double norm_two = spectral_norm(X);
  const double dual_norm = std::max(norm_two, X.cwiseAbs().maxCoeff() / lambda);

  Matrix Y = X / dual_norm;
  Matrix L = Matrix::Zero(X.rows(), X.cols());
  Matrix S = Matrix::Zero(X.rows(), X.cols());
  double mu = params.mu / norm_two;
  const double mu_bar = mu * 1e7;

  RpcaSolution sol;
  for (int k = 1; k <= params.max_iter; ++k) {
    S = soft_threshold_entries(X - L + Y / mu, lambda / mu);
    const SvdFactors f = svd_at(X - S + Y / mu, k);
    L = svt_shrink(f, 1.0 / mu);
    const Matrix Z = X - L - S;
    Y += mu * Z;

    const double residual = Z.norm() / x_norm;
    if (!std::isfinite(residual))
      throw Error(ErrorKind::Numerical, "rpca_iealm: diverged at iteration " + std::to_string(k), k);
    const Eigen::Index rank = (f.sigma.array() > 1.0 / mu).count();
    mu = std::min(mu * params.rho, mu_bar);
    sol.trace.push_back({k, mu, residual, rank});
    if (residual < params.epsilon) {
      sol.converged = true;
      break;
    }
  }
  sol.lowrank = std::move(L);
  sol.sparse = std::move(S);
  return sol;
}

RpcaSolution rpca_apg(const Matrix& X, const RpcaParams& params) {
  check_rpca_input(X, params);
  const double x_norm = X.norm();
  if (x_norm == 0.0) return rpca_zero(X);

  const double lambda = params.resolved_lambda(X.rows(), X.cols());
  const double eta = 0.9;
  const double step = 2.0;  // Lipschitz constant of the smooth coupling term
  double mu = 0.99 * spectral_norm(X);
  // At the relaxed optimum ||X - L - S||_F <= mu * lambda * sqrt(mn); this floor
  // keeps that bound at half the requested tolerance.
  const double mn = static_cast<double>(X.rows()) * static_cast<double>(X.cols());
  const double mu_bar = std::min(1e-5 * mu, 0.5 * params.epsilon * x_norm / (lambda * std::sqrt(mn)));

  Matrix L = Matrix::Zero(X.rows(), X.cols());
  Matrix S = Matrix::Zero(X.rows(), X.cols());
  Matrix L_prev = L, S_prev = S;
  double t = 1.0, t_prev = 1.0;

  RpcaSolution sol;
  for (int k = 1; k <= params.max_iter; ++k) {
    const double momentum = (t_prev - 1.0) / t;
    const Matrix YL = L + momentum * (L - L_prev);
    const Matrix YS = S + momentum * (S - S_prev);
    L_prev = L;
    S_prev = S;

    const Matrix grad = (YL + YS - X) / step;
    const SvdFactors f = svd_at(YL - grad, k);
    L = svt_shrink(f, mu / step);
    S = soft_threshold_entries(YS - grad, lambda * mu / step);

    t_prev = t;
    t = 0.5 * (1.0 + std::sqrt(4.0 * t * t + 1.0));
    const bool at_floor = mu <= mu_bar;
    const Eigen::Index rank = (f.sigma.array() > mu / step).count();
    mu = std::max(eta * mu, mu_bar);

    const double residual = (X - L - S).norm() / x_norm;
    if (!std::isfinite(residual))
      throw Error(ErrorKind::Numerical, "rpca_apg: diverged at iteration " + std::to_string(k), k);
    sol.trace.push_back({k, mu, residual, rank});
    if (at_floor && residual < params.epsilon) {
      sol.converged = true;
      break;
    }
  }
  sol.lowrank = std::move(L);
  sol.sparse = std::move(S);
  return sol;
}

// ---------------------------------------------------------------------------

BoundReport diagnose_bounds(const SolveTrace& trace, const BoundOptions& options) {
  const auto& rec = trace.records;
  if (rec.size() < 5) throw_invalid("diagnose_bounds: trace needs at least 5 records, got " + std::to_string(rec.size()));

  const std::size_t n = rec.size();
  const std::size_t tail_begin = n - std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(options.tail_fraction * static_cast<double>(n))));

  BoundReport r;

  // (a) the theory gives ||D_k - C_k W^{-1}|| <= C / mu_k.
  std::vector<double> tail_products;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = rec[i].mu * rec[i].coupling_residual;
    r.alpha = std::max(r.alpha, p);
    if (i >= tail_begin) tail_products.push_back(p);
  }
  r.tail_max = *std::max_element(tail_products.begin(), tail_products.end());
  r.tail_median = median(tail_products);
  r.coupling_bounded = std::isfinite(r.alpha) && r.tail_max <= options.bounded_ratio * r.tail_median;

  // (b) increment bound for k = 1 .. n-1 (record k at index k-1).
  r.lagrangian_worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < n; ++k) {
    const double lhs = rec[k].lagrangian - rec[k - 1].lagrangian;
    const double mu_k = rec[k - 1].mu;
    const double mu_km1 = trace.mu_before(k);
    const double res = rec[k - 1].coupling_residual;
    const double rhs = 0.5 * (mu_k + mu_km1) * res * res;
    r.lagrangian_worst_excess = std::max(r.lagrangian_worst_excess, lhs - rhs);
    ++r.lagrangian_checked;
    if (!(lhs <= rhs + options.lagrangian_tol)) ++r.lagrangian_violations;
  }
  r.lagrangian_ok = r.lagrangian_violations == 0;

  // (c) dual feasibility: -Y_k is a subgradient of tau ||.||_* so ||Y_k||_2 <= tau.
  for (const auto& x : rec) {
    r.max_y_spectral = std::max(r.max_y_spectral, x.y_spectral);
    if (!(x.y_spectral <= trace.tau + options.dual_tol)) ++r.dual_violations;
  }
  r.dual_ok = r.dual_violations == 0;

  // (d) fit the two-sided rate constants over the tail and confirm the sandwich.
  r.f_inf = rec.back().objective;
  for (std::size_t i = tail_begin; i < n; ++i) {
    const double gap = rec[i].objective - r.f_inf;
    const double mu_prev = trace.mu_before(i + 1);
    r.gamma = std::max(r.gamma, gap * mu_prev);
    r.beta = std::max(r.beta, -gap * mu_prev * mu_prev);
  }
  bool sandwich = std::isfinite(r.beta) && std::isfinite(r.gamma);
  for (std::size_t i = tail_begin; i < n && sandwich; ++i) {
    const double gap = rec[i].objective - r.f_inf;
    const double mu_prev = trace.mu_before(i + 1);
    sandwich = gap >= -r.beta / (mu_prev * mu_prev) - options.sandwich_tol &&
               gap <= r.gamma / mu_prev + options.sandwich_tol;
  }
  r.sandwich_ok = sandwich;
  return r;
}

void write_trace_csv(const std::filesystem::path& path, const SolveTrace& trace) {
  std::string out = "k,mu,L,coupling_residual,y_spectral,objective\n";
  for (const auto& r : trace.records) {
    out += std::to_string(r.k) + ',' + format_double(r.mu) + ',' + format_double(r.lagrangian) + ',' +
           format_double(r.coupling_residual) + ',' + format_double(r.y_spectral) + ',' + format_double(r.objective) +
           '\n';
  }
  write_file_atomic(path, out);
}

void write_rpca_trace_csv(const std::filesystem::path& path, const std::vector<RpcaRecord>& trace) {
  std::string out = "k,mu,residual,rank\n";
  for (const auto& r : trace)
    out += std::to_string(r.k) + ',' + format_double(r.mu) + ',' + format_double(r.residual) + ',' +
           std::to_string(r.rank) + '\n';
  write_file_atomic(path, out);
}

}  // namespace wsvt
