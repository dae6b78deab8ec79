#include "wsvt/matrix_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "wsvt/errors.hpp"
#include "wsvt/file_util.hpp"

namespace wsvt {

Matrix SvdFactors::reconstruct() const { return U * sigma.asDiagonal() * V.transpose(); }

bool all_finite(const Matrix& m) { return m.allFinite(); }

SvdFactors svd(const Matrix& m) {
  if (m.size() == 0) throw_invalid("svd: empty matrix");
  if (!m.allFinite()) throw_degenerate("svd: matrix has non-finite entries");

  Eigen::BDCSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) throw Error(ErrorKind::Numerical, "svd: decomposition did not converge");

  SvdFactors f{dec.matrixU(), dec.singularValues(), dec.matrixV()};
  if (!f.U.allFinite() || !f.V.allFinite() || !f.sigma.allFinite())
    throw Error(ErrorKind::Numerical, "svd: decomposition produced non-finite factors");
  return f;
}

double soft_threshold(double x, double tau) {
  if (!(tau >= 0.0)) throw_invalid("soft_threshold: tau must be nonnegative");
  const double mag = std::abs(x) - tau;
  if (mag <= 0.0) return 0.0;
  return x < 0.0 ? -mag : mag;
}

Matrix svt_shrink(const SvdFactors& f, double tau) {
  if (!(tau >= 0.0)) throw_invalid("svt_shrink: tau must be nonnegative");
  Vector shrunk = (f.sigma.array() - tau).max(0.0).matrix();
  return f.U * shrunk.asDiagonal() * f.V.transpose();
}

Matrix svt_shrink(const Matrix& m, double tau) {
  if (!(tau >= 0.0)) throw_invalid("svt_shrink: tau must be nonnegative");
  return svt_shrink(svd(m), tau);
}

Matrix hard_threshold_rank(const Matrix& m, Eigen::Index r) {
  const Eigen::Index k = std::min(m.rows(), m.cols());
  if (r < 0 || r > k)
    throw_invalid("hard_threshold_rank: rank " + std::to_string(r) + " outside [0, " + std::to_string(k) + "]");
  if (r == 0) return Matrix::Zero(m.rows(), m.cols());
  const SvdFactors f = svd(m);
  return f.U.leftCols(r) * f.sigma.head(r).asDiagonal() * f.V.leftCols(r).transpose();
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return svd(m).sigma(0);
}

double nuclear_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return svd(m).sigma.sum();
}

double frobenius_norm(const Matrix& m) { return m.norm(); }

Eigen::Index numerical_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  const Vector s = svd(m).sigma;
  if (s(0) == 0.0) return 0;
  return (s.array() > rel_tol * s(0)).count();
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.size()) * 20);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out.push_back(',');
      out += format_double(m(i, j));
    }
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<double> values;
  Eigen::Index rows = 0;
  Eigen::Index cols = -1;

  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    Eigen::Index count = 0;
    std::size_t field = 0;
    while (true) {
      std::size_t comma = line.find(',', field);
      std::string_view tok = line.substr(field, comma == std::string_view::npos ? line.size() - field : comma - field);
      while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
      while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
      if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
        throw_io(path.string() + ":" + std::to_string(rows + 1) + ": malformed number '" + std::string(tok) + "'");
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      field = comma + 1;
    }
    if (cols < 0) cols = count;
    if (count != cols) throw_io(path.string() + ":" + std::to_string(rows + 1) + ": ragged row");
    ++rows;
  }
  if (rows == 0) throw_io(path.string() + ": no data");

  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(i * cols + j)];
  return m;
}

}  // namespace wsvt
