#include "core/linalg.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "core/errors.hpp"

namespace slrcmi::linalg {

namespace {
constexpr double kRankThreshold = 1e-10;
}

Coefficients fit_ols(const DesignMatrix& X, const Eigen::VectorXd& y) {
  const Eigen::Index n = X.rows.rows();
  const Eigen::Index p = X.rows.cols();
  if (p < 1 || n < 1) throw UsageError("fit_ols: empty design matrix");
  if (static_cast<Eigen::Index>(X.column_labels.size()) != p)
    throw UsageError("fit_ols: column label count does not match design width");
  if (std::set<std::string>(X.column_labels.begin(), X.column_labels.end()).size() !=
      X.column_labels.size())
    throw UsageError("fit_ols: duplicate column labels");
  if (y.size() != n) throw UsageError("fit_ols: response length does not match n_obs");
  if (n < p) {
    std::ostringstream os;
    os << "fit_ols: insufficient complete cases (n_obs=" << n << " < p=" << p << ")";
    throw DataError(os.str());
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X.rows);
  qr.setThreshold(kRankThreshold);
  const Eigen::Index rank = qr.rank();
  if (rank < p) {
    const auto& perm = qr.colsPermutation().indices();
    std::ostringstream os;
    os << "fit_ols: rank-deficient design (rank " << rank << " < " << p
       << ", relative pivot threshold " << kRankThreshold << "); collinear columns:";
    for (Eigen::Index k = rank; k < p; ++k)
      os << " " << X.column_labels[static_cast<std::size_t>(perm[k])];
    throw NumericError(os.str());
  }

  Coefficients c;
  c.values = qr.solve(y);
  c.column_labels = X.column_labels;
  c.n_obs_used = static_cast<int>(n);
  if (!c.values.allFinite()) throw NumericError("fit_ols: non-finite coefficients");
  return c;
}

double predict(const Coefficients& c, const Eigen::VectorXd& x_row) {
  if (x_row.size() != c.values.size())
    throw UsageError("predict: row length does not match coefficient count");
  return c.values.dot(x_row);
}

Eigen::MatrixXd cholesky(const Eigen::MatrixXd& S) {
  if (S.rows() != S.cols()) throw UsageError("cholesky: matrix is not square");
  const Eigen::Index n = S.rows();
  if (!S.isApprox(S.transpose(), 1e-12))
    throw UsageError("cholesky: matrix is not symmetric");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = S(j, j) - L.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) {
      std::ostringstream os;
      os << "cholesky: matrix is not positive definite (pivot " << j << ")";
      throw NumericError(os.str());
    }
    L(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i)
      L(i, j) = (S(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
  }
  return L;
}

}  // namespace slrcmi::linalg
