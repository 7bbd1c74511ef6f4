#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace slrcmi::linalg {

struct DesignMatrix {
  Eigen::MatrixXd rows;                    // n_obs x p
  std::vector<std::string> column_labels;  // size p, unique
};

struct Coefficients {
  Eigen::VectorXd values;
  std::vector<std::string> column_labels;
  int n_obs_used = 0;
};

/// Least squares via Householder QR with column pivoting. Numerical rank is
/// judged against a relative pivot threshold of 1e-10; a deficient design is
/// a hard error naming the columns that pivoted into the deficient tail
/// (silent column dropping would change the model meaning).
Coefficients fit_ols(const DesignMatrix& X, const Eigen::VectorXd& y);

/// Dot product c . x_row; lengths must agree.
double predict(const Coefficients& c, const Eigen::VectorXd& x_row);

/// Lower-triangular L with L L^T = S. A non-positive-definite input fails
/// with the index of the offending pivot.
Eigen::MatrixXd cholesky(const Eigen::MatrixXd& S);

}  // namespace slrcmi::linalg
