#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace bwlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Column-wise centering and scaling state, kept so coefficients fitted on the
// standardized design can be mapped back to the original units. Scale is the
// population standard deviation; zero-variance columns get scale 1 so they
// standardize to all-zero instead of dividing by zero.
struct Standardizer {
  VectorXd mean;
  VectorXd scale;

  static Standardizer fit(const MatrixXd& x);
  MatrixXd apply(const MatrixXd& x) const;
};

/// Least-squares coefficients via column-pivoted QR (no intercept handling).
VectorXd ols_solve(const MatrixXd& x, const VectorXd& y);

/// Closed-form ridge (XᵀX + λI)⁻¹Xᵀy (no intercept handling).
VectorXd ridge_solve(const MatrixXd& x, const VectorXd& y, double lambda);

struct RawRidge {
  VectorXd beta;
  double intercept = 0;
};

// Ridge of y on internally standardized predictors with an unpenalized
// intercept, reported back in raw feature scale.
RawRidge ridge_on_standardized(const MatrixXd& x, const VectorXd& y, double lambda);

struct LassoFit {
  VectorXd beta;
  std::size_t sweeps = 0;
  bool converged = false;
  double kkt_violation = 0;  // max stationarity residual at exit
};

// Coordinate descent for (1/2n)‖y − Xβ‖² + λ‖β‖₁. Convergence is declared
// when the largest violation of the stationarity conditions
// |x_jᵀ(y − Xβ)/n| ≤ λ (zero coords) and x_jᵀ(y − Xβ)/n = sign(β_j)λ
// (active coords) drops to tol. Pass warm to resume from a previous solution.
LassoFit lasso_cd(const MatrixXd& x, const VectorXd& y, double lambda,
                  const VectorXd* warm = nullptr, double tol = 1e-7,
                  std::size_t max_sweeps = 10000);

/// max_j |x_jᵀy|/n, the smallest penalty with an all-zero solution.
double lasso_lambda_max(const MatrixXd& x, const VectorXd& y);

/// `count` log-spaced values from hi down to lo inclusive.
std::vector<double> log_spaced_descending(double hi, double lo, std::size_t count);

}  // namespace bwlab
