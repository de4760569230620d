#include "bwlab/linear.hpp"

#include <algorithm>
#include <cmath>

#include "bwlab/errors.hpp"

namespace bwlab {

Standardizer Standardizer::fit(const MatrixXd& x) {
  Standardizer s;
  const double n = static_cast<double>(x.rows());
  s.mean = x.colwise().mean();
  s.scale = ((x.rowwise() - s.mean.transpose()).array().square().colwise().sum() / n)
                .sqrt()
                .transpose();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j)
    if (s.scale(j) <= 0) s.scale(j) = 1.0;
  return s;
}

MatrixXd Standardizer::apply(const MatrixXd& x) const {
  return (x.rowwise() - mean.transpose()).array().rowwise() /
         scale.transpose().array();
}

VectorXd ols_solve(const MatrixXd& x, const VectorXd& y) {
  return x.colPivHouseholderQr().solve(y);
}

VectorXd ridge_solve(const MatrixXd& x, const VectorXd& y, double lambda) {
  MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += lambda;
  return gram.ldlt().solve(x.transpose() * y);
}

RawRidge ridge_on_standardized(const MatrixXd& x, const VectorXd& y, double lambda) {
  const Standardizer s = Standardizer::fit(x);
  const MatrixXd z = s.apply(x);
  const double y_mean = y.mean();
  const VectorXd std_beta = ridge_solve(z, y.array() - y_mean, lambda);

  RawRidge out;
  out.beta = std_beta.cwiseQuotient(s.scale);
  out.intercept = y_mean - out.beta.dot(s.mean);
  return out;
}

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

double kkt_violation(const MatrixXd& x, const VectorXd& residual,
                     const VectorXd& beta, double lambda, double n) {
  double worst = 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double c = x.col(j).dot(residual) / n;
    const double v = beta(j) == 0 ? std::max(0.0, std::abs(c) - lambda)
                                  : std::abs(c - (beta(j) > 0 ? lambda : -lambda));
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace

LassoFit lasso_cd(const MatrixXd& x, const VectorXd& y, double lambda,
                  const VectorXd* warm, double tol, std::size_t max_sweeps) {
  const Eigen::Index p = x.cols();
  const double n = static_cast<double>(x.rows());

  LassoFit fit;
  fit.beta = warm ? *warm : VectorXd::Zero(p);

  VectorXd col_sq(p);
  for (Eigen::Index j = 0; j < p; ++j) col_sq(j) = x.col(j).squaredNorm() / n;

  VectorXd residual = y - x * fit.beta;
  for (fit.sweeps = 0; fit.sweeps < max_sweeps; ++fit.sweeps) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (col_sq(j) == 0) continue;
      const double rho = x.col(j).dot(residual) / n + col_sq(j) * fit.beta(j);
      const double updated = soft_threshold(rho, lambda) / col_sq(j);
      const double delta = updated - fit.beta(j);
      if (delta != 0) {
        residual -= x.col(j) * delta;
        fit.beta(j) = updated;
      }
    }
    fit.kkt_violation = kkt_violation(x, residual, fit.beta, lambda, n);
    if (fit.kkt_violation <= tol) {
      fit.converged = true;
      ++fit.sweeps;
      break;
    }
  }
  return fit;
}

double lasso_lambda_max(const MatrixXd& x, const VectorXd& y) {
  return (x.transpose() * y).cwiseAbs().maxCoeff() / static_cast<double>(x.rows());
}

std::vector<double> log_spaced_descending(double hi, double lo, std::size_t count) {
  if (count == 1) return {hi};
  std::vector<double> out(count);
  const double step = (std::log(lo) - std::log(hi)) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = std::exp(std::log(hi) + step * static_cast<double>(i));
  out.front() = hi;
  out.back() = lo;
  return out;
}

}  // namespace bwlab
