#include "bwlab/eda.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace bwlab {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

double quantile(std::span<const double> values, double fraction) {
  if (values.empty()) return kNan;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = fraction * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

SummaryStats summarize(const DataMatrix& data) {
  SummaryStats out;
  out.column_names = data.column_names();
  out.columns.resize(static_cast<std::size_t>(data.cols()));
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    ColumnSummary& s = out.columns[static_cast<std::size_t>(j)];
    const std::vector<double> x = data.observed_column(j);
    s.count = x.size();
    if (x.empty()) {
      s.mean = s.sd = s.min = s.q25 = s.median = s.q75 = s.max = kNan;
      continue;
    }
    const double n = static_cast<double>(x.size());
    s.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0;
    for (double v : x) ss += (v - s.mean) * (v - s.mean);
    s.sd = x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    s.min = *std::min_element(x.begin(), x.end());
    s.max = *std::max_element(x.begin(), x.end());
    s.q25 = quantile(x, 0.25);
    s.median = quantile(x, 0.50);
    s.q75 = quantile(x, 0.75);
  }
  return out;
}

namespace {

struct Moments {
  double mean = 0, var_mle = 0;  // variance with 1/n normalization
};

Moments moments(std::span<const double> x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= n;
  for (double v : x) m.var_mle += (v - m.mean) * (v - m.mean);
  m.var_mle /= n;
  return m;
}

double gaussian_loglik(double n, double var_mle) {
  return -0.5 * n * (std::log(2.0 * M_PI * var_mle) + 1.0);
}

// Newton solve of log(k) - digamma(k) = s for the gamma shape.
double gamma_shape_mle(double s) {
  double k = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  for (int it = 0; it < 60; ++it) {
    const double f = std::log(k) - boost::math::digamma(k) - s;
    const double fp = 1.0 / k - boost::math::trigamma(k);
    const double step = f / fp;
    k -= step;
    if (k <= 0) k = 1e-8;
    if (std::abs(step) < 1e-12 * std::max(1.0, k)) break;
  }
  return k;
}

}  // namespace

DistributionVerdict classify_distribution(std::span<const double> observed,
                                          ColumnKind kind) {
  DistributionVerdict verdict;
  if (observed.size() < kMinSamplesForClassification) return verdict;

  const bool constant =
      std::all_of(observed.begin(), observed.end(),
                  [&](double v) { return v == observed.front(); });
  if (constant) return verdict;

  const double n = static_cast<double>(observed.size());
  const Moments m = moments(observed);

  if (kind == ColumnKind::discrete) {
    bool nonneg_integers = std::all_of(observed.begin(), observed.end(), [](double v) {
      return v >= 0 && v == std::floor(v);
    });
    // 1/(n-1) variance for the dispersion check, as in an index-of-dispersion test.
    const double var = m.var_mle * n / (n - 1.0);
    if (nonneg_integers && m.mean > 0 && std::abs(var / m.mean - 1.0) <= 0.20) {
      verdict.distribution = Distribution::poisson;
      verdict.candidates.push_back({Distribution::poisson, kNan, m.mean, 0});
    } else {
      verdict.distribution = Distribution::discrete;
      verdict.candidates.push_back({Distribution::discrete, kNan, 0, 0});
    }
    return verdict;
  }

  // The fitted skewness decides whether a positive-support family competes
  // for the verdict; the gaussian limit of gamma (shape -> inf) and lognormal
  // (sigma -> 0) would otherwise turn the AIC race into a coin flip.
  std::vector<bool> competes;
  auto add = [&](Distribution d, double loglik, int k, double p1, double p2,
                 double skewness = std::numeric_limits<double>::infinity()) {
    verdict.candidates.push_back({d, 2.0 * k - 2.0 * loglik, p1, p2});
    competes.push_back(skewness >= kGaussianLimitSkewness);
  };

  add(Distribution::gaussian, gaussian_loglik(n, m.var_mle), 2, m.mean,
      std::sqrt(m.var_mle));

  const double min_v = *std::min_element(observed.begin(), observed.end());
  const double max_v = *std::max_element(observed.begin(), observed.end());

  if (min_v > 0) {
    std::vector<double> logs(observed.size());
    std::transform(observed.begin(), observed.end(), logs.begin(),
                   [](double v) { return std::log(v); });
    const Moments lm = moments(logs);
    const double sum_log = lm.mean * n;

    if (lm.var_mle > 0)
      add(Distribution::lognormal, gaussian_loglik(n, lm.var_mle) - sum_log, 2,
          lm.mean, std::sqrt(lm.var_mle),
          (std::exp(lm.var_mle) + 2.0) * std::sqrt(std::expm1(lm.var_mle)));

    const double s = std::log(m.mean) - lm.mean;
    if (s > 0) {
      const double shape = gamma_shape_mle(s);
      const double scale = m.mean / shape;
      const double loglik = (shape - 1.0) * sum_log - n * shape -
                            n * shape * std::log(scale) - n * std::lgamma(shape);
      add(Distribution::gamma, loglik, 2, shape, scale, 2.0 / std::sqrt(shape));
    }

    const double rate = 1.0 / m.mean;
    add(Distribution::exponential, n * (std::log(rate) - 1.0), 1, rate, 0);
  }

  add(Distribution::uniform, -n * std::log(max_v - min_v), 2, min_v, max_v);

  std::size_t best = 0;
  for (std::size_t i = 1; i < verdict.candidates.size(); ++i) {
    if (competes[i] && (!competes[best] ||
                        verdict.candidates[i].aic < verdict.candidates[best].aic))
      best = i;
  }
  verdict.distribution = verdict.candidates[best].distribution;
  return verdict;
}

DataMatrix classify_columns(const DataMatrix& data) {
  DataMatrix out = data;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const auto x = out.observed_column(j);
    out.meta(j).distribution = classify_distribution(x, out.meta(j).kind).distribution;
  }
  return out;
}

DistributionTable tabulate_distributions(const DataMatrix& classified) {
  DistributionTable t;
  for (Eigen::Index j = 0; j < classified.cols(); ++j) {
    switch (classified.meta(j).distribution) {
      case Distribution::gaussian: ++t.gaussian; break;
      case Distribution::lognormal: ++t.lognormal; break;
      case Distribution::uniform: ++t.uniform; break;
      case Distribution::gamma: ++t.gamma; break;
      case Distribution::discrete: ++t.discrete; break;
      case Distribution::poisson: ++t.poisson; break;
      case Distribution::exponential: ++t.exponential; break;
      case Distribution::unknown: ++t.unknown; break;
    }
  }
  return t;
}

MissingnessProfile missingness_profile(const DataMatrix& data) {
  MissingnessProfile prof;
  const auto n = static_cast<std::size_t>(data.rows());
  const auto p = static_cast<std::size_t>(data.cols());
  std::size_t missing = 0;
  prof.per_column_rate.resize(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    std::size_t col_missing = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (!data.mask()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))
        ++col_missing;
    prof.per_column_rate[j] = static_cast<double>(col_missing) / static_cast<double>(n);
    missing += col_missing;
  }
  prof.overall_rate = static_cast<double>(missing) / static_cast<double>(n * p);

  std::map<std::vector<bool>, std::size_t> patterns;
  std::vector<bool> key(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j)
      key[j] = data.mask()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    ++patterns[key];
  }
  prof.pattern_count = patterns.size();
  return prof;
}

namespace {

struct Pattern {
  std::vector<Eigen::Index> observed_cols;  // indices into the test submatrix
  std::vector<Eigen::Index> rows;
};

// Clamp eigenvalues so the matrix is safely positive definite; the floor is
// relative to the average diagonal so affine column rescaling cancels.
Eigen::MatrixXd nearest_pd(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const double scale = std::max(sym.diagonal().mean(), 0.0);
  const double floor = std::max(1e-8 * scale, 1e-300);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct EmFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t iterations = 0;
  bool converged = false;
};

EmFit em_mvnormal(const Eigen::MatrixXd& values, const MaskArray& mask,
                  const std::vector<Pattern>& patterns, const McarConfig& config) {
  const Eigen::Index p = values.cols();
  Eigen::Index n_used = 0;
  for (const auto& pat : patterns) n_used += static_cast<Eigen::Index>(pat.rows.size());

  // Available-case means.
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double sum = 0;
    std::size_t cnt = 0;
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      if (mask(i, j)) { sum += values(i, j); ++cnt; }
    mu(j) = sum / static_cast<double>(cnt);
  }

  // Pairwise-complete covariance, projected to positive definite.
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = a; b < p; ++b) {
      double sum = 0;
      std::size_t cnt = 0;
      for (Eigen::Index i = 0; i < values.rows(); ++i) {
        if (mask(i, a) && mask(i, b)) {
          sum += (values(i, a) - mu(a)) * (values(i, b) - mu(b));
          ++cnt;
        }
      }
      double c = cnt > 1 ? sum / static_cast<double>(cnt) : (a == b ? 1.0 : 0.0);
      if (a == b && c <= 0) c = 1.0;
      sigma(a, b) = sigma(b, a) = c;
    }
  }
  sigma = nearest_pd(sigma);

  EmFit fit;
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t iter = 1; iter <= config.max_em_iterations; ++iter) {
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    double ll = 0;

    for (const auto& pat : patterns) {
      const auto& obs = pat.observed_cols;
      const auto po = static_cast<Eigen::Index>(obs.size());
      std::vector<Eigen::Index> mis;
      for (Eigen::Index j = 0; j < p; ++j)
        if (std::find(obs.begin(), obs.end(), j) == obs.end()) mis.push_back(j);
      const auto pm = static_cast<Eigen::Index>(mis.size());

      Eigen::MatrixXd s_oo(po, po), s_mo(pm, po), s_mm(pm, pm);
      Eigen::VectorXd mu_o(po), mu_m(pm);
      for (Eigen::Index a = 0; a < po; ++a) {
        mu_o(a) = mu(obs[a]);
        for (Eigen::Index b = 0; b < po; ++b) s_oo(a, b) = sigma(obs[a], obs[b]);
      }
      for (Eigen::Index a = 0; a < pm; ++a) {
        mu_m(a) = mu(mis[a]);
        for (Eigen::Index b = 0; b < po; ++b) s_mo(a, b) = sigma(mis[a], obs[b]);
        for (Eigen::Index b = 0; b < pm; ++b) s_mm(a, b) = sigma(mis[a], mis[b]);
      }

      Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
      if (llt.info() != Eigen::Success) {
        llt.compute(nearest_pd(s_oo));
      }
      const Eigen::MatrixXd reg = llt.solve(s_mo.transpose());  // po x pm
      Eigen::MatrixXd cond_cov;
      if (pm > 0) cond_cov = s_mm - s_mo * reg;

      double logdet = 0;
      for (Eigen::Index a = 0; a < po; ++a)
        logdet += 2.0 * std::log(llt.matrixL()(a, a));

      for (Eigen::Index r : pat.rows) {
        Eigen::VectorXd y_o(po);
        for (Eigen::Index a = 0; a < po; ++a) y_o(a) = values(r, obs[a]);
        const Eigen::VectorXd delta = y_o - mu_o;
        const Eigen::VectorXd alpha = llt.solve(delta);
        ll += -0.5 * (static_cast<double>(po) * std::log(2.0 * M_PI) + logdet +
                      delta.dot(alpha));

        Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
        for (Eigen::Index a = 0; a < po; ++a) x(obs[a]) = y_o(a);
        if (pm > 0) {
          const Eigen::VectorXd y_m = mu_m + reg.transpose() * delta;
          for (Eigen::Index a = 0; a < pm; ++a) x(mis[a]) = y_m(a);
        }
        s1 += x;
        s2 += x * x.transpose();
        if (pm > 0)
          for (Eigen::Index a = 0; a < pm; ++a)
            for (Eigen::Index b = 0; b < pm; ++b)
              s2(mis[a], mis[b]) += cond_cov(a, b);
      }
    }

    mu = s1 / static_cast<double>(n_used);
    sigma = s2 / static_cast<double>(n_used) - mu * mu.transpose();
    sigma = nearest_pd(0.5 * (sigma + sigma.transpose()));

    fit.iterations = iter;
    if (ll - prev_ll < config.em_tolerance && iter > 1) {
      fit.converged = true;
      break;
    }
    prev_ll = ll;
  }
  fit.mean = mu;
  fit.cov = sigma;
  return fit;
}

}  // namespace

McarTestResult little_mcar_test(const DataMatrix& data,
                                const std::optional<std::vector<std::string>>& columns,
                                const McarConfig& config) {
  std::vector<Eigen::Index> cols;
  if (columns) {
    for (const auto& name : *columns) {
      const Eigen::Index j = data.index_of(name);
      if (data.meta(j).kind != ColumnKind::continuous)
        throw DataError("little_mcar_test: column '" + name + "' is not continuous");
      cols.push_back(j);
    }
  } else {
    for (Eigen::Index j = 0; j < data.cols(); ++j)
      if (data.meta(j).kind == ColumnKind::continuous) cols.push_back(j);
  }

  McarTestResult res;
  if (cols.empty()) return res;
  for (Eigen::Index j : cols)
    if (data.observed_count(j) < 2) return res;

  const auto p = static_cast<Eigen::Index>(cols.size());
  const Eigen::Index n = data.rows();
  Eigen::MatrixXd values(n, p);
  MaskArray mask(n, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      mask(i, k) = data.mask()(i, cols[static_cast<std::size_t>(k)]);
      values(i, k) = mask(i, k) ? data.at(i, cols[static_cast<std::size_t>(k)]) : 0.0;
    }
  }

  // Group rows by missingness pattern; drop rows observing nothing.
  std::map<std::vector<bool>, Pattern> pattern_map;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<bool> key(static_cast<std::size_t>(p));
    bool any = false;
    for (Eigen::Index j = 0; j < p; ++j) {
      key[static_cast<std::size_t>(j)] = mask(i, j);
      any = any || mask(i, j);
    }
    if (!any) continue;
    auto& pat = pattern_map[key];
    if (pat.observed_cols.empty())
      for (Eigen::Index j = 0; j < p; ++j)
        if (mask(i, j)) pat.observed_cols.push_back(j);
    pat.rows.push_back(i);
  }

  std::vector<Pattern> all_patterns;
  for (auto& [key, pat] : pattern_map) all_patterns.push_back(pat);
  std::vector<const Pattern*> usable;
  for (const auto& pat : all_patterns)
    if (pat.rows.size() >= 2) usable.push_back(&pat);

  std::size_t df_sum = 0;
  for (const auto* pat : usable) df_sum += pat->observed_cols.size();
  const auto df_signed = static_cast<long long>(df_sum) - static_cast<long long>(p);
  if (usable.size() < 2 || df_signed <= 0) return res;  // inapplicable

  const EmFit fit = em_mvnormal(values, mask, all_patterns, config);
  res.em_iterations = fit.iterations;
  res.em_converged = fit.converged;
  res.patterns_used = usable.size();

  double d2 = 0;
  for (const auto* pat : usable) {
    const auto& obs = pat->observed_cols;
    const auto po = static_cast<Eigen::Index>(obs.size());
    Eigen::VectorXd ybar = Eigen::VectorXd::Zero(po);
    for (Eigen::Index r : pat->rows)
      for (Eigen::Index a = 0; a < po; ++a) ybar(a) += values(r, obs[a]);
    ybar /= static_cast<double>(pat->rows.size());

    Eigen::VectorXd mu_o(po);
    Eigen::MatrixXd s_oo(po, po);
    for (Eigen::Index a = 0; a < po; ++a) {
      mu_o(a) = fit.mean(obs[a]);
      for (Eigen::Index b = 0; b < po; ++b) s_oo(a, b) = fit.cov(obs[a], obs[b]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
    if (llt.info() != Eigen::Success) {
      const double eps = 1e-8 * s_oo.trace() / static_cast<double>(po);
      llt.compute(s_oo + eps * Eigen::MatrixXd::Identity(po, po));
      res.ridge_stabilized = true;
      if (llt.info() != Eigen::Success)
        throw NumericError("little_mcar_test: pattern covariance is singular");
    }
    const Eigen::VectorXd delta = ybar - mu_o;
    d2 += static_cast<double>(pat->rows.size()) * delta.dot(llt.solve(delta));
  }

  res.applicable = true;
  res.d2 = d2;
  res.df = static_cast<std::size_t>(df_signed);
  const boost::math::chi_squared_distribution<double> chi2(static_cast<double>(res.df));
  res.p_value = boost::math::cdf(boost::math::complement(chi2, std::max(0.0, d2)));
  return res;
}

}  // namespace bwlab
