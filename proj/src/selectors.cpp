#include "bwlab/selectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "bwlab/errors.hpp"
#include "bwlab/evaluation.hpp"
#include "bwlab/rng.hpp"
#include "bwlab/trees.hpp"
#include "selector_common.hpp"

namespace bwlab {

namespace {

using detail::finalize_report;
using detail::format_double;
using detail::join_names;
using detail::validate_selector_input;

// Finite stand-in for a perfectly correlated feature; large enough to outrank
// any honestly computed F value.
constexpr double kSaturatedF = 1e300;

double pearson_abs(const VectorXd& a, const VectorXd& b) {
  const double ma = a.mean();
  const double mb = b.mean();
  const VectorXd ca = a.array() - ma;
  const VectorXd cb = b.array() - mb;
  const double va = ca.squaredNorm();
  const double vb = cb.squaredNorm();
  if (va == 0.0 || vb == 0.0) return 0.0;
  return std::abs(ca.dot(cb)) / std::sqrt(va * vb);
}

}  // namespace

SelectorReport pearson_rank(const MatrixXd& x, const VectorXd& y,
                            const std::vector<std::string>& names, const SelectorConfig& cfg) {
  validate_selector_input(x, y, names, cfg);
  VectorXd scores(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) scores[j] = pearson_abs(x.col(j), y);
  return finalize_report("pearson", scores, names, cfg.top_k);
}

SelectorReport anova_f_rank(const MatrixXd& x, const VectorXd& y,
                            const std::vector<std::string>& names, const SelectorConfig& cfg) {
  validate_selector_input(x, y, names, cfg);
  const auto n = static_cast<double>(x.rows());
  if (x.rows() < 3) throw DataError("anova_f needs at least 3 rows");

  std::vector<std::string> saturated;
  VectorXd scores(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double r = pearson_abs(x.col(j), y);
    const double r2 = r * r;
    if (1.0 - r2 <= 1e-12) {
      scores[j] = kSaturatedF;
      saturated.push_back(names[static_cast<std::size_t>(j)]);
    } else {
      scores[j] = (n - 2.0) * r2 / (1.0 - r2);
    }
  }
  std::map<std::string, std::string> meta;
  if (!saturated.empty()) meta["saturated_features"] = join_names(saturated);
  return finalize_report("anova_f", scores, names, cfg.top_k, std::move(meta));
}

std::vector<int> equal_frequency_bins(const VectorXd& v, std::size_t bins) {
  if (bins < 2) throw UsageError("equal_frequency_bins needs at least 2 bins");
  const auto n = static_cast<std::size_t>(v.size());
  if (n == 0) throw DataError("equal_frequency_bins: empty input");

  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end());

  // Interior edges are linearly interpolated quantiles at k/bins. A value is
  // assigned the count of edges <= it, so equal values always share a bin.
  std::vector<double> edges(bins - 1);
  for (std::size_t k = 1; k < bins; ++k) {
    const double h = static_cast<double>(n - 1) * static_cast<double>(k) /
                     static_cast<double>(bins);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    const std::size_t hi = std::min(lo + 1, n - 1);
    edges[k - 1] = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
  }

  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), v[static_cast<Eigen::Index>(i)]);
    out[i] = static_cast<int>(std::distance(edges.begin(), it));
  }
  return out;
}

double binned_entropy(const std::vector<int>& bins_a, std::size_t bins) {
  std::vector<std::size_t> counts(bins, 0);
  for (int b : bins_a) counts[static_cast<std::size_t>(b)]++;
  const auto n = static_cast<double>(bins_a.size());
  double h = 0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

double binned_mutual_information(const std::vector<int>& bins_a, const std::vector<int>& bins_b,
                                 std::size_t bins) {
  if (bins_a.size() != bins_b.size())
    throw UsageError("binned_mutual_information: length mismatch");
  std::vector<std::size_t> joint(bins * bins, 0);
  for (std::size_t i = 0; i < bins_a.size(); ++i)
    joint[static_cast<std::size_t>(bins_a[i]) * bins + static_cast<std::size_t>(bins_b[i])]++;
  const auto n = static_cast<double>(bins_a.size());
  double h_joint = 0;
  for (std::size_t c : joint) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h_joint -= p * std::log(p);
  }
  // H(a) + H(b) - H(a,b); commutative additions keep it exactly symmetric.
  return binned_entropy(bins_a, bins) + binned_entropy(bins_b, bins) - h_joint;
}

SelectorReport mutual_info_rank(const MatrixXd& x, const VectorXd& y,
                                const std::vector<std::string>& names, const SelectorConfig& cfg) {
  validate_selector_input(x, y, names, cfg);
  const std::vector<int> yb = equal_frequency_bins(y, cfg.mi_bins);
  VectorXd scores(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const std::vector<int> xb = equal_frequency_bins(x.col(j), cfg.mi_bins);
    scores[j] = binned_mutual_information(xb, yb, cfg.mi_bins);
  }
  return finalize_report("mutual_info", scores, names, cfg.top_k);
}

namespace {

std::size_t count_inversions(std::vector<double>& v, std::vector<double>& scratch,
                             std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::size_t inv = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += mid - i;  // v[j] inverts against every remaining left element
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

double tie_pairs(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double total = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= v.size(); ++i) {
    if (i < v.size() && v[i] == v[i - 1]) {
      ++run;
    } else {
      total += static_cast<double>(run) * static_cast<double>(run - 1) / 2.0;
      run = 1;
    }
  }
  return total;
}

}  // namespace

double kendall_tau_b(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size()) throw UsageError("kendall_tau_b: length mismatch");
  const auto n = static_cast<std::size_t>(a.size());
  if (n < 2) throw DataError("kendall_tau_b needs at least 2 rows");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto jj = static_cast<Eigen::Index>(j);
    if (a[ii] != a[jj]) return a[ii] < a[jj];
    return b[ii] < b[jj];
  });

  // Knight's algorithm: after sorting by (a, b), discordant-ish pairs are the
  // inversions of the b sequence; tie counts correct the total.
  double n1 = 0, n3 = 0;
  std::size_t run_a = 1, run_ab = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    const bool same_a =
        i < n && a[static_cast<Eigen::Index>(order[i])] == a[static_cast<Eigen::Index>(order[i - 1])];
    const bool same_ab =
        same_a && b[static_cast<Eigen::Index>(order[i])] == b[static_cast<Eigen::Index>(order[i - 1])];
    if (same_a) ++run_a;
    if (same_ab) {
      ++run_ab;
    } else {
      n3 += static_cast<double>(run_ab) * static_cast<double>(run_ab - 1) / 2.0;
      run_ab = 1;
    }
    if (!same_a) {
      n1 += static_cast<double>(run_a) * static_cast<double>(run_a - 1) / 2.0;
      run_a = 1;
    }
  }

  std::vector<double> bseq(n);
  for (std::size_t i = 0; i < n; ++i) bseq[i] = b[static_cast<Eigen::Index>(order[i])];
  std::vector<double> scratch(n);
  const double swaps = static_cast<double>(count_inversions(bseq, scratch, 0, n));

  std::vector<double> bvals(b.data(), b.data() + b.size());
  const double n2 = tie_pairs(std::move(bvals));
  const double n0 = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;

  const double concordant_minus_discordant = n0 - n1 - n2 + n3 - 2.0 * swaps;
  const double denom = std::sqrt((n0 - n1) * (n0 - n2));
  if (denom == 0.0) return 0.0;
  return concordant_minus_discordant / denom;
}

SelectorReport kendall_rank(const MatrixXd& x, const VectorXd& y,
                            const std::vector<std::string>& names, const SelectorConfig& cfg) {
  validate_selector_input(x, y, names, cfg);
  if (x.rows() < 2) throw DataError("kendall needs at least 2 rows");
  VectorXd scores(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) scores[j] = std::abs(kendall_tau_b(x.col(j), y));
  return finalize_report("kendall", scores, names, cfg.top_k);
}

namespace {

// MI normalized by the smaller marginal entropy; 0 when either side is
// constant under the binning.
double normalized_mi(const std::vector<int>& a, double h_a, const std::vector<int>& b, double h_b,
                     std::size_t bins) {
  const double h_min = std::min(h_a, h_b);
  if (h_min <= 0.0) return 0.0;
  return binned_mutual_information(a, b, bins) / h_min;
}

}  // namespace

SelectorReport inmifs_select(const MatrixXd& x, const VectorXd& y,
                             const std::vector<std::string>& names, const SelectorConfig& cfg) {
  validate_selector_input(x, y, names, cfg);
  const auto p = static_cast<std::size_t>(x.cols());
  const std::size_t picks = std::min(cfg.top_k, p);

  std::vector<std::vector<int>> xb(p);
  std::vector<double> hx(p);
  for (std::size_t j = 0; j < p; ++j) {
    xb[j] = equal_frequency_bins(x.col(static_cast<Eigen::Index>(j)), cfg.mi_bins);
    hx[j] = binned_entropy(xb[j], cfg.mi_bins);
  }
  const std::vector<int> yb = equal_frequency_bins(y, cfg.mi_bins);
  const double hy = binned_entropy(yb, cfg.mi_bins);

  std::vector<double> relevance(p);
  for (std::size_t j = 0; j < p; ++j)
    relevance[j] = normalized_mi(xb[j], hx[j], yb, hy, cfg.mi_bins);

  std::vector<bool> taken(p, false);
  std::vector<double> max_redundancy(p, 0.0);
  std::vector<std::string> selection_order;
  VectorXd scores = VectorXd::Constant(static_cast<Eigen::Index>(p),
                                       std::numeric_limits<double>::lowest());

  for (std::size_t step = 0; step < picks; ++step) {
    std::size_t best = p;
    double best_crit = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p; ++j) {
      if (taken[j]) continue;
      const double crit = step == 0 ? relevance[j] : relevance[j] - max_redundancy[j];
      if (crit > best_crit) {
        best_crit = crit;
        best = j;
      }
    }
    taken[best] = true;
    scores[static_cast<Eigen::Index>(best)] = best_crit;
    selection_order.push_back(names[best]);
    for (std::size_t j = 0; j < p; ++j) {
      if (taken[j]) continue;
      max_redundancy[j] =
          std::max(max_redundancy[j], normalized_mi(xb[j], hx[j], xb[best], hx[best], cfg.mi_bins));
    }
  }

  // Unpicked features sit strictly below every picked one so the top min(k,p)
  // cut keeps exactly the greedy picks.
  std::map<std::string, std::string> meta;
  meta["criterion"] = "max( NI(x;y) - max_selected NI(x;x_s) ), NI = MI/min(H)";
  meta["selection_order"] = join_names(selection_order);
  return finalize_report("inmifs", scores, names, cfg.top_k, std::move(meta));
}

namespace {

// Cross-validated least squares evaluated from per-fold Gram matrices of the
// intercept-augmented design. A 1e-8 ridge keeps singular subsets solvable.
struct ForwardCv {
  const MatrixXd& x;
  const VectorXd& y;
  std::vector<Fold> folds;
  std::vector<MatrixXd> gram;  // (p+1) x (p+1), intercept column first
  std::vector<VectorXd> xty;

  ForwardCv(const MatrixXd& x_in, const VectorXd& y_in, std::size_t k, std::uint64_t seed)
      : x(x_in), y(y_in), folds(kfold_split(x_in.rows(), k, seed)) {
    const Eigen::Index q = x.cols() + 1;
    for (const Fold& fold : folds) {
      MatrixXd a(fold.train.size(), q);
      VectorXd ty(fold.train.size());
      for (std::size_t r = 0; r < fold.train.size(); ++r) {
        a(static_cast<Eigen::Index>(r), 0) = 1.0;
        a.row(static_cast<Eigen::Index>(r)).tail(x.cols()) = x.row(fold.train[r]);
        ty[static_cast<Eigen::Index>(r)] = y[fold.train[r]];
      }
      gram.push_back(a.transpose() * a);
      xty.push_back(a.transpose() * ty);
    }
  }

  // Mean validation RMSE of OLS on the given feature subset.
  double rmse(const std::vector<std::size_t>& subset) const {
    const auto m = static_cast<Eigen::Index>(subset.size()) + 1;
    double total = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      MatrixXd g(m, m);
      VectorXd b(m);
      g(0, 0) = gram[f](0, 0);
      b[0] = xty[f][0];
      for (Eigen::Index r = 1; r < m; ++r) {
        const auto jr = static_cast<Eigen::Index>(subset[static_cast<std::size_t>(r - 1)]) + 1;
        g(r, 0) = gram[f](jr, 0);
        g(0, r) = gram[f](0, jr);
        b[r] = xty[f][jr];
        for (Eigen::Index c = 1; c < m; ++c) {
          const auto jc = static_cast<Eigen::Index>(subset[static_cast<std::size_t>(c - 1)]) + 1;
          g(r, c) = gram[f](jr, jc);
        }
      }
      g.diagonal().array() += 1e-8;
      const VectorXd beta = g.ldlt().solve(b);

      double sq = 0;
      for (Eigen::Index row : folds[f].validation) {
        double pred = beta[0];
        for (Eigen::Index r = 1; r < m; ++r)
          pred += beta[r] * x(row, static_cast<Eigen::Index>(subset[static_cast<std::size_t>(r - 1)]));
        const double e = y[row] - pred;
        sq += e * e;
      }
      total += std::sqrt(sq / static_cast<double>(folds[f].validation.size()));
    }
    return total / static_cast<double>(folds.size());
  }
};

}  // namespace

SelectorReport forward_select(const MatrixXd& x, const VectorXd& y,
                              const std::vector<std::string>& names, const SelectorConfig& cfg) {
  validate_selector_input(x, y, names, cfg);
  const auto p = static_cast<std::size_t>(x.cols());
  const std::size_t max_picks = std::min(cfg.top_k, p);

  const ForwardCv cv(x, y, cfg.forward_folds, Rng::derive(cfg.seed, "forward"));

  std::vector<std::size_t> selected;
  std::vector<bool> taken(p, false);
  VectorXd scores = VectorXd::Zero(static_cast<Eigen::Index>(p));
  std::vector<std::string> selection_order;
  double current = cv.rmse({});

  while (selected.size() < max_picks) {
    std::size_t best = p;
    double best_rmse = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p; ++j) {
      if (taken[j]) continue;
      selected.push_back(j);
      const double r = cv.rmse(selected);
      selected.pop_back();
      if (r < best_rmse) {
        best_rmse = r;
        best = j;
      }
    }
    const double improvement = current - best_rmse;
    if (best == p || improvement <= cfg.forward_min_improvement) break;
    selected.push_back(best);
    taken[best] = true;
    scores[static_cast<Eigen::Index>(best)] = improvement;
    selection_order.push_back(names[best]);
    current = best_rmse;
  }

  // Features never added pad the list at score 0, ordered by column index.
  std::map<std::string, std::string> meta;
  meta["selected_count"] = std::to_string(selected.size());
  meta["selection_order"] = join_names(selection_order);
  meta["final_cv_rmse"] = format_double(current);
  return finalize_report("forward", scores, names, cfg.top_k, std::move(meta));
}

SelectorReport rfe_select(const MatrixXd& x, const VectorXd& y,
                          const std::vector<std::string>& names, const SelectorConfig& cfg) {
  validate_selector_input(x, y, names, cfg);
  const auto p = static_cast<std::size_t>(x.cols());
  const std::size_t keep = std::min(cfg.top_k, p);

  const Standardizer std_x = Standardizer::fit(x);
  const MatrixXd z = std_x.apply(x);
  const VectorXd yc = y.array() - y.mean();
  const MatrixXd gram = z.transpose() * z;
  const VectorXd zty = z.transpose() * yc;

  std::vector<std::size_t> active(p);
  std::iota(active.begin(), active.end(), std::size_t{0});
  std::vector<std::string> eliminated;

  auto fit_active = [&](const std::vector<std::size_t>& cols) {
    const auto m = static_cast<Eigen::Index>(cols.size());
    MatrixXd g(m, m);
    VectorXd b(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      b[r] = zty[static_cast<Eigen::Index>(cols[static_cast<std::size_t>(r)])];
      for (Eigen::Index c = 0; c < m; ++c)
        g(r, c) = gram(static_cast<Eigen::Index>(cols[static_cast<std::size_t>(r)]),
                       static_cast<Eigen::Index>(cols[static_cast<std::size_t>(c)]));
    }
    g.diagonal().array() += cfg.rfe_lambda;
    return VectorXd(g.ldlt().solve(b));
  };

  while (active.size() > keep) {
    const VectorXd beta = fit_active(active);
    std::size_t drop = 0;
    for (std::size_t i = 1; i < active.size(); ++i)
      if (std::abs(beta[static_cast<Eigen::Index>(i)]) <
          std::abs(beta[static_cast<Eigen::Index>(drop)]))
        drop = i;
    eliminated.push_back(names[active[drop]]);
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
  }

  // Survivors outrank everything eliminated; among themselves they order by
  // final |coefficient|. Scores are elimination ranks, later = higher.
  const VectorXd beta = fit_active(active);
  std::vector<std::size_t> order(active.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double fa = std::abs(beta[static_cast<Eigen::Index>(a)]);
    const double fb = std::abs(beta[static_cast<Eigen::Index>(b)]);
    if (fa != fb) return fa > fb;
    return active[a] < active[b];
  });

  SelectorReport report;
  report.selector_name = "rfe";
  for (std::size_t i = 0; i < order.size(); ++i)
    report.ranked.push_back(
        {names[active[order[i]]], static_cast<double>(p - 1 - i)});
  report.metadata["lambda"] = format_double(cfg.rfe_lambda);
  report.metadata["elimination_order"] = join_names(eliminated);
  return report;
}

SelectorReport lasso_select(const MatrixXd& x, const VectorXd& y,
                            const std::vector<std::string>& names, const SelectorConfig& cfg) {
  validate_selector_input(x, y, names, cfg);
  const auto p = static_cast<std::size_t>(x.cols());

  const Standardizer std_x = Standardizer::fit(x);
  const MatrixXd z = std_x.apply(x);
  const double y_mean = y.mean();
  const VectorXd yc = y.array() - y_mean;

  const double lambda_max = lasso_lambda_max(z, yc);
  std::map<std::string, std::string> meta;
  if (lambda_max <= 0.0) {
    meta["chosen_lambda"] = "0";
    meta["note"] = "degenerate problem, all penalties give the zero solution";
    return finalize_report("lasso", VectorXd::Zero(static_cast<Eigen::Index>(p)), names,
                           cfg.top_k, std::move(meta));
  }
  const std::vector<double> path =
      log_spaced_descending(lambda_max, lambda_max / 1000.0, cfg.lasso_path_points);

  auto solve_path_point = [&](const MatrixXd& zx, const VectorXd& zy, double lambda,
                              const VectorXd* warm) {
    LassoFit fit = lasso_cd(zx, zy, lambda, warm);
    if (!fit.converged)
      throw NumericError("lasso failed to converge at lambda=" + format_double(lambda));
    return fit;
  };

  const std::vector<Fold> folds =
      kfold_split(x.rows(), cfg.lasso_cv_folds, Rng::derive(cfg.seed, "lasso"));
  std::vector<double> cv_rmse(path.size(), 0.0);
  for (const Fold& fold : folds) {
    MatrixXd xt(fold.train.size(), x.cols());
    VectorXd yt(fold.train.size());
    for (std::size_t r = 0; r < fold.train.size(); ++r) {
      xt.row(static_cast<Eigen::Index>(r)) = x.row(fold.train[r]);
      yt[static_cast<Eigen::Index>(r)] = y[fold.train[r]];
    }
    const Standardizer fold_std = Standardizer::fit(xt);
    const MatrixXd zt = fold_std.apply(xt);
    const double fold_mean = yt.mean();
    const VectorXd ytc = yt.array() - fold_mean;

    VectorXd warm = VectorXd::Zero(x.cols());
    for (std::size_t i = 0; i < path.size(); ++i) {
      const LassoFit fit = solve_path_point(zt, ytc, path[i], &warm);
      warm = fit.beta;
      double sq = 0;
      for (Eigen::Index row : fold.validation) {
        double pred = fold_mean;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          if (fit.beta[j] == 0.0) continue;
          pred += fit.beta[j] * (x(row, j) - fold_std.mean[j]) / fold_std.scale[j];
        }
        const double e = y[row] - pred;
        sq += e * e;
      }
      cv_rmse[i] += std::sqrt(sq / static_cast<double>(fold.validation.size()));
    }
  }
  for (double& r : cv_rmse) r /= static_cast<double>(folds.size());

  std::size_t chosen = 0;
  for (std::size_t i = 1; i < path.size(); ++i)
    if (cv_rmse[i] < cv_rmse[chosen]) chosen = i;

  VectorXd warm = VectorXd::Zero(x.cols());
  VectorXd beta;
  for (std::size_t i = 0; i <= chosen; ++i) {
    const LassoFit fit = solve_path_point(z, yc, path[i], &warm);
    warm = fit.beta;
    beta = fit.beta;
  }

  Eigen::Index active = 0;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    if (beta[j] != 0.0) ++active;

  meta["chosen_lambda"] = format_double(path[chosen]);
  meta["cv_rmse"] = format_double(cv_rmse[chosen]);
  meta["active_count"] = std::to_string(active);
  return finalize_report("lasso", beta.cwiseAbs(), names, cfg.top_k, std::move(meta));
}

SelectorReport ridge_rank(const MatrixXd& x, const VectorXd& y,
                          const std::vector<std::string>& names, const SelectorConfig& cfg) {
  validate_selector_input(x, y, names, cfg);
  const Standardizer std_x = Standardizer::fit(x);
  const MatrixXd z = std_x.apply(x);
  const VectorXd yc = y.array() - y.mean();
  const VectorXd beta = ridge_solve(z, yc, cfg.ridge_lambda);
  std::map<std::string, std::string> meta;
  meta["lambda"] = format_double(cfg.ridge_lambda);
  return finalize_report("ridge", beta.cwiseAbs(), names, cfg.top_k, std::move(meta));
}

SelectorReport tree_importance_rank(const MatrixXd& x, const VectorXd& y,
                                    const std::vector<std::string>& names,
                                    const SelectorConfig& cfg) {
  validate_selector_input(x, y, names, cfg);
  CartConfig tree_cfg;
  tree_cfg.max_depth = static_cast<int>(cfg.cart_max_depth);
  tree_cfg.min_leaf = cfg.cart_min_leaf;
  const CartTree tree = CartTree::fit(x, y, tree_cfg);

  VectorXd gains = tree.importance(x.cols());
  const double total = gains.sum();
  if (total > 0) gains /= total;
  std::map<std::string, std::string> meta;
  meta["leaf_count"] = std::to_string(tree.leaf_count());
  return finalize_report("cart", gains, names, cfg.top_k, std::move(meta));
}

const std::vector<SelectorEntry>& all_selectors() {
  static const std::vector<SelectorEntry> table = {
      {"pearson", &pearson_rank},   {"anova_f", &anova_f_rank},
      {"mutual_info", &mutual_info_rank}, {"kendall", &kendall_rank},
      {"inmifs", &inmifs_select},   {"forward", &forward_select},
      {"rfe", &rfe_select},         {"lasso", &lasso_select},
      {"ridge", &ridge_rank},       {"cart", &tree_importance_rank},
      {"mars", &mars_select},       {"bart", &bart_select},
  };
  return table;
}

SelectorReport run_selector(const std::string& name, const MatrixXd& x, const VectorXd& y,
                            const std::vector<std::string>& names, const SelectorConfig& cfg) {
  for (const SelectorEntry& entry : all_selectors())
    if (entry.name == name) return entry.fn(x, y, names, cfg);
  throw UsageError("unknown selector: " + name);
}

ConsensusReport consensus_rank(const std::vector<SelectorReport>& reports, std::size_t top_k,
                               const std::vector<std::string>& column_order) {
  if (reports.empty()) throw UsageError("consensus_rank needs at least one report");

  std::map<std::string, ConsensusEntry> acc;
  for (const SelectorReport& report : reports) {
    for (std::size_t rank = 0; rank < report.ranked.size(); ++rank) {
      ConsensusEntry& e = acc[report.ranked[rank].name];
      e.name = report.ranked[rank].name;
      e.frequency += 1;
      e.borda += static_cast<double>(top_k) - static_cast<double>(rank + 1);
    }
  }

  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < column_order.size(); ++i) position[column_order[i]] = i;
  const std::size_t unknown = column_order.size();

  ConsensusReport out;
  for (auto& [name, entry] : acc) out.entries.push_back(entry);
  std::sort(out.entries.begin(), out.entries.end(),
            [&](const ConsensusEntry& a, const ConsensusEntry& b) {
              if (a.frequency != b.frequency) return a.frequency > b.frequency;
              if (a.borda != b.borda) return a.borda > b.borda;
              const auto ia = position.count(a.name) ? position.at(a.name) : unknown;
              const auto ib = position.count(b.name) ? position.at(b.name) : unknown;
              if (ia != ib) return ia < ib;
              return a.name < b.name;
            });
  return out;
}

}  // namespace bwlab
