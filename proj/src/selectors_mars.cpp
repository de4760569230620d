#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bwlab/errors.hpp"
#include "bwlab/selectors.hpp"
#include "selector_common.hpp"

namespace bwlab {

namespace {

using detail::finalize_report;
using detail::format_double;

struct Hinge {
  Eigen::Index feature = 0;
  double knot = 0;
  int sign = 1;  // +1: max(0, x - t); -1: max(0, t - x)
};

VectorXd hinge_column(const MatrixXd& x, const Hinge& h) {
  VectorXd col(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double d = static_cast<double>(h.sign) * (x(i, h.feature) - h.knot);
    col[i] = d > 0 ? d : 0.0;
  }
  return col;
}

// Generalized cross-validation with the conventional cost of 3 effective
// parameters per knot: C(M) = M + 3(M-1)/2 for M basis functions including
// the intercept.
double gcv(double rss, double n, std::size_t basis_count) {
  const auto m = static_cast<double>(basis_count);
  const double c = m + 1.5 * (m - 1.0);
  const double denom = 1.0 - c / n;
  if (denom <= 0) return std::numeric_limits<double>::infinity();
  return rss / (n * denom * denom);
}

// Least squares of y on the listed basis columns with a vanishing ridge so
// collinear hinge pairs stay solvable. Returns RSS.
double subset_rss(const MatrixXd& gram, const VectorXd& bty, double yty,
                  const std::vector<std::size_t>& cols) {
  const auto m = static_cast<Eigen::Index>(cols.size());
  MatrixXd g(m, m);
  VectorXd b(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    b[r] = bty[static_cast<Eigen::Index>(cols[static_cast<std::size_t>(r)])];
    for (Eigen::Index c = 0; c < m; ++c)
      g(r, c) = gram(static_cast<Eigen::Index>(cols[static_cast<std::size_t>(r)]),
                     static_cast<Eigen::Index>(cols[static_cast<std::size_t>(c)]));
  }
  g.diagonal().array() += 1e-10 * std::max(gram.diagonal().maxCoeff(), 1.0);
  const VectorXd beta = g.ldlt().solve(b);
  return std::max(0.0, yty - beta.dot(b));
}

}  // namespace

SelectorReport mars_select(const MatrixXd& x, const VectorXd& y,
                           const std::vector<std::string>& names, const SelectorConfig& cfg) {
  detail::validate_selector_input(x, y, names, cfg);
  if (x.rows() < 10) throw DataError("mars: insufficient rows");

  const auto n = x.rows();
  const auto p = x.cols();
  const auto nd = static_cast<double>(n);

  // Candidate knots: every distinct value when few, otherwise a spread of
  // order statistics, so knots always sit on observed values. The column
  // maximum is excluded because its ascending hinge is identically zero.
  std::vector<Hinge> candidates;
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> vals(x.col(j).data(), x.col(j).data() + n);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    if (vals.size() < 2) continue;
    std::vector<double> knots;
    if (vals.size() - 1 <= cfg.mars_knots_per_feature) {
      knots.assign(vals.begin(), vals.end() - 1);
    } else {
      const std::size_t m = vals.size() - 1;
      for (std::size_t k = 0; k < cfg.mars_knots_per_feature; ++k) {
        const std::size_t idx =
            k * (m - 1) / (cfg.mars_knots_per_feature - 1);
        if (knots.empty() || vals[idx] != knots.back()) knots.push_back(vals[idx]);
      }
    }
    for (double t : knots) candidates.push_back({j, t, +1});
  }

  std::map<std::string, std::string> meta;
  meta["max_terms"] = std::to_string(cfg.mars_max_terms);
  if (candidates.empty()) {
    meta["note"] = "no splittable feature";
    return finalize_report("mars", VectorXd::Zero(p), names, cfg.top_k, std::move(meta));
  }

  // Forward pass. The basis starts as the intercept; each step appends the
  // mirrored hinge pair that minimizes RSS. Candidate pair columns and their
  // products against the current basis are cached so each step costs two new
  // inner-product rows instead of a full rebuild.
  const auto n_cand = candidates.size();
  MatrixXd cand_plus(n, static_cast<Eigen::Index>(n_cand));
  MatrixXd cand_minus(n, static_cast<Eigen::Index>(n_cand));
  for (std::size_t c = 0; c < n_cand; ++c) {
    Hinge h = candidates[c];
    cand_plus.col(static_cast<Eigen::Index>(c)) = hinge_column(x, h);
    h.sign = -1;
    cand_minus.col(static_cast<Eigen::Index>(c)) = hinge_column(x, h);
  }
  const VectorXd wp = cand_plus.transpose() * y;
  const VectorXd wm = cand_minus.transpose() * y;

  const double yty = y.squaredNorm();
  const std::size_t max_pairs = cfg.mars_max_terms / 2;

  MatrixXd basis = MatrixXd::Ones(n, 1);
  std::vector<Hinge> terms;  // basis column i+1 corresponds to terms[i]
  MatrixXd gram = MatrixXd::Constant(1, 1, nd);
  VectorXd bty(1);
  bty[0] = y.sum();

  // u_plus/u_minus rows mirror the basis columns: row r holds basis_col_r dot
  // each candidate hinge.
  MatrixXd u_plus = MatrixXd::Zero(static_cast<Eigen::Index>(2 * max_pairs + 1),
                                   static_cast<Eigen::Index>(n_cand));
  MatrixXd u_minus = u_plus;
  u_plus.row(0) = cand_plus.colwise().sum();
  u_minus.row(0) = cand_minus.colwise().sum();

  double rss_current = subset_rss(gram, bty, yty, {0});

  while (terms.size() < 2 * max_pairs) {
    const auto m = static_cast<Eigen::Index>(basis.cols());
    // Keep the effective parameter count below n so GCV stays finite.
    if (2.5 * static_cast<double>(m + 2) - 1.5 >= nd) break;
    double best_rss = rss_current;
    std::size_t best_c = n_cand;

    for (std::size_t c = 0; c < n_cand; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      MatrixXd g(m + 2, m + 2);
      VectorXd b(m + 2);
      g.topLeftCorner(m, m) = gram;
      b.head(m) = bty;
      g.block(0, m, m, 1) = u_plus.col(ci).head(m);
      g.block(0, m + 1, m, 1) = u_minus.col(ci).head(m);
      g.block(m, 0, 1, m) = u_plus.col(ci).head(m).transpose();
      g.block(m + 1, 0, 1, m) = u_minus.col(ci).head(m).transpose();
      const auto& hp = cand_plus.col(ci);
      const auto& hm = cand_minus.col(ci);
      g(m, m) = hp.squaredNorm();
      g(m + 1, m + 1) = hm.squaredNorm();
      g(m, m + 1) = g(m + 1, m) = hp.dot(hm);
      b[m] = wp[ci];
      b[m + 1] = wm[ci];

      g.diagonal().array() += 1e-10 * std::max(g.diagonal().maxCoeff(), 1.0);
      const VectorXd beta = g.ldlt().solve(b);
      const double rss = std::max(0.0, yty - beta.dot(b));
      if (rss < best_rss - 1e-12 * std::max(yty, 1.0)) {
        best_rss = rss;
        best_c = c;
      }
    }
    if (best_c == n_cand) break;

    const auto ci = static_cast<Eigen::Index>(best_c);
    const Hinge chosen = candidates[best_c];
    basis.conservativeResize(Eigen::NoChange, m + 2);
    basis.col(m) = cand_plus.col(ci);
    basis.col(m + 1) = cand_minus.col(ci);
    terms.push_back({chosen.feature, chosen.knot, +1});
    terms.push_back({chosen.feature, chosen.knot, -1});

    MatrixXd g2(m + 2, m + 2);
    g2.topLeftCorner(m, m) = gram;
    g2.block(0, m, m, 1) = u_plus.col(ci).head(m);
    g2.block(0, m + 1, m, 1) = u_minus.col(ci).head(m);
    g2.block(m, 0, 1, m) = u_plus.col(ci).head(m).transpose();
    g2.block(m + 1, 0, 1, m) = u_minus.col(ci).head(m).transpose();
    g2(m, m) = cand_plus.col(ci).squaredNorm();
    g2(m + 1, m + 1) = cand_minus.col(ci).squaredNorm();
    g2(m, m + 1) = g2(m + 1, m) = cand_plus.col(ci).dot(cand_minus.col(ci));
    gram = std::move(g2);
    bty.conservativeResize(m + 2);
    bty[m] = wp[ci];
    bty[m + 1] = wm[ci];

    u_plus.row(m) = basis.col(m).transpose() * cand_plus;
    u_minus.row(m) = basis.col(m).transpose() * cand_minus;
    u_plus.row(m + 1) = basis.col(m + 1).transpose() * cand_plus;
    u_minus.row(m + 1) = basis.col(m + 1).transpose() * cand_minus;

    rss_current = best_rss;
  }

  // Backward pass: repeatedly drop the hinge term whose removal most lowers
  // GCV, stopping once every removal would raise it.
  std::vector<std::size_t> alive(terms.size());
  std::iota(alive.begin(), alive.end(), std::size_t{0});

  auto cols_without = [&](std::size_t skip_pos) {
    std::vector<std::size_t> cols{0};
    for (std::size_t i = 0; i < alive.size(); ++i)
      if (i != skip_pos) cols.push_back(alive[i] + 1);
    return cols;
  };

  auto current_cols = [&]() { return cols_without(alive.size()); };

  double gcv_current =
      gcv(subset_rss(gram, bty, yty, current_cols()), nd, alive.size() + 1);
  while (!alive.empty()) {
    double best_gcv = std::numeric_limits<double>::infinity();
    std::size_t best_pos = alive.size();
    for (std::size_t i = 0; i < alive.size(); ++i) {
      const double g = gcv(subset_rss(gram, bty, yty, cols_without(i)), nd, alive.size());
      if (g < best_gcv) {
        best_gcv = g;
        best_pos = i;
      }
    }
    if (best_pos == alive.size() || best_gcv > gcv_current) break;
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(best_pos));
    gcv_current = best_gcv;
  }

  // Feature scores: GCV increase caused by removing each surviving term,
  // attributed to the term's feature.
  VectorXd scores = VectorXd::Zero(p);
  for (std::size_t i = 0; i < alive.size(); ++i) {
    const double without = gcv(subset_rss(gram, bty, yty, cols_without(i)), nd, alive.size());
    const double delta = without - gcv_current;
    scores[terms[alive[i]].feature] += std::max(0.0, delta);
  }

  // The reported fit error comes from an explicit residual; the Gram shortcut
  // used during the search loses precision once RSS is near zero.
  MatrixXd final_basis(n, static_cast<Eigen::Index>(alive.size()) + 1);
  final_basis.col(0).setOnes();
  for (std::size_t i = 0; i < alive.size(); ++i)
    final_basis.col(static_cast<Eigen::Index>(i) + 1) = hinge_column(x, terms[alive[i]]);
  const VectorXd final_beta = final_basis.colPivHouseholderQr().solve(y);
  const double final_rss = (y - final_basis * final_beta).squaredNorm();

  meta["surviving_terms"] = std::to_string(alive.size());
  meta["gcv"] = format_double(gcv_current);
  meta["train_rmse"] = format_double(std::sqrt(final_rss / nd));
  return finalize_report("mars", scores, names, cfg.top_k, std::move(meta));
}

}  // namespace bwlab
