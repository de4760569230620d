#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "bwlab/csv.hpp"
#include "bwlab/eda.hpp"
#include "bwlab/rng.hpp"

using namespace bwlab;

namespace {

DataMatrix from_columns(const std::vector<std::vector<double>>& cols,
                        const std::vector<std::vector<bool>>& obs,
                        std::vector<std::string> names,
                        std::vector<ColumnMeta> meta = {}) {
  const auto n = static_cast<Eigen::Index>(cols[0].size());
  const auto p = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd v(n, p);
  MaskArray m(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      v(i, j) = cols[j][i];
      m(i, j) = obs.empty() ? true : obs[j][i];
    }
  return DataMatrix(std::move(v), std::move(m), std::move(names), std::move(meta));
}

}  // namespace

TEST_CASE("csv: missing cells set the mask") {
  const auto dm = parse_csv("a,b\n1,2\n,3\n4,5\n");
  CHECK(dm.rows() == 3);
  CHECK(dm.cols() == 2);
  CHECK_FALSE(dm.observed(1, 0));
  CHECK(missingness_profile(dm).overall_rate == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("csv: NA token, quoting, CRLF") {
  const auto dm = parse_csv("\"x,1\",y\r\n1,NA\r\n2,7\r\n");
  CHECK(dm.name(0) == "x,1");
  CHECK_FALSE(dm.observed(0, 1));
  CHECK(dm.at(1, 1) == 7.0);
}

TEST_CASE("csv: errors carry locations") {
  CHECK_THROWS_WITH_AS(parse_csv("a,b\n1\n"), doctest::Contains("row 2"), DataError);
  CHECK_THROWS_WITH_AS(parse_csv("a,b\n1,zap\n"), doctest::Contains("column 2"),
                       DataError);
  CHECK_THROWS_AS(parse_csv("a,a\n1,2\n"), DataError);
  CHECK_THROWS_AS(parse_csv("a,b\n\"1,2\n"), DataError);
}

TEST_CASE("csv: kind inference") {
  const auto dm = parse_csv("bin,cont\n0,1.5\n1,2.5\n0,3.5\n1,4.5\n");
  CHECK(dm.meta(0).kind == ColumnKind::discrete);
  CHECK(dm.meta(1).kind == ColumnKind::continuous);

  // 25 distinct non-integer values stays continuous even at 1000 rows.
  std::string text = "v\n";
  Rng rng(7);
  for (int i = 0; i < 1000; ++i)
    text += std::to_string(0.5 + static_cast<double>(rng.below(25))) + "\n";
  CHECK(parse_csv(text).meta(0).kind == ColumnKind::continuous);

  // 25 distinct integer values exceeds the 20-distinct ceiling.
  text = "v\n";
  for (int i = 0; i < 1000; ++i)
    text += std::to_string(rng.below(25)) + "\n";
  CHECK(parse_csv(text).meta(0).kind == ColumnKind::continuous);

  // ...unless the schema overrides it.
  CHECK(parse_csv(text, {{"v", ColumnKind::discrete}}).meta(0).kind ==
        ColumnKind::discrete);
  CHECK_THROWS_AS(parse_csv(text, {{"w", ColumnKind::discrete}}), DataError);
}

TEST_CASE("csv: round trip preserves values and mask") {
  Rng rng(11);
  Eigen::MatrixXd v(40, 3);
  MaskArray m(40, 3);
  for (Eigen::Index i = 0; i < 40; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) {
      v(i, j) = rng.normal() * 1e3;
      m(i, j) = rng.uniform() > 0.2;
    }
  const DataMatrix dm(v, m, {"a", "b", "c"});
  const auto back = parse_csv(csv_to_string(dm));
  REQUIRE(back.rows() == dm.rows());
  for (Eigen::Index i = 0; i < 40; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) {
      REQUIRE(back.observed(i, j) == dm.observed(i, j));
      if (dm.observed(i, j)) REQUIRE(back.at(i, j) == dm.at(i, j));
    }
}

TEST_CASE("summarize: observed-only arithmetic") {
  const auto dm = parse_csv("a,b\n1,1\n2,2\n3,\n4,4\n5,\n");
  const auto stats = summarize(dm);
  CHECK(stats.columns[0].count == 5);
  CHECK(stats.columns[0].mean == doctest::Approx(3.0));
  CHECK(stats.columns[0].median == doctest::Approx(3.0));
  CHECK(stats.columns[0].min == 1.0);
  CHECK(stats.columns[0].max == 5.0);
  CHECK(stats.columns[1].count == 3);
  CHECK(stats.columns[1].mean == doctest::Approx(7.0 / 3.0));
}

TEST_CASE("summarize: zero-observed column yields NaN markers") {
  const auto dm = parse_csv("a,b\n1,\n2,\n");
  const auto stats = summarize(dm);
  CHECK(stats.columns[1].count == 0);
  CHECK(std::isnan(stats.columns[1].mean));
  CHECK(std::isnan(stats.columns[1].median));
}

// Independent single-pass oracle for the summary statistics.
namespace {
struct OracleStats {
  double mean, sd, min, max, q25, median, q75;
};
OracleStats oracle_summary(std::vector<double> x) {
  OracleStats o{};
  const double n = static_cast<double>(x.size());
  double s = 0, s2 = 0;
  for (double v : x) { s += v; s2 += v * v; }
  o.mean = s / n;
  o.sd = std::sqrt((s2 - n * o.mean * o.mean) / (n - 1));
  std::sort(x.begin(), x.end());
  o.min = x.front();
  o.max = x.back();
  auto interp = [&](double f) {
    const double h = f * (n - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= x.size()) return x.back();
    return x[lo] + (h - lo) * (x[lo + 1] - x[lo]);
  };
  o.q25 = interp(0.25);
  o.median = interp(0.5);
  o.q75 = interp(0.75);
  return o;
}
}  // namespace

TEST_CASE("summarize: matches brute-force recomputation on generated data") {
  Rng rng(42);
  const int n = 784;
  std::vector<double> col(n);
  for (auto& v : col) v = 21.3 + 3.5 * rng.normal();
  std::vector<std::vector<bool>> obs{std::vector<bool>(n, true)};
  const auto dm = from_columns({col}, obs, {"age"});
  const auto stats = summarize(dm);
  const auto o = oracle_summary(col);
  CHECK(stats.columns[0].mean == doctest::Approx(o.mean).epsilon(1e-12));
  CHECK(stats.columns[0].sd == doctest::Approx(o.sd).epsilon(1e-12));
  CHECK(stats.columns[0].q25 == doctest::Approx(o.q25).epsilon(1e-12));
  CHECK(stats.columns[0].median == doctest::Approx(o.median).epsilon(1e-12));
  CHECK(stats.columns[0].q75 == doctest::Approx(o.q75).epsilon(1e-12));
  CHECK(stats.columns[0].min == o.min);
  CHECK(stats.columns[0].max == o.max);
  CHECK(stats.columns[0].q25 <= stats.columns[0].median);
  CHECK(stats.columns[0].median <= stats.columns[0].q75);
}

TEST_CASE("summarize: self-concatenation keeps mean/median/min/max") {
  Rng rng(5);
  std::vector<double> col(101);
  for (auto& v : col) v = rng.uniform(0, 9);
  auto dm1 = from_columns({col}, {std::vector<bool>(col.size(), true)}, {"x"});
  std::vector<double> doubled = col;
  doubled.insert(doubled.end(), col.begin(), col.end());
  auto dm2 = from_columns({doubled}, {std::vector<bool>(doubled.size(), true)}, {"x"});
  const auto s1 = summarize(dm1).columns[0];
  const auto s2 = summarize(dm2).columns[0];
  CHECK(s1.mean == doctest::Approx(s2.mean).epsilon(1e-13));
  CHECK(s1.median == doctest::Approx(s2.median).epsilon(1e-13));
  CHECK(s1.min == s2.min);
  CHECK(s1.max == s2.max);
}

TEST_CASE("classify_distribution: generator fixtures over 50 seeds") {
  int logn_hits = 0, gauss_hits = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(Rng::derive(9000, seed));
    std::vector<double> ln(1000), gs(1000);
    for (int i = 0; i < 1000; ++i) {
      ln[i] = std::exp(rng.normal());
      gs[i] = 10.0 + rng.normal();
    }
    if (classify_distribution(ln, ColumnKind::continuous).distribution ==
        Distribution::lognormal)
      ++logn_hits;
    if (classify_distribution(gs, ColumnKind::continuous).distribution ==
        Distribution::gaussian)
      ++gauss_hits;
  }
  CHECK(logn_hits >= 48);  // >= 95% agreement
  CHECK(gauss_hits >= 48);
}

TEST_CASE("classify_distribution: discrete kind rules") {
  std::vector<double> six(60);
  for (int i = 0; i < 60; ++i) six[i] = static_cast<double>(1 + (i * 7) % 6 % 3);
  CHECK(classify_distribution(six, ColumnKind::discrete).distribution ==
        Distribution::discrete);

  // Poisson-like counts: mean tracks variance.
  Rng rng(3);
  std::vector<double> pois(1000);
  for (auto& v : pois) {
    // inverse-CDF Poisson(4) draw
    double u = rng.uniform_open(), cum = 0, k = 0, pmf = std::exp(-4.0);
    while (true) {
      cum += pmf;
      if (u <= cum || k > 60) break;
      k += 1;
      pmf *= 4.0 / k;
    }
    v = k;
  }
  CHECK(classify_distribution(pois, ColumnKind::discrete).distribution ==
        Distribution::poisson);
}

TEST_CASE("classify_distribution: edge verdicts") {
  std::vector<double> tiny(10, 1.0);
  CHECK(classify_distribution(tiny, ColumnKind::continuous).distribution ==
        Distribution::unknown);
  std::vector<double> constant(100, 2.5);
  CHECK(classify_distribution(constant, ColumnKind::continuous).distribution ==
        Distribution::unknown);
}

TEST_CASE("classify_distribution: never positive-support family on non-positive data") {
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(200);
    for (auto& v : x) v = rng.normal();  // crosses zero
    x[0] = -std::abs(x[0]) - 0.1;
    const auto verdict = classify_distribution(x, ColumnKind::continuous);
    CHECK(verdict.distribution != Distribution::lognormal);
    CHECK(verdict.distribution != Distribution::gamma);
    CHECK(verdict.distribution != Distribution::exponential);
    for (const auto& cand : verdict.candidates) {
      CHECK(cand.distribution != Distribution::lognormal);
      CHECK(cand.distribution != Distribution::gamma);
      CHECK(cand.distribution != Distribution::exponential);
    }
  }
}

TEST_CASE("missingness_profile: exact counts and patterns") {
  const auto complete = parse_csv("a,b\n1,2\n3,4\n");
  auto prof = missingness_profile(complete);
  CHECK(prof.overall_rate == 0.0);
  CHECK(prof.pattern_count == 1);

  const auto gap = parse_csv("a,b\n1,\n3,4\n");
  prof = missingness_profile(gap);
  CHECK(prof.overall_rate == 0.25);
  CHECK(prof.pattern_count == 2);
  CHECK(prof.per_column_rate[0] == 0.0);
  CHECK(prof.per_column_rate[1] == 0.5);
}

TEST_CASE("permutation equivariance of row order") {
  Rng rng(23);
  const int n = 120;
  std::vector<std::vector<double>> cols(3, std::vector<double>(n));
  std::vector<std::vector<bool>> obs(3, std::vector<bool>(n, true));
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < n; ++i) {
      cols[j][i] = rng.normal();
      obs[j][i] = rng.uniform() > 0.15;
    }
  const auto dm = from_columns(cols, obs, {"a", "b", "c"});
  const auto perm = Rng(99).permutation(n);
  std::vector<std::vector<double>> pcols(3, std::vector<double>(n));
  std::vector<std::vector<bool>> pobs(3, std::vector<bool>(n));
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < n; ++i) {
      pcols[j][i] = cols[j][perm[i]];
      pobs[j][i] = obs[j][perm[i]];
    }
  const auto pdm = from_columns(pcols, pobs, {"a", "b", "c"});

  const auto s1 = summarize(dm), s2 = summarize(pdm);
  for (int j = 0; j < 3; ++j) {
    CHECK(s1.columns[j].mean == doctest::Approx(s2.columns[j].mean).epsilon(1e-13));
    CHECK(s1.columns[j].median == s2.columns[j].median);
  }
  const auto m1 = missingness_profile(dm), m2 = missingness_profile(pdm);
  CHECK(m1.overall_rate == m2.overall_rate);
  CHECK(m1.pattern_count == m2.pattern_count);
  const auto t1 = little_mcar_test(dm), t2 = little_mcar_test(pdm);
  CHECK(t1.applicable == t2.applicable);
  if (t1.applicable) {
    CHECK(t1.df == t2.df);
    CHECK(t1.d2 == doctest::Approx(t2.d2).epsilon(1e-9));
  }
}

TEST_CASE("little_mcar_test: complete data is inapplicable") {
  const auto dm = parse_csv("a,b\n1.5,2.5\n3.5,4.5\n1.25,0.5\n");
  const auto res = little_mcar_test(dm);
  CHECK_FALSE(res.applicable);
  CHECK(res.d2 == 0.0);
  CHECK(res.p_value == 1.0);
}

TEST_CASE("little_mcar_test: rejects discrete columns by name") {
  const auto dm = parse_csv("a,b\n1,2.5\n0,4.5\n1,0.5\n0,1.0\n");
  CHECK_THROWS_AS(little_mcar_test(dm, std::vector<std::string>{"a"}), DataError);
}

namespace {

// Correlated bivariate normal rows with MCAR or MNAR deletion in column 0.
DataMatrix mvn_with_missing(std::uint64_t seed, int n, bool mnar, double rate) {
  Rng rng(seed);
  std::vector<std::vector<double>> cols(3, std::vector<double>(n));
  std::vector<std::vector<bool>> obs(3, std::vector<bool>(n, true));
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    cols[0][i] = z + 0.6 * rng.normal();
    cols[1][i] = 0.7 * z + 0.8 * rng.normal();
    cols[2][i] = -0.5 * z + 0.9 * rng.normal() + 5.0;
  }
  for (int i = 0; i < n; ++i) {
    double p_miss = rate;
    if (mnar) {
      // Larger unobserved values go missing more often.
      p_miss = 1.0 / (1.0 + std::exp(-(cols[0][i] * 2.0 - 1.0)));
    }
    if (rng.uniform() < p_miss) obs[0][i] = false;
    if (rng.uniform() < rate) obs[1][i] = false;
  }
  return from_columns(cols, obs, {"x", "y", "z"});
}

}  // namespace

TEST_CASE("little_mcar_test: calibration and power (reduced Monte Carlo)") {
  int mcar_rejections = 0, mnar_rejections = 0;
  const int trials = 40;
  for (int t = 0; t < trials; ++t) {
    const auto mcar = mvn_with_missing(Rng::derive(100, t), 400, false, 0.12);
    const auto r1 = little_mcar_test(mcar);
    REQUIRE(r1.applicable);
    if (r1.p_value < 0.05) ++mcar_rejections;

    const auto mnar = mvn_with_missing(Rng::derive(200, t), 400, true, 0.12);
    const auto r2 = little_mcar_test(mnar);
    REQUIRE(r2.applicable);
    if (r2.p_value < 0.05) ++mnar_rejections;
  }
  CHECK(mcar_rejections <= 8);       // ~<= 2x nominal at this sample count
  CHECK(mnar_rejections >= 34);
}

TEST_CASE("little_mcar_test: affine rescaling leaves d2 unchanged") {
  const auto dm = mvn_with_missing(77, 300, false, 0.15);
  const auto base = little_mcar_test(dm);
  REQUIRE(base.applicable);

  Eigen::MatrixXd v = dm.filled(0.0);
  MaskArray m = dm.mask();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    v(i, 0) = 37.5 * v(i, 0) - 1000.0;
    v(i, 2) = -0.004 * v(i, 2) + 3.0;
  }
  const DataMatrix scaled(v, m, dm.column_names(), dm.column_meta());
  const auto res = little_mcar_test(scaled);
  REQUIRE(res.applicable);
  CHECK(res.df == base.df);
  CHECK(res.d2 == doctest::Approx(base.d2).epsilon(1e-8));
}

TEST_CASE("tabulate_distributions mirrors column verdicts") {
  Rng rng(31);
  const int n = 200;
  std::vector<std::vector<double>> cols;
  std::vector<std::string> names{"g", "ln", "b"};
  cols.emplace_back();
  cols.emplace_back();
  cols.emplace_back();
  for (int i = 0; i < n; ++i) {
    cols[0].push_back(8.0 + 0.8 * rng.normal());
    cols[1].push_back(std::exp(rng.normal() * 0.7));
    cols[2].push_back(static_cast<double>(rng.below(2)));
  }
  auto dm = from_columns(cols, {}, names);
  dm.meta(2).kind = ColumnKind::discrete;
  const auto classified = classify_columns(dm);
  const auto table = tabulate_distributions(classified);
  CHECK(table.gaussian == 1);
  CHECK(table.lognormal == 1);
  CHECK(table.discrete == 1);
}
