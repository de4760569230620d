#include "bwlab/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/gamma.hpp>

#include "bwlab/errors.hpp"
#include "bwlab/rng.hpp"

namespace bwlab {

namespace {

constexpr Eigen::Index kFactorRank = 10;
constexpr double kLoadingSd = 0.4;
// Drivers load more weakly than filler columns so their cross-correlations
// inflate the target variance only mildly; sex is factor-free so the marginal
// gap stays at the planted value instead of absorbing confounding shifts.
constexpr double kDriverLoadingSd = 0.2;
// The interaction saturates outside +/-2 sd, mirroring how growth effects
// level off at extreme gestational ages. The clip also bounds the term so the
// target stays inside the plausibility window even at large coefficients.
constexpr double kInteractionClip = 2.0;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Model mean/sd of a parametric marginal, used to standardize the drivers.
std::pair<double, double> model_moments(Distribution dist, double p1, double p2) {
  switch (dist) {
    case Distribution::gaussian:
      return {p1, p2};
    case Distribution::lognormal: {
      const double mean = std::exp(p1 + 0.5 * p2 * p2);
      return {mean, mean * std::sqrt(std::expm1(p2 * p2))};
    }
    default:  // gamma
      return {p1 * p2, std::sqrt(p1) * p2};
  }
}

struct Role {
  const char* name;
  Distribution dist;
  double param1;  // gaussian: mean, lognormal: log-mean, gamma: shape
  double param2;  // gaussian: sd,   lognormal: log-sd,   gamma: scale
};

// Fixed clinical driver marginals. Gaussian mean/sd ratios stay above ten and
// the gamma shape stays small so every class sits inside the regime the
// distribution classifier can separate at n in the hundreds.
const std::array<Role, 8> kRoles = {{
    {"gestational_age", Distribution::gaussian, 38.2, 2.4},
    {"placental_weight", Distribution::gaussian, 480.0, 45.0},
    {"fundal_height", Distribution::gaussian, 31.0, 2.6},
    {"abdominal_circumference", Distribution::gaussian, 96.0, 8.0},
    {"fasting_glucose", Distribution::gamma, 4.0, 22.0},
    {"systolic_bp", Distribution::gaussian, 118.0, 9.0},
    {"pulse_rate", Distribution::gaussian, 84.0, 7.0},
    {"maternal_weight", Distribution::lognormal, 4.04, 0.38},
}};

struct ColumnPlan {
  std::string name;
  Distribution dist = Distribution::gaussian;
  ColumnKind kind = ColumnKind::continuous;
  double param1 = 0;
  double param2 = 0;
  int categories = 0;     // discrete support size
  bool drawn_params = false;  // filler marginals come from the column stream
};

void validate(const CohortSpec& spec) {
  if (spec.n < 30) throw UsageError("CohortSpec: n must be at least 30");
  const std::size_t total = spec.gaussian_count + spec.lognormal_count +
                            spec.gamma_count + spec.discrete_count;
  if (total != static_cast<std::size_t>(spec.p))
    throw UsageError("CohortSpec: distribution counts must sum to p");
  if (spec.gaussian_count < 6 || spec.lognormal_count < 1 || spec.gamma_count < 1 ||
      spec.discrete_count < 1)
    throw UsageError("CohortSpec: counts cannot cover the planted drivers");
  if (spec.coefficients.size() != kRoles.size())
    throw UsageError("CohortSpec: exactly eight driver coefficients required");
  for (double c : spec.coefficients)
    if (!std::isfinite(c)) throw UsageError("CohortSpec: coefficients must be finite");
  if (!std::isfinite(spec.interaction_coefficient) || !std::isfinite(spec.sex_gap) ||
      !std::isfinite(spec.base_weight))
    throw UsageError("CohortSpec: coefficients must be finite");
  if (!(spec.noise_scale > 0)) throw UsageError("CohortSpec: noise scale must be positive");
  if (spec.missing_rate < 0 || spec.missing_rate >= 1)
    throw UsageError("CohortSpec: missing rate must lie in [0, 1)");
}

std::vector<ColumnPlan> layout(const CohortSpec& spec) {
  std::vector<ColumnPlan> plan;
  plan.reserve(static_cast<std::size_t>(spec.p));
  std::size_t gaussian = spec.gaussian_count, lognormal = spec.lognormal_count,
              gamma = spec.gamma_count, discrete = spec.discrete_count;
  for (const Role& role : kRoles) {
    plan.push_back({role.name, role.dist, ColumnKind::continuous, role.param1,
                    role.param2, 0, false});
    (role.dist == Distribution::gaussian
         ? gaussian
         : role.dist == Distribution::lognormal ? lognormal : gamma)--;
  }
  plan.push_back({"sex", Distribution::discrete, ColumnKind::discrete, 0, 0, 2, false});
  --discrete;

  std::size_t serial = plan.size();
  const auto filler = [&](std::size_t count, Distribution dist) {
    for (std::size_t k = 0; k < count; ++k) {
      ColumnPlan col;
      col.name = "v" + std::string(serial < 10 ? "00" : serial < 100 ? "0" : "") +
                 std::to_string(serial);
      col.dist = dist;
      col.kind = dist == Distribution::discrete ? ColumnKind::discrete
                                                : ColumnKind::continuous;
      col.drawn_params = true;
      plan.push_back(col);
      ++serial;
    }
  };
  filler(gaussian, Distribution::gaussian);
  filler(lognormal, Distribution::lognormal);
  filler(gamma, Distribution::gamma);
  filler(discrete, Distribution::discrete);
  return plan;
}

struct RawCohort {
  MatrixXd features;           // complete, n x p
  std::vector<ColumnPlan> plan;
  MatrixXd design;             // standardized drivers, interaction, sex
  VectorXd noiseless;
  VectorXd unit_noise;
  VectorXd target;
};

// Everything up to the missingness mask; the noise enters only as
// noise_scale * unit_noise so calibration can rescale it in closed form.
RawCohort generate_raw(const CohortSpec& spec) {
  validate(spec);
  const Eigen::Index n = spec.n;

  RawCohort raw;
  raw.plan = layout(spec);

  Rng factor_rng(Rng::derive(spec.seed, "factors"));
  MatrixXd factors(n, kFactorRank);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index r = 0; r < kFactorRank; ++r) factors(i, r) = factor_rng.normal();

  raw.features.resize(n, spec.p);
  const std::size_t drivers = kRoles.size();
  MatrixXd z_scores(n, static_cast<Eigen::Index>(drivers + 1));  // drivers + sex

  for (std::size_t j = 0; j < raw.plan.size(); ++j) {
    ColumnPlan& col = raw.plan[j];
    Rng rng(Rng::derive(spec.seed, "col:" + std::to_string(j)));

    const bool is_sex = col.name == "sex";
    const double loading_sd =
        is_sex ? 0.0 : j < drivers ? kDriverLoadingSd : kLoadingSd;
    VectorXd loading(kFactorRank);
    for (Eigen::Index r = 0; r < kFactorRank; ++r)
      loading[r] = rng.normal(0, loading_sd);
    const double denom = std::sqrt(loading.squaredNorm() + 1.0);

    if (col.drawn_params) {
      switch (col.dist) {
        case Distribution::gaussian: {
          col.param1 = rng.uniform(20.0, 200.0);
          col.param2 = col.param1 / rng.uniform(10.0, 16.0);
          break;
        }
        case Distribution::lognormal:
          col.param1 = rng.uniform(1.5, 4.5);
          col.param2 = rng.uniform(0.38, 0.65);
          break;
        case Distribution::gamma:
          col.param1 = rng.uniform(2.0, 5.0);
          col.param2 = rng.uniform(0.5, 20.0);
          break;
        default:
          col.categories = 2 + static_cast<int>(rng.below(4));
          break;
      }
    }

    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = (loading.dot(factors.row(i)) + rng.normal()) / denom;
      double v = 0;
      switch (col.dist) {
        case Distribution::gaussian: v = col.param1 + col.param2 * z; break;
        case Distribution::lognormal: v = std::exp(col.param1 + col.param2 * z); break;
        case Distribution::gamma: {
          const double u = std::clamp(normal_cdf(z), 1e-12, 1.0 - 1e-12);
          v = boost::math::quantile(boost::math::gamma_distribution<>(col.param1, col.param2), u);
          break;
        }
        default: {
          const double u = normal_cdf(z);
          if (is_sex) {
            v = u < 0.5 ? 0.0 : 1.0;
          } else {
            v = 1.0 + std::floor(u * col.categories);
            v = std::min(v, static_cast<double>(col.categories));
          }
          break;
        }
      }
      raw.features(i, static_cast<Eigen::Index>(j)) = v;
      if (j < drivers) {
        // standardize by the marginal's model moments, not sample moments
        const auto [mean, sd] = model_moments(col.dist, col.param1, col.param2);
        z_scores(i, static_cast<Eigen::Index>(j)) = (v - mean) / sd;
      } else if (is_sex) {
        z_scores(i, static_cast<Eigen::Index>(drivers)) = v;
      }
    }
  }

  raw.design.resize(n, static_cast<Eigen::Index>(drivers + 2));
  raw.design.leftCols(static_cast<Eigen::Index>(drivers)) =
      z_scores.leftCols(static_cast<Eigen::Index>(drivers));
  raw.design.col(static_cast<Eigen::Index>(drivers)) =
      z_scores.col(0)
          .cwiseMax(-kInteractionClip)
          .cwiseMin(kInteractionClip)
          .cwiseProduct(z_scores.col(1).cwiseMax(-kInteractionClip).cwiseMin(kInteractionClip));
  raw.design.col(static_cast<Eigen::Index>(drivers + 1)) =
      z_scores.col(static_cast<Eigen::Index>(drivers));

  raw.noiseless = VectorXd::Constant(n, spec.base_weight);
  for (std::size_t k = 0; k < drivers; ++k)
    raw.noiseless += spec.coefficients[k] * raw.design.col(static_cast<Eigen::Index>(k));
  raw.noiseless +=
      spec.interaction_coefficient * raw.design.col(static_cast<Eigen::Index>(drivers));
  raw.noiseless += spec.sex_gap * raw.design.col(static_cast<Eigen::Index>(drivers + 1));

  Rng noise_rng(Rng::derive(spec.seed, "noise"));
  raw.unit_noise.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) raw.unit_noise[i] = noise_rng.normal();
  raw.target = raw.noiseless + spec.noise_scale * raw.unit_noise;
  return raw;
}

}  // namespace

std::pair<DataMatrix, GroundTruth> generate_cohort(const CohortSpec& spec) {
  RawCohort raw = generate_raw(spec);
  const Eigen::Index n = spec.n;

  GroundTruth truth;
  for (std::size_t k = 0; k < kRoles.size(); ++k) {
    truth.relevant.emplace_back(kRoles[k].name);
    truth.coefficients[kRoles[k].name] = spec.coefficients[k];
  }
  truth.relevant.emplace_back("sex");
  truth.interaction_coefficient = spec.interaction_coefficient;
  truth.interaction_clip = kInteractionClip;
  for (const Role& role : kRoles)
    truth.driver_moments[role.name] = model_moments(role.dist, role.param1, role.param2);
  truth.sex_gap = spec.sex_gap;
  truth.base_weight = spec.base_weight;
  truth.noise_scale = spec.noise_scale;
  for (const ColumnPlan& col : raw.plan) truth.column_classes.push_back(col.dist);
  truth.noiseless_target = raw.noiseless;

  std::size_t in_window = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (raw.target[i] >= 500.0 && raw.target[i] <= 5500.0) ++in_window;
  truth.plausible_fraction = static_cast<double>(in_window) / static_cast<double>(n);

  std::vector<std::string> names;
  std::vector<ColumnMeta> meta;
  for (const ColumnPlan& col : raw.plan) {
    names.push_back(col.name);
    ColumnMeta m;
    m.kind = col.kind;
    meta.push_back(m);
  }
  DataMatrix features = DataMatrix::complete(raw.features, names, meta);
  if (spec.missing_rate > 0)
    features = mask_known_entries(features, spec.missing_rate, spec.mechanism,
                                  Rng::derive(spec.seed, "mask"))
                   .data;

  MatrixXd values(n, spec.p + 1);
  values.leftCols(spec.p) = features.filled(0);
  values.col(spec.p) = raw.target;
  MaskArray mask = MaskArray::Constant(n, spec.p + 1, true);
  for (Eigen::Index j = 0; j < spec.p; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      if (!features.observed(i, j)) mask(i, j) = false;
  names.push_back("fl_bw");
  meta.push_back(ColumnMeta{});

  return {DataMatrix(std::move(values), std::move(mask), std::move(names), std::move(meta)),
          std::move(truth)};
}

double calibrate_noise(const CohortSpec& spec, double target_r2) {
  if (!(target_r2 > 0 && target_r2 < 1))
    throw UsageError("calibrate_noise: target r2 must lie in (0, 1)");

  // With y = y0 + s*u and y0 exactly in the design span, both SS_res and
  // SS_tot are quadratics in s, so the reference ols r2 has a closed form.
  struct SeedTerms {
    double res_uu = 0;   // ||(I - P)u||^2
    double tot_00 = 0, tot_0u = 0, tot_uu = 0;
  };
  std::vector<SeedTerms> terms;
  for (std::uint64_t s = 0; s < 5; ++s) {
    CohortSpec probe = spec;
    probe.seed = Rng::derive(spec.seed, s);
    const RawCohort raw = generate_raw(probe);

    MatrixXd design(spec.n, raw.design.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(raw.design.cols()) = raw.design;
    const auto qr = design.colPivHouseholderQr();
    const VectorXd res_u = raw.unit_noise - design * qr.solve(raw.unit_noise);

    SeedTerms t;
    t.res_uu = res_u.squaredNorm();
    const VectorXd c0 = raw.noiseless.array() - raw.noiseless.mean();
    const VectorXd cu = raw.unit_noise.array() - raw.unit_noise.mean();
    t.tot_00 = c0.squaredNorm();
    t.tot_0u = c0.dot(cu);
    t.tot_uu = cu.squaredNorm();
    terms.push_back(t);
  }

  const auto mean_r2 = [&](double s) {
    double sum = 0;
    for (const SeedTerms& t : terms) {
      const double ss_res = s * s * t.res_uu;
      const double ss_tot = t.tot_00 + 2 * s * t.tot_0u + s * s * t.tot_uu;
      sum += 1.0 - ss_res / ss_tot;
    }
    return sum / static_cast<double>(terms.size());
  };

  double lo = 0.0, hi = 1.0;
  while (mean_r2(hi) > target_r2) {
    hi *= 2.0;
    if (hi > 1e12)
      throw NumericError("calibrate_noise: target r2 unattainable");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-9 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_r2(mid) > target_r2 ? lo : hi) = mid;
  }
  const double scale = 0.5 * (lo + hi);
  if (std::abs(mean_r2(scale) - target_r2) > 0.02)
    throw NumericError("calibrate_noise: search failed to bracket the target");
  return scale;
}

}  // namespace bwlab
