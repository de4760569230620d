#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bwlab/data_matrix.hpp"
#include "bwlab/imputation.hpp"

namespace bwlab {

// Cohort shape knobs. The distribution counts cover all p feature columns;
// eight named clinical drivers plus the binary sex column are carved out of
// those counts and carry the signal.
struct CohortSpec {
  Eigen::Index n = 791;
  Eigen::Index p = 109;
  std::size_t gaussian_count = 17;
  std::size_t lognormal_count = 47;
  std::size_t gamma_count = 25;
  std::size_t discrete_count = 20;
  // Grams per standard deviation of each driver, in role order: gestational
  // age, placental weight, fundal height, abdominal circumference, fasting
  // glucose, systolic blood pressure, pulse rate, maternal weight.
  std::vector<double> coefficients = {190, 150, 92, 86, -82, -76, 67, 74};
  double interaction_coefficient = 190;  // gestational age x placental weight
  double sex_gap = 130;
  // Base sits 65 g under the window midpoint so the sex gap recenters the
  // cohort mean at 3000 g.
  double base_weight = 2935;
  double noise_scale = 275;  // near the r2 0.62 reference regime
  double missing_rate = 0.0678;
  MissingMechanism mechanism = MissingMechanism::mar;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  std::vector<std::string> relevant;  // the eight drivers, then "sex"
  std::map<std::string, double> coefficients;
  double interaction_coefficient = 0;
  // The interaction multiplies driver z-scores saturated at +/-interaction_clip.
  // driver_moments holds the model mean/sd pairs used for that standardization,
  // so oracles can rebuild the planted law from raw feature values.
  double interaction_clip = 0;
  std::map<std::string, std::pair<double, double>> driver_moments;
  double sex_gap = 0;
  double base_weight = 0;
  double noise_scale = 0;
  std::vector<Distribution> column_classes;  // per feature column, planted
  VectorXd noiseless_target;
  double plausible_fraction = 0;  // noisy target inside [500, 5500] grams
};

// Correlated feature frame (rank-10 latent factors) with class-specific
// marginals, a linear-plus-interaction target in grams appended as "fl_bw",
// and missingness injected into the feature columns only. Bit-identical for
// identical (spec, seed).
std::pair<DataMatrix, GroundTruth> generate_cohort(const CohortSpec& spec);

// Binary search for the noise scale at which an ols fit on the true design
// (standardized drivers, their interaction, sex) attains target_r2, averaged
// over five derived seeds.
double calibrate_noise(const CohortSpec& spec, double target_r2);

}  // namespace bwlab
