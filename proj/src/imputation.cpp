#include "bwlab/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "bwlab/rng.hpp"

namespace bwlab {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct ColumnStats {
  VectorXd mean;
  VectorXd sd;  // population sd of observed cells; 1 when degenerate
};

ColumnStats observed_stats(const DataMatrix& data) {
  ColumnStats s;
  s.mean = VectorXd::Zero(data.cols());
  s.sd = VectorXd::Ones(data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const auto x = data.observed_column(j);
    if (x.empty()) continue;
    double m = 0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double var = 0;
    for (double v : x) var += (v - m) * (v - m);
    var /= static_cast<double>(x.size());
    s.mean(j) = m;
    if (var > 0) s.sd(j) = std::sqrt(var);
  }
  return s;
}

double column_mode(const std::vector<double>& values) {
  std::map<double, std::size_t> counts;
  for (double v : values) ++counts[v];
  double best = values.front();
  std::size_t best_count = 0;
  for (const auto& [value, count] : counts)
    if (count > best_count) {  // map order makes ties pick the smallest value
      best = value;
      best_count = count;
    }
  return best;
}

double mode_of_k_nearest(std::vector<std::pair<double, double>>& dist_value,
                         std::size_t k) {
  const std::size_t take = std::min(k, dist_value.size());
  std::partial_sort(dist_value.begin(),
                    dist_value.begin() + static_cast<std::ptrdiff_t>(take),
                    dist_value.end());
  std::vector<double> nearest(take);
  for (std::size_t i = 0; i < take; ++i) nearest[i] = dist_value[i].second;
  return column_mode(nearest);
}

// k donor positions with predictions nearest to target, ties by position.
std::vector<std::size_t> nearest_donors(const std::vector<double>& donor_predictions,
                                        double target, std::size_t k) {
  std::vector<std::size_t> order(donor_predictions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      const double da = std::abs(donor_predictions[a] - target);
                      const double db = std::abs(donor_predictions[b] - target);
                      return da != db ? da < db : a < b;
                    });
  order.resize(take);
  return order;
}

std::vector<ImputeMethod> routing(const DataMatrix& original) {
  std::vector<ImputeMethod> methods(static_cast<std::size_t>(original.cols()),
                                    ImputeMethod::none);
  for (Eigen::Index j = 0; j < original.cols(); ++j) {
    if (original.observed_count(j) == static_cast<std::size_t>(original.rows()))
      continue;
    methods[static_cast<std::size_t>(j)] =
        original.meta(j).kind == ColumnKind::discrete ? ImputeMethod::knn
                                                      : ImputeMethod::mice;
  }
  return methods;
}

}  // namespace

const char* to_string(ImputeMethod method) {
  switch (method) {
    case ImputeMethod::none: return "none";
    case ImputeMethod::knn: return "knn";
    case ImputeMethod::mice: return "mice";
  }
  return "none";
}

KnnImputeResult knn_impute_discrete(const DataMatrix& data,
                                    const ImputationConfig& config) {
  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.cols();

  std::vector<Eigen::Index> targets;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (data.meta(j).kind != ColumnKind::discrete) continue;
    const std::size_t observed = data.observed_count(j);
    if (observed == static_cast<std::size_t>(n)) continue;
    if (observed == 0)
      throw DataError("column '" + data.name(j) +
                      "' uninferrable: no observed values");
    targets.push_back(j);
  }
  if (targets.empty()) return {data, 0};

  const ColumnStats stats = observed_stats(data);
  const MatrixXd values = data.filled(kNan);
  const MaskArray& mask = data.mask();

  // z-scored copy for continuous coordinates; discrete ones stay raw.
  MatrixXd z = values;
  for (Eigen::Index j = 0; j < p; ++j)
    if (data.meta(j).kind == ColumnKind::continuous)
      z.col(j) = (values.col(j).array() - stats.mean(j)) / stats.sd(j);

  KnnImputeResult result{data, 0};
  const double usable = static_cast<double>(p - 1);

  for (Eigen::Index c : targets) {
    const std::vector<double> pool = data.observed_column(c);
    const double fallback = column_mode(pool);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mask(i, c)) continue;
      std::vector<std::pair<double, double>> dist_value;
      dist_value.reserve(static_cast<std::size_t>(n));
      for (Eigen::Index r = 0; r < n; ++r) {
        if (r == i || !mask(r, c)) continue;
        double d = 0;
        Eigen::Index shared = 0;
        for (Eigen::Index j = 0; j < p; ++j) {
          if (j == c || !mask(i, j) || !mask(r, j)) continue;
          ++shared;
          if (data.meta(j).kind == ColumnKind::continuous) {
            const double diff = z(i, j) - z(r, j);
            d += diff * diff;
          } else {
            d += values(i, j) != values(r, j) ? 1.0 : 0.0;
          }
        }
        if (shared == 0) continue;
        dist_value.emplace_back(d * usable / static_cast<double>(shared),
                                values(r, c));
      }
      if (dist_value.empty()) {
        result.data.set(i, c, fallback);
        ++result.mode_fallbacks;
      } else {
        result.data.set(i, c, mode_of_k_nearest(dist_value, config.knn_k));
      }
    }
  }
  return result;
}

namespace {

struct MiceCapture {
  VectorXd column_mean;
  VectorXd column_sd;
  std::vector<ImputationModel::VisitColumn> visits;
};

ImputationResult mice_core(const DataMatrix& data, const ImputationConfig& config,
                           MiceCapture* capture) {
  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.cols();

  std::vector<Eigen::Index> visit;
  for (Eigen::Index j = 0; j < p; ++j) {
    const std::size_t observed = data.observed_count(j);
    const bool complete = observed == static_cast<std::size_t>(n);
    if (data.meta(j).kind == ColumnKind::discrete) {
      if (!complete)
        throw DataError("column '" + data.name(j) +
                        "' is discrete and incomplete; impute it with knn first");
      continue;
    }
    if (complete) continue;
    if (observed < 10)
      throw DataError("column '" + data.name(j) + "' has fewer than 10 observed values");
    visit.push_back(j);
  }
  std::stable_sort(visit.begin(), visit.end(), [&](Eigen::Index a, Eigen::Index b) {
    return data.observed_count(a) > data.observed_count(b);
  });

  ImputationResult result{data, {}, routing(data), 0};
  if (visit.empty()) return result;

  const ColumnStats stats = observed_stats(data);
  const MaskArray& mask = data.mask();
  MatrixXd values = data.filled(0.0);
  for (Eigen::Index j : visit)
    for (Eigen::Index i = 0; i < n; ++i)
      if (!mask(i, j)) values(i, j) = stats.mean(j);

  if (capture) {
    capture->column_mean = stats.mean;
    capture->column_sd = stats.sd;
    for (Eigen::Index j : visit) {
      ImputationModel::VisitColumn vc;
      vc.column = j;
      vc.donor_values = data.observed_column(j);
      capture->visits.push_back(std::move(vc));
    }
  }

  Rng rng(Rng::derive(config.seed, "mice"));
  std::vector<Eigen::Index> others(static_cast<std::size_t>(p - 1));

  for (std::size_t cycle = 0; cycle < config.mice_cycles; ++cycle) {
    double change_sum = 0;
    std::size_t change_count = 0;

    for (std::size_t pos = 0; pos < visit.size(); ++pos) {
      const Eigen::Index c = visit[pos];
      others.clear();
      for (Eigen::Index j = 0; j < p; ++j)
        if (j != c) others.push_back(j);

      std::vector<Eigen::Index> train_rows;
      train_rows.reserve(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i)
        if (mask(i, c)) train_rows.push_back(i);

      MatrixXd x_train(train_rows.size(), others.size());
      VectorXd y_train(train_rows.size());
      for (std::size_t r = 0; r < train_rows.size(); ++r) {
        for (std::size_t k = 0; k < others.size(); ++k)
          x_train(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
              values(train_rows[r], others[k]);
        y_train(static_cast<Eigen::Index>(r)) = values(train_rows[r], c);
      }

      const RawRidge model = ridge_on_standardized(x_train, y_train, config.ridge_lambda);
      if (!model.beta.allFinite() || !std::isfinite(model.intercept))
        throw NumericError("mice conditional model for column '" + data.name(c) +
                           "' is singular");

      std::vector<double> donor_predictions(train_rows.size());
      for (std::size_t r = 0; r < train_rows.size(); ++r) {
        double pred = model.intercept;
        for (std::size_t k = 0; k < others.size(); ++k)
          pred += model.beta(static_cast<Eigen::Index>(k)) *
                  values(train_rows[r], others[k]);
        donor_predictions[r] = pred;
      }

      if (capture) {
        ImputationModel::VisitColumn::Cycle cy;
        cy.beta = model.beta;
        cy.intercept = model.intercept;
        cy.donor_predictions = donor_predictions;
        capture->visits[pos].cycles.push_back(std::move(cy));
      }

      for (Eigen::Index i = 0; i < n; ++i) {
        if (mask(i, c)) continue;
        double pred = model.intercept;
        for (std::size_t k = 0; k < others.size(); ++k)
          pred += model.beta(static_cast<Eigen::Index>(k)) * values(i, others[k]);
        const auto picks = nearest_donors(donor_predictions, pred, config.pmm_donors);
        const std::size_t chosen = picks[rng.below(picks.size())];
        const double donated = y_train(static_cast<Eigen::Index>(chosen));
        change_sum += std::abs(donated - values(i, c));
        ++change_count;
        values(i, c) = donated;
      }
    }
    result.trace.push_back(change_sum / static_cast<double>(change_count));
  }

  for (Eigen::Index j : visit)
    for (Eigen::Index i = 0; i < n; ++i)
      if (!mask(i, j)) result.completed.set(i, j, values(i, j));
  return result;
}

}  // namespace

ImputationResult mice_impute_continuous(const DataMatrix& data,
                                        const ImputationConfig& config) {
  return mice_core(data, config, nullptr);
}

ImputationResult hybrid_impute(const DataMatrix& data, const ImputationConfig& config) {
  const KnnImputeResult knn = knn_impute_discrete(data, config);
  ImputationResult result = mice_core(knn.data, config, nullptr);
  result.per_column_method = routing(data);
  result.knn_mode_fallbacks = knn.mode_fallbacks;
  return result;
}

ImputationModel fit_imputer(const DataMatrix& data, const ImputationConfig& config) {
  const KnnImputeResult knn = knn_impute_discrete(data, config);
  MiceCapture capture;
  ImputationResult result = mice_core(knn.data, config, &capture);
  result.per_column_method = routing(data);
  result.knn_mode_fallbacks = knn.mode_fallbacks;
  if (capture.column_mean.size() == 0) {  // no continuous gaps during training
    const ColumnStats stats = observed_stats(data);
    capture.column_mean = stats.mean;
    capture.column_sd = stats.sd;
  }
  return ImputationModel{config, std::move(result), std::move(capture.column_mean),
                         std::move(capture.column_sd), std::move(capture.visits)};
}

DataMatrix impute_with(const ImputationModel& model, const DataMatrix& rows) {
  const DataMatrix& train = model.train.completed;
  if (rows.cols() != train.cols() || rows.column_names() != train.column_names())
    throw DataError("imputer transform requires the training column layout");

  const Eigen::Index n = rows.rows();
  const Eigen::Index p = rows.cols();
  const MaskArray& mask = rows.mask();
  const MatrixXd& donors = train.matrix();
  DataMatrix out = rows;
  Rng rng(Rng::derive(model.config.seed, "impute-transform"));

  // Discrete gaps: nearest completed training rows over the coordinates this
  // row observes, same scaling rule as training.
  const double usable = static_cast<double>(p - 1);
  for (Eigen::Index c = 0; c < p; ++c) {
    if (rows.meta(c).kind != ColumnKind::discrete) continue;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mask(i, c)) continue;
      std::vector<std::pair<double, double>> dist_value;
      dist_value.reserve(static_cast<std::size_t>(donors.rows()));
      for (Eigen::Index r = 0; r < donors.rows(); ++r) {
        double d = 0;
        Eigen::Index shared = 0;
        for (Eigen::Index j = 0; j < p; ++j) {
          if (j == c || !mask(i, j)) continue;
          ++shared;
          if (rows.meta(j).kind == ColumnKind::continuous) {
            const double diff = (rows.at(i, j) - donors(r, j)) / model.column_sd(j);
            d += diff * diff;
          } else {
            d += rows.at(i, j) != donors(r, j) ? 1.0 : 0.0;
          }
        }
        if (shared == 0) continue;
        dist_value.emplace_back(d * usable / static_cast<double>(shared),
                                donors(r, c));
      }
      if (dist_value.empty()) {
        std::vector<double> pool(donors.col(c).data(),
                                 donors.col(c).data() + donors.rows());
        out.set(i, c, column_mode(pool));
      } else {
        out.set(i, c, mode_of_k_nearest(dist_value, model.config.knn_k));
      }
    }
  }

  // Continuous gaps: mean-initialize, then replay the frozen per-cycle models
  // in training visit order, matching each prediction to the training donors.
  MatrixXd values = out.filled(0.0);
  for (Eigen::Index j = 0; j < p; ++j)
    if (rows.meta(j).kind == ColumnKind::continuous)
      for (Eigen::Index i = 0; i < n; ++i)
        if (!mask(i, j)) values(i, j) = model.column_mean(j);

  const std::size_t cycles =
      model.visits.empty() ? 0 : model.visits.front().cycles.size();
  for (std::size_t cycle = 0; cycle < cycles; ++cycle) {
    for (const auto& vc : model.visits) {
      const auto& frozen = vc.cycles[cycle];
      for (Eigen::Index i = 0; i < n; ++i) {
        if (mask(i, vc.column)) continue;
        double pred = frozen.intercept;
        Eigen::Index k = 0;
        for (Eigen::Index j = 0; j < p; ++j) {
          if (j == vc.column) continue;
          pred += frozen.beta(k++) * values(i, j);
        }
        const auto picks =
            nearest_donors(frozen.donor_predictions, pred, model.config.pmm_donors);
        values(i, vc.column) = vc.donor_values[picks[rng.below(picks.size())]];
      }
    }
  }

  for (Eigen::Index j = 0; j < p; ++j)
    if (rows.meta(j).kind == ColumnKind::continuous)
      for (Eigen::Index i = 0; i < n; ++i)
        if (!mask(i, j)) out.set(i, j, values(i, j));
  return out;
}

const char* to_string(MissingMechanism mechanism) {
  switch (mechanism) {
    case MissingMechanism::mcar: return "mcar";
    case MissingMechanism::mar: return "mar";
    case MissingMechanism::mnar: return "mnar";
  }
  return "mcar";
}

MissingMechanism missing_mechanism_from_string(const std::string& name) {
  if (name == "mcar") return MissingMechanism::mcar;
  if (name == "mar") return MissingMechanism::mar;
  if (name == "mnar") return MissingMechanism::mnar;
  throw UsageError("unknown missing-data mechanism '" + name + "'");
}

namespace {

// Intercept a with mean_i sigmoid(a + z_i) = rate, by bisection.
double calibrate_logistic(const VectorXd& z, double rate) {
  double lo = -40, hi = 40;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double mean = (1.0 / (1.0 + (-(z.array() + mid)).exp())).mean();
    (mean < rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

MaskedData mask_known_entries(const DataMatrix& data, double rate,
                              MissingMechanism mechanism, std::uint64_t seed) {
  if (!(rate > 0 && rate < 0.5))
    throw UsageError("mask rate must lie in (0, 0.5)");
  if (!data.all_observed())
    throw DataError("mask_known_entries requires a fully observed matrix");

  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.cols();
  const MatrixXd& values = data.matrix();
  Rng rng(Rng::derive(seed, "mask"));

  MaskArray mask = MaskArray::Constant(n, p, true);
  MaskedData out{data, {}};

  for (Eigen::Index j = 0; j < p; ++j) {
    VectorXd prob(n);
    if (mechanism == MissingMechanism::mcar) {
      prob.setConstant(rate);
    } else {
      const Eigen::Index driver =
          mechanism == MissingMechanism::mar ? (j + 1) % p : j;
      const double mean = values.col(driver).mean();
      const double sd = std::sqrt(
          (values.col(driver).array() - mean).square().mean());
      VectorXd z = sd > 0 ? VectorXd(((values.col(driver).array() - mean) / sd).matrix())
                          : VectorXd(VectorXd::Zero(n));
      const double a = calibrate_logistic(z, rate);
      prob = (1.0 / (1.0 + (-(z.array() + a)).exp())).matrix();
    }
    for (Eigen::Index i = 0; i < n; ++i)
      if (rng.uniform() < prob(i)) {
        mask(i, j) = false;
        out.cells.push_back({i, j, values(i, j)});
      }
  }

  out.data = DataMatrix(values, mask, data.column_names(), data.column_meta());
  return out;
}

}  // namespace bwlab
