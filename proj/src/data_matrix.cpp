#include "bwlab/data_matrix.hpp"

#include <cmath>
#include <limits>
#include <unordered_set>

namespace bwlab {

const char* to_string(ColumnKind kind) {
  return kind == ColumnKind::discrete ? "discrete" : "continuous";
}

const char* to_string(Distribution dist) {
  switch (dist) {
    case Distribution::gaussian: return "gaussian";
    case Distribution::lognormal: return "lognormal";
    case Distribution::gamma: return "gamma";
    case Distribution::exponential: return "exponential";
    case Distribution::uniform: return "uniform";
    case Distribution::poisson: return "poisson";
    case Distribution::discrete: return "discrete";
    case Distribution::unknown: return "unknown";
  }
  return "unknown";
}

ColumnKind column_kind_from_string(const std::string& s) {
  if (s == "continuous") return ColumnKind::continuous;
  if (s == "discrete") return ColumnKind::discrete;
  throw DataError("unknown column kind: " + s);
}

Distribution distribution_from_string(const std::string& s) {
  for (Distribution d :
       {Distribution::gaussian, Distribution::lognormal, Distribution::gamma,
        Distribution::exponential, Distribution::uniform, Distribution::poisson,
        Distribution::discrete, Distribution::unknown}) {
    if (s == to_string(d)) return d;
  }
  throw DataError("unknown distribution: " + s);
}

namespace {

void check_meta_coherence(const std::vector<ColumnMeta>& meta,
                          const std::vector<std::string>& names) {
  for (std::size_t j = 0; j < meta.size(); ++j) {
    const bool dist_discrete = meta[j].distribution == Distribution::discrete ||
                               meta[j].distribution == Distribution::poisson;
    const bool dist_known = meta[j].distribution != Distribution::unknown;
    if (meta[j].kind == ColumnKind::discrete) {
      if (dist_known && !dist_discrete)
        throw DataError("column '" + names[j] +
                        "': discrete kind requires a discrete/poisson distribution");
    } else if (dist_discrete) {
      throw DataError("column '" + names[j] +
                      "': continuous kind cannot carry a discrete distribution");
    }
  }
}

}  // namespace

DataMatrix::DataMatrix(Eigen::MatrixXd values, MaskArray mask,
                       std::vector<std::string> column_names,
                       std::vector<ColumnMeta> column_meta)
    : values_(std::move(values)),
      mask_(std::move(mask)),
      column_names_(std::move(column_names)),
      column_meta_(std::move(column_meta)) {
  if (values_.rows() < 1 || values_.cols() < 1)
    throw DataError("DataMatrix requires at least one row and one column");
  if (mask_.rows() != values_.rows() || mask_.cols() != values_.cols())
    throw DataError("mask shape does not match value shape");
  if (static_cast<Eigen::Index>(column_names_.size()) != values_.cols())
    throw DataError("column name count does not match column count");
  if (column_meta_.empty()) {
    column_meta_.resize(column_names_.size());
  } else if (column_meta_.size() != column_names_.size()) {
    throw DataError("column meta count does not match column count");
  }
  std::unordered_set<std::string> seen;
  for (const auto& n : column_names_) {
    if (!seen.insert(n).second) throw DataError("duplicate column name: " + n);
  }
  check_meta_coherence(column_meta_, column_names_);
  // Scrub unobserved cells so stale values can never masquerade as data.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index j = 0; j < values_.cols(); ++j)
    for (Eigen::Index i = 0; i < values_.rows(); ++i)
      if (!mask_(i, j)) values_(i, j) = nan;
}

DataMatrix DataMatrix::complete(Eigen::MatrixXd values,
                                std::vector<std::string> column_names,
                                std::vector<ColumnMeta> column_meta) {
  MaskArray mask = MaskArray::Constant(values.rows(), values.cols(), true);
  return DataMatrix(std::move(values), std::move(mask), std::move(column_names),
                    std::move(column_meta));
}

double DataMatrix::at(Eigen::Index i, Eigen::Index j) const {
  note_row_read(i);
  if (!mask_(i, j))
    throw DataError("read of unobserved cell (" + std::to_string(i) + ", " +
                    std::to_string(j) + ")");
  return values_(i, j);
}

const Eigen::MatrixXd& DataMatrix::matrix() const {
  if (!all_observed())
    throw DataError("matrix() requires a fully observed DataMatrix");
  if (row_read_log_)
    for (Eigen::Index i = 0; i < rows(); ++i) note_row_read(i);
  return values_;
}

Eigen::MatrixXd DataMatrix::filled(double fill) const {
  if (row_read_log_)
    for (Eigen::Index i = 0; i < rows(); ++i) note_row_read(i);
  Eigen::MatrixXd out = values_;
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      if (!mask_(i, j)) out(i, j) = fill;
  return out;
}

Eigen::Index DataMatrix::index_of(const std::string& column_name) const {
  if (auto j = find(column_name)) return *j;
  throw DataError("unknown column: " + column_name);
}

std::optional<Eigen::Index> DataMatrix::find(const std::string& column_name) const {
  for (std::size_t j = 0; j < column_names_.size(); ++j)
    if (column_names_[j] == column_name) return static_cast<Eigen::Index>(j);
  return std::nullopt;
}

std::vector<double> DataMatrix::observed_column(Eigen::Index j) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(rows()));
  for (Eigen::Index i = 0; i < rows(); ++i) {
    if (mask_(i, j)) {
      note_row_read(i);
      out.push_back(values_(i, j));
    }
  }
  return out;
}

std::size_t DataMatrix::observed_count(Eigen::Index j) const {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < rows(); ++i)
    if (mask_(i, j)) ++n;
  return n;
}

DataMatrix DataMatrix::subset_rows(const std::vector<Eigen::Index>& row_idx) const {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(row_idx.size()), cols());
  MaskArray m(static_cast<Eigen::Index>(row_idx.size()), cols());
  for (std::size_t k = 0; k < row_idx.size(); ++k) {
    note_row_read(row_idx[k]);
    v.row(static_cast<Eigen::Index>(k)) = values_.row(row_idx[k]);
    m.row(static_cast<Eigen::Index>(k)) = mask_.row(row_idx[k]);
  }
  return DataMatrix(std::move(v), std::move(m), column_names_, column_meta_);
}

DataMatrix DataMatrix::subset_cols(const std::vector<Eigen::Index>& col_idx) const {
  if (row_read_log_)
    for (Eigen::Index i = 0; i < rows(); ++i) note_row_read(i);
  Eigen::MatrixXd v(rows(), static_cast<Eigen::Index>(col_idx.size()));
  MaskArray m(rows(), static_cast<Eigen::Index>(col_idx.size()));
  std::vector<std::string> names;
  std::vector<ColumnMeta> meta;
  names.reserve(col_idx.size());
  meta.reserve(col_idx.size());
  for (std::size_t k = 0; k < col_idx.size(); ++k) {
    v.col(static_cast<Eigen::Index>(k)) = values_.col(col_idx[k]);
    m.col(static_cast<Eigen::Index>(k)) = mask_.col(col_idx[k]);
    names.push_back(column_names_[static_cast<std::size_t>(col_idx[k])]);
    meta.push_back(column_meta_[static_cast<std::size_t>(col_idx[k])]);
  }
  return DataMatrix(std::move(v), std::move(m), std::move(names), std::move(meta));
}

DataMatrix DataMatrix::drop_column(Eigen::Index j) const {
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(cols() - 1));
  for (Eigen::Index c = 0; c < cols(); ++c)
    if (c != j) keep.push_back(c);
  return subset_cols(keep);
}

}  // namespace bwlab
