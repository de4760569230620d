#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bwlab/errors.hpp"

namespace bwlab {

enum class ColumnKind { continuous, discrete };

enum class Distribution {
  gaussian,
  lognormal,
  gamma,
  exponential,
  uniform,
  poisson,
  discrete,
  unknown
};

const char* to_string(ColumnKind kind);
const char* to_string(Distribution dist);
ColumnKind column_kind_from_string(const std::string& s);
Distribution distribution_from_string(const std::string& s);

struct ColumnMeta {
  ColumnKind kind = ColumnKind::continuous;
  Distribution distribution = Distribution::unknown;
  std::string unit;
};

using MaskArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Numeric table with a missingness mask. Unobserved cells hold NaN internally;
// the sentinel is never handed out as data -- reads go through at()/observed()
// or an explicit fill.
class DataMatrix {
public:
  DataMatrix(Eigen::MatrixXd values, MaskArray mask,
             std::vector<std::string> column_names,
             std::vector<ColumnMeta> column_meta = {});

  /// Builds a fully observed matrix.
  static DataMatrix complete(Eigen::MatrixXd values,
                             std::vector<std::string> column_names,
                             std::vector<ColumnMeta> column_meta = {});

  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }

  bool observed(Eigen::Index i, Eigen::Index j) const {
    note_row_read(i);
    return mask_(i, j);
  }

  /// Mask-aware read; throws DataError on an unobserved cell.
  double at(Eigen::Index i, Eigen::Index j) const;

  void set(Eigen::Index i, Eigen::Index j, double v) {
    values_(i, j) = v;
    mask_(i, j) = true;
  }

  const MaskArray& mask() const { return mask_; }
  bool all_observed() const { return mask_.all(); }

  /// The full value matrix; only available once every cell is observed.
  const Eigen::MatrixXd& matrix() const;

  /// Copy of the value matrix with unobserved cells set to `fill`.
  Eigen::MatrixXd filled(double fill) const;

  const std::vector<std::string>& column_names() const { return column_names_; }
  const std::string& name(Eigen::Index j) const { return column_names_[static_cast<std::size_t>(j)]; }
  /// Index of a named column; throws DataError when absent.
  Eigen::Index index_of(const std::string& column_name) const;
  std::optional<Eigen::Index> find(const std::string& column_name) const;

  const ColumnMeta& meta(Eigen::Index j) const { return column_meta_[static_cast<std::size_t>(j)]; }
  ColumnMeta& meta(Eigen::Index j) { return column_meta_[static_cast<std::size_t>(j)]; }
  const std::vector<ColumnMeta>& column_meta() const { return column_meta_; }

  /// Observed entries of one column, in row order.
  std::vector<double> observed_column(Eigen::Index j) const;
  std::size_t observed_count(Eigen::Index j) const;

  DataMatrix subset_rows(const std::vector<Eigen::Index>& row_idx) const;
  DataMatrix subset_cols(const std::vector<Eigen::Index>& col_idx) const;
  DataMatrix drop_column(Eigen::Index j) const;

  /// Test hook: counts per-row reads (subset extraction and cell access).
  void set_row_read_log(std::vector<std::uint64_t>* log) const { row_read_log_ = log; }

private:
  void note_row_read(Eigen::Index i) const {
    if (row_read_log_) ++(*row_read_log_)[static_cast<std::size_t>(i)];
  }

  Eigen::MatrixXd values_;
  MaskArray mask_;
  std::vector<std::string> column_names_;
  std::vector<ColumnMeta> column_meta_;
  mutable std::vector<std::uint64_t>* row_read_log_ = nullptr;
};

}  // namespace bwlab
