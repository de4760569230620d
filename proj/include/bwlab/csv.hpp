#pragma once

#include <map>
#include <string>

#include "bwlab/data_matrix.hpp"

namespace bwlab {

/// Optional per-column kind overrides applied after inference.
using ColumnSchema = std::map<std::string, ColumnKind>;

/// Distinct-value ceiling for the integer-column => discrete inference rule.
inline constexpr std::size_t kDiscreteDistinctLimit = 20;

// RFC-4180 CSV with a mandatory header row. Cells are numeric literals;
// the empty cell and "NA" mean missing. Throws DataError with the 1-based
// row/column of the first offending cell.
DataMatrix load_csv(const std::string& path, const ColumnSchema& schema = {});

/// Same parser over an in-memory document (used by tests).
DataMatrix parse_csv(const std::string& text, const ColumnSchema& schema = {});

/// Writes a DataMatrix as CSV; unobserved cells become empty fields.
/// Values are printed with round-trip precision.
void write_csv(const DataMatrix& data, const std::string& path);

std::string csv_to_string(const DataMatrix& data);

}  // namespace bwlab
