#include "bwlab/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace bwlab {

namespace {

struct RawCell {
  std::string text;
  std::size_t row;  // 1-based, header = 1
  std::size_t col;  // 1-based
};

// RFC-4180 field splitter. Handles quoted fields, doubled quotes, and
// newlines inside quotes. Rows are terminated by LF or CRLF.
std::vector<std::vector<RawCell>> tokenize(const std::string& text) {
  std::vector<std::vector<RawCell>> rows;
  std::vector<RawCell> row;
  std::string field;
  std::size_t line = 1, col = 1;
  bool in_quotes = false;
  bool field_was_quoted = false;

  auto end_field = [&] {
    row.push_back(RawCell{field, line, col});
    field.clear();
    field_was_quoted = false;
    ++col;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
    ++line;
    col = 1;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty())
          throw DataError("malformed CSV at row " + std::to_string(line) +
                          ", column " + std::to_string(col) +
                          ": quote inside unquoted field");
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 >= text.size() || text[i + 1] != '\n')
          throw DataError("malformed CSV at row " + std::to_string(line) +
                          ": bare carriage return");
        break;
      case '\n':
        end_row();
        break;
      default:
        field += c;
    }
  }
  if (in_quotes)
    throw DataError("malformed CSV at row " + std::to_string(line) +
                    ": unterminated quoted field");
  if (!field.empty() || !row.empty() || field_was_quoted) end_row();
  return rows;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

double parse_number(const RawCell& cell) {
  const std::string& s = cell.text;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("non-numeric cell '" + s + "' at row " +
                    std::to_string(cell.row) + ", column " +
                    std::to_string(cell.col));
  if (!std::isfinite(v))
    throw DataError("non-finite cell at row " + std::to_string(cell.row) +
                    ", column " + std::to_string(cell.col));
  return v;
}

bool is_integer_valued(double v) {
  return std::abs(v) < 9.007199254740992e15 && v == std::floor(v);
}

ColumnKind infer_kind(const std::vector<double>& observed) {
  std::set<double> distinct;
  for (double v : observed) {
    if (!is_integer_valued(v)) return ColumnKind::continuous;
    distinct.insert(v);
    if (distinct.size() > kDiscreteDistinctLimit) return ColumnKind::continuous;
  }
  if (observed.empty()) return ColumnKind::continuous;
  return ColumnKind::discrete;
}

}  // namespace

DataMatrix parse_csv(const std::string& text, const ColumnSchema& schema) {
  auto rows = tokenize(text);
  if (rows.size() < 2)
    throw DataError("CSV needs a header row and at least one data row");

  std::vector<std::string> names;
  names.reserve(rows[0].size());
  std::set<std::string> seen;
  for (const auto& cell : rows[0]) {
    if (!seen.insert(cell.text).second)
      throw DataError("duplicate header '" + cell.text + "' at column " +
                      std::to_string(cell.col));
    names.push_back(cell.text);
  }
  const std::size_t p = names.size();
  const std::size_t n = rows.size() - 1;

  Eigen::MatrixXd values(n, p);
  MaskArray mask(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[i + 1];
    if (row.size() != p)
      throw DataError("malformed CSV at row " + std::to_string(i + 2) + ": expected " +
                      std::to_string(p) + " fields, got " + std::to_string(row.size()));
    for (std::size_t j = 0; j < p; ++j) {
      if (is_missing(row[j].text)) {
        mask(i, j) = false;
        values(i, j) = std::numeric_limits<double>::quiet_NaN();
      } else {
        mask(i, j) = true;
        values(i, j) = parse_number(row[j]);
      }
    }
  }

  for (const auto& [name, kind] : schema)
    if (std::find(names.begin(), names.end(), name) == names.end())
      throw DataError("schema override for unknown column: " + name);

  DataMatrix data(std::move(values), std::move(mask), std::move(names));
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    auto it = schema.find(data.name(j));
    data.meta(j).kind =
        it != schema.end() ? it->second : infer_kind(data.observed_column(j));
  }
  return data;
}

DataMatrix load_csv(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), schema);
}

namespace {

std::string format_value(double v) {
  char buf[40];
  // Shortest representation that round-trips exactly.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = 0.0;
    std::from_chars(buf, buf + std::strlen(buf), back);
    if (back == v) break;
  }
  return buf;
}

bool needs_quoting(const std::string& s) {
  return s.find_first_of(",\"\n\r") != std::string::npos;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string csv_to_string(const DataMatrix& data) {
  std::string out;
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    if (j) out += ',';
    const std::string& name = data.name(j);
    out += needs_quoting(name) ? quote(name) : name;
  }
  out += '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (j) out += ',';
      if (data.observed(i, j)) out += format_value(data.at(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_csv(const DataMatrix& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << csv_to_string(data);
}

}  // namespace bwlab
