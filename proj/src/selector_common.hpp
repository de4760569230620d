#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "bwlab/errors.hpp"
#include "bwlab/selectors.hpp"

namespace bwlab::detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void validate_selector_input(const MatrixXd& x, const VectorXd& y,
                                    const std::vector<std::string>& names,
                                    const SelectorConfig& cfg) {
  if (x.cols() == 0) throw DataError("selector needs at least one feature");
  if (x.rows() == 0) throw DataError("selector needs at least one row");
  if (x.rows() != y.size()) throw DataError("selector: row count mismatch with target");
  if (static_cast<std::size_t>(x.cols()) != names.size())
    throw DataError("selector: name count mismatch with columns");
  if (cfg.top_k == 0) throw UsageError("top_k must be at least 1");
  if (!x.allFinite() || !y.allFinite())
    throw DataError("selector input must be complete and finite");
}

// Sorts by score descending with ascending column index on ties and keeps the
// top min(top_k, p) entries.
inline SelectorReport finalize_report(std::string selector_name, const VectorXd& scores,
                                      const std::vector<std::string>& names,
                                      std::size_t top_k,
                                      std::map<std::string, std::string> metadata = {}) {
  const auto p = static_cast<std::size_t>(scores.size());
  for (std::size_t j = 0; j < p; ++j)
    if (!std::isfinite(scores[static_cast<Eigen::Index>(j)]))
      throw NumericError(selector_name + ": non-finite score for " + names[j]);

  std::vector<std::size_t> order(p);
  for (std::size_t j = 0; j < p; ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = scores[static_cast<Eigen::Index>(a)];
    const double sb = scores[static_cast<Eigen::Index>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });

  SelectorReport report;
  report.selector_name = std::move(selector_name);
  report.metadata = std::move(metadata);
  const std::size_t keep = std::min(top_k, p);
  report.ranked.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i)
    report.ranked.push_back({names[order[i]], scores[static_cast<Eigen::Index>(order[i])]});
  return report;
}

inline std::string join_names(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ",";
    out += parts[i];
  }
  return out;
}

}  // namespace bwlab::detail
