#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include <json.hpp>

#include "bwlab/eda.hpp"
#include "bwlab/evaluation.hpp"
#include "bwlab/imputation.hpp"
#include "bwlab/models.hpp"
#include "bwlab/selectors.hpp"
#include "bwlab/synthgen.hpp"

namespace bwlab {

/// Reads a whole file as raw bytes; DataError when it cannot be opened.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// FNV-1a 64 of the raw bytes, as 16 hex digits.
std::string content_hash(std::string_view bytes);

nlohmann::json selector_report_to_json(const SelectorReport& report);
SelectorReport selector_report_from_json(const nlohmann::json& j);

nlohmann::json consensus_to_json(const ConsensusReport& report);

nlohmann::json metrics_to_json(const Metrics& metrics);
Metrics metrics_from_json(const nlohmann::json& j);

/// Everything in the record except the fitted model, which stays in memory.
nlohmann::json eval_record_to_json(const EvalRecord& record);
EvalRecord eval_record_from_json(const nlohmann::json& j);

// Versioned model document. Doubles survive the round trip bit-exactly, so a
// reloaded model predicts identically to the one that was saved.
nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

nlohmann::json ground_truth_to_json(const GroundTruth& truth);

nlohmann::json summary_to_json(const SummaryStats& stats);
nlohmann::json missingness_to_json(const MissingnessProfile& profile);
nlohmann::json mcar_to_json(const McarTestResult& result);
nlohmann::json distribution_table_to_json(const DistributionTable& table);
nlohmann::json imputation_diagnostics_to_json(const ImputationResult& result,
                                              const std::vector<std::string>& column_names);

// Run provenance: the effective settings echo plus a content hash of the
// input file, enough to re-execute a run bit-exactly.
struct Manifest {
  std::string subcommand;
  std::uint64_t seed = 0;
  std::string input_path;
  std::string input_hash;
  std::map<std::string, std::string> config;
};

nlohmann::json manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& j);

}  // namespace bwlab
