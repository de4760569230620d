// End-to-end checks of the bwlab binary: exit codes, file outputs, replay.

#include <doctest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <string>

#include "bwlab/json_io.hpp"

using namespace bwlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch_root() {
  static const fs::path root =
      fs::temp_directory_path() / ("bwlab_cli_" + std::to_string(::getpid()));
  fs::create_directories(root);
  return root;
}

fs::path case_dir(const std::string& name) {
  const fs::path dir = scratch_root() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out_file = dir / "stdout.txt";
  const fs::path err_file = dir / "stderr.txt";
  const std::string cmd = std::string(BWLAB_CLI_PATH) + " " + args + " > " +
                          out_file.string() + " 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_text_file(out_file.string());
  result.err = read_text_file(err_file.string());
  return result;
}

json load_json(const fs::path& path) { return json::parse(read_text_file(path.string())); }

std::size_t line_count(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  return lines;
}

/// 40 complete rows over three continuous columns.
fs::path write_complete_csv(const fs::path& dir) {
  std::string text = "a,b,c\n";
  for (int i = 0; i < 40; ++i) {
    text += std::to_string(i + 0.5) + "," + std::to_string(2.0 * i + 1.25) + "," +
            std::to_string(100.0 - 0.75 * i) + "\n";
  }
  const fs::path path = dir / "complete.csv";
  write_text_file(path.string(), text);
  return path;
}

}  // namespace

TEST_CASE("unknown subcommand exits 1 with usage on stderr") {
  const fs::path dir = case_dir("unknown");
  const CliResult r = run_cli("bogus", dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("Usage:") != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
  const fs::path dir = case_dir("usage");
  CHECK(run_cli("synth --seed abc --out " + (dir / "o").string(), dir).code == 1);
  const fs::path csv = write_complete_csv(dir);
  const CliResult bad_selector = run_cli("select " + csv.string() +
                                             " --target c --selectors bogus --out " +
                                             (dir / "s").string(),
                                         dir);
  CHECK(bad_selector.code == 1);
}

TEST_CASE("missing input exits 2") {
  const fs::path dir = case_dir("missing");
  const CliResult r = run_cli("eda " + (dir / "absent.csv").string(), dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("cannot open") != std::string::npos);
}

TEST_CASE("eda on a complete file reports the mcar test not applicable") {
  const fs::path dir = case_dir("eda_complete");
  const fs::path csv = write_complete_csv(dir);
  const CliResult r = run_cli("eda " + csv.string() + " --out " + dir.string(), dir);
  REQUIRE(r.code == 0);
  const json report = load_json(dir / "eda.json");
  CHECK(report.at("mcar").at("applicable") == false);
  CHECK(report.at("mcar").at("d2") == 0.0);
  CHECK(report.at("summary").at("columns").size() == 3);
  CHECK(report.at("missingness").at("overall_rate") == 0.0);
  CHECK(fs::exists(dir / "eda_manifest.json"));
}

TEST_CASE("synth, impute, select, and grid chain end to end") {
  const fs::path dir = case_dir("chain");
  const std::string synth_args =
      "synth --n 140 --p 12 --gaussian-count 8 --lognormal-count 1 --gamma-count 2 "
      "--discrete-count 1 --seed 7 --out ";
  REQUIRE(run_cli(synth_args + (dir / "s").string(), dir).code == 0);
  const std::string cohort = (dir / "s" / "cohort.csv").string();
  REQUIRE(fs::exists(cohort));
  REQUIRE(fs::exists(dir / "s" / "ground_truth.json"));
  const std::string cohort_before = read_text_file(cohort);

  // The raw cohort has holes, so select refuses it.
  const CliResult premature =
      run_cli("select " + cohort + " --target fl_bw --out " + (dir / "x").string(), dir);
  CHECK(premature.code == 2);
  CHECK(premature.err.find("impute first") != std::string::npos);

  REQUIRE(run_cli("impute " + cohort + " --seed 3 --out " + (dir / "i").string(), dir)
              .code == 0);
  const std::string completed = (dir / "i" / "completed.csv").string();
  const json diagnostics = load_json(dir / "i" / "imputation.json");
  CHECK(diagnostics.at("per_column_method").size() == 13);

  const CliResult select = run_cli("select " + completed +
                                       " --target fl_bw --selectors pearson,kendall,cart"
                                       " --seed 5 --out " +
                                       (dir / "sel").string(),
                                   dir);
  REQUIRE(select.code == 0);
  const json pearson = load_json(dir / "sel" / "selector_pearson.json");
  CHECK(pearson.at("ranked").size() == 12);  // twelve features, top_k twenty
  CHECK(fs::exists(dir / "sel" / "consensus.json"));
  CHECK(fs::exists(dir / "sel" / "selector_frequency.csv"));

  const CliResult grid = run_cli("grid " + cohort +
                                     " --target fl_bw --selectors pearson,cart"
                                     " --models ols,ridge --seed 9 --out " +
                                     (dir / "g").string(),
                                 dir);
  REQUIRE(grid.code == 0);
  const json records = load_json(dir / "g" / "records.json");
  REQUIRE(records.at("records").size() == 4);
  for (const json& r : records.at("records")) CHECK(r.at("failed") == false);
  CHECK(line_count(read_text_file((dir / "g" / "leaderboard.csv").string())) == 5);
  CHECK(fs::exists(dir / "g" / "residual_bins.csv"));
  CHECK(fs::exists(dir / "g" / "feature_importance.csv"));
  CHECK(fs::exists(dir / "g" / "winner.json"));
  CHECK(line_count(read_text_file((dir / "g" / "selector_frequency.csv").string())) == 3);

  const CliResult report = run_cli(
      "report " + (dir / "g" / "records.json").string() + " --out " + (dir / "r").string(),
      dir);
  REQUIRE(report.code == 0);
  CHECK(line_count(read_text_file((dir / "r" / "report_leaderboard.csv").string())) == 5);

  // Nothing along the chain may rewrite its inputs.
  CHECK(read_text_file(cohort) == cohort_before);
}

TEST_CASE("train and predict round trip through a model file") {
  const fs::path dir = case_dir("train_predict");
  REQUIRE(run_cli("synth --n 150 --p 11 --gaussian-count 8 --lognormal-count 1 "
                  "--gamma-count 1 --discrete-count 1 --missing-rate 0 --seed 8 --out " +
                      (dir / "s").string(),
                  dir)
              .code == 0);
  const std::string cohort = (dir / "s" / "cohort.csv").string();

  REQUIRE(run_cli("train " + cohort +
                      " --target fl_bw --model ridge --selector pearson --top-k 6"
                      " --seed 4 --out " +
                      (dir / "t").string(),
                  dir)
              .code == 0);
  REQUIRE(fs::exists(dir / "t" / "model.json"));
  REQUIRE(fs::exists(dir / "t" / "train_metrics.json"));

  const CliResult predict = run_cli("predict " + cohort + " --model " +
                                        (dir / "t" / "model.json").string() +
                                        " --target fl_bw --out " + (dir / "p").string(),
                                    dir);
  REQUIRE(predict.code == 0);
  CHECK(line_count(read_text_file((dir / "p" / "predictions.csv").string())) == 151);
  const json metrics = load_json(dir / "p" / "metrics.json");
  CHECK(metrics.at("r2").get<double>() > 0.3);

  // A second predict from the same model file is byte-identical.
  REQUIRE(run_cli("predict " + cohort + " --model " + (dir / "t" / "model.json").string() +
                      " --target fl_bw --out " + (dir / "p2").string(),
                  dir)
              .code == 0);
  CHECK(read_text_file((dir / "p" / "predictions.csv").string()) ==
        read_text_file((dir / "p2" / "predictions.csv").string()));
}

TEST_CASE("grid replay and worker count reproduce the leaderboard byte for byte") {
  const fs::path dir = case_dir("replay");
  REQUIRE(run_cli("synth --n 130 --p 10 --gaussian-count 7 --lognormal-count 1 "
                  "--gamma-count 1 --discrete-count 1 --seed 12 --out " +
                      (dir / "s").string(),
                  dir)
              .code == 0);
  const std::string cohort = (dir / "s" / "cohort.csv").string();
  const std::string base_args = "grid " + cohort +
                                " --target fl_bw --selectors pearson,cart"
                                " --models ols,ridge --seed 21 --out ";

  REQUIRE(run_cli(base_args + (dir / "g1").string(), dir).code == 0);
  REQUIRE(run_cli("grid --replay " + (dir / "g1" / "grid_manifest.json").string() +
                      " --workers 3 --out " + (dir / "g2").string(),
                  dir)
              .code == 0);
  CHECK(read_text_file((dir / "g1" / "leaderboard.csv").string()) ==
        read_text_file((dir / "g2" / "leaderboard.csv").string()));
  CHECK(read_text_file((dir / "g1" / "records.json").string()) ==
        read_text_file((dir / "g2" / "records.json").string()));

  // Tampering with the recorded input is refused.
  write_text_file(cohort + ".bak", read_text_file(cohort));
  write_text_file(cohort, read_text_file(cohort) + "\n");
  const CliResult tampered =
      run_cli("grid --replay " + (dir / "g1" / "grid_manifest.json").string() + " --out " +
                  (dir / "g3").string(),
              dir);
  CHECK(tampered.code == 2);
}

TEST_CASE("leak-free grid runs on incomplete data") {
  const fs::path dir = case_dir("leakfree");
  REQUIRE(run_cli("synth --n 120 --p 10 --gaussian-count 7 --lognormal-count 1 "
                  "--gamma-count 1 --discrete-count 1 --seed 14 --out " +
                      (dir / "s").string(),
                  dir)
              .code == 0);
  const CliResult grid = run_cli("grid " + (dir / "s" / "cohort.csv").string() +
                                     " --target fl_bw --selectors pearson --models ols"
                                     " --mode leak_free --seed 2 --out " +
                                     (dir / "g").string(),
                                 dir);
  REQUIRE(grid.code == 0);
  const json records = load_json(dir / "g" / "records.json");
  REQUIRE(records.at("records").size() == 1);
  CHECK(records.at("records")[0].at("failed") == false);
  const json manifest = load_json(dir / "g" / "grid_manifest.json");
  CHECK(manifest.at("config").at("mode") == "leak_free");
}
