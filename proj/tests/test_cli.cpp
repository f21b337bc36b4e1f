#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <json.hpp>

#include "leafscope/metrics.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args, const fs::path& cwd) {
  static int counter = 0;
  const fs::path log = fs::temp_directory_path() /
                       ("leafscope_cli_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++) + ".log");
  const std::string cmd = "cd '" + cwd.string() + "' && '" + LEAFSCOPE_BIN + "' " +
                          args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  result.output = ss.str();
  fs::remove(log);
  return result;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("version prints the semantic version and exits 0") {
  testsup::TempDir tmp("cli_ver");
  const CliResult r = run_cli("version", tmp.path());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("leafscope 0.") != std::string::npos);
}

TEST_CASE("user errors exit 1") {
  testsup::TempDir tmp("cli_err");
  SUBCASE("missing manifest names the file") {
    const CliResult r = run_cli("split missing.json --seed 1", tmp.path());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("missing.json") != std::string::npos);
  }
  SUBCASE("unknown subcommand") {
    const CliResult r = run_cli("frobnicate", tmp.path());
    CHECK(r.exit_code == 1);
  }
  SUBCASE("missing corpus root") {
    const CliResult r = run_cli("ingest /nonexistent/corpus -o m.json", tmp.path());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("/nonexistent/corpus") != std::string::npos);
  }
  SUBCASE("help exits 0") {
    CHECK(run_cli("--help", tmp.path()).exit_code == 0);
    CHECK(run_cli("train --help", tmp.path()).exit_code == 0);
  }
}

TEST_CASE("full pipeline on the bundled fixture corpus") {
  testsup::TempDir tmp("cli_pipe");
  const std::string corpus = LEAFSCOPE_FIXTURE_CORPUS;
  REQUIRE(fs::is_directory(corpus));

  // ingest
  CliResult r = run_cli("ingest '" + corpus + "' -o manifest.json", tmp.path());
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(tmp.path() / "manifest.json"));

  // split 3/1/1 per class
  r = run_cli("split manifest.json --seed 7 --ratios 0.6,0.2,0.2", tmp.path());
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("15/5/5") != std::string::npos);

  // train 2 epochs with the toy backbone
  {
    std::ofstream cfg(tmp.path() / "config.json");
    cfg << R"({
      "architecture": "ToyCNN",
      "epochs": 2,
      "batch_size": 4,
      "learning_rate": 0.002,
      "seed": 7,
      "manifest_path": "manifest.json"
    })";
  }
  r = run_cli("train -c config.json -o run", tmp.path());
  REQUIRE(r.exit_code == 0);
  for (const char* f : {"config.json", "log.json", "best.ckpt", "best.meta.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(tmp.path() / "run" / f));
  }
  {
    const auto log = nlohmann::json::parse(slurp(tmp.path() / "run" / "log.json"));
    REQUIRE(log.at("records").size() == 2);
  }

  // refuses to clobber without --overwrite, then allows it
  r = run_cli("train -c config.json -o run", tmp.path());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("--overwrite") != std::string::npos);
  r = run_cli("train -c config.json -o run --overwrite", tmp.path());
  CHECK(r.exit_code == 0);

  // evaluate on the test split
  r = run_cli(
      "evaluate --checkpoint run/best.ckpt --manifest manifest.json --split test "
      "-o run/report.json",
      tmp.path());
  REQUIRE(r.exit_code == 0);
  {
    const auto rep = nlohmann::json::parse(slurp(tmp.path() / "run" / "report.json"));
    CHECK(rep.at("architecture") == "ToyCNN");
    CHECK(rep.at("confusion").size() == 5);
    CHECK(rep.at("per_class").size() == 5);
  }

  // explain one fixture image with all four methods
  r = run_cli("explain --checkpoint run/best.ckpt --image '" + corpus +
                  "/healthy_leaf/leaf_00.png' -o run/explain",
              tmp.path());
  REQUIRE(r.exit_code == 0);
  for (const char* m : {"gradcam", "gradcampp", "scorecam", "layercam"}) {
    CHECK(fs::exists(tmp.path() / "run" / "explain" / ("heatmap_" + std::string(m) + ".png")));
    CHECK(fs::exists(tmp.path() / "run" / "explain" / ("overlay_" + std::string(m) + ".png")));
  }
  CHECK(fs::exists(tmp.path() / "run" / "explain" / "prediction.json"));

  // compare consumes the run directory
  r = run_cli("compare run -o cmp", tmp.path());
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(tmp.path() / "cmp" / "comparison.json"));
  CHECK(fs::exists(tmp.path() / "cmp" / "confusion_ToyCNN.png"));
}

TEST_CASE("LEAFSCOPE_SEED provides the default split seed") {
  testsup::TempDir tmp("cli_seed");
  const std::string corpus = LEAFSCOPE_FIXTURE_CORPUS;
  CliResult r = run_cli("ingest '" + corpus + "' -o manifest.json", tmp.path());
  REQUIRE(r.exit_code == 0);
  // Environment default is read when no --seed is given.
  const std::string cmd = "cd '" + tmp.path().string() + "' && LEAFSCOPE_SEED=123 '" +
                          std::string(LEAFSCOPE_BIN) +
                          "' split manifest.json --ratios 0.6,0.2,0.2 > /dev/null 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  const auto manifest = nlohmann::json::parse(slurp(tmp.path() / "manifest.json"));
  CHECK(manifest.at("seed") == 123);
}

TEST_CASE("grid subcommand writes a sorted report") {
  testsup::TempDir tmp("cli_grid");
  const std::string corpus = LEAFSCOPE_FIXTURE_CORPUS;
  REQUIRE(run_cli("ingest '" + corpus + "' -o manifest.json", tmp.path()).exit_code == 0);
  REQUIRE(run_cli("split manifest.json --seed 7 --ratios 0.6,0.2,0.2", tmp.path())
              .exit_code == 0);
  {
    std::ofstream cfg(tmp.path() / "grid.json");
    cfg << R"({
      "architecture": "ToyCNN",
      "seed": 7,
      "manifest_path": "manifest.json",
      "augmentation": {"enable_rotation": false, "enable_crop": false,
                       "enable_brightness": false, "enable_contrast": false},
      "grid": {"epochs": [1, 2], "batch_size": [4], "learning_rate": [0.002]}
    })";
  }
  const CliResult r = run_cli("grid -c grid.json -o gridout", tmp.path());
  REQUIRE(r.exit_code == 0);
  const auto report = nlohmann::json::parse(slurp(tmp.path() / "gridout" / "grid_report.json"));
  REQUIRE(report.at("cells").size() == 2);
  CHECK(report["cells"][0].at("status") == "ok");
  CHECK(report["cells"][0].at("best_val_accuracy").get<double>() >=
        report["cells"][1].at("best_val_accuracy").get<double>());
}

TEST_CASE("compare: skip policy and paper-valued ordering") {
  testsup::TempDir tmp("cli_cmp");
  // Seven synthetic run directories carrying the published metric values.
  const auto reports = testsup::paper_style_reports();
  std::vector<std::string> labels = {"BacterialLeafSpot", "DownyMildew", "HealthyLeaf",
                                     "MosaicDisease", "PowderyMildew"};
  std::string dirs;
  for (const auto& [name, rep] : reports) {
    const fs::path dir = tmp.path() / ("run_" + name);
    fs::create_directories(dir);
    std::ofstream(dir / "report.json") << leafscope::report_to_json(name, rep, labels);
    dirs += " run_" + name;
  }
  fs::create_directories(tmp.path() / "run_empty");  // no report.json

  const CliResult r = run_cli("compare" + dirs + " run_empty -o cmp", tmp.path());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("skipping") != std::string::npos);

  const auto cmp = nlohmann::json::parse(slurp(tmp.path() / "cmp" / "comparison.json"));
  const auto& ranking = cmp.at("ranking");
  REQUIRE(ranking.size() == 7);
  const std::vector<std::string> expected = {
      "ResNet50",    "Xception",    "ResNet101",         "DenseNet169",
      "DenseNet201", "DenseNet121", "InceptionResNetV2"};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(ranking[i].at("architecture") == expected[i]);
  }

  // A compare with nothing valid is a user error.
  const CliResult bad = run_cli("compare run_empty -o cmp2", tmp.path());
  CHECK(bad.exit_code == 1);
}

TEST_CASE("single-run compare emits a one-row table") {
  testsup::TempDir tmp("cli_cmp1");
  leafscope::ConfusionMatrix cm(2);
  cm.at(0, 0) = cm.at(1, 1) = 4;
  const leafscope::EvalReport rep = leafscope::evaluate(cm);
  fs::create_directories(tmp.path() / "only");
  std::ofstream(tmp.path() / "only" / "report.json")
      << leafscope::report_to_json("ToyCNN", rep, {"a", "b"});
  const CliResult r = run_cli("compare only -o cmp", tmp.path());
  CHECK(r.exit_code == 0);
  const auto cmp = nlohmann::json::parse(slurp(tmp.path() / "cmp" / "comparison.json"));
  CHECK(cmp.at("ranking").size() == 1);
}

TEST_SUITE_END();
