// leafscope: ingest -> split -> train/grid -> evaluate -> explain -> compare
// for the five-class pumpkin leaf corpus.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "leafscope/cam.hpp"
#include "leafscope/dataset.hpp"
#include "leafscope/metrics.hpp"
#include "leafscope/trainer.hpp"

namespace fs = std::filesystem;
using namespace leafscope;

namespace {

// Exit contract: 0 success, 1 user error (bad args/paths/data), 2 internal.
struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write " + path.string());
  out << text;
}

void refuse_clobber(const fs::path& target, bool overwrite) {
  if (overwrite) return;
  std::error_code ec;
  const bool occupied = fs::is_regular_file(target, ec) ||
                        (fs::is_directory(target, ec) && !fs::is_empty(target, ec));
  if (occupied) {
    throw UserError("output " + target.string() +
                    " already exists; pass --overwrite to replace it");
  }
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("LEAFSCOPE_SEED"); env && *env) {
    return std::strtoull(env, nullptr, 10);
  }
  return 0;
}

SplitRatios parse_ratios(const std::string& text) {
  SplitRatios r;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf", &r.train, &r.val, &r.test) != 3) {
    throw UserError("ratios must be three comma-separated numbers, e.g. 0.8,0.1,0.1");
  }
  return r;
}

DatasetManifest load_manifest_checked(const fs::path& path) {
  if (!fs::exists(path)) throw UserError("manifest not found: " + path.string());
  return load_manifest(path);
}

int run_train(const fs::path& config_path, const fs::path& out_dir,
              std::optional<std::uint64_t> seed_override, bool overwrite) {
  if (!fs::exists(config_path)) throw UserError("config not found: " + config_path.string());
  TrainConfig config = train_config_from_json(read_text_file(config_path));
  if (seed_override) config.seed = *seed_override;
  if (config.manifest_path.empty()) throw UserError("config is missing manifest_path");

  fs::path manifest_path = config.manifest_path;
  if (manifest_path.is_relative()) manifest_path = config_path.parent_path() / manifest_path;
  const DatasetManifest manifest = load_manifest_checked(manifest_path);

  refuse_clobber(out_dir, overwrite);
  fs::create_directories(out_dir);

  BackboneSpec spec;
  spec.name = config.architecture;
  spec.input_side = config.input_side;
  spec.pretrained = config.pretrained;
  ModelHandle model = build_model(spec, kNumClasses, config.seed);
  config.input_side = model.spec().input_side;

  const TrainOutcome outcome = train(model, manifest, config);

  write_text_file(out_dir / "config.json", train_config_to_json(config));
  write_text_file(out_dir / "log.json", train_log_to_json(outcome.log));
  save_checkpoint(model, out_dir / "best.ckpt");
  write_checkpoint_meta(outcome.best, out_dir / "best.meta.json");

  std::cout << "best epoch " << outcome.best.epoch << ", val_accuracy "
            << outcome.best.val_accuracy << "\n"
            << "run directory: " << out_dir.string() << "\n";
  return 0;
}

int run_grid_cmd(const fs::path& config_path, const fs::path& out_dir,
                 std::optional<std::uint64_t> seed_override, bool overwrite,
                 bool parallel) {
  if (!fs::exists(config_path)) throw UserError("config not found: " + config_path.string());
  std::vector<TrainConfig> cells = grid_configs_from_json(read_text_file(config_path));
  if (seed_override) {
    for (auto& c : cells) c.seed = *seed_override;
  }
  if (cells.empty() || cells.front().manifest_path.empty()) {
    throw UserError("grid config is missing manifest_path");
  }
  fs::path manifest_path = cells.front().manifest_path;
  if (manifest_path.is_relative()) manifest_path = config_path.parent_path() / manifest_path;
  const DatasetManifest manifest = load_manifest_checked(manifest_path);

  refuse_clobber(out_dir / "grid_report.json", overwrite);
  fs::create_directories(out_dir);

  const GridReport report = run_grid(
      [&](const TrainConfig& c) {
        BackboneSpec spec;
        spec.name = c.architecture;
        spec.input_side = c.input_side;
        spec.pretrained = c.pretrained;
        return build_model(spec, kNumClasses, c.seed);
      },
      manifest, cells, parallel);

  write_text_file(out_dir / "grid_report.json", grid_report_to_json(report));
  std::cout << report.cells.size() << " grid cells; report: "
            << (out_dir / "grid_report.json").string() << "\n";
  return 0;
}

int run_evaluate(const fs::path& ckpt_path, const fs::path& manifest_path,
                 const std::string& split_str, const fs::path& out_path,
                 int batch_size, bool overwrite) {
  if (!fs::exists(ckpt_path)) throw UserError("checkpoint not found: " + ckpt_path.string());
  const auto split = split_from_string(split_str);
  if (!split || *split == Split::Unassigned) {
    throw UserError("split must be one of train/val/test");
  }
  const DatasetManifest manifest = load_manifest_checked(manifest_path);
  refuse_clobber(out_path, overwrite);

  ModelHandle model = load_checkpoint(ckpt_path);
  const SplitEval eval = evaluate_on_split(model, manifest, *split, batch_size);
  const EvalReport report =
      evaluate(confusion_matrix(eval.predictions, eval.labels, model.num_classes()));

  std::vector<std::string> labels(class_names().begin(), class_names().end());
  write_text_file(out_path, report_to_json(model.spec().name, report, labels));
  std::cout << model.spec().name << " " << split_name(*split) << " accuracy "
            << report.accuracy << " (report: " << out_path.string() << ")\n";
  return 0;
}

int run_explain(const fs::path& ckpt_path, const fs::path& image_path,
                const std::string& methods_csv, const std::string& layer,
                int class_index, const fs::path& out_dir, double alpha,
                bool overwrite) {
  if (!fs::exists(ckpt_path)) throw UserError("checkpoint not found: " + ckpt_path.string());
  if (!fs::exists(image_path)) throw UserError("image not found: " + image_path.string());
  refuse_clobber(out_dir, overwrite);

  ExplainRequest request;
  std::stringstream ss(methods_csv);
  for (std::string m; std::getline(ss, m, ',');) {
    if (!m.empty()) request.methods.push_back(m);
  }
  if (!layer.empty()) request.layer = layer;
  if (class_index >= 0) request.class_index = class_index;
  request.overlay_alpha = alpha;

  ModelHandle model = load_checkpoint(ckpt_path);
  const ImageTensor image = load_and_resize(image_path, model.spec().input_side);
  std::vector<std::string> labels(class_names().begin(), class_names().end());
  const ExplainResult result =
      explain_to_files(model, image, request, out_dir, labels);

  std::cout << "predicted " << labels[static_cast<std::size_t>(result.predicted_class)]
            << ", explained class " << result.class_used << " at layer "
            << result.layer_used << "; " << result.heatmaps.size()
            << " heatmap(s) in " << out_dir.string() << "\n";
  if (!result.failures.empty() && result.heatmaps.empty()) {
    throw std::runtime_error("all requested methods failed");
  }
  return 0;
}

int run_compare(const std::vector<fs::path>& run_dirs, const fs::path& out_dir,
                bool overwrite) {
  refuse_clobber(out_dir / "comparison.json", overwrite);
  std::map<std::string, EvalReport> reports;
  int skipped = 0;
  for (const auto& dir : run_dirs) {
    const fs::path report_path = dir / "report.json";
    if (!fs::exists(report_path)) {
      std::cerr << "skipping " << dir.string() << ": no report.json\n";
      ++skipped;
      continue;
    }
    std::string architecture;
    EvalReport report = report_from_json(read_text_file(report_path), &architecture);
    reports.emplace(architecture, std::move(report));
  }
  if (reports.empty()) {
    throw UserError("no run directory contained a report.json");
  }
  std::vector<std::string> labels(class_names().begin(), class_names().end());
  render_reports(reports, out_dir, labels);
  std::cout << reports.size() << " run(s) compared";
  if (skipped) std::cout << ", " << skipped << " skipped";
  std::cout << "; artifacts in " << out_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"leafscope: explainable pumpkin-leaf disease classification"};
  app.require_subcommand(1);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Scan a class-per-directory corpus into a manifest");
  std::string ingest_root;
  std::string ingest_out = "manifest.json";
  bool ingest_overwrite = false;
  ingest_cmd->add_option("root", ingest_root, "Corpus root directory")->required();
  ingest_cmd->add_option("-o,--output", ingest_out, "Manifest path");
  ingest_cmd->add_flag("--overwrite", ingest_overwrite, "Replace an existing output");

  // split
  auto* split_cmd = app.add_subcommand("split", "Assign stratified train/val/test splits");
  std::string split_manifest;
  std::string split_out;
  std::string split_ratios = "0.8,0.1,0.1";
  std::uint64_t split_seed = default_seed();
  bool split_overwrite = false;
  split_cmd->add_option("manifest", split_manifest, "Manifest to split")->required();
  split_cmd->add_option("--seed", split_seed, "Shuffle seed");
  split_cmd->add_option("--ratios", split_ratios, "train,val,test ratios");
  split_cmd->add_option("-o,--output", split_out, "Output manifest (default: in place)");
  split_cmd->add_flag("--overwrite", split_overwrite, "Replace an existing output");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one configuration");
  std::string train_config_path;
  std::string train_out;
  bool train_overwrite = false;
  std::uint64_t train_seed = 0;
  bool train_seed_set = false;
  train_cmd->add_option("-c,--config", train_config_path, "Experiment config JSON")->required();
  train_cmd->add_option("-o,--output", train_out, "Run directory")->required();
  train_cmd->add_option("--seed", train_seed, "Override the config seed")
      ->each([&](const std::string&) { train_seed_set = true; });
  train_cmd->add_flag("--overwrite", train_overwrite, "Replace an existing run directory");

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "Run a hyperparameter grid");
  std::string grid_config_path;
  std::string grid_out;
  bool grid_overwrite = false;
  std::uint64_t grid_seed = 0;
  bool grid_seed_set = false;
  bool grid_parallel = false;
  grid_cmd->add_option("-c,--config", grid_config_path, "Grid config JSON")->required();
  grid_cmd->add_option("-o,--output", grid_out, "Output directory")->required();
  grid_cmd->add_option("--seed", grid_seed, "Override the config seed")
      ->each([&](const std::string&) { grid_seed_set = true; });
  grid_cmd->add_flag("--parallel", grid_parallel, "Run grid cells on a thread pool");
  grid_cmd->add_flag("--overwrite", grid_overwrite, "Replace an existing report");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a split");
  std::string eval_ckpt, eval_manifest, eval_split = "test", eval_out = "report.json";
  int eval_batch = 10;
  bool eval_overwrite = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "best.ckpt path")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "Manifest path")->required();
  eval_cmd->add_option("--split", eval_split, "train|val|test");
  eval_cmd->add_option("--batch-size", eval_batch, "Evaluation batch size");
  eval_cmd->add_option("-o,--output", eval_out, "Report path");
  eval_cmd->add_flag("--overwrite", eval_overwrite, "Replace an existing report");

  // explain
  auto* explain_cmd = app.add_subcommand("explain", "Render CAM heatmaps for one image");
  std::string ex_ckpt, ex_image, ex_methods = "gradcam,gradcampp,scorecam,layercam";
  std::string ex_layer;
  int ex_class = -1;
  std::string ex_out = "explain";
  double ex_alpha = 0.4;
  bool ex_overwrite = false;
  explain_cmd->add_option("--checkpoint", ex_ckpt, "best.ckpt path")->required();
  explain_cmd->add_option("--image", ex_image, "Input image (jpg/png)")->required();
  explain_cmd->add_option("--methods", ex_methods, "Comma list of gradcam,gradcampp,scorecam,layercam");
  explain_cmd->add_option("--layer", ex_layer, "Tap layer (default: the architecture's last conv features)");
  explain_cmd->add_option("--class", ex_class, "Class index to explain (default: predicted)");
  explain_cmd->add_option("--alpha", ex_alpha, "Overlay blend factor");
  explain_cmd->add_option("-o,--output", ex_out, "Output directory");
  explain_cmd->add_flag("--overwrite", ex_overwrite, "Replace existing outputs");

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "Build the cross-architecture comparison");
  std::vector<std::string> cmp_dirs;
  std::string cmp_out = "comparison";
  bool cmp_overwrite = false;
  compare_cmd->add_option("runs", cmp_dirs, "Run directories containing report.json")->required();
  compare_cmd->add_option("-o,--output", cmp_out, "Output directory");
  compare_cmd->add_flag("--overwrite", cmp_overwrite, "Replace existing outputs");

  // version
  auto* version_cmd = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // user error unless it was --help
  }

  try {
    if (version_cmd->parsed()) {
      std::cout << "leafscope " << LEAFSCOPE_VERSION << "\n";
      return 0;
    }
    if (ingest_cmd->parsed()) {
      if (!fs::is_directory(ingest_root)) {
        throw UserError("corpus root not found: " + ingest_root);
      }
      refuse_clobber(ingest_out, ingest_overwrite);
      const fs::path out_path = fs::path(ingest_out);
      const fs::path base =
          out_path.parent_path().empty() ? fs::path(".") : out_path.parent_path();
      const DatasetManifest manifest = ingest_directory(ingest_root, base);
      save_manifest(manifest, out_path);
      std::cout << manifest.entries.size() << " images -> " << ingest_out << "\n";
      return 0;
    }
    if (split_cmd->parsed()) {
      const DatasetManifest manifest = load_manifest_checked(split_manifest);
      const fs::path out_path = split_out.empty() ? fs::path(split_manifest) : fs::path(split_out);
      if (!split_out.empty()) refuse_clobber(out_path, split_overwrite);
      const DatasetManifest split = stratified_split(manifest, parse_ratios(split_ratios), split_seed);
      save_manifest(split, out_path);
      std::cout << "train/val/test = " << split.count_split(Split::Train) << "/"
                << split.count_split(Split::Val) << "/" << split.count_split(Split::Test)
                << " -> " << out_path.string() << "\n";
      return 0;
    }
    if (train_cmd->parsed()) {
      return run_train(train_config_path, train_out,
                       train_seed_set ? std::optional<std::uint64_t>(train_seed) : std::nullopt,
                       train_overwrite);
    }
    if (grid_cmd->parsed()) {
      return run_grid_cmd(grid_config_path, grid_out,
                          grid_seed_set ? std::optional<std::uint64_t>(grid_seed) : std::nullopt,
                          grid_overwrite, grid_parallel);
    }
    if (eval_cmd->parsed()) {
      return run_evaluate(eval_ckpt, eval_manifest, eval_split, eval_out, eval_batch,
                          eval_overwrite);
    }
    if (explain_cmd->parsed()) {
      return run_explain(ex_ckpt, ex_image, ex_methods, ex_layer, ex_class, ex_out,
                         ex_alpha, ex_overwrite);
    }
    if (compare_cmd->parsed()) {
      std::vector<fs::path> dirs(cmp_dirs.begin(), cmp_dirs.end());
      return run_compare(dirs, cmp_out, cmp_overwrite);
    }
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;  // unreachable subcommand dispatch is an internal bug
}
