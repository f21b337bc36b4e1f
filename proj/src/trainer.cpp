#include "leafscope/trainer.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "leafscope/nn/adam.hpp"
#include "leafscope/nn/loss.hpp"
#include "leafscope/tensor_bridge.hpp"

namespace leafscope {

namespace {

std::vector<std::size_t> split_indices(const DatasetManifest& manifest, Split split) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (manifest.entries[i].split == split) idx.push_back(i);
  }
  return idx;
}

// Loads one batch; augmentation (train path) consumes the shared epoch rng.
nn::Tensor load_batch(const DatasetManifest& manifest,
                      const std::vector<std::size_t>& indices, std::size_t first,
                      std::size_t count, int side, const AugmentationConfig* aug,
                      Rng* rng, std::vector<int>* labels) {
  std::vector<ImageTensor> images;
  images.reserve(count);
  labels->clear();
  for (std::size_t k = 0; k < count; ++k) {
    const auto& entry = manifest.entries[indices[first + k]];
    ImageTensor img = load_and_resize(manifest.resolve(entry), side);
    if (aug) img = augment(img, *aug, *rng);
    images.push_back(std::move(img));
    labels->push_back(static_cast<int>(entry.label));
  }
  return to_batch(images);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("train: learning_rate must be > 0");
  augmentation.validate();
}

std::map<std::string, std::string> environment_fingerprint() {
  std::map<std::string, std::string> env;
  env["compiler"] = __VERSION__;
  env["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
  env["scalar"] = sizeof(nn::Scalar) == 8 ? "float64" : "float32";
#ifdef __linux__
  env["platform"] = "linux";
#elif defined(__APPLE__)
  env["platform"] = "darwin";
#else
  env["platform"] = "other";
#endif
#ifdef NDEBUG
  env["build"] = "release";
#else
  env["build"] = "debug";
#endif
  return env;
}

SplitEval evaluate_on_split(ModelHandle& model, const DatasetManifest& manifest,
                            Split split, int batch_size) {
  const auto idx = split_indices(manifest, split);
  if (idx.empty()) {
    throw std::runtime_error("evaluate: split \"" + split_name(split) + "\" is empty");
  }
  const int side = model.spec().input_side;
  SplitEval eval;
  double loss_sum = 0.0;
  long correct = 0;
  for (std::size_t first = 0; first < idx.size(); first += static_cast<std::size_t>(batch_size)) {
    const std::size_t count =
        std::min(static_cast<std::size_t>(batch_size), idx.size() - first);
    std::vector<int> labels;
    const nn::Tensor batch =
        load_batch(manifest, idx, first, count, side, nullptr, nullptr, &labels);
    const nn::Tensor logits = model.forward(batch, /*training=*/false);
    const auto ce = nn::softmax_cross_entropy(logits, labels);
    loss_sum += ce.loss * static_cast<double>(count);
    for (std::size_t k = 0; k < count; ++k) {
      eval.predictions.push_back(ce.predictions[k]);
      eval.labels.push_back(labels[k]);
      if (ce.predictions[k] == labels[k]) ++correct;
    }
  }
  eval.loss = loss_sum / static_cast<double>(idx.size());
  eval.accuracy = static_cast<double>(correct) / static_cast<double>(idx.size());
  return eval;
}

TrainOutcome train(ModelHandle& model, const DatasetManifest& manifest,
                   const TrainConfig& config) {
  config.validate();
  for (const auto& entry : manifest.entries) {
    if (entry.split == Split::Unassigned) {
      throw std::runtime_error("train: manifest has unassigned splits; run split first");
    }
  }
  const auto train_idx_base = split_indices(manifest, Split::Train);
  if (train_idx_base.empty()) throw std::runtime_error("train: empty train split");
  if (split_indices(manifest, Split::Val).empty()) {
    throw std::runtime_error("train: empty val split");
  }

  const int side = model.spec().input_side;
  nn::Adam optimizer(config.learning_rate);
  auto params = model.graph().named_params();

  TrainLog log;
  log.config = config;
  log.environment = environment_fingerprint();

  std::vector<std::pair<std::string, nn::Tensor>> best_snapshot;
  double best_acc = -1.0;
  int best_epoch = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::size_t> order = train_idx_base;
    Rng shuffle_rng = Rng::from_words({config.seed, 0x5u, static_cast<std::uint64_t>(epoch)});
    shuffle_rng.shuffle(order);
    Rng aug_rng = Rng::from_words({config.seed, 0xau, static_cast<std::uint64_t>(epoch)});

    double loss_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t first = 0; first < order.size();
         first += static_cast<std::size_t>(config.batch_size), ++batch_no) {
      const std::size_t count =
          std::min(static_cast<std::size_t>(config.batch_size), order.size() - first);
      std::vector<int> labels;
      const nn::Tensor batch = load_batch(manifest, order, first, count, side,
                                          &config.augmentation, &aug_rng, &labels);
      const nn::Tensor logits =
          model.forward(batch, /*training=*/true, /*keep_cache=*/true);
      auto ce = nn::softmax_cross_entropy(logits, labels);
      if (!std::isfinite(ce.loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_no));
      }
      loss_sum += ce.loss;
      model.graph().zero_grads();
      model.graph().backward(std::move(ce.grad_logits));
      optimizer.step(params);
    }

    const SplitEval val =
        evaluate_on_split(model, manifest, Split::Val, config.batch_size);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batch_no);
    rec.val_loss = val.loss;
    rec.val_accuracy = val.accuracy;
    log.records.push_back(rec);
    log.wall_clock_sec.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

    if (val.accuracy > best_acc) {  // strict: ties keep the earliest epoch
      best_acc = val.accuracy;
      best_epoch = epoch;
      best_snapshot = model.snapshot_params();
    }
  }

  model.restore_params(best_snapshot);
  log.best_epoch = best_epoch;
  log.best_val_accuracy = best_acc;

  TrainOutcome outcome;
  outcome.log = std::move(log);
  outcome.best.architecture = model.spec().name;
  outcome.best.num_classes = model.num_classes();
  outcome.best.input_side = side;
  outcome.best.epoch = best_epoch;
  outcome.best.val_accuracy = best_acc;
  return outcome;
}

GridReport run_grid(const ModelFactory& factory, const DatasetManifest& manifest,
                    const std::vector<TrainConfig>& grid, bool parallel_cells) {
  if (grid.empty()) throw std::invalid_argument("grid: empty configuration set");

  auto run_cell = [&](const TrainConfig& config) {
    GridCell cell;
    cell.config = config;
    try {
      ModelHandle model = factory(config);
      TrainOutcome outcome = train(model, manifest, config);
      cell.best_val_accuracy = outcome.best.val_accuracy;
      cell.best_epoch = outcome.best.epoch;
      if (!split_indices(manifest, Split::Test).empty()) {
        const SplitEval test =
            evaluate_on_split(model, manifest, Split::Test, config.batch_size);
        cell.test_report = evaluate(
            confusion_matrix(test.predictions, test.labels, model.num_classes()));
      }
    } catch (const std::exception& ex) {
      cell.failed = true;
      cell.error = ex.what();
    }
    return cell;
  };

  GridReport report;
  report.cells.resize(grid.size());
  if (parallel_cells) {
    const unsigned workers = std::max(
        1u, std::min(std::thread::hardware_concurrency(),
                     static_cast<unsigned>(grid.size())));
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t i = cursor.fetch_add(1);
          if (i >= grid.size()) return;
          report.cells[i] = run_cell(grid[i]);
        }
      });
    }
    for (auto& t : pool) t.join();
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i) report.cells[i] = run_cell(grid[i]);
  }
  std::stable_sort(report.cells.begin(), report.cells.end(),
                   [](const GridCell& a, const GridCell& b) {
                     if (a.failed != b.failed) return !a.failed;
                     return a.best_val_accuracy > b.best_val_accuracy;
                   });
  return report;
}

BestSelection select_best(const std::vector<TrainLog>& logs) {
  if (logs.empty()) throw std::invalid_argument("select_best: no logs");
  BestSelection best;
  bool have = false;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const TrainLog& log = logs[i];
    // Earliest epoch attaining this log's max accuracy.
    double acc = -1.0;
    int epoch = 0;
    for (const auto& rec : log.records) {
      if (rec.val_accuracy > acc) {
        acc = rec.val_accuracy;
        epoch = rec.epoch;
      }
    }
    auto key = [](const TrainConfig& c) {
      return std::make_tuple(c.epochs, c.batch_size, c.learning_rate);
    };
    const bool better =
        !have || acc > best.val_accuracy ||
        (acc == best.val_accuracy && key(log.config) < key(best.config));
    if (better) {
      best = {i, log.config, epoch, acc};
      have = true;
    }
  }
  return best;
}

// ---- JSON ---------------------------------------------------------------------

namespace {

nlohmann::ordered_json augmentation_to_json(const AugmentationConfig& a) {
  nlohmann::ordered_json j;
  j["rotation_degrees"] = a.rotation_degrees;
  j["hflip_probability"] = a.hflip_probability;
  j["crop_area_fraction"] = a.crop_area_fraction;
  j["brightness_delta"] = a.brightness_delta;
  j["contrast_range"] = {a.contrast_lo, a.contrast_hi};
  j["enable_rotation"] = a.enable_rotation;
  j["enable_hflip"] = a.enable_hflip;
  j["enable_crop"] = a.enable_crop;
  j["enable_brightness"] = a.enable_brightness;
  j["enable_contrast"] = a.enable_contrast;
  return j;
}

AugmentationConfig augmentation_from_json(const nlohmann::json& j) {
  AugmentationConfig a;
  if (j.contains("rotation_degrees")) a.rotation_degrees = j["rotation_degrees"].get<double>();
  if (j.contains("hflip_probability")) a.hflip_probability = j["hflip_probability"].get<double>();
  if (j.contains("crop_area_fraction")) a.crop_area_fraction = j["crop_area_fraction"].get<double>();
  if (j.contains("brightness_delta")) a.brightness_delta = j["brightness_delta"].get<double>();
  if (j.contains("contrast_range")) {
    a.contrast_lo = j["contrast_range"][0].get<double>();
    a.contrast_hi = j["contrast_range"][1].get<double>();
  }
  if (j.contains("enable_rotation")) a.enable_rotation = j["enable_rotation"].get<bool>();
  if (j.contains("enable_hflip")) a.enable_hflip = j["enable_hflip"].get<bool>();
  if (j.contains("enable_crop")) a.enable_crop = j["enable_crop"].get<bool>();
  if (j.contains("enable_brightness")) a.enable_brightness = j["enable_brightness"].get<bool>();
  if (j.contains("enable_contrast")) a.enable_contrast = j["enable_contrast"].get<bool>();
  return a;
}

nlohmann::ordered_json config_to_json_obj(const TrainConfig& config) {
  nlohmann::ordered_json j;
  j["architecture"] = config.architecture;
  j["epochs"] = config.epochs;
  j["batch_size"] = config.batch_size;
  j["learning_rate"] = config.learning_rate;
  j["seed"] = config.seed;
  j["augmentation"] = augmentation_to_json(config.augmentation);
  j["manifest_path"] = config.manifest_path;
  if (config.input_side > 0) j["input_side"] = config.input_side;
  if (config.pretrained) j["pretrained"] = true;
  return j;
}

TrainConfig config_from_json_obj(const nlohmann::json& j) {
  TrainConfig config;
  config.architecture = j.at("architecture").get<std::string>();
  if (j.contains("epochs")) config.epochs = j["epochs"].get<int>();
  if (j.contains("batch_size")) config.batch_size = j["batch_size"].get<int>();
  if (j.contains("learning_rate")) config.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("augmentation")) {
    config.augmentation = augmentation_from_json(j["augmentation"]);
  }
  if (j.contains("manifest_path")) config.manifest_path = j["manifest_path"].get<std::string>();
  if (j.contains("input_side")) config.input_side = j["input_side"].get<int>();
  if (j.contains("pretrained")) config.pretrained = j["pretrained"].get<bool>();
  return config;
}

}  // namespace

std::string train_config_to_json(const TrainConfig& config) {
  return config_to_json_obj(config).dump(2) + "\n";
}

TrainConfig train_config_from_json(const std::string& text) {
  return config_from_json_obj(nlohmann::json::parse(text));
}

std::string train_log_to_json(const TrainLog& log) {
  nlohmann::ordered_json j;
  j["config"] = config_to_json_obj(log.config);
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const auto& rec : log.records) {
    records.push_back({{"epoch", rec.epoch},
                       {"train_loss", rec.train_loss},
                       {"val_loss", rec.val_loss},
                       {"val_accuracy", rec.val_accuracy}});
  }
  j["records"] = std::move(records);
  j["wall_clock_sec"] = log.wall_clock_sec;
  j["environment"] = log.environment;
  j["best_epoch"] = log.best_epoch;
  j["best_val_accuracy"] = log.best_val_accuracy;
  return j.dump(2) + "\n";
}

std::vector<TrainConfig> grid_configs_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const TrainConfig base = config_from_json_obj(j);
  if (!j.contains("grid")) return {base};
  const auto& g = j["grid"];
  if (g.is_object() && g.empty()) {
    // Bare "grid": {} selects the stock sweep.
    std::vector<TrainConfig> cells;
    for (int e : {30, 50, 100}) {
      for (int bsz : {6, 8, 10, 12}) {
        for (double lr : {1e-3, 1e-5}) {
          TrainConfig c = base;
          c.epochs = e;
          c.batch_size = bsz;
          c.learning_rate = lr;
          cells.push_back(std::move(c));
        }
      }
    }
    return cells;
  }
  auto axis_int = [&](const char* key, int fallback) {
    std::vector<int> vals;
    if (g.contains(key)) {
      for (const auto& v : g[key]) vals.push_back(v.get<int>());
    } else {
      vals.push_back(fallback);
    }
    return vals;
  };
  std::vector<double> lrs;
  if (g.contains("learning_rate")) {
    for (const auto& v : g["learning_rate"]) lrs.push_back(v.get<double>());
  } else {
    lrs.push_back(base.learning_rate);
  }
  std::vector<TrainConfig> cells;
  for (int e : axis_int("epochs", base.epochs)) {
    for (int bsz : axis_int("batch_size", base.batch_size)) {
      for (double lr : lrs) {
        TrainConfig c = base;
        c.epochs = e;
        c.batch_size = bsz;
        c.learning_rate = lr;
        cells.push_back(std::move(c));
      }
    }
  }
  return cells;
}

std::string grid_report_to_json(const GridReport& report) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& cell : report.cells) {
    nlohmann::ordered_json row;
    row["config"] = config_to_json_obj(cell.config);
    row["status"] = cell.failed ? "failed" : "ok";
    if (cell.failed) {
      row["error"] = cell.error;
    } else {
      row["best_val_accuracy"] = cell.best_val_accuracy;
      row["best_epoch"] = cell.best_epoch;
      if (cell.test_report) {
        row["test"] = {{"accuracy", cell.test_report->accuracy},
                       {"precision", cell.test_report->precision},
                       {"recall", cell.test_report->recall},
                       {"f1", cell.test_report->f1}};
      }
    }
    rows.push_back(std::move(row));
  }
  nlohmann::ordered_json j;
  j["cells"] = std::move(rows);
  return j.dump(2) + "\n";
}

}  // namespace leafscope
