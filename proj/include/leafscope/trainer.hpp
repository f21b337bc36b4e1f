#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "leafscope/backbones.hpp"
#include "leafscope/dataset.hpp"
#include "leafscope/metrics.hpp"
#include "leafscope/preprocess.hpp"

namespace leafscope {

struct TrainConfig {
  std::string architecture = "ToyCNN";
  int epochs = 50;
  int batch_size = 10;
  double learning_rate = 1e-5;
  std::uint64_t seed = 0;
  AugmentationConfig augmentation;
  int input_side = 0;  // 0 = architecture default
  bool pretrained = false;
  std::string manifest_path;  // echoed from experiment configs

  void validate() const;  // epochs >= 1, batch_size >= 1, lr > 0
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainLog {
  TrainConfig config;
  std::vector<EpochRecord> records;
  std::vector<double> wall_clock_sec;  // per epoch, parallel to records
  std::map<std::string, std::string> environment;
  int best_epoch = 0;  // earliest epoch attaining the max val_accuracy
  double best_val_accuracy = 0.0;
};

struct TrainOutcome {
  TrainLog log;
  CheckpointMeta best;  // the model is left holding these parameters
};

// Epochs x batches of Adam over the train split with seeded shuffling and
// augmentation; deterministic resize-only evaluation on the val split after
// every epoch. Throws on empty train/val splits, unassigned entries, or a
// non-finite loss (diagnostic names the epoch and batch). On return the
// model holds the parameters of the best epoch.
TrainOutcome train(ModelHandle& model, const DatasetManifest& manifest,
                   const TrainConfig& config);

struct SplitEval {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predictions;
  std::vector<int> labels;
};

// Deterministic eval-mode pass over one split (resize + normalize only).
SplitEval evaluate_on_split(ModelHandle& model, const DatasetManifest& manifest,
                            Split split, int batch_size);

struct GridCell {
  TrainConfig config;
  bool failed = false;
  std::string error;
  double best_val_accuracy = 0.0;
  int best_epoch = 0;
  std::optional<EvalReport> test_report;  // absent when the test split is empty
};

struct GridReport {
  std::vector<GridCell> cells;  // sorted by val_accuracy descending
};

using ModelFactory = std::function<ModelHandle(const TrainConfig&)>;

// Sweep over the grid; a failed cell is recorded and the sweep continues.
// Sequential by default. parallel_cells runs cells on a small thread pool;
// each cell still owns its model and generators, so per-cell results are
// unchanged — only wall-clock interleaving differs.
GridReport run_grid(const ModelFactory& factory, const DatasetManifest& manifest,
                    const std::vector<TrainConfig>& grid,
                    bool parallel_cells = false);

struct BestSelection {
  std::size_t log_index = 0;
  TrainConfig config;
  int epoch = 0;
  double val_accuracy = 0.0;
};

// Argmax of val_accuracy across logs; ties broken by (fewer epochs, smaller
// batch, smaller lr), then input order.
BestSelection select_best(const std::vector<TrainLog>& logs);

// Experiment config file: {architecture, epochs, batch_size, learning_rate,
// seed, augmentation{...}, manifest_path}.
std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

std::string train_log_to_json(const TrainLog& log);

// Grid file: shared base config plus {"grid": {epochs: [...], batch_size:
// [...], learning_rate: [...]}} expanded as a cartesian product.
std::vector<TrainConfig> grid_configs_from_json(const std::string& text);
std::string grid_report_to_json(const GridReport& report);

std::map<std::string, std::string> environment_fingerprint();

}  // namespace leafscope
