#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace leafscope {

// Rows = true class, columns = predicted class.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<long long> counts;  // row-major num_classes x num_classes

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int k)
      : num_classes(k), counts(static_cast<std::size_t>(k) * k, 0) {}

  long long& at(int true_class, int predicted) {
    return counts[static_cast<std::size_t>(true_class) * num_classes + predicted];
  }
  long long at(int true_class, int predicted) const {
    return counts[static_cast<std::size_t>(true_class) * num_classes + predicted];
  }
  long long total() const;
  long long trace() const;
  long long row_sum(int true_class) const;
  long long col_sum(int predicted) const;
};

struct PerClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long long support = 0;
};

struct EvalReport {
  double accuracy = 0.0;
  double precision = 0.0;  // weighted by class support
  double recall = 0.0;     // weighted; equals accuracy for single-label data
  double f1 = 0.0;         // weighted
  std::vector<PerClassMetrics> per_class;
  ConfusionMatrix confusion;
  // Classes whose precision or recall was undefined (empty column/row) and
  // was mapped to 0.
  std::vector<int> degenerate_classes;
};

// counts[t][p] = |{i : labels[i]=t and predictions[i]=p}|.
// Throws on length mismatch or an index outside [0, num_classes).
ConfusionMatrix confusion_matrix(const std::vector<int>& predictions,
                                 const std::vector<int>& labels, int num_classes);

// Weighted-average aggregation; zero-division maps to 0 (class recorded in
// degenerate_classes, one warning line on stderr). Throws on an all-zero
// matrix.
EvalReport evaluate(const ConfusionMatrix& cm);

// report.json body for one architecture.
std::string report_to_json(const std::string& architecture, const EvalReport& report,
                           const std::vector<std::string>& class_labels);
EvalReport report_from_json(const std::string& json_text, std::string* architecture);

// Comparison table sorted by accuracy descending (ties: architecture name
// ascending) plus one confusion-matrix heatmap PNG per architecture.
// Returns the comparison JSON text; writes comparison.json and
// confusion_<architecture>.png under out_dir.
std::string render_reports(const std::map<std::string, EvalReport>& reports,
                           const std::filesystem::path& out_dir,
                           const std::vector<std::string>& class_labels);

}  // namespace leafscope
