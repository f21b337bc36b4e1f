#include "leafscope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "leafscope/imageio.hpp"
#include "font5x7.hpp"

namespace leafscope {

long long ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0ll);
}

long long ConfusionMatrix::trace() const {
  long long t = 0;
  for (int i = 0; i < num_classes; ++i) t += at(i, i);
  return t;
}

long long ConfusionMatrix::row_sum(int true_class) const {
  long long s = 0;
  for (int p = 0; p < num_classes; ++p) s += at(true_class, p);
  return s;
}

long long ConfusionMatrix::col_sum(int predicted) const {
  long long s = 0;
  for (int t = 0; t < num_classes; ++t) s += at(t, predicted);
  return s;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& predictions,
                                 const std::vector<int>& labels, int num_classes) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("confusion_matrix: prediction/label length mismatch");
  }
  if (predictions.empty()) {
    throw std::invalid_argument("confusion_matrix: empty input");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i];
    const int p = predictions[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      throw std::out_of_range("confusion_matrix: class index out of range at sample " +
                              std::to_string(i));
    }
    ++cm.at(t, p);
  }
  return cm;
}

EvalReport evaluate(const ConfusionMatrix& cm) {
  const long long total = cm.total();
  if (total <= 0) throw std::invalid_argument("evaluate: all-zero confusion matrix");

  EvalReport report;
  report.confusion = cm;
  report.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  report.per_class.resize(static_cast<std::size_t>(cm.num_classes));

  for (int c = 0; c < cm.num_classes; ++c) {
    auto& pc = report.per_class[static_cast<std::size_t>(c)];
    const long long tp = cm.at(c, c);
    const long long col = cm.col_sum(c);
    const long long row = cm.row_sum(c);
    pc.support = row;
    bool degenerate = false;
    if (col > 0) {
      pc.precision = static_cast<double>(tp) / static_cast<double>(col);
    } else {
      pc.precision = 0.0;
      degenerate = true;
    }
    if (row > 0) {
      pc.recall = static_cast<double>(tp) / static_cast<double>(row);
    } else {
      pc.recall = 0.0;
      degenerate = true;
    }
    const double pr = pc.precision + pc.recall;
    pc.f1 = pr > 0.0 ? 2.0 * pc.precision * pc.recall / pr : 0.0;
    if (degenerate) report.degenerate_classes.push_back(c);

    const double weight = static_cast<double>(row) / static_cast<double>(total);
    report.precision += weight * pc.precision;
    report.recall += weight * pc.recall;
    report.f1 += weight * pc.f1;
  }
  if (!report.degenerate_classes.empty()) {
    std::cerr << "[leafscope] warning: " << report.degenerate_classes.size()
              << " class(es) with empty row/column; precision/recall set to 0\n";
  }
  return report;
}

namespace {

nlohmann::ordered_json report_json_body(const std::string& architecture,
                                        const EvalReport& report,
                                        const std::vector<std::string>& class_labels) {
  nlohmann::ordered_json j;
  j["architecture"] = architecture;
  j["accuracy"] = report.accuracy;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["f1"] = report.f1;
  nlohmann::ordered_json per_class;
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const std::string key =
        c < class_labels.size() ? class_labels[c] : "class_" + std::to_string(c);
    const auto& pc = report.per_class[c];
    per_class[key] = {{"precision", pc.precision},
                      {"recall", pc.recall},
                      {"f1", pc.f1},
                      {"support", pc.support}};
  }
  j["per_class"] = std::move(per_class);
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int t = 0; t < report.confusion.num_classes; ++t) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int p = 0; p < report.confusion.num_classes; ++p) {
      row.push_back(report.confusion.at(t, p));
    }
    rows.push_back(std::move(row));
  }
  j["confusion"] = std::move(rows);
  return j;
}

// Cell fill: white -> saturated blue by count / row-max; correct diagonal in
// green tint so the dominant diagonal of a good classifier reads at a glance.
void render_confusion_png(const std::string& architecture, const EvalReport& report,
                          const std::vector<std::string>& class_labels,
                          const std::filesystem::path& out_path) {
  const int k = report.confusion.num_classes;
  const int cell = 64;
  const int margin_left = 120;
  const int margin_top = 40;
  const int margin_bottom = 80;
  const int width = margin_left + k * cell + 16;
  const int height = margin_top + k * cell + margin_bottom;

  ImageTensor img(height, width);
  std::fill(img.values.begin(), img.values.end(), 1.0);

  long long max_count = 1;
  for (long long v : report.confusion.counts) max_count = std::max(max_count, v);

  for (int t = 0; t < k; ++t) {
    for (int p = 0; p < k; ++p) {
      const double frac = static_cast<double>(report.confusion.at(t, p)) /
                          static_cast<double>(max_count);
      const double r = 1.0 - 0.85 * frac;
      const double g = t == p ? 1.0 - 0.35 * frac : 1.0 - 0.85 * frac;
      const double b = 1.0;
      const int y0 = margin_top + t * cell;
      const int x0 = margin_left + p * cell;
      for (int y = y0; y < y0 + cell; ++y) {
        for (int x = x0; x < x0 + cell; ++x) {
          const bool border = y == y0 || y == y0 + cell - 1 || x == x0 || x == x0 + cell - 1;
          img.at(y, x, 0) = border ? 0.4 : r;
          img.at(y, x, 1) = border ? 0.4 : g;
          img.at(y, x, 2) = border ? 0.4 : b;
        }
      }
      const std::string count = std::to_string(report.confusion.at(t, p));
      const int tw = font::text_width(count, 1);
      font::draw_text(img, y0 + cell / 2 - 3, x0 + cell / 2 - tw / 2, count, 1, 0.1,
                      0.1, 0.1);
    }
  }

  font::draw_text(img, 12, margin_left, architecture + " (rows=true, cols=predicted)",
                  1, 0.0, 0.0, 0.0);
  for (int c = 0; c < k; ++c) {
    const std::string label =
        c < static_cast<int>(class_labels.size()) ? class_labels[c] : std::to_string(c);
    // Row labels, right-aligned to the matrix; column labels below, vertical
    // space is tight so they go one character line per class row offset.
    font::draw_text(img, margin_top + c * cell + cell / 2 - 3, 4, label, 1, 0.0, 0.0,
                    0.0);
    font::draw_text(img, margin_top + k * cell + 8 + 10 * c, margin_left, label + " = col " + std::to_string(c),
                    1, 0.0, 0.0, 0.0);
  }

  save_png_rgb(out_path, img);
}

}  // namespace

std::string report_to_json(const std::string& architecture, const EvalReport& report,
                           const std::vector<std::string>& class_labels) {
  return report_json_body(architecture, report, class_labels).dump(2) + "\n";
}

EvalReport report_from_json(const std::string& json_text, std::string* architecture) {
  const auto j = nlohmann::json::parse(json_text);
  if (architecture) *architecture = j.at("architecture").get<std::string>();
  const auto& rows = j.at("confusion");
  const int k = static_cast<int>(rows.size());
  ConfusionMatrix cm(k);
  for (int t = 0; t < k; ++t) {
    const auto& row = rows[static_cast<std::size_t>(t)];
    if (static_cast<int>(row.size()) != k) {
      throw std::runtime_error("report: confusion matrix is not square");
    }
    for (int p = 0; p < k; ++p) cm.at(t, p) = row[static_cast<std::size_t>(p)].get<long long>();
  }
  EvalReport report = evaluate(cm);
  // Stored aggregates win over recomputation only if present; they normally
  // coincide bit-for-bit.
  if (j.contains("accuracy")) report.accuracy = j["accuracy"].get<double>();
  if (j.contains("precision")) report.precision = j["precision"].get<double>();
  if (j.contains("recall")) report.recall = j["recall"].get<double>();
  if (j.contains("f1")) report.f1 = j["f1"].get<double>();
  return report;
}

std::string render_reports(const std::map<std::string, EvalReport>& reports,
                           const std::filesystem::path& out_dir,
                           const std::vector<std::string>& class_labels) {
  if (reports.empty()) throw std::invalid_argument("render_reports: no reports");
  std::filesystem::create_directories(out_dir);

  std::vector<std::pair<std::string, const EvalReport*>> order;
  order.reserve(reports.size());
  for (const auto& [name, rep] : reports) order.emplace_back(name, &rep);
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second->accuracy != b.second->accuracy)
      return a.second->accuracy > b.second->accuracy;
    return a.first < b.first;
  });

  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  for (const auto& [name, rep] : order) {
    table.push_back({{"architecture", name},
                     {"accuracy", rep->accuracy},
                     {"precision", rep->precision},
                     {"recall", rep->recall},
                     {"f1", rep->f1}});
    render_confusion_png(name, *rep, class_labels,
                         out_dir / ("confusion_" + name + ".png"));
  }
  nlohmann::ordered_json j;
  j["ranking"] = std::move(table);
  const std::string text = j.dump(2) + "\n";
  std::ofstream out(out_dir / "comparison.json", std::ios::binary);
  if (!out) {
    throw std::runtime_error("render_reports: cannot write comparison.json under " +
                             out_dir.string());
  }
  out << text;
  return text;
}

}  // namespace leafscope
