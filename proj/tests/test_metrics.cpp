#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "leafscope/metrics.hpp"
#include "leafscope/rng.hpp"
#include "test_support.hpp"

using namespace leafscope;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("perfect classifier gives a diagonal matrix") {
  std::vector<int> labels, preds;
  for (int i = 0; i < 20; ++i) {
    labels.push_back(i % 5);
    preds.push_back(i % 5);
  }
  const ConfusionMatrix cm = confusion_matrix(preds, labels, 5);
  CHECK(cm.trace() == 20);
  CHECK(cm.total() == 20);
  const EvalReport rep = evaluate(cm);
  CHECK(rep.accuracy == doctest::Approx(1.0));
  CHECK(rep.precision == doctest::Approx(1.0));
  CHECK(rep.recall == doctest::Approx(1.0));
  CHECK(rep.f1 == doctest::Approx(1.0));
}

TEST_CASE("two-class counting example") {
  // labels: ten 0s then ten 1s; 8 correct 0s, 9 correct 1s.
  std::vector<int> labels, preds;
  for (int i = 0; i < 10; ++i) {
    labels.push_back(0);
    preds.push_back(i < 8 ? 0 : 1);
  }
  for (int i = 0; i < 10; ++i) {
    labels.push_back(1);
    preds.push_back(i < 9 ? 1 : 0);
  }
  const ConfusionMatrix cm = confusion_matrix(preds, labels, 2);
  CHECK(cm.at(0, 0) == 8);
  CHECK(cm.at(0, 1) == 2);
  CHECK(cm.at(1, 0) == 1);
  CHECK(cm.at(1, 1) == 9);

  const EvalReport rep = evaluate(cm);
  CHECK(rep.accuracy == doctest::Approx(0.85).epsilon(1e-12));
  // Hand computation: precision = (8/9 + 9/11) / 2, f1 from per-class
  // harmonic means weighted 0.5/0.5.
  CHECK(rep.precision == doctest::Approx((8.0 / 9.0 + 9.0 / 11.0) / 2.0).epsilon(1e-12));
  const double f1_0 = 2.0 * (8.0 / 9.0) * 0.8 / (8.0 / 9.0 + 0.8);
  const double f1_1 = 2.0 * (9.0 / 11.0) * 0.9 / (9.0 / 11.0 + 0.9);
  CHECK(rep.f1 == doctest::Approx((f1_0 + f1_1) / 2.0).epsilon(1e-12));
  // Spec-stated approximations hold too.
  CHECK(rep.precision == doctest::Approx(0.8535).epsilon(1e-3));
  CHECK(rep.f1 == doctest::Approx(0.8496).epsilon(1e-3));
}

TEST_CASE("errors: length mismatch, out-of-range index, all-zero matrix") {
  CHECK_THROWS(confusion_matrix({0, 1}, {0}, 2));
  CHECK_THROWS(confusion_matrix({0, 5}, {0, 1}, 5));
  CHECK_THROWS(confusion_matrix({}, {}, 3));
  CHECK_THROWS(evaluate(ConfusionMatrix(4)));
}

TEST_CASE("zero-division policy: empty column and row map to 0") {
  // Class 2 never predicted and never true.
  ConfusionMatrix cm(3);
  cm.at(0, 0) = 5;
  cm.at(1, 0) = 2;
  cm.at(1, 1) = 3;
  const EvalReport rep = evaluate(cm);
  CHECK(rep.per_class[2].precision == 0.0);
  CHECK(rep.per_class[2].recall == 0.0);
  CHECK(rep.per_class[2].f1 == 0.0);
  CHECK(rep.degenerate_classes == std::vector<int>{2});
  CHECK(rep.accuracy == doctest::Approx(0.8));
}

TEST_CASE("oracle equivalence on random vectors") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.next_below(9));
    const int n = 1 + static_cast<int>(rng.next_below(300));
    std::vector<int> preds(n), labels(n);
    for (int i = 0; i < n; ++i) {
      preds[i] = static_cast<int>(rng.next_below(k));
      labels[i] = static_cast<int>(rng.next_below(k));
    }
    const EvalReport rep = evaluate(confusion_matrix(preds, labels, k));
    const auto oracle = testsup::brute_force_metrics(preds, labels, k);
    CHECK(rep.confusion.counts == oracle.confusion);
    CHECK(std::abs(rep.accuracy - oracle.accuracy) < 1e-12);
    CHECK(std::abs(rep.precision - oracle.precision) < 1e-12);
    CHECK(std::abs(rep.recall - oracle.recall) < 1e-12);
    CHECK(std::abs(rep.f1 - oracle.f1) < 1e-12);
    for (int c = 0; c < k; ++c) {
      CHECK(std::abs(rep.per_class[c].precision - oracle.per_class_precision[c]) < 1e-12);
      CHECK(std::abs(rep.per_class[c].recall - oracle.per_class_recall[c]) < 1e-12);
      CHECK(std::abs(rep.per_class[c].f1 - oracle.per_class_f1[c]) < 1e-12);
      CHECK(rep.per_class[c].support == oracle.support[c]);
    }
  }
}

TEST_CASE("weighted recall equals accuracy on random confusion matrices") {
  Rng rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 2 + static_cast<int>(rng.next_below(9));
    ConfusionMatrix cm(k);
    for (auto& v : cm.counts) v = static_cast<long long>(rng.next_below(50));
    if (cm.total() == 0) cm.at(0, 0) = 1;
    const EvalReport rep = evaluate(cm);
    CHECK(std::abs(rep.recall - rep.accuracy) < 1e-12);
  }
}

TEST_CASE("permutation invariance of the report") {
  Rng rng(5);
  const int n = 200;
  std::vector<int> preds(n), labels(n);
  for (int i = 0; i < n; ++i) {
    preds[i] = static_cast<int>(rng.next_below(5));
    labels[i] = static_cast<int>(rng.next_below(5));
  }
  const EvalReport a = evaluate(confusion_matrix(preds, labels, 5));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> preds2(n), labels2(n);
  for (int i = 0; i < n; ++i) {
    preds2[i] = preds[order[i]];
    labels2[i] = labels[order[i]];
  }
  const EvalReport b = evaluate(confusion_matrix(preds2, labels2, 5));
  CHECK(a.confusion.counts == b.confusion.counts);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.precision == b.precision);
  CHECK(a.f1 == b.f1);
}

TEST_CASE("metric bounds") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.next_below(6));
    ConfusionMatrix cm(k);
    for (auto& v : cm.counts) v = static_cast<long long>(rng.next_below(20));
    if (cm.total() == 0) cm.at(0, 0) = 1;
    const EvalReport rep = evaluate(cm);
    for (double v : {rep.accuracy, rep.precision, rep.recall, rep.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("render_reports orders by accuracy and writes artifacts") {
  testsup::TempDir tmp("render");
  const auto reports = testsup::paper_style_reports();
  const std::string json = render_reports(reports, tmp.path(), {"BacterialLeafSpot", "DownyMildew", "HealthyLeaf", "MosaicDisease", "PowderyMildew"});

  // Expected accuracy ordering of the seven architectures.
  const std::vector<std::string> expected = {
      "ResNet50",    "Xception",    "ResNet101",         "DenseNet169",
      "DenseNet201", "DenseNet121", "InceptionResNetV2"};
  std::size_t pos = 0;
  for (const auto& name : expected) {
    const auto at = json.find("\"" + name + "\"");
    REQUIRE(at != std::string::npos);
    CHECK(at >= pos);
    pos = at;
  }
  CHECK(std::filesystem::exists(tmp.path() / "comparison.json"));
  for (const auto& name : expected) {
    const auto png = tmp.path() / ("confusion_" + name + ".png");
    CHECK(std::filesystem::exists(png));
    CHECK(std::filesystem::file_size(png) > 0);
  }
}

TEST_CASE("render_reports single report and alphabetical tie-break") {
  testsup::TempDir tmp("render2");
  ConfusionMatrix cm(2);
  cm.at(0, 0) = cm.at(1, 1) = 5;
  std::map<std::string, EvalReport> reports;
  reports.emplace("Beta", evaluate(cm));
  const std::string single = render_reports(reports, tmp.path(), {"a", "b"});
  CHECK(single.find("Beta") != std::string::npos);

  reports.emplace("Alpha", evaluate(cm));  // same accuracy: tie
  const std::string both = render_reports(reports, tmp.path(), {"a", "b"});
  CHECK(both.find("Alpha") < both.find("Beta"));
}

TEST_CASE("report json round trip") {
  std::vector<int> preds = {0, 1, 2, 2, 1};
  std::vector<int> labels = {0, 1, 2, 1, 1};
  const EvalReport rep = evaluate(confusion_matrix(preds, labels, 3));
  const std::string text = report_to_json("ToyCNN", rep, {"a", "b", "c"});
  std::string arch;
  const EvalReport back = report_from_json(text, &arch);
  CHECK(arch == "ToyCNN");
  CHECK(back.confusion.counts == rep.confusion.counts);
  CHECK(back.accuracy == doctest::Approx(rep.accuracy).epsilon(1e-12));
  CHECK(back.f1 == doctest::Approx(rep.f1).epsilon(1e-12));
}

TEST_SUITE_END();
