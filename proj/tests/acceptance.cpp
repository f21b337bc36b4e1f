// Acceptance gate: one line per criterion, nonzero exit on any failure.
// Criterion 8 (full-corpus reproduction) needs the external dataset and a
// long training budget; it runs only when LEAFSCOPE_CORPUS_DIR is set and
// prints SKIP otherwise.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "leafscope/cam.hpp"
#include "leafscope/dataset.hpp"
#include "leafscope/metrics.hpp"
#include "leafscope/tensor_bridge.hpp"
#include "leafscope/trainer.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace leafscope;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& what) {
  std::printf("%s — criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
              what.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --- 1: evaluate . confusion_matrix vs the brute-force per-pair tally --------

void criterion_1() {
  const auto t0 = Clock::now();
  Rng rng(1001);
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const int k = 2 + static_cast<int>(rng.next_below(9));       // 2..10 classes
    const int n = 1 + static_cast<int>(rng.next_below(500));     // 1..500 pairs
    std::vector<int> preds(n), labels(n);
    for (int i = 0; i < n; ++i) {
      preds[i] = static_cast<int>(rng.next_below(k));
      labels[i] = static_cast<int>(rng.next_below(k));
    }
    const EvalReport rep = evaluate(confusion_matrix(preds, labels, k));
    const auto oracle = testsup::brute_force_metrics(preds, labels, k);
    if (rep.confusion.counts != oracle.confusion) {
      ok = false;
      detail = "integer counts differ";
      break;
    }
    for (const auto& [a, b] :
         std::vector<std::pair<double, double>>{{rep.accuracy, oracle.accuracy},
                                                {rep.precision, oracle.precision},
                                                {rep.recall, oracle.recall},
                                                {rep.f1, oracle.f1}}) {
      if (std::abs(a - b) >= 1e-12) {
        ok = false;
        detail = "aggregate metric differs";
      }
    }
    for (int c = 0; c < k && ok; ++c) {
      if (std::abs(rep.per_class[c].precision - oracle.per_class_precision[c]) >= 1e-12 ||
          std::abs(rep.per_class[c].recall - oracle.per_class_recall[c]) >= 1e-12 ||
          std::abs(rep.per_class[c].f1 - oracle.per_class_f1[c]) >= 1e-12) {
        ok = false;
        detail = "per-class metric differs";
      }
    }
  }
  const double dt = seconds_since(t0);
  if (dt >= 10.0) {
    ok = false;
    detail = "runtime " + std::to_string(dt) + "s exceeds 10s";
  }
  std::ostringstream what;
  what << "metric oracle equivalence over 1000 random vectors (" << dt << "s)";
  if (!ok) what << " [" << detail << "]";
  report(1, ok, what.str());
}

// --- 2: weighted recall == accuracy -------------------------------------------

void criterion_2() {
  Rng rng(2002);
  bool ok = true;
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 2 + static_cast<int>(rng.next_below(9));
    ConfusionMatrix cm(k);
    for (auto& v : cm.counts) v = static_cast<long long>(rng.next_below(100));
    if (cm.total() == 0) cm.at(0, 0) = 1;
    const EvalReport rep = evaluate(cm);
    if (std::abs(rep.recall - rep.accuracy) >= 1e-12) ok = false;
  }
  report(2, ok, "weighted recall equals accuracy on 500 random confusion matrices");
}

// --- 3: CAM analytic fixtures + invariants -------------------------------------

ActivationBlock block2x2(double a, double b, double c, double d) {
  ActivationBlock blk(2, 2, 1);
  blk.at(0, 0, 0) = a;
  blk.at(0, 1, 0) = b;
  blk.at(1, 0, 0) = c;
  blk.at(1, 1, 0) = d;
  return blk;
}

bool close(double a, double b, double tol = 1e-6) { return std::abs(a - b) < tol; }

void criterion_3() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;

  {  // Grad-CAM uniform-gradient hand case
    const ActivationBlock acts = block2x2(1, -2, 3, 0);
    GradientBlock ones(2, 2, 1);
    for (auto& v : ones.values) v = 1.0;
    const Heatmap hm = grad_cam(acts, ones, 2, 2);
    if (!close(hm.values.at(0, 0), 1.0 / 3) || !close(hm.values.at(0, 1), 0.0) ||
        !close(hm.values.at(1, 0), 1.0) || !close(hm.values.at(1, 1), 0.0)) {
      ok = false;
      detail = "grad_cam hand case";
    }
  }
  {  // Grad-CAM++ closed-form hand case
    const ActivationBlock acts = block2x2(1, 2, 3, 4);
    GradientBlock g(2, 2, 1);
    for (auto& v : g.values) v = 0.1;
    const Heatmap hm = grad_cam_pp(acts, g, 2, 2);
    if (!close(hm.values.at(0, 0), 0.0) || !close(hm.values.at(0, 1), 1.0 / 3) ||
        !close(hm.values.at(1, 0), 2.0 / 3) || !close(hm.values.at(1, 1), 1.0)) {
      ok = false;
      detail = "grad_cam_pp hand case";
    }
  }
  {  // Layer-CAM element-wise hand case
    const ActivationBlock acts = block2x2(2, 2, 2, 2);
    GradientBlock g = block2x2(1, -1, 1, 1);
    const Heatmap hm = layer_cam(acts, g, 2, 2);
    if (!close(hm.values.at(0, 0), 1.0) || !close(hm.values.at(0, 1), 0.0) ||
        !close(hm.values.at(1, 0), 1.0) || !close(hm.values.at(1, 1), 1.0)) {
      ok = false;
      detail = "layer_cam hand case";
    }
  }
  {  // Linear-sum network: grad_cam == normalized ReLU of the channel sum
    BackboneSpec spec;
    spec.name = "ToyCNN";
    spec.input_side = 16;
    ModelHandle model = build_model(spec, 5, 303);
    Rng rng(304);
    ImageTensor image = testsup::noise_image(16, 16, rng);
    TapResult tap = model.forward_with_taps(to_tensor(image), {"features"}, 1);
    ActivationBlock acts = block_from_tensor(tap.activations.at("features"));
    GradientBlock ones(acts.h, acts.w, acts.c);
    for (auto& v : ones.values) v = 1.0;
    const Heatmap hm = grad_cam(acts, ones, acts.h, acts.w);
    PlaneF expect(acts.h, acts.w);
    for (int y = 0; y < acts.h; ++y) {
      for (int x = 0; x < acts.w; ++x) {
        double s = 0;
        for (int k = 0; k < acts.c; ++k) s += acts.at(y, x, k);
        expect.at(y, x) = s > 0 ? s : 0;
      }
    }
    const PlaneF norm = upsample_normalize(expect, acts.h, acts.w);
    for (std::size_t i = 0; i < norm.values.size(); ++i) {
      if (!close(hm.values.values[i], norm.values[i])) {
        ok = false;
        detail = "linear-sum analytic fixture";
      }
    }
  }
  {  // Score-CAM single-participating-channel fixture is exercised through the
     // toy model's weight-sum property in criterion 4; here: invariants.
    Rng rng(305);
    for (int trial = 0; trial < 100 && ok; ++trial) {
      const int h = 1 + static_cast<int>(rng.next_below(6));
      const int w = 1 + static_cast<int>(rng.next_below(6));
      const int c = 1 + static_cast<int>(rng.next_below(5));
      ActivationBlock acts(h, w, c);
      GradientBlock grads(h, w, c);
      for (auto& v : acts.values) v = rng.next_normal();
      for (auto& v : grads.values) v = rng.next_normal();
      const int oh = h + static_cast<int>(rng.next_below(16));
      const int ow = w + static_cast<int>(rng.next_below(16));
      for (const Heatmap& hm :
           {grad_cam(acts, grads, oh, ow), grad_cam_pp(acts, grads, oh, ow),
            layer_cam(acts, grads, oh, ow)}) {
        if (hm.values.height != oh || hm.values.width != ow) {
          ok = false;
          detail = "heatmap shape";
        }
        double mx = 0;
        for (double v : hm.values.values) {
          if (v < 0.0 || v > 1.0) {
            ok = false;
            detail = "heatmap range";
          }
          mx = std::max(mx, v);
        }
        if (!(mx == 0.0 || mx == 1.0)) {
          ok = false;
          detail = "max not exactly 1";
        }
      }
    }
    // Score-CAM range/shape on the toy model.
    BackboneSpec spec;
    spec.name = "ToyCNN";
    spec.input_side = 16;
    ModelHandle model = build_model(spec, 5, 306);
    for (int trial = 0; trial < 10 && ok; ++trial) {
      ImageTensor image = testsup::noise_image(16, 16, rng);
      const Heatmap hm = score_cam(model, image, "features", trial % 5);
      if (hm.values.height != 16 || hm.values.width != 16) ok = false;
      double mx = 0;
      for (double v : hm.values.values) {
        if (v < 0.0 || v > 1.0) ok = false;
        mx = std::max(mx, v);
      }
      if (!(mx == 0.0 || mx == 1.0)) ok = false;
      if (!ok) detail = "score_cam invariants";
    }
  }

  const double dt = seconds_since(t0);
  if (dt >= 30.0) {
    ok = false;
    detail = "runtime exceeds 30s";
  }
  std::ostringstream what;
  what << "CAM analytic fixtures and invariants (" << dt << "s)";
  if (!ok) what << " [" << detail << "]";
  report(3, ok, what.str());
}

// --- 4: Score-CAM gradient freedom ----------------------------------------------

void criterion_4() {
  BackboneSpec spec;
  spec.name = "ToyCNN";
  spec.input_side = 16;
  ModelHandle model = build_model(spec, 5, 404);
  Rng rng(405);
  const ImageTensor image = testsup::noise_image(16, 16, rng);

  model.reset_counters();
  ScoreCamStats stats;
  score_cam(model, image, "features", 0, &stats);
  const bool ok = model.backward_passes() == 0 &&
                  model.forward_passes() == 1 + stats.participating_channels;
  std::ostringstream what;
  what << "score_cam ran " << model.forward_passes() << " forward passes for "
       << stats.participating_channels << " participating channels and "
       << model.backward_passes() << " backward passes";
  report(4, ok, what.str());
}

// --- 5: tapped gradients vs central finite differences ---------------------------

void criterion_5() {
  BackboneSpec spec;
  spec.name = "ToyCNN";
  spec.input_side = 16;
  ModelHandle model = build_model(spec, 5, 505);
  Rng rng(506);
  nn::Tensor batch(1, 16, 16, 3);
  for (auto& v : batch.data) v = rng.next_double();

  const int class_index = 3;
  TapResult tap = model.forward_with_taps(batch, {"conv1"}, class_index);
  const int node = model.graph().require_node("conv1");
  const nn::Tensor base = model.graph().node_output(node);
  const auto& analytic = tap.gradients.at("conv1");

  const double eps = 1e-3;
  double max_rel = 0.0;
  for (int probe = 0; probe < 10; ++probe) {
    // Differentiable points only: clipped ReLU entries sit on maxpool ties.
    std::size_t i = rng.next_below(base.size());
    while (base.data[i] <= 1e-2) i = rng.next_below(base.size());
    nn::Tensor pert = base;
    pert.data[i] = base.data[i] + eps;
    model.graph().forward_from(node, pert);
    const double up = model.graph().output().at(0, 0, 0, class_index);
    pert.data[i] = base.data[i] - eps;
    model.graph().forward_from(node, pert);
    const double down = model.graph().output().at(0, 0, 0, class_index);
    const double numeric = (up - down) / (2 * eps);
    const double denom = std::max({std::abs(numeric), std::abs(analytic.data[i]), 1e-8});
    max_rel = std::max(max_rel, std::abs(numeric - analytic.data[i]) / denom);
  }
  std::ostringstream what;
  what << "finite-difference gradient check, max relative error " << max_rel;
  report(5, max_rel < 1e-3, what.str());
}

// --- 6: determinism of split + training -----------------------------------------

void criterion_6() {
  bool ok = true;
  std::string detail;
  const fs::path corpus = LEAFSCOPE_FIXTURE_CORPUS;

  const DatasetManifest a = stratified_split(ingest_directory(corpus), {0.6, 0.2, 0.2}, 11);
  const DatasetManifest b = stratified_split(ingest_directory(corpus), {0.6, 0.2, 0.2}, 11);
  if (manifest_to_json(a) != manifest_to_json(b)) {
    ok = false;
    detail = "manifest bytes differ";
  }

  TrainConfig config;
  config.architecture = "ToyCNN";
  config.input_side = 32;
  config.epochs = 2;
  config.batch_size = 4;
  config.learning_rate = 0.002;
  config.seed = 12;
  auto make_model = [&]() {
    BackboneSpec spec;
    spec.name = config.architecture;
    spec.input_side = config.input_side;
    return build_model(spec, kNumClasses, config.seed);
  };
  ModelHandle m1 = make_model();
  ModelHandle m2 = make_model();
  const TrainOutcome r1 = train(m1, a, config);
  const TrainOutcome r2 = train(m2, a, config);
  if (r1.log.records.size() != r2.log.records.size()) {
    ok = false;
    detail = "record counts differ";
  } else {
    for (std::size_t i = 0; i < r1.log.records.size(); ++i) {
      if (r1.log.records[i].train_loss != r2.log.records[i].train_loss ||
          r1.log.records[i].val_loss != r2.log.records[i].val_loss ||
          r1.log.records[i].val_accuracy != r2.log.records[i].val_accuracy) {
        ok = false;
        detail = "epoch records differ";
      }
    }
  }
  std::ostringstream what;
  what << "byte-identical manifests and identical TrainLog records across two runs";
  if (!ok) what << " [" << detail << "]";
  report(6, ok, what.str());
}

// --- 7: end-to-end CLI smoke ------------------------------------------------------

int run_cmd(const std::string& cmd) { return std::system(cmd.c_str()); }

void criterion_7() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;

  testsup::TempDir tmp("acceptance_e2e");
  const std::string bin = LEAFSCOPE_BIN;
  const std::string corpus = LEAFSCOPE_FIXTURE_CORPUS;
  const std::string cd = "cd '" + tmp.path().string() + "' && ";
  const std::string quiet = " > /dev/null 2>&1";

  if (run_cmd(cd + "'" + bin + "' ingest '" + corpus + "' -o manifest.json" + quiet)) {
    ok = false;
    detail = "ingest failed";
  }
  if (ok && run_cmd(cd + "'" + bin + "' split manifest.json --seed 7 --ratios 0.6,0.2,0.2" + quiet)) {
    ok = false;
    detail = "split failed";
  }
  if (ok) {
    std::ofstream cfg(tmp.path() / "config.json");
    cfg << R"({"architecture": "ToyCNN", "epochs": 2, "batch_size": 4,
               "learning_rate": 0.002, "seed": 7, "manifest_path": "manifest.json"})";
  }
  if (ok && run_cmd(cd + "'" + bin + "' train -c config.json -o run" + quiet)) {
    ok = false;
    detail = "train failed";
  }
  for (const char* f : {"run/config.json", "run/log.json", "run/best.ckpt",
                        "run/best.meta.json"}) {
    if (ok && !fs::exists(tmp.path() / f)) {
      ok = false;
      detail = std::string("missing artifact ") + f;
    }
  }
  if (ok) {  // final train loss < initial train loss
    std::ifstream in(tmp.path() / "run" / "log.json");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto log = nlohmann::json::parse(ss.str());
    const auto& recs = log.at("records");
    const double first = recs.front().at("train_loss").get<double>();
    const double last = recs.back().at("train_loss").get<double>();
    if (!(last < first)) {
      ok = false;
      detail = "train loss did not decrease (" + std::to_string(first) + " -> " +
               std::to_string(last) + ")";
    }
  }
  if (ok && run_cmd(cd + "'" + bin +
                    "' evaluate --checkpoint run/best.ckpt --manifest manifest.json "
                    "--split test -o run/report.json" + quiet)) {
    ok = false;
    detail = "evaluate failed";
  }
  if (ok && run_cmd(cd + "'" + bin + "' explain --checkpoint run/best.ckpt --image '" +
                    corpus + "/downy_mildew/leaf_01.png' -o run/explain" + quiet)) {
    ok = false;
    detail = "explain failed";
  }
  for (const char* f :
       {"run/report.json", "run/explain/prediction.json", "run/explain/heatmap_gradcam.png",
        "run/explain/heatmap_gradcampp.png", "run/explain/heatmap_scorecam.png",
        "run/explain/heatmap_layercam.png", "run/explain/overlay_gradcam.png"}) {
    if (ok && !fs::exists(tmp.path() / f)) {
      ok = false;
      detail = std::string("missing artifact ") + f;
    }
  }
  if (ok && run_cmd(cd + "'" + bin + "' compare run -o cmp" + quiet)) {
    ok = false;
    detail = "compare failed";
  }
  if (ok && !fs::exists(tmp.path() / "cmp" / "comparison.json")) {
    ok = false;
    detail = "missing comparison.json";
  }

  const double dt = seconds_since(t0);
  if (dt >= 300.0) {
    ok = false;
    detail = "runtime exceeds 5 minutes";
  }
  std::ostringstream what;
  what << "end-to-end CLI pipeline on the 25-image fixture (" << dt << "s)";
  if (!ok) what << " [" << detail << "]";
  report(7, ok, what.str());
}

// --- 8: conditional paper reproduction --------------------------------------------

void criterion_8() {
  const char* corpus = std::getenv("LEAFSCOPE_CORPUS_DIR");
  if (!corpus || !*corpus) {
    std::printf(
        "SKIP — criterion 8: paper reproduction needs LEAFSCOPE_CORPUS_DIR "
        "(Mendeley pumpkin corpus), pretrained weights in LEAFSCOPE_WEIGHTS_DIR, "
        "and a 1-3 h accelerator budget; criteria 1-7 are the unconditional gate\n");
    return;
  }
  bool ok = true;
  std::string detail;
  try {
    const DatasetManifest manifest =
        stratified_split(ingest_directory(corpus), {0.8, 0.1, 0.1}, 42);
    TrainConfig config;
    config.architecture = "ResNet50";
    config.epochs = 50;
    config.batch_size = 10;
    config.learning_rate = 1e-5;
    config.seed = 42;
    config.pretrained = true;
    BackboneSpec spec;
    spec.name = config.architecture;
    spec.pretrained = true;
    ModelHandle model = build_model(spec, kNumClasses, config.seed);
    train(model, manifest, config);
    const SplitEval test = evaluate_on_split(model, manifest, Split::Test, 10);
    std::ostringstream what;
    what << "ResNet50 (50 epochs, batch 10, lr 1e-5) test accuracy " << test.accuracy
         << " against the 0.905 target, floor 0.85";
    report(8, test.accuracy >= 0.85, what.str());
    return;
  } catch (const std::exception& ex) {
    ok = false;
    detail = ex.what();
  }
  report(8, ok, "paper reproduction [" + detail + "]");
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  if (failures) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all unconditional acceptance criteria passed\n");
  return 0;
}
