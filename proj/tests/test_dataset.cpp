#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "leafscope/dataset.hpp"
#include "test_support.hpp"

using namespace leafscope;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("dataset");

TEST_CASE("class schema: five labels in alphabetical index order") {
  CHECK(class_names()[0] == "BacterialLeafSpot");
  CHECK(class_names()[4] == "PowderyMildew");
  CHECK(static_cast<int>(ClassLabel::HealthyLeaf) == 2);
  CHECK(class_from_string("downy_mildew") == ClassLabel::DownyMildew);
  CHECK(class_from_string("Downy Mildew") == ClassLabel::DownyMildew);
  CHECK(class_from_string("DOWNYMILDEW") == ClassLabel::DownyMildew);
  CHECK(!class_from_string("rust_disease").has_value());
}

TEST_CASE("ingest: minimal corpus, one image per label") {
  testsup::TempDir tmp("ingest_min");
  testsup::write_corpus(tmp.path(), 1);
  const DatasetManifest m = ingest_directory(tmp.path());
  REQUIRE(m.entries.size() == 5);
  for (int c = 0; c < 5; ++c) {
    CHECK(m.entries[c].label == static_cast<ClassLabel>(c));
    CHECK(m.entries[c].split == Split::Unassigned);
    CHECK(m.entries[c].sha256.size() == 64);
  }
}

TEST_CASE("ingest: full-size corpus shape (2000 images, 400 per class)") {
  testsup::TempDir tmp("ingest_full");
  testsup::write_corpus(tmp.path(), 400, 4);
  const DatasetManifest m = ingest_directory(tmp.path());
  CHECK(m.entries.size() == 2000);
  for (int c = 0; c < 5; ++c) {
    CHECK(m.count_class(static_cast<ClassLabel>(c)) == 400);
  }
}

TEST_CASE("ingest errors: unknown directory, empty class, missing class") {
  testsup::TempDir tmp("ingest_err");
  testsup::write_corpus(tmp.path(), 1);

  SUBCASE("unknown subdirectory names the offender") {
    fs::create_directories(tmp.path() / "rust_disease");
    CHECK_THROWS_WITH_AS(ingest_directory(tmp.path()),
                         doctest::Contains("rust_disease"), std::runtime_error);
  }
  SUBCASE("empty class directory") {
    fs::remove(tmp.path() / "healthy_leaf" / "img_0000.png");
    CHECK_THROWS_WITH_AS(ingest_directory(tmp.path()),
                         doctest::Contains("empty class directory"), std::runtime_error);
  }
  SUBCASE("missing class directory") {
    fs::remove_all(tmp.path() / "healthy_leaf");
    CHECK_THROWS_WITH_AS(ingest_directory(tmp.path()),
                         doctest::Contains("HealthyLeaf"), std::runtime_error);
  }
}

TEST_CASE("ingest skips non-image files and is repeatable") {
  testsup::TempDir tmp("ingest_skip");
  testsup::write_corpus(tmp.path(), 2);
  std::ofstream(tmp.path() / "healthy_leaf" / "notes.txt") << "not an image";
  const DatasetManifest a = ingest_directory(tmp.path());
  CHECK(a.entries.size() == 10);
  const DatasetManifest b = ingest_directory(tmp.path());
  CHECK(manifest_to_json(a) == manifest_to_json(b));
}

TEST_CASE("split: 400 per class at 0.8/0.1/0.1 gives 320/40/40 per class") {
  testsup::TempDir tmp("split400");
  testsup::write_corpus(tmp.path(), 400, 4);
  const DatasetManifest m = stratified_split(ingest_directory(tmp.path()),
                                             {0.8, 0.1, 0.1}, 42);
  CHECK(m.count_split(Split::Train) == 1600);
  CHECK(m.count_split(Split::Val) == 200);
  CHECK(m.count_split(Split::Test) == 200);
  for (int c = 0; c < 5; ++c) {
    int train = 0, val = 0, test = 0;
    for (const auto& e : m.entries) {
      if (e.label != static_cast<ClassLabel>(c)) continue;
      if (e.split == Split::Train) ++train;
      if (e.split == Split::Val) ++val;
      if (e.split == Split::Test) ++test;
    }
    CHECK(train == 320);
    CHECK(val == 40);
    CHECK(test == 40);
  }
}

TEST_CASE("split: 10 per class rounds to 8/1/1") {
  testsup::TempDir tmp("split10");
  testsup::write_corpus(tmp.path(), 10);
  const DatasetManifest m =
      stratified_split(ingest_directory(tmp.path()), {0.8, 0.1, 0.1}, 1);
  CHECK(m.count_split(Split::Train) == 40);
  CHECK(m.count_split(Split::Val) == 5);
  CHECK(m.count_split(Split::Test) == 5);
}

TEST_CASE("split: different seeds change membership, not sizes") {
  testsup::TempDir tmp("split_seed");
  testsup::write_corpus(tmp.path(), 20);
  const DatasetManifest base = ingest_directory(tmp.path());
  const DatasetManifest a = stratified_split(base, {0.8, 0.1, 0.1}, 7);
  const DatasetManifest b = stratified_split(base, {0.8, 0.1, 0.1}, 8);

  auto members = [](const DatasetManifest& m, Split s) {
    std::set<std::string> out;
    for (const auto& e : m.entries) {
      if (e.split == s) out.insert(e.image_path);
    }
    return out;
  };
  CHECK(members(a, Split::Train).size() == members(b, Split::Train).size());
  CHECK(members(a, Split::Val).size() == members(b, Split::Val).size());
  CHECK(members(a, Split::Train) != members(b, Split::Train));
}

TEST_CASE("split determinism: same seed twice is byte-identical") {
  testsup::TempDir tmp("split_det");
  testsup::write_corpus(tmp.path(), 6);
  const DatasetManifest base = ingest_directory(tmp.path());
  const DatasetManifest a = stratified_split(base, {0.8, 0.1, 0.1}, 1234);
  const DatasetManifest b = stratified_split(base, {0.8, 0.1, 0.1}, 1234);
  CHECK(manifest_to_json(a) == manifest_to_json(b));
}

TEST_CASE("split property: disjoint, covering, rounding rule, any seed") {
  testsup::TempDir tmp("split_prop");
  const int per_class[] = {3, 5, 8, 13, 21};
  const char* dirs[5] = {"bacterial_leaf_spot", "downy_mildew", "healthy_leaf",
                         "mosaic_disease", "powdery_mildew"};
  for (int c = 0; c < 5; ++c) {
    fs::create_directories(tmp.path() / dirs[c]);
    for (int i = 0; i < per_class[c]; ++i) {
      leafscope::Rng rng = leafscope::Rng::from_words(
          {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)});
      leafscope::save_png_rgb(tmp.path() / dirs[c] / ("i" + std::to_string(i) + ".png"),
                              testsup::noise_image(4, 4, rng));
    }
  }
  const DatasetManifest base = ingest_directory(tmp.path());
  const SplitRatios ratios{0.8, 0.1, 0.1};
  for (std::uint64_t seed : {0ull, 1ull, 42ull, 997ull}) {
    const DatasetManifest m = stratified_split(base, ratios, seed);
    CHECK(m.entries.size() == base.entries.size());
    for (int c = 0; c < 5; ++c) {
      long long train = 0, val = 0, test = 0, n = 0;
      for (const auto& e : m.entries) {
        if (e.label != static_cast<ClassLabel>(c)) continue;
        ++n;
        if (e.split == Split::Train) ++train;
        if (e.split == Split::Val) ++val;
        if (e.split == Split::Test) ++test;
      }
      CHECK(train + val + test == n);  // covering, hence disjoint per entry
      const long long want_train = std::llround(ratios.train * static_cast<double>(n));
      long long want_val = std::llround(ratios.val * static_cast<double>(n));
      want_val = std::min(want_val, n - want_train);
      CHECK(train == want_train);
      CHECK(val == want_val);
      CHECK(test == n - want_train - want_val);
    }
  }
}

TEST_CASE("split errors: tiny class and bad ratios") {
  testsup::TempDir tmp("split_err");
  testsup::write_corpus(tmp.path(), 2);
  const DatasetManifest base = ingest_directory(tmp.path());
  CHECK_THROWS_WITH_AS(stratified_split(base, {0.8, 0.1, 0.1}, 0),
                       doctest::Contains("cannot populate"), std::runtime_error);
  testsup::TempDir tmp2("split_err2");
  testsup::write_corpus(tmp2.path(), 5);
  const DatasetManifest ok = ingest_directory(tmp2.path());
  CHECK_THROWS(stratified_split(ok, {0.8, 0.1, 0.2}, 0));
}

TEST_CASE("validate: clean manifest has an empty report") {
  testsup::TempDir tmp("val_clean");
  testsup::write_corpus(tmp.path(), 4);
  const DatasetManifest m =
      stratified_split(ingest_directory(tmp.path()), {0.8, 0.1, 0.1}, 3);
  CHECK(validate_manifest(m).ok());
}

TEST_CASE("validate: one deleted file yields exactly one missing-file finding") {
  testsup::TempDir tmp("val_missing");
  testsup::write_corpus(tmp.path(), 4);
  const DatasetManifest m =
      stratified_split(ingest_directory(tmp.path()), {0.8, 0.1, 0.1}, 3);
  fs::remove(tmp.path() / "downy_mildew" / "img_0001.png");
  const ValidationReport report = validate_manifest(m);
  REQUIRE(report.findings.size() == 1);
  CHECK(report.findings[0].kind == ValidationFinding::Kind::MissingFile);
  CHECK(report.findings[0].path.find("img_0001") != std::string::npos);
}

TEST_CASE("validate: hash mismatch after content change") {
  testsup::TempDir tmp("val_hash");
  testsup::write_corpus(tmp.path(), 3);
  const DatasetManifest m =
      stratified_split(ingest_directory(tmp.path()), {0.8, 0.1, 0.1}, 3);
  leafscope::Rng rng(1);
  leafscope::save_png_rgb(tmp.path() / "healthy_leaf" / "img_0000.png",
                          testsup::noise_image(8, 8, rng));
  const ValidationReport report = validate_manifest(m);
  REQUIRE(report.findings.size() == 1);
  CHECK(report.findings[0].kind == ValidationFinding::Kind::HashMismatch);
}

TEST_CASE("validate: duplicate path in two splits is an overlap finding") {
  testsup::TempDir tmp("val_dup");
  testsup::write_corpus(tmp.path(), 3);
  DatasetManifest m = stratified_split(ingest_directory(tmp.path()), {0.8, 0.1, 0.1}, 3);
  ManifestEntry dup = m.entries[0];
  dup.split = dup.split == Split::Train ? Split::Test : Split::Train;
  m.entries.push_back(dup);
  const ValidationReport report = validate_manifest(m);
  bool saw_dup = false, saw_overlap = false;
  for (const auto& f : report.findings) {
    saw_dup |= f.kind == ValidationFinding::Kind::DuplicatePath;
    saw_overlap |= f.kind == ValidationFinding::Kind::SplitOverlap;
  }
  CHECK(saw_dup);
  CHECK(saw_overlap);
}

TEST_CASE("validate: unassigned split is reported") {
  testsup::TempDir tmp("val_unassigned");
  testsup::write_corpus(tmp.path(), 1);
  const DatasetManifest m = ingest_directory(tmp.path());
  const ValidationReport report = validate_manifest(m);
  CHECK(report.findings.size() == 5);
  for (const auto& f : report.findings) {
    CHECK(f.kind == ValidationFinding::Kind::SplitUnassigned);
  }
}

TEST_CASE("manifest json round trip preserves everything") {
  testsup::TempDir tmp("json_rt");
  testsup::write_corpus(tmp.path(), 3);
  const DatasetManifest m =
      stratified_split(ingest_directory(tmp.path()), {0.8, 0.1, 0.1}, 11);
  const fs::path file = tmp.path() / "manifest.json";
  save_manifest(m, file);
  const DatasetManifest back = load_manifest(file);
  CHECK(back.seed == m.seed);
  CHECK(manifest_to_json(back) == manifest_to_json(m));
  CHECK(back.base_dir == file.parent_path());
}

TEST_SUITE_END();
