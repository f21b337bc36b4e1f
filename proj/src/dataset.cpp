#include "leafscope/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "leafscope/rng.hpp"
#include "leafscope/sha256.hpp"

namespace leafscope {

namespace {

std::string normalize_class_key(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == '_') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

std::string to_posix(const std::filesystem::path& p) {
  return p.generic_string();
}

bool has_image_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

}  // namespace

const std::array<std::string, kNumClasses>& class_names() {
  static const std::array<std::string, kNumClasses> names = {
      "BacterialLeafSpot", "DownyMildew", "HealthyLeaf", "MosaicDisease",
      "PowderyMildew"};
  return names;
}

const std::string& class_name(ClassLabel label) {
  return class_names()[static_cast<std::size_t>(label)];
}

std::optional<ClassLabel> class_from_string(const std::string& name) {
  const std::string key = normalize_class_key(name);
  for (int i = 0; i < kNumClasses; ++i) {
    if (key == normalize_class_key(class_names()[static_cast<std::size_t>(i)])) {
      return static_cast<ClassLabel>(i);
    }
  }
  return std::nullopt;
}

const std::string& split_name(Split s) {
  static const std::array<std::string, 4> names = {"unassigned", "train", "val", "test"};
  return names[static_cast<std::size_t>(s)];
}

std::optional<Split> split_from_string(const std::string& name) {
  for (int i = 0; i < 4; ++i) {
    const Split s = static_cast<Split>(i);
    if (name == split_name(s)) return s;
  }
  return std::nullopt;
}

std::size_t DatasetManifest::count_split(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(),
                    [s](const ManifestEntry& e) { return e.split == s; }));
}

std::size_t DatasetManifest::count_class(ClassLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(),
                    [label](const ManifestEntry& e) { return e.label == label; }));
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& e) const {
  return base_dir.empty() ? std::filesystem::path(e.image_path)
                          : base_dir / e.image_path;
}

DatasetManifest ingest_directory(const std::filesystem::path& root,
                                 const std::filesystem::path& base_dir_in) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw std::runtime_error("ingest: not a directory: " + root.string());
  }
  const fs::path base_dir = base_dir_in.empty() ? root : base_dir_in;

  std::map<std::string, ClassLabel> dirs_seen;
  for (const auto& item : fs::directory_iterator(root)) {
    if (!item.is_directory()) continue;  // stray files in the root are ignored
    const std::string dirname = item.path().filename().string();
    const auto label = class_from_string(dirname);
    if (!label) {
      throw std::runtime_error("ingest: unknown class directory \"" + dirname +
                               "\" under " + root.string());
    }
    dirs_seen.emplace(dirname, *label);
  }
  std::set<ClassLabel> present;
  for (const auto& [dirname, label] : dirs_seen) {
    if (!present.insert(label).second) {
      throw std::runtime_error("ingest: two directories map to class " +
                               class_name(label));
    }
  }
  for (int i = 0; i < kNumClasses; ++i) {
    const auto label = static_cast<ClassLabel>(i);
    if (!present.count(label)) {
      throw std::runtime_error("ingest: missing class directory for " +
                               class_name(label));
    }
  }

  DatasetManifest manifest;
  manifest.base_dir = base_dir;
  for (const auto& [dirname, label] : dirs_seen) {
    std::size_t count_before = manifest.entries.size();
    for (const auto& item : fs::recursive_directory_iterator(root / dirname)) {
      if (!item.is_regular_file() || !has_image_extension(item.path())) continue;
      ManifestEntry e;
      e.image_path = to_posix(fs::relative(item.path(), base_dir));
      e.label = label;
      e.split = Split::Unassigned;
      manifest.entries.push_back(std::move(e));
    }
    if (manifest.entries.size() == count_before) {
      throw std::runtime_error("ingest: empty class directory \"" + dirname + "\"");
    }
  }

  // Hash in parallel; entries are value objects so each task owns its slot.
  const unsigned workers =
      std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
  std::vector<std::future<void>> tasks;
  std::atomic<std::size_t> cursor{0};
  for (unsigned w = 0; w < workers; ++w) {
    tasks.push_back(std::async(std::launch::async, [&]() {
      for (;;) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= manifest.entries.size()) return;
        manifest.entries[i].sha256 = sha256_file(manifest.resolve(manifest.entries[i]));
      }
    }));
  }
  for (auto& t : tasks) t.get();  // rethrows unreadable-file errors

  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              if (a.label != b.label) return a.label < b.label;
              return a.image_path < b.image_path;
            });
  return manifest;
}

DatasetManifest stratified_split(const DatasetManifest& manifest,
                                 const SplitRatios& ratios, std::uint64_t seed) {
  const double sum = ratios.train + ratios.val + ratios.test;
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw std::runtime_error("split: ratios must be non-negative and sum to 1");
  }

  DatasetManifest out = manifest;
  out.seed = seed;
  out.ratios = ratios;

  for (int ci = 0; ci < kNumClasses; ++ci) {
    const auto label = static_cast<ClassLabel>(ci);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < out.entries.size(); ++i) {
      if (out.entries[i].label == label) idx.push_back(i);
    }
    if (idx.empty()) continue;
    const std::size_t n = idx.size();
    if (n < 3) {
      throw std::runtime_error("split: class " + class_name(label) + " has only " +
                               std::to_string(n) +
                               " entries; cannot populate all three splits");
    }
    // Deterministic order before shuffling: sort by path.
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return out.entries[a].image_path < out.entries[b].image_path;
    });
    Rng rng = Rng::from_words({seed, static_cast<std::uint64_t>(ci)});
    rng.shuffle(idx);

    const auto nll = static_cast<long long>(n);
    long long n_train = std::llround(ratios.train * static_cast<double>(n));
    n_train = std::clamp(n_train, 0ll, nll);
    long long n_val = std::llround(ratios.val * static_cast<double>(n));
    n_val = std::clamp(n_val, 0ll, nll - n_train);

    for (std::size_t k = 0; k < n; ++k) {
      Split s = Split::Test;
      if (static_cast<long long>(k) < n_train) {
        s = Split::Train;
      } else if (static_cast<long long>(k) < n_train + n_val) {
        s = Split::Val;
      }
      out.entries[idx[k]].split = s;
    }
  }

  std::sort(out.entries.begin(), out.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              if (a.label != b.label) return a.label < b.label;
              return a.image_path < b.image_path;
            });
  return out;
}

ValidationReport validate_manifest(const DatasetManifest& manifest) {
  ValidationReport report;
  std::map<std::string, std::set<Split>> splits_by_path;
  std::set<std::string> seen;

  for (const auto& e : manifest.entries) {
    if (!seen.insert(e.image_path).second) {
      report.findings.push_back({ValidationFinding::Kind::DuplicatePath, e.image_path,
                                 "path listed more than once"});
    }
    splits_by_path[e.image_path].insert(e.split);

    const auto full = manifest.resolve(e);
    std::error_code ec;
    if (!std::filesystem::is_regular_file(full, ec)) {
      report.findings.push_back(
          {ValidationFinding::Kind::MissingFile, e.image_path, "file not found"});
      continue;
    }
    try {
      const std::string digest = sha256_file(full);
      if (!e.sha256.empty() && digest != e.sha256) {
        report.findings.push_back({ValidationFinding::Kind::HashMismatch, e.image_path,
                                   "expected " + e.sha256 + ", got " + digest});
      }
    } catch (const std::exception& ex) {
      report.findings.push_back(
          {ValidationFinding::Kind::MissingFile, e.image_path, ex.what()});
    }
  }

  for (const auto& [path, splits] : splits_by_path) {
    if (splits.size() > 1) {
      std::string names;
      for (Split s : splits) names += (names.empty() ? "" : "+") + split_name(s);
      report.findings.push_back(
          {ValidationFinding::Kind::SplitOverlap, path, "assigned to " + names});
    }
  }
  for (const auto& e : manifest.entries) {
    if (e.split == Split::Unassigned) {
      report.findings.push_back({ValidationFinding::Kind::SplitUnassigned, e.image_path,
                                 "entry has no split assignment"});
    }
  }
  return report;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::ordered_json j;
  j["seed"] = manifest.seed;
  j["ratios"] = {manifest.ratios.train, manifest.ratios.val, manifest.ratios.test};
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json je;
    je["path"] = e.image_path;
    je["label"] = class_name(e.label);
    je["split"] = split_name(e.split);
    je["sha256"] = e.sha256;
    j["entries"].push_back(std::move(je));
  }
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& json_text,
                                   const std::filesystem::path& base_dir) {
  const auto j = nlohmann::json::parse(json_text);
  DatasetManifest manifest;
  manifest.base_dir = base_dir;
  manifest.seed = j.at("seed").get<std::uint64_t>();
  const auto& r = j.at("ratios");
  if (!r.is_array() || r.size() != 3) {
    throw std::runtime_error("manifest: ratios must be a 3-element array");
  }
  manifest.ratios = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>()};
  for (const auto& je : j.at("entries")) {
    ManifestEntry e;
    e.image_path = je.at("path").get<std::string>();
    const std::string label_str = je.at("label").get<std::string>();
    const auto label = class_from_string(label_str);
    if (!label) throw std::runtime_error("manifest: unknown label " + label_str);
    e.label = *label;
    const std::string split_str = je.at("split").get<std::string>();
    const auto split = split_from_string(split_str);
    if (!split) throw std::runtime_error("manifest: unknown split " + split_str);
    e.split = *split;
    e.sha256 = je.at("sha256").get<std::string>();
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("manifest: cannot write " + path.string());
  out << manifest_to_json(manifest);
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("manifest: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str(), path.parent_path());
}

}  // namespace leafscope
