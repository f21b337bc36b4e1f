#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace leafscope {

// The five corpus classes, indexed alphabetically by canonical name.
enum class ClassLabel : int {
  BacterialLeafSpot = 0,
  DownyMildew = 1,
  HealthyLeaf = 2,
  MosaicDisease = 3,
  PowderyMildew = 4,
};

inline constexpr int kNumClasses = 5;

const std::array<std::string, kNumClasses>& class_names();
const std::string& class_name(ClassLabel label);

// Case-, whitespace-, and underscore-insensitive lookup ("downy_mildew",
// "Downy Mildew", "DOWNYMILDEW" all resolve). Empty optional if no match.
std::optional<ClassLabel> class_from_string(const std::string& name);

enum class Split : int { Unassigned = 0, Train = 1, Val = 2, Test = 3 };

const std::string& split_name(Split s);
std::optional<Split> split_from_string(const std::string& name);

struct ManifestEntry {
  std::string image_path;  // POSIX-style path relative to the manifest location
  ClassLabel label = ClassLabel::BacterialLeafSpot;
  Split split = Split::Unassigned;
  std::string sha256;
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;
  SplitRatios ratios;
  // Filesystem context the relative paths resolve against; not serialized.
  std::filesystem::path base_dir;

  std::size_t count_split(Split s) const;
  std::size_t count_class(ClassLabel label) const;
  std::filesystem::path resolve(const ManifestEntry& e) const;
};

// Scans one subdirectory per class under `root` for jpg/jpeg/png files,
// hashes contents, and returns entries sorted by (label index, path) with
// splits unassigned. Relative paths are taken against `base_dir` (defaults
// to `root` itself, i.e. a manifest written into the corpus root).
DatasetManifest ingest_directory(const std::filesystem::path& root,
                                 const std::filesystem::path& base_dir = {});

// Per-class seeded shuffle and split assignment. Sizes per class of n:
//   n_train = round(r_train * n)
//   n_val   = round(r_val * n), capped at n - n_train   (val absorbs first)
//   n_test  = n - n_train - n_val
// round() is half-away-from-zero. Pure function of (entries, ratios, seed).
DatasetManifest stratified_split(const DatasetManifest& manifest,
                                 const SplitRatios& ratios, std::uint64_t seed);

struct ValidationFinding {
  enum class Kind {
    MissingFile,
    HashMismatch,
    DuplicatePath,
    SplitOverlap,
    SplitUnassigned,
  };
  Kind kind;
  std::string path;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationFinding> findings;
  bool ok() const { return findings.empty(); }
};

// Problems are reported, never thrown.
ValidationReport validate_manifest(const DatasetManifest& manifest);

// JSON: {"seed": N, "ratios": [t,v,s], "entries": [{path,label,split,sha256}]}.
// Serialization is key-ordered and byte-stable for a given manifest.
std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& json_text,
                                   const std::filesystem::path& base_dir);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace leafscope
