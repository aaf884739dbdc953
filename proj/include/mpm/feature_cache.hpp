#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mpm/signal_features.hpp"
#include "mpm/types.hpp"

namespace mpm {

// Record layout (all integers and floats little-endian):
//
//   char[4]  magic "MPMF"
//   u32      version (1)
//   u32      id length, then that many bytes of utf-8 id
//   f64      hop_seconds
//   u32      num_frames
//   u32      num_columns
//   u8       has_vad
//   f32[num_columns][num_frames]   column-major float payload
//   u8[num_frames]                 vad flags, present iff has_vad
//
// Prosody records carry three columns (normalized pitch, normalized energy,
// raw F0 in Hz with 0 for unvoiced) plus vad. CWT records carry
// 3 * num_scales columns and no vad.
struct FeatureRecord {
  std::string id;
  double hop_seconds = 0.01;
  MatrixXf columns;  // frames x num_columns
  Flags vad;
};

void write_feature_record(const std::filesystem::path& path, const FeatureRecord& rec);
FeatureRecord read_feature_record(const std::filesystem::path& path);

FeatureRecord to_record(const std::string& id, const ProsodyTrack& track);
ProsodyTrack to_track(const FeatureRecord& rec);

struct CacheEntry {
  std::string id;
  double duration_seconds = 0.0;
  int num_frames = 0;
  std::string file;
};

/// Directory of records plus manifest.tsv listing ids and durations.
class FeatureCache {
 public:
  static constexpr const char* kManifestName = "manifest.tsv";

  explicit FeatureCache(std::filesystem::path dir);

  /// Opens an existing cache; throws kMissingArtifact when the manifest is absent.
  static FeatureCache open(const std::filesystem::path& dir);

  void put(const FeatureRecord& rec);
  void put(const std::string& id, const ProsodyTrack& track) { put(to_record(id, track)); }
  FeatureRecord get_record(const std::string& id) const;
  ProsodyTrack get(const std::string& id) const { return to_track(get_record(id)); }

  void save_manifest() const;

  const std::vector<CacheEntry>& entries() const { return entries_; }
  const std::filesystem::path& dir() const { return dir_; }
  bool contains(const std::string& id) const;

 private:
  std::filesystem::path dir_;
  std::vector<CacheEntry> entries_;
};

}  // namespace mpm
