#include "mpm/feature_cache.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mpm/binary_io.hpp"
#include "mpm/error.hpp"

namespace mpm {
namespace fs = std::filesystem;

namespace {
constexpr char kMagic[4] = {'M', 'P', 'M', 'F'};
constexpr std::uint32_t kVersion = 1;

std::string record_file_name(const std::string& id) {
  std::string out;
  for (char ch : id) {
    const bool safe = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
    out += safe ? ch : '_';
  }
  return out + ".mpmf";
}
}  // namespace

void write_feature_record(const fs::path& path, const FeatureRecord& rec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const auto frames = static_cast<std::uint32_t>(rec.columns.rows());
  if (!rec.vad.empty() && rec.vad.size() != frames) {
    throw Error(ErrorCode::kAlignment, "vad length differs from column length");
  }
  out.write(kMagic, 4);
  io::write_pod(out, kVersion);
  io::write_string(out, rec.id);
  io::write_pod(out, rec.hop_seconds);
  io::write_pod(out, frames);
  io::write_pod(out, static_cast<std::uint32_t>(rec.columns.cols()));
  io::write_pod<std::uint8_t>(out, rec.vad.empty() ? 0 : 1);
  for (Eigen::Index c = 0; c < rec.columns.cols(); ++c) {
    for (Eigen::Index r = 0; r < rec.columns.rows(); ++r) io::write_pod(out, rec.columns(r, c));
  }
  if (!rec.vad.empty()) {
    out.write(reinterpret_cast<const char*>(rec.vad.data()), static_cast<std::streamsize>(rec.vad.size()));
  }
}

FeatureRecord read_feature_record(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic)) {
    throw Error(ErrorCode::kFormat, path.string() + ": not a feature record");
  }
  if (io::read_pod<std::uint32_t>(in) != kVersion) {
    throw Error(ErrorCode::kFormat, path.string() + ": unsupported record version");
  }
  FeatureRecord rec;
  rec.id = io::read_string(in);
  rec.hop_seconds = io::read_pod<double>(in);
  const auto frames = io::read_pod<std::uint32_t>(in);
  const auto cols = io::read_pod<std::uint32_t>(in);
  const auto has_vad = io::read_pod<std::uint8_t>(in);
  rec.columns.resize(frames, cols);
  for (std::uint32_t c = 0; c < cols; ++c) {
    for (std::uint32_t r = 0; r < frames; ++r) rec.columns(r, c) = io::read_pod<float>(in);
  }
  if (has_vad) {
    rec.vad.resize(frames);
    in.read(reinterpret_cast<char*>(rec.vad.data()), frames);
    if (!in) throw Error(ErrorCode::kFormat, path.string() + ": truncated vad array");
  }
  return rec;
}

FeatureRecord to_record(const std::string& id, const ProsodyTrack& track) {
  const int n = track.num_frames();
  if (track.pitch.size() != n || track.energy.size() != n) {
    throw Error(ErrorCode::kAlignment, "prosody contours differ in length");
  }
  FeatureRecord rec;
  rec.id = id;
  rec.hop_seconds = track.hop_seconds;
  rec.columns.resize(n, 3);
  rec.columns.col(0) = track.pitch.cast<float>();
  rec.columns.col(1) = track.energy.cast<float>();
  if (track.raw_pitch_hz.size() == n) {
    rec.columns.col(2) = track.raw_pitch_hz.cast<float>();
  } else {
    rec.columns.col(2).setZero();
  }
  rec.vad = track.vad;
  return rec;
}

ProsodyTrack to_track(const FeatureRecord& rec) {
  if (rec.columns.cols() != 3 || rec.vad.size() != static_cast<std::size_t>(rec.columns.rows())) {
    throw Error(ErrorCode::kFormat, rec.id + ": record is not a prosody record");
  }
  ProsodyTrack t;
  t.hop_seconds = rec.hop_seconds;
  t.pitch = rec.columns.col(0).cast<double>();
  t.energy = rec.columns.col(1).cast<double>();
  t.raw_pitch_hz = rec.columns.col(2).cast<double>();
  t.vad = rec.vad;
  return t;
}

FeatureCache::FeatureCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

FeatureCache FeatureCache::open(const fs::path& dir) {
  const fs::path manifest = dir / kManifestName;
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorCode::kMissingArtifact, "no feature cache manifest at " + manifest.string());
  FeatureCache cache(dir);
  std::string line;
  std::getline(in, line);  // header
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    CacheEntry e;
    std::string dur, frames;
    if (!std::getline(ss, e.id, '\t') || !std::getline(ss, dur, '\t') ||
        !std::getline(ss, frames, '\t') || !std::getline(ss, e.file, '\t')) {
      throw Error(ErrorCode::kFormat, manifest.string() + ":" + std::to_string(line_no) +
                                          ": expected 4 tab-separated fields");
    }
    e.duration_seconds = std::stod(dur);
    e.num_frames = std::stoi(frames);
    cache.entries_.push_back(std::move(e));
  }
  return cache;
}

void FeatureCache::put(const FeatureRecord& rec) {
  CacheEntry e;
  e.id = rec.id;
  e.num_frames = static_cast<int>(rec.columns.rows());
  e.duration_seconds = e.num_frames * rec.hop_seconds;
  e.file = record_file_name(rec.id);
  write_feature_record(dir_ / e.file, rec);
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const CacheEntry& x) { return x.id == rec.id; });
  if (it != entries_.end()) {
    *it = std::move(e);
  } else {
    entries_.push_back(std::move(e));
  }
}

FeatureRecord FeatureCache::get_record(const std::string& id) const {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const CacheEntry& x) { return x.id == id; });
  if (it == entries_.end()) throw Error(ErrorCode::kMissingArtifact, "utterance " + id + " not in cache");
  return read_feature_record(dir_ / it->file);
}

bool FeatureCache::contains(const std::string& id) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const CacheEntry& x) { return x.id == id; });
}

void FeatureCache::save_manifest() const {
  std::ofstream out(dir_ / kManifestName);
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest in " + dir_.string());
  out << "id\tduration_seconds\tnum_frames\tfile\n";
  out.precision(17);
  for (const auto& e : entries_) {
    out << e.id << '\t' << e.duration_seconds << '\t' << e.num_frames << '\t' << e.file << '\n';
  }
}

}  // namespace mpm
