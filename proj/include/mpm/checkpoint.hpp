#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mpm/codec.hpp"
#include "mpm/mpm_model.hpp"

namespace mpm {

struct TrainingMetadata {
  int steps_completed = 0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
  std::string mask_strategy;
  int batch_size = 0;
  // Free-form note on how the run departs from the reference regime.
  std::string regime_note;
};

struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

/// Config, float32 parameters, codebooks and run metadata.
///
/// On disk:
///   char[8]  magic "MPMCKPT1"
///   u64      manifest length N
///   u8[N]    UTF-8 JSON manifest: {"format_version", "config", "metadata",
///            "tensors": [{"name", "shape", "dtype": "float32",
///            "offset", "count"}]}   offsets are in bytes from payload start
///   f32[]    contiguous little-endian payload
/// Codebook edges are stored as tensors named "codebook.<stream>.edges".
struct MpmCheckpoint {
  static constexpr int kFormatVersion = 1;

  MpmConfig config;
  Codebooks codebooks;
  TrainingMetadata metadata;
  std::vector<NamedTensor> tensors;
};

MpmCheckpoint make_checkpoint(const MpmModel<float>& model, const Codebooks& codebooks,
                              const TrainingMetadata& meta);

/// Rebuilds the float model; throws kFormat when tensors are missing or
/// misshapen. Use MpmModel::cast for double precision.
MpmModel<float> load_model(const MpmCheckpoint& ckpt);

void save_checkpoint(const std::filesystem::path& path, const MpmCheckpoint& ckpt);
MpmCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mpm
