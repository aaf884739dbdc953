#include "mpm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "mpm/binary_io.hpp"
#include "mpm/config_json.hpp"
#include "mpm/error.hpp"

namespace mpm {
namespace fs = std::filesystem;

namespace {
constexpr char kMagic[8] = {'M', 'P', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr const char* kStreamNames[kNumStreams] = {"pitch", "energy", "vad"};
}  // namespace

void to_json(Json& j, const MpmConfig& c) {
  j = Json{{"num_layers", c.num_layers},
           {"model_dim", c.model_dim},
           {"num_heads", c.num_heads},
           {"conv_kernel_size", c.conv_kernel_size},
           {"feedforward_dim", c.feedforward_dim},
           {"codebook_sizes", c.codebook_sizes},
           {"max_seq_frames", c.max_seq_frames},
           {"extraction_layer", c.extraction_layer}};
}

void from_json(const Json& j, MpmConfig& c) {
  get_if(j, "num_layers", c.num_layers);
  get_if(j, "model_dim", c.model_dim);
  get_if(j, "num_heads", c.num_heads);
  get_if(j, "conv_kernel_size", c.conv_kernel_size);
  get_if(j, "feedforward_dim", c.feedforward_dim);
  get_if(j, "codebook_sizes", c.codebook_sizes);
  get_if(j, "max_seq_frames", c.max_seq_frames);
  get_if(j, "extraction_layer", c.extraction_layer);
}

void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"steps", c.steps},
           {"batch_size", c.batch_size},
           {"peak_lr", c.peak_lr},
           {"warmup_steps", c.warmup_steps},
           {"weight_decay", c.weight_decay},
           {"seed", c.seed},
           {"log_every", c.log_every},
           {"divergence_factor", c.divergence_factor},
           {"divergence_patience", c.divergence_patience}};
}

void from_json(const Json& j, TrainConfig& c) {
  get_if(j, "steps", c.steps);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "peak_lr", c.peak_lr);
  get_if(j, "warmup_steps", c.warmup_steps);
  get_if(j, "weight_decay", c.weight_decay);
  get_if(j, "seed", c.seed);
  get_if(j, "log_every", c.log_every);
  get_if(j, "divergence_factor", c.divergence_factor);
  get_if(j, "divergence_patience", c.divergence_patience);
}

void to_json(Json& j, const FeatureConfig& c) {
  j = Json{{"hop_seconds", c.hop_seconds},
           {"frame_length_seconds", c.frame_length_seconds},
           {"fmin_hz", c.fmin_hz},
           {"fmax_hz", c.fmax_hz},
           {"yin_threshold", c.yin_threshold},
           {"num_mel_bands", c.num_mel_bands},
           {"energy_floor_ratio", c.energy_floor_ratio},
           {"max_utterance_seconds", c.max_utterance_seconds}};
}

void from_json(const Json& j, FeatureConfig& c) {
  get_if(j, "hop_seconds", c.hop_seconds);
  get_if(j, "frame_length_seconds", c.frame_length_seconds);
  get_if(j, "fmin_hz", c.fmin_hz);
  get_if(j, "fmax_hz", c.fmax_hz);
  get_if(j, "yin_threshold", c.yin_threshold);
  get_if(j, "num_mel_bands", c.num_mel_bands);
  get_if(j, "energy_floor_ratio", c.energy_floor_ratio);
  get_if(j, "max_utterance_seconds", c.max_utterance_seconds);
}

void to_json(Json& j, const TrainingMetadata& m) {
  j = Json{{"steps_completed", m.steps_completed}, {"final_loss", m.final_loss},
           {"seed", m.seed},                       {"mask_strategy", m.mask_strategy},
           {"batch_size", m.batch_size},           {"regime_note", m.regime_note}};
}

void from_json(const Json& j, TrainingMetadata& m) {
  get_if(j, "steps_completed", m.steps_completed);
  get_if(j, "final_loss", m.final_loss);
  get_if(j, "seed", m.seed);
  get_if(j, "mask_strategy", m.mask_strategy);
  get_if(j, "batch_size", m.batch_size);
  get_if(j, "regime_note", m.regime_note);
}

MpmCheckpoint make_checkpoint(const MpmModel<float>& model, const Codebooks& codebooks,
                              const TrainingMetadata& meta) {
  MpmCheckpoint ckpt;
  ckpt.config = model.config();
  ckpt.codebooks = codebooks;
  ckpt.metadata = meta;
  model.visit("", [&](const std::string& name, const nn::Parameter<float>& p) {
    NamedTensor t;
    t.name = name;
    t.shape = {p.value.rows(), p.value.cols()};
    t.data.assign(p.value.data(), p.value.data() + p.value.size());
    ckpt.tensors.push_back(std::move(t));
  });
  for (int s = 0; s < kNumStreams; ++s) {
    const Eigen::VectorXd& e = codebooks[s].edges();
    NamedTensor t;
    t.name = std::string("codebook.") + kStreamNames[s] + ".edges";
    t.shape = {e.size()};
    for (Eigen::Index i = 0; i < e.size(); ++i) t.data.push_back(static_cast<float>(e(i)));
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

MpmModel<float> load_model(const MpmCheckpoint& ckpt) {
  MpmModel<float> model(ckpt.config);
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : ckpt.tensors) by_name[t.name] = &t;
  model.visit("", [&](const std::string& name, nn::Parameter<float>& p) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(ErrorCode::kFormat, "checkpoint lacks tensor " + name);
    const NamedTensor& t = *it->second;
    if (t.shape.size() != 2 || t.shape[0] != p.value.rows() || t.shape[1] != p.value.cols()) {
      throw Error(ErrorCode::kFormat, "tensor " + name + " has the wrong shape");
    }
    std::memcpy(p.value.data(), t.data.data(), t.data.size() * sizeof(float));
  });
  return model;
}

void save_checkpoint(const fs::path& path, const MpmCheckpoint& ckpt) {
  Json tensors = Json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    tensors.push_back({{"name", t.name},
                       {"shape", t.shape},
                       {"dtype", "float32"},
                       {"offset", offset},
                       {"count", t.data.size()}});
    offset += t.data.size() * sizeof(float);
  }
  Json codebooks = Json::array();
  for (int s = 0; s < kNumStreams; ++s) {
    codebooks.push_back({{"stream", kStreamNames[s]},
                         {"size", ckpt.codebooks[s].size()},
                         {"lower_clip", ckpt.codebooks[s].lower_clip()},
                         {"upper_clip", ckpt.codebooks[s].upper_clip()}});
  }
  const Json manifest{{"format_version", MpmCheckpoint::kFormatVersion},
                      {"config", ckpt.config},
                      {"metadata", ckpt.metadata},
                      {"codebooks", codebooks},
                      {"tensors", tensors}};
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(kMagic, 8);
  io::write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ckpt.tensors) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

MpmCheckpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingArtifact, "cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw Error(ErrorCode::kFormat, path.string() + ": not an MPM checkpoint");
  }
  const auto len = io::read_pod<std::uint64_t>(in);
  if (len > (1ull << 30)) throw Error(ErrorCode::kFormat, "manifest length out of range");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(ErrorCode::kFormat, "truncated checkpoint manifest");

  Json manifest;
  try {
    manifest = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint manifest: ") + e.what());
  }
  if (manifest.value("format_version", 0) != MpmCheckpoint::kFormatVersion) {
    throw Error(ErrorCode::kFormat, "unsupported checkpoint format version");
  }

  MpmCheckpoint ckpt;
  ckpt.config = manifest.at("config").get<MpmConfig>();
  ckpt.metadata = manifest.at("metadata").get<TrainingMetadata>();
  const auto payload_start = in.tellg();
  for (const auto& jt : manifest.at("tensors")) {
    NamedTensor t;
    t.name = jt.at("name").get<std::string>();
    t.shape = jt.at("shape").get<std::vector<std::int64_t>>();
    if (jt.at("dtype").get<std::string>() != "float32") {
      throw Error(ErrorCode::kFormat, "tensor " + t.name + " is not float32");
    }
    t.data.resize(jt.at("count").get<std::size_t>());
    in.seekg(payload_start + static_cast<std::streamoff>(jt.at("offset").get<std::uint64_t>()));
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) throw Error(ErrorCode::kFormat, "truncated payload for tensor " + t.name);
    ckpt.tensors.push_back(std::move(t));
  }
  const auto& cbs = manifest.at("codebooks");
  for (int s = 0; s < kNumStreams; ++s) {
    const auto& jc = cbs.at(static_cast<std::size_t>(s));
    ckpt.codebooks.books[static_cast<std::size_t>(s)] =
        build_codebook(jc.at("size").get<int>(), jc.at("lower_clip").get<double>(), jc.at("upper_clip").get<double>());
  }
  return ckpt;
}

}  // namespace mpm
