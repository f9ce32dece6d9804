#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "finemotion/nn/graph.hpp"

namespace finemotion::nn {

enum class CheckpointErrc { Io, BadMagic, Corrupt, MissingTensor, ShapeMismatch };
using CheckpointError = Error<CheckpointErrc>;

// Checkpoint container layout:
//   bytes 0..7   magic "FMCKPT01"
//   bytes 8..15  u64 little-endian header length H
//   next H bytes UTF-8 JSON header:
//                {"metadata": {...}, "tensors": [{"name", "shape": [r, c],
//                 "dtype": "f32le", "offset", "bytes"}]}
//   remainder    concatenated little-endian float32 payloads, row-major
struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, Matrix> tensors;
};

Checkpoint snapshot(const ParameterStore& store, nlohmann::json metadata);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);

// Copies every store parameter from the checkpoint. Tensors absent from the
// checkpoint raise MissingTensor; extra checkpoint tensors are ignored.
void restore(ParameterStore& store, const Checkpoint& ckpt);

}  // namespace finemotion::nn
