#include "finemotion/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace finemotion::nn {
namespace {

constexpr char kMagic[8] = {'F', 'M', 'C', 'K', 'P', 'T', '0', '1'};
static_assert(std::endian::native == std::endian::little, "little-endian host required");

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

Checkpoint snapshot(const ParameterStore& store, nlohmann::json metadata) {
  Checkpoint c;
  c.metadata = std::move(metadata);
  store.for_each([&](const std::string& name, const Parameter& p) { c.tensors[name] = p.value; });
  return c;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["metadata"] = ckpt.metadata;
  header["tensors"] = nlohmann::json::array();
  std::string payload;
  for (const auto& [name, m] : ckpt.tensors) {
    const std::size_t offset = payload.size();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const float f = static_cast<float>(m.data()[i]);
      char buf[4];
      std::memcpy(buf, &f, 4);
      payload.append(buf, 4);
    }
    header["tensors"].push_back({{"name", name},
                                 {"shape", {m.rows(), m.cols()}},
                                 {"dtype", "f32le"},
                                 {"offset", offset},
                                 {"bytes", payload.size() - offset}});
  }
  const std::string h = header.dump();
  std::string out(kMagic, 8);
  put_u64(out, h.size());
  out += h;
  out += payload;
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw CheckpointError(CheckpointErrc::BadMagic, "not a finemotion checkpoint");
  const std::uint64_t hlen = get_u64(bytes, 8);
  if (16 + hlen > bytes.size()) throw CheckpointError(CheckpointErrc::Corrupt, "truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointErrc::Corrupt, std::string("bad header: ") + e.what());
  }
  const std::size_t base = 16 + hlen;
  Checkpoint c;
  c.metadata = header.value("metadata", nlohmann::json::object());
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("shape").at(0).get<Eigen::Index>();
    const auto cols = t.at("shape").at(1).get<Eigen::Index>();
    const auto offset = t.at("offset").get<std::size_t>();
    const std::size_t n = static_cast<std::size_t>(rows * cols);
    if (t.at("dtype") != "f32le" || t.at("bytes").get<std::size_t>() != 4 * n ||
        base + offset + 4 * n > bytes.size())
      throw CheckpointError(CheckpointErrc::Corrupt, "bad tensor record: " + t.at("name").get<std::string>());
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < n; ++i) {
      float f;
      std::memcpy(&f, bytes.data() + base + offset + 4 * i, 4);
      m.data()[i] = f;
    }
    c.tensors[t.at("name").get<std::string>()] = std::move(m);
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(CheckpointErrc::Io, "cannot write " + path.string());
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointErrc::Io, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrc::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

void restore(ParameterStore& store, const Checkpoint& ckpt) {
  store.for_each([&](const std::string& name, Parameter& p) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end())
      throw CheckpointError(CheckpointErrc::MissingTensor, "checkpoint lacks " + name);
    if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols())
      throw CheckpointError(CheckpointErrc::ShapeMismatch, "shape mismatch for " + name);
    p.value = it->second;
  });
}

}  // namespace finemotion::nn
