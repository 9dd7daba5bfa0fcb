#include "cast/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace cast::nn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamSet<float>& params, const nlohmann::json& extra) {
  nlohmann::json manifest = extra;
  manifest["version"] = kCheckpointVersion;
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : params) {
    tensors.push_back({{"name", t.name}, {"shape", t.shape()}, {"offset", offset}});
    offset += static_cast<std::size_t>(t.value.size());
  }
  manifest["tensors"] = tensors;

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out << manifest.dump() << '\n';
    for (const auto& t : params)
      out.write(reinterpret_cast<const char*>(t.value.data()), static_cast<std::streamsize>(t.value.size() * sizeof(float)));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string header;
  std::getline(in, header);
  Checkpoint ck;
  try {
    ck.manifest = nlohmann::json::parse(header);
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(path.string() + ": bad manifest: " + e.what());
  }
  int version = ck.manifest.value("version", -1);
  if (version != kCheckpointVersion)
    throw CheckpointError(path.string() + ": checkpoint version " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t floats = payload.size() / sizeof(float);
  for (const auto& t : ck.manifest.at("tensors")) {
    auto shape = t.at("shape").get<std::vector<int>>();
    if (shape.size() != 2 || shape[0] <= 0 || shape[1] <= 0)
      throw CheckpointError("tensor '" + t.at("name").get<std::string>() + "' has unsupported shape " + shape_str(shape));
    std::size_t off = t.at("offset").get<std::size_t>();
    std::size_t n = static_cast<std::size_t>(shape[0]) * static_cast<std::size_t>(shape[1]);
    if (off + n > floats) throw CheckpointError("tensor '" + t.at("name").get<std::string>() + "' runs past the payload");
    NamedTensor<float> nt;
    nt.name = t.at("name").get<std::string>();
    nt.value.resize(shape[0], shape[1]);
    std::memcpy(nt.value.data(), payload.data() + off * sizeof(float), n * sizeof(float));
    nt.grad = Mat<float>::Zero(shape[0], shape[1]);
    ck.params.push(std::move(nt));
  }
  return ck;
}

void restore_params(const ParamSet<float>& src, ParamSet<float>& dst) {
  std::string problems;
  for (const auto& t : dst) {
    if (!src.contains(t.name)) {
      problems += "\n  missing tensor " + t.name + " (expected shape " + shape_str(t.shape()) + ")";
      continue;
    }
    const auto& s = src.get(t.name);
    if (s.shape() != t.shape())
      problems += "\n  tensor " + t.name + ": expected shape " + shape_str(t.shape()) + ", found " + shape_str(s.shape());
  }
  for (const auto& s : src)
    if (!dst.contains(s.name)) problems += "\n  unknown tensor " + s.name + " (shape " + shape_str(s.shape()) + ")";
  if (!problems.empty())
    throw CheckpointError("checkpoint (format version " + std::to_string(kCheckpointVersion) +
                          ") does not match the model:" + problems);
  for (auto& t : dst) t.value = src.get(t.name).value;
}

}  // namespace cast::nn
