#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "s2cr/error.hpp"
#include "s2cr/model.hpp"

namespace s2cr {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'S', '2', 'C', 'R'};

static_assert(std::endian::native == std::endian::little,
              "model I/O assumes a little-endian host");

json config_to_json(const EncoderConfig& c) {
  return json{{"thumbnail_size", c.thumbnail_size},
              {"block_channels", c.block_channels},
              {"feature_dim", c.feature_dim},
              {"levels", c.levels},
              {"stages", c.stages},
              {"semantic", c.semantic},
              {"semantic_classes", c.semantic_classes},
              {"semantic_embed_dim", c.semantic_embed_dim}};
}

EncoderConfig config_from_json(const json& j) {
  EncoderConfig c;
  try {
    c.thumbnail_size = j.at("thumbnail_size").get<int>();
    c.block_channels = j.at("block_channels").get<std::vector<int>>();
    c.feature_dim = j.at("feature_dim").get<int>();
    c.levels = j.at("levels").get<int>();
    c.stages = j.at("stages").get<int>();
    c.semantic = j.at("semantic").get<bool>();
    c.semantic_classes = j.at("semantic_classes").get<int>();
    c.semantic_embed_dim = j.at("semantic_embed_dim").get<int>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("model header config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, std::string("model header: ") + e.what());
  }
  return c;
}

std::uint32_t read_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + offset, 4);
  return v;
}

}  // namespace

std::string serialize(const HarmonizerModel& model) {
  json tensors = json::array();
  std::size_t total = 0;
  for (const auto& p : model.parameters()) {
    tensors.push_back(json{{"name", p.name}, {"shape", p.shape}});
    total += p.values.size();
  }
  const json header{{"version", kModelFormatVersion},
                    {"config", config_to_json(model.config)},
                    {"tensors", std::move(tensors)}};
  const std::string text = header.dump();

  std::string out;
  out.reserve(8 + text.size() + total * 4);
  out.append(kMagic, 4);
  const auto len = static_cast<std::uint32_t>(text.size());
  out.append(reinterpret_cast<const char*>(&len), 4);
  out += text;
  for (const auto& p : model.parameters()) {
    for (double v : p.values) {
      const auto f = static_cast<float>(v);
      if (!std::isfinite(f)) fail(ErrorKind::kFormat, "non-finite value in " + p.name);
      out.append(reinterpret_cast<const char*>(&f), 4);
    }
  }
  return out;
}

HarmonizerModel deserialize(std::string_view bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::kFormat, "not a model file (bad magic)");
  }
  const std::uint32_t len = read_u32(bytes, 4);
  if (8 + static_cast<std::size_t>(len) > bytes.size()) {
    fail(ErrorKind::kFormat, "shape mismatch: truncated model header");
  }
  json header;
  try {
    header = json::parse(bytes.substr(8, len));
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("model header is not valid JSON: ") + e.what());
  }
  if (!header.is_object() || !header.contains("version") ||
      !header["version"].is_number_integer()) {
    fail(ErrorKind::kFormat, "model header has no version");
  }
  const int version = header["version"].get<int>();
  if (version != kModelFormatVersion) {
    fail(ErrorKind::kFormat, "unsupported model version " + std::to_string(version));
  }
  if (!header.contains("config") || !header.contains("tensors") ||
      !header["tensors"].is_array()) {
    fail(ErrorKind::kFormat, "model header lacks config or tensor manifest");
  }
  HarmonizerModel model = HarmonizerModel::zeros_like(
      HarmonizerModel::initialize(config_from_json(header["config"]), 0));
  auto params = model.parameters();
  const json& manifest = header["tensors"];
  if (manifest.size() != params.size()) {
    fail(ErrorKind::kFormat, "shape mismatch: manifest lists " +
                                 std::to_string(manifest.size()) + " tensors, config implies " +
                                 std::to_string(params.size()));
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& entry = manifest[i];
    std::vector<int> shape;
    std::string name;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<std::vector<int>>();
    } catch (const json::exception&) {
      fail(ErrorKind::kFormat, "malformed tensor manifest entry " + std::to_string(i));
    }
    if (name != params[i].name || shape != params[i].shape) {
      fail(ErrorKind::kFormat, "shape mismatch for tensor " + params[i].name);
    }
    total += params[i].values.size();
  }
  const std::size_t data_offset = 8 + static_cast<std::size_t>(len);
  if (bytes.size() - data_offset != total * 4) {
    fail(ErrorKind::kFormat, "shape mismatch: payload has " +
                                 std::to_string(bytes.size() - data_offset) +
                                 " bytes of tensor data, manifest needs " +
                                 std::to_string(total * 4));
  }
  std::size_t offset = data_offset;
  for (auto& p : params) {
    for (double& v : p.values) {
      float f;
      std::memcpy(&f, bytes.data() + offset, 4);
      offset += 4;
      if (!std::isfinite(f)) fail(ErrorKind::kFormat, "non-finite value in " + p.name);
      v = f;
    }
  }
  return model;
}

void save_model(const HarmonizerModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

HarmonizerModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace s2cr
