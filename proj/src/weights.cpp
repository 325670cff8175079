#include "vehdet/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace vehdet {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "vehdet-weights";

void put_f32_le(std::uint8_t* dst, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) dst[i] = static_cast<std::uint8_t>(bits >> (8 * i));
}

float get_f32_le(const std::uint8_t* src) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(src[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

std::uint64_t byte_size(const Shape4& s) { return static_cast<std::uint64_t>(s.count()) * 4; }

}  // namespace

ParamStore WeightStore::tensors() const {
  ParamStore out;
  for (const auto& [name, entry] : manifest) {
    const std::uint64_t bytes = byte_size(entry.shape);
    if (entry.offset > blob.size() || bytes > blob.size() - entry.offset) {
      throw WeightsError(WeightsError::Kind::Truncated,
                         "weight blob truncated inside tensor " + name);
    }
    std::vector<float> values(entry.shape.count());
    const std::uint8_t* src = blob.data() + entry.offset;
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = get_f32_le(src + 4 * i);
    out.emplace(name, Tensor(entry.shape, std::move(values)));
  }
  return out;
}

WeightStore make_weight_store(const ParamStore& params) {
  WeightStore store;
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params) {
    store.manifest[name] = {t.shape(), offset};
    offset += byte_size(t.shape());
  }
  store.blob.resize(offset);
  for (const auto& [name, t] : params) {
    std::uint8_t* dst = store.blob.data() + store.manifest[name].offset;
    auto values = t.data();
    for (std::size_t i = 0; i < values.size(); ++i) put_f32_le(dst + 4 * i, values[i]);
  }
  return store;
}

std::filesystem::path blob_path_for(const std::filesystem::path& manifest_path) {
  std::filesystem::path p = manifest_path;
  p.replace_extension(".bin");
  return p;
}

void save_weights(const Network& net, const std::filesystem::path& manifest_path,
                  const std::filesystem::path& blob_path) {
  const WeightStore store = make_weight_store(net.params());
  json tensors = json::object();
  for (const auto& [name, e] : store.manifest) {
    tensors[name] = {{"shape", {e.shape.n, e.shape.c, e.shape.h, e.shape.w}},
                     {"offset", e.offset}};
  }
  const json manifest = {{"format", kFormat},
                         {"version", 1},
                         {"blob_bytes", store.blob.size()},
                         {"tensors", tensors}};
  std::ofstream m(manifest_path);
  if (!m) throw IoError("cannot write " + manifest_path.string());
  m << manifest.dump(1) << "\n";
  std::ofstream b(blob_path, std::ios::binary);
  if (!b) throw IoError("cannot write " + blob_path.string());
  b.write(reinterpret_cast<const char*>(store.blob.data()),
          static_cast<std::streamsize>(store.blob.size()));
  if (!m || !b) throw IoError("failed writing weights");
}

WeightStore load_weights(const std::filesystem::path& manifest_path,
                         const std::filesystem::path& blob_path) {
  using Kind = WeightsError::Kind;
  std::ifstream m(manifest_path);
  if (!m) throw IoError("cannot open " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(m);
  } catch (const json::parse_error& e) {
    throw WeightsError(Kind::Manifest, std::string("manifest is not valid JSON: ") + e.what());
  }

  WeightStore store;
  std::uint64_t declared = 0;
  try {
    if (manifest.at("format").get<std::string>() != kFormat) {
      throw WeightsError(Kind::Manifest, "not a " + std::string(kFormat) + " manifest");
    }
    declared = manifest.at("blob_bytes").get<std::uint64_t>();
    for (const auto& [name, e] : manifest.at("tensors").items()) {
      const auto dims = e.at("shape").get<std::vector<int>>();
      if (dims.size() != 4) throw WeightsError(Kind::Manifest, name + ": shape must have 4 dims");
      for (int d : dims) {
        if (d < 1) throw WeightsError(Kind::Manifest, name + ": non-positive dimension");
      }
      ManifestEntry entry{{dims[0], dims[1], dims[2], dims[3]}, e.at("offset").get<std::uint64_t>()};
      const std::uint64_t bytes = byte_size(entry.shape);
      if (entry.offset > std::numeric_limits<std::uint64_t>::max() - bytes ||
          entry.offset + bytes > declared) {
        throw WeightsError(Kind::OffsetOverflow,
                           "tensor " + name + " extends past the declared blob size");
      }
      store.manifest.emplace(name, entry);
    }
  } catch (const json::exception& e) {
    throw WeightsError(Kind::Manifest, std::string("malformed manifest: ") + e.what());
  }

  std::ifstream b(blob_path, std::ios::binary | std::ios::ate);
  if (!b) throw IoError("cannot open " + blob_path.string());
  const auto size = static_cast<std::uint64_t>(b.tellg());
  b.seekg(0);
  store.blob.resize(size);
  b.read(reinterpret_cast<char*>(store.blob.data()), static_cast<std::streamsize>(size));

  for (const auto& [name, entry] : store.manifest) {
    if (entry.offset + byte_size(entry.shape) > size) {
      throw WeightsError(Kind::Truncated, "weight blob truncated inside tensor " + name + " (" +
                                              std::to_string(size) + " of " +
                                              std::to_string(declared) + " bytes present)");
    }
  }
  return store;
}

Network build_network(const NetworkConfig& cfg, const WeightStore& weights) {
  using Kind = WeightsError::Kind;
  NetworkPlan plan = plan_network(cfg);
  const std::vector<ParamSpec> specs = param_specs(plan);
  std::map<std::string, Shape4> expected;
  for (const ParamSpec& s : specs) expected.emplace(s.name, s.shape);
  for (const auto& [name, entry] : weights.manifest) {
    auto it = expected.find(name);
    if (it == expected.end()) {
      throw WeightsError(Kind::UnknownLayer, "weights list unknown tensor " + name);
    }
    if (it->second != entry.shape) {
      throw WeightsError(Kind::ShapeMismatch, "tensor " + name + " stored as " +
                                                  entry.shape.str() + ", config expects " +
                                                  it->second.str());
    }
  }
  for (const ParamSpec& s : specs) {
    if (!weights.manifest.contains(s.name)) {
      throw WeightsError(Kind::Missing, "weights lack tensor " + s.name);
    }
  }
  return Network(std::move(plan), weights.tensors());
}

}  // namespace vehdet
