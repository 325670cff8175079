#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "vehdet/error.hpp"
#include "vehdet/network.hpp"

namespace vehdet {

/// Weight-file failures, each with its own kind so callers can tell them apart.
class WeightsError : public IoError {
 public:
  enum class Kind { Manifest, OffsetOverflow, Truncated, ShapeMismatch, UnknownLayer, Missing };

  WeightsError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  [[nodiscard]] Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ManifestEntry {
  Shape4 shape;
  std::uint64_t offset = 0;  ///< bytes into the blob
};

/// JSON manifest (name -> shape, byte offset) plus a little-endian float32 blob.
struct WeightStore {
  std::map<std::string, ManifestEntry> manifest;
  std::vector<std::uint8_t> blob;

  /// Decodes every tensor; throws WeightsError on out-of-bounds entries.
  [[nodiscard]] ParamStore tensors() const;
};

WeightStore make_weight_store(const ParamStore& params);

/// Writes `<prefix>.json` and `<prefix>.bin`. Entries are laid out in name order.
void save_weights(const Network& net, const std::filesystem::path& manifest_path,
                  const std::filesystem::path& blob_path);

WeightStore load_weights(const std::filesystem::path& manifest_path,
                         const std::filesystem::path& blob_path);

/// Network from a config and stored weights, checking every tensor against the plan.
Network build_network(const NetworkConfig& cfg, const WeightStore& weights);

/// Blob path paired with a manifest path: foo.json -> foo.bin.
std::filesystem::path blob_path_for(const std::filesystem::path& manifest_path);

}  // namespace vehdet
