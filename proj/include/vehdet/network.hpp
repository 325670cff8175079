#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vehdet/blocks.hpp"
#include "vehdet/config.hpp"
#include "vehdet/image.hpp"
#include "vehdet/plan.hpp"
#include "vehdet/tensor.hpp"

namespace vehdet {

/// Parameter tensors keyed by ParamSpec::name.
using ParamStore = std::map<std::string, Tensor>;

/// Raw multi-box head outputs, one entry per present tap in slot order.
struct HeadOutput {
  std::vector<Tensor> loc;   ///< (n, B * 4, h, w)
  std::vector<Tensor> conf;  ///< (n, B * classes, h, w)
  std::vector<std::pair<int, int>> tap_shapes;  ///< (h, w)
  std::vector<int> boxes;                       ///< B per tap
  int num_classes = 2;

  [[nodiscard]] std::size_t num_priors() const;
};

/// Parameters initialised from `seed`: He-uniform convolution weights drawn
/// from a per-tensor stream (so adding or removing a layer leaves every other
/// tensor untouched), zero biases and offset predictors, identity batch norm.
ParamStore random_params(const NetworkPlan& plan, std::uint64_t seed);

/// Immutable executable detector. Safe to share across threads; forward()
/// allocates its own activations.
class Network {
 public:
  /// Throws ConfigError if a parameter is missing, unknown or mis-shaped.
  Network(NetworkPlan plan, ParamStore params);

  [[nodiscard]] const NetworkPlan& plan() const { return plan_; }
  [[nodiscard]] const NetworkConfig& config() const { return plan_.cfg; }
  [[nodiscard]] const ParamStore& params() const { return params_; }

  /// Inputs of the per-tap heads (after DAB where enabled), in tap order.
  [[nodiscard]] std::vector<Tensor> tap_features(const Tensor& image) const;

  /// image must be (1, 3, input_size, input_size).
  [[nodiscard]] HeadOutput forward(const Tensor& image) const;

 private:
  [[nodiscard]] Tensor run_block(const BlockPlan& block, const Tensor& x) const;
  [[nodiscard]] ConvParams conv(const LayerSpec& layer) const;
  [[nodiscard]] ConvParams conv(const BlockPlan& block, const std::string& suffix) const;
  [[nodiscard]] BnParams bn(const BlockPlan& block, const std::string& suffix) const;
  [[nodiscard]] const Tensor& param(const std::string& name) const;

  NetworkPlan plan_;
  ParamStore params_;
};

Network build_network(const NetworkConfig& cfg, std::uint64_t seed);
Network build_network(const NetworkConfig& cfg, ParamStore params);

/// Bilinear (half-pixel centre) resize to size x size, RGB planes scaled to
/// [0, 1] and shifted by -mean per channel. Output shape (1, 3, size, size).
Tensor preprocess(const RgbImage& image, int size, const std::array<float, 3>& mean = {});

}  // namespace vehdet
