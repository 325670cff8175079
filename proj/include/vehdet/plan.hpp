#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vehdet/config.hpp"
#include "vehdet/tensor.hpp"

namespace vehdet {

enum class LayerKind {
  Conv,
  DepthwiseConv,
  DeformableConv,
  BatchNorm,
  Relu,
  MaxPool,
  AvgPool,
  ChannelShuffle,
  Add,
  Concat,
  Slice,
};

const char* layer_kind_name(LayerKind kind);

/// One primitive layer of the planned graph with its activation extents.
/// Convolution specs carry kernel/stride/pad/groups; pools carry kernel/stride/pad.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0, out_h = 0, out_w = 0;
  int kernel = 1, stride = 1, pad = 0, groups = 1;
  bool bias = false;
  /// Initialised to zero in random-init mode (offset predictors).
  bool zero_init = false;

  [[nodiscard]] bool is_conv() const {
    return kind == LayerKind::Conv || kind == LayerKind::DepthwiseConv ||
           kind == LayerKind::DeformableConv;
  }
  [[nodiscard]] bool has_params() const { return is_conv() || kind == LayerKind::BatchNorm; }
  [[nodiscard]] Shape4 weight_shape() const { return {out_c, in_c / groups, kernel, kernel}; }
};

enum class BlockKind { Stem, ShuffleUnit, Mincep, PlainExtra, Dab, Head };

struct BlockPlan {
  std::string name;
  BlockKind kind = BlockKind::Stem;
  /// Reporting group: "stage1".."stage4", "extra", "dab", "head".
  std::string stage;
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0, out_h = 0, out_w = 0;
  int stride = 1;
  std::vector<LayerSpec> layers;

  /// Layer by the suffix after "<block name>."; throws if absent.
  [[nodiscard]] const LayerSpec& layer(const std::string& suffix) const;
};

struct TapPlan {
  int slot = 0;  ///< index into tap_slot_names()
  std::string name;
  int source = 0;  ///< index of the backbone block feeding this tap
  int channels = 0, h = 0, w = 0;
  int boxes = 4;
  std::optional<BlockPlan> dab;
  BlockPlan head;
};

/// Shapes and names of every layer for a config; no weights involved.
struct NetworkPlan {
  NetworkConfig cfg;
  std::vector<BlockPlan> backbone;  ///< stem, ShuffleUnits, extra layers, in execution order
  std::vector<TapPlan> taps;        ///< present taps in slot order
};

NetworkPlan plan_network(const NetworkConfig& cfg);

/// A named parameter tensor of the planned graph.
struct ParamSpec {
  std::string name;  ///< "<layer>.weight", "<layer>.bias", "<layer>.gamma", ...
  std::string layer;
  Shape4 shape;
  enum class Init { Kaiming, Zero, One } init = Init::Kaiming;
  int fan_in = 1;
};

std::vector<ParamSpec> param_specs(const NetworkPlan& plan);

/// Every block of the plan in a fixed order: backbone, then per tap DAB and head.
std::vector<const BlockPlan*> all_blocks(const NetworkPlan& plan);

}  // namespace vehdet
