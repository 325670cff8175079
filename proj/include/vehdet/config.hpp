#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vehdet/blocks.hpp"

namespace vehdet {

inline constexpr int kNumTaps = 7;
inline constexpr int kNumExtraLayers = 4;

/// What occupies an extra-layer slot whose mincep block is disabled.
enum class ExtraFallback {
  None,   ///< the slot and every later slot are dropped
  Plain,  ///< SSD-style 1x1 conv followed by a 3x3/2 conv
};

/// Declarative description of the detector graph. Tap order is stage2,
/// stage3, stage4, extra1..extra4.
struct NetworkConfig {
  int input_size = 512;
  int groups = 3;
  std::array<int, 4> stage_widths{24, 240, 480, 960};
  std::array<int, 3> unit_counts{3, 7, 3};
  /// ShuffleUnit bottleneck width = stage width / bottleneck_divisor.
  int bottleneck_divisor = 4;
  std::array<int, kNumExtraLayers> mincep_widths{512, 256, 256, 256};
  std::array<bool, kNumExtraLayers> mincep_enabled{true, true, true, true};
  ExtraFallback extra_fallback = ExtraFallback::None;
  bool stage2_tap = true;
  std::array<bool, kNumTaps> dab_enabled{true, true, true, true, true, true, true};
  std::array<Fraction, kNumTaps> dab_portions{
      Fraction{1, 8}, Fraction{1, 8}, Fraction{1, 8}, Fraction{1, 4},
      Fraction{1, 2}, Fraction{1, 2}, Fraction{1, 1}};
  /// Recorded in reports; the reducing 1x1 conv keeps ceil(C'/5) channels.
  std::array<Fraction, 3> dab_branch_portions{Fraction{1, 5}, Fraction{4, 5}, Fraction{4, 5}};
  std::array<int, kNumTaps> boxes_per_location{4, 6, 6, 6, 4, 4, 4};
  int num_classes = 2;
  std::array<float, 3> pixel_mean{0.0f, 0.0f, 0.0f};
  double prior_min_scale = 0.05;
  double prior_max_scale = 0.4;
  std::array<double, 2> variances{0.1, 0.2};
  double match_iou_threshold = 0.5;
  double conf_threshold = 0.5;
  double nms_threshold = 0.3;

  /// Throws ConfigError when an invariant is broken.
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Names of the seven tap slots, in tap order.
const std::array<std::string, kNumTaps>& tap_slot_names();

/// Whether extra-layer slot k (0-based) is present in the graph.
bool extra_layer_present(const NetworkConfig& cfg, int k);

/// Whether tap slot t (0-based) is present in the graph.
bool tap_present(const NetworkConfig& cfg, int t);

/// The ShuffleNet-SSD reference point: no stage-2 tap, plain extra layers, no DAB.
NetworkConfig baseline_config(NetworkConfig cfg = {});

nlohmann::json config_to_json(const NetworkConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
NetworkConfig config_from_json(const nlohmann::json& j);
NetworkConfig parse_config(std::string_view text);
NetworkConfig load_config(const std::filesystem::path& path);

}  // namespace vehdet
