#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "vehdet/config.hpp"
#include "vehdet/plan.hpp"

namespace vehdet {

/// Cost of one primitive layer. FLOPs are 2 x MACs for convolutions; pools
/// cost one op per window tap per output, batch norm two ops per element,
/// ReLU and residual add one, shuffles/slices/concats nothing. Deformable
/// convolutions add 8 ops per bilinear sample.
struct LayerCost {
  std::string name;
  std::string block;
  std::string stage;
  std::string kind;
  std::int64_t macs = 0;
  std::int64_t flops = 0;
  std::int64_t params = 0;
};

struct CostTotals {
  std::int64_t macs = 0;
  std::int64_t flops = 0;
  std::int64_t params = 0;

  [[nodiscard]] double gflops() const { return static_cast<double>(flops) / 1e9; }
  CostTotals& operator+=(const LayerCost& c);
};

struct FlopsReport {
  std::vector<LayerCost> layers;
  CostTotals totals;
  std::map<std::string, CostTotals> per_stage;
  std::map<std::string, CostTotals> per_block;
  NetworkConfig config;

  [[nodiscard]] nlohmann::json to_json() const;
  /// Aligned per-stage table followed by the totals.
  [[nodiscard]] std::string to_text(bool per_layer = false) const;
};

/// macs = Hout Wout Cout (Cin / groups) k^2; params = Cout (Cin / groups) k^2 (+ Cout with bias).
LayerCost conv_cost(int in_c, int out_c, int k, int out_h, int out_w, int groups,
                    bool bias = false);

/// Cost of (depthwise k x k + pointwise 1 x 1) relative to a dense k x k conv
/// with N output channels: 1/N + 1/k^2.
double depthwise_separable_ratio(int out_channels, int k);

/// Cost of a single planned layer.
LayerCost layer_cost(const LayerSpec& layer);

/// Walks the same plan the detector executes.
FlopsReport network_cost(const NetworkConfig& cfg);
FlopsReport network_cost(const NetworkPlan& plan);

struct AblationRow {
  std::string label;
  std::vector<bool> toggles;  ///< dab_enabled (7) then mincep_enabled (4)
  double gflops = 0;
  std::int64_t flops = 0;
  std::int64_t params = 0;
  std::int64_t delta_flops = 0;  ///< vs the first row
};

std::vector<AblationRow> ablation_table(const std::vector<NetworkConfig>& cfgs,
                                        const std::vector<std::string>& labels = {});

/// Rows k = 0..6 of the DAB grid: the first k of stage2, stage3, stage4,
/// extra1, extra2, extra3 DABs enabled on top of `full` (extra4's DAB off).
std::vector<NetworkConfig> dab_ablation_grid(const NetworkConfig& full = {});
std::vector<std::string> dab_ablation_labels();

/// Rows of the mincep grid: baseline, then mincep blocks enabled one by one
/// over plain extra layers with DABs in place.
std::vector<NetworkConfig> mincep_ablation_grid(const NetworkConfig& full = {});
std::vector<std::string> mincep_ablation_labels();

std::string ablation_to_text(const std::vector<AblationRow>& rows);
nlohmann::json ablation_to_json(const std::vector<AblationRow>& rows);

}  // namespace vehdet
