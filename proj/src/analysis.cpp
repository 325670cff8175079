#include "vehdet/analysis.hpp"

#include <cstdio>
#include <sstream>

#include "vehdet/error.hpp"

namespace vehdet {

CostTotals& CostTotals::operator+=(const LayerCost& c) {
  macs += c.macs;
  flops += c.flops;
  params += c.params;
  return *this;
}

LayerCost conv_cost(int in_c, int out_c, int k, int out_h, int out_w, int groups, bool bias) {
  if (groups < 1 || in_c % groups != 0 || out_c % groups != 0) {
    throw ShapeError("conv_cost: channels " + std::to_string(in_c) + "->" +
                     std::to_string(out_c) + " not divisible by groups " + std::to_string(groups));
  }
  LayerCost c;
  c.kind = "conv";
  const std::int64_t per_output = static_cast<std::int64_t>(in_c / groups) * k * k;
  c.macs = static_cast<std::int64_t>(out_h) * out_w * out_c * per_output;
  c.flops = 2 * c.macs;
  c.params = static_cast<std::int64_t>(out_c) * per_output + (bias ? out_c : 0);
  return c;
}

double depthwise_separable_ratio(int out_channels, int k) {
  return 1.0 / out_channels + 1.0 / (static_cast<double>(k) * k);
}

LayerCost layer_cost(const LayerSpec& l) {
  LayerCost c;
  const std::int64_t elements = static_cast<std::int64_t>(l.out_c) * l.out_h * l.out_w;
  switch (l.kind) {
    case LayerKind::Conv:
    case LayerKind::DepthwiseConv:
      c = conv_cost(l.in_c, l.out_c, l.kernel, l.out_h, l.out_w, l.groups, l.bias);
      break;
    case LayerKind::DeformableConv: {
      c = conv_cost(l.in_c, l.out_c, l.kernel, l.out_h, l.out_w, l.groups, l.bias);
      const std::int64_t samples =
          static_cast<std::int64_t>(l.out_h) * l.out_w * l.in_c * l.kernel * l.kernel;
      c.flops += 8 * samples;
      break;
    }
    case LayerKind::BatchNorm:
      c.flops = 2 * elements;
      c.params = 2 * static_cast<std::int64_t>(l.out_c);
      break;
    case LayerKind::Relu:
    case LayerKind::Add:
      c.flops = elements;
      break;
    case LayerKind::MaxPool:
    case LayerKind::AvgPool:
      c.flops = elements * l.kernel * l.kernel;
      break;
    case LayerKind::ChannelShuffle:
    case LayerKind::Concat:
    case LayerKind::Slice:
      break;
  }
  c.name = l.name;
  c.kind = layer_kind_name(l.kind);
  return c;
}

FlopsReport network_cost(const NetworkPlan& plan) {
  FlopsReport report;
  report.config = plan.cfg;
  for (const BlockPlan* block : all_blocks(plan)) {
    for (const LayerSpec& l : block->layers) {
      LayerCost c = layer_cost(l);
      c.block = block->name;
      c.stage = block->stage;
      report.totals += c;
      report.per_stage[c.stage] += c;
      report.per_block[c.block] += c;
      report.layers.push_back(std::move(c));
    }
  }
  return report;
}

FlopsReport network_cost(const NetworkConfig& cfg) { return network_cost(plan_network(cfg)); }

namespace {

nlohmann::json totals_json(const CostTotals& t) {
  return {{"macs", t.macs}, {"flops", t.flops}, {"params", t.params}, {"gflops", t.gflops()}};
}

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

}  // namespace

nlohmann::json FlopsReport::to_json() const {
  nlohmann::json j;
  j["config"] = config_to_json(config);
  j["totals"] = totals_json(totals);
  for (const auto& [stage, t] : per_stage) j["per_stage"][stage] = totals_json(t);
  nlohmann::json layers_json = nlohmann::json::array();
  for (const LayerCost& c : layers) {
    layers_json.push_back({{"name", c.name},
                           {"block", c.block},
                           {"stage", c.stage},
                           {"kind", c.kind},
                           {"macs", c.macs},
                           {"flops", c.flops},
                           {"params", c.params}});
  }
  j["layers"] = std::move(layers_json);
  return j;
}

std::string FlopsReport::to_text(bool per_layer) const {
  std::ostringstream out;
  if (per_layer) {
    out << fmt("%-36s %-11s %16s %16s %12s\n", "layer", "kind", "MACs", "FLOPs", "params");
    for (const LayerCost& c : layers) {
      out << fmt("%-36s %-11s %16lld %16lld %12lld\n", c.name.c_str(), c.kind.c_str(),
                 static_cast<long long>(c.macs), static_cast<long long>(c.flops),
                 static_cast<long long>(c.params));
    }
    out << "\n";
  }
  out << fmt("%-10s %16s %16s %10s %12s\n", "stage", "MACs", "FLOPs", "GFLOPs", "params");
  for (const auto& [stage, t] : per_stage) {
    out << fmt("%-10s %16lld %16lld %10.4f %12lld\n", stage.c_str(),
               static_cast<long long>(t.macs), static_cast<long long>(t.flops), t.gflops(),
               static_cast<long long>(t.params));
  }
  out << fmt("%-10s %16lld %16lld %10.4f %12lld\n", "total", static_cast<long long>(totals.macs),
             static_cast<long long>(totals.flops), totals.gflops(),
             static_cast<long long>(totals.params));
  return out.str();
}

std::vector<AblationRow> ablation_table(const std::vector<NetworkConfig>& cfgs,
                                        const std::vector<std::string>& labels) {
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const FlopsReport r = network_cost(cfgs[i]);
    AblationRow row;
    row.label = i < labels.size() ? labels[i] : "config " + std::to_string(i);
    row.toggles.assign(cfgs[i].dab_enabled.begin(), cfgs[i].dab_enabled.end());
    row.toggles.insert(row.toggles.end(), cfgs[i].mincep_enabled.begin(),
                       cfgs[i].mincep_enabled.end());
    row.flops = r.totals.flops;
    row.gflops = r.totals.gflops();
    row.params = r.totals.params;
    row.delta_flops = rows.empty() ? 0 : row.flops - rows.front().flops;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<NetworkConfig> dab_ablation_grid(const NetworkConfig& full) {
  std::vector<NetworkConfig> grid;
  for (int k = 0; k <= 6; ++k) {
    NetworkConfig cfg = full;
    for (int t = 0; t < kNumTaps; ++t) cfg.dab_enabled[static_cast<std::size_t>(t)] = t < k;
    grid.push_back(cfg);
  }
  return grid;
}

std::vector<std::string> dab_ablation_labels() {
  return {"no DAB",          "+DAB-stage2",     "+DAB-stage3",    "+DAB-stage4",
          "+DAB-mincep-1",   "+DAB-mincep-2",   "+DAB-mincep-3"};
}

std::vector<NetworkConfig> mincep_ablation_grid(const NetworkConfig& full) {
  std::vector<NetworkConfig> grid{baseline_config(full)};
  for (int k = 0; k <= kNumExtraLayers; ++k) {
    NetworkConfig cfg = full;
    cfg.extra_fallback = ExtraFallback::Plain;
    for (int e = 0; e < kNumExtraLayers; ++e) cfg.mincep_enabled[static_cast<std::size_t>(e)] = e < k;
    grid.push_back(cfg);
  }
  return grid;
}

std::vector<std::string> mincep_ablation_labels() {
  return {"ShuffleNet-SSD baseline", "plain extras",   "+mincep-1",
          "+mincep-2",               "+mincep-3",      "+mincep-4"};
}

std::string ablation_to_text(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << fmt("%-26s %-24s %10s %12s %14s\n", "row", "dab(7) | mincep(4)", "GFLOPs", "params",
             "delta FLOPs");
  for (const AblationRow& r : rows) {
    std::string toggles;
    for (std::size_t i = 0; i < r.toggles.size(); ++i) {
      if (i == kNumTaps) toggles += " | ";
      toggles += r.toggles[i] ? 'x' : '-';
    }
    out << fmt("%-26s %-24s %10.4f %12lld %14lld\n", r.label.c_str(), toggles.c_str(), r.gflops,
               static_cast<long long>(r.params), static_cast<long long>(r.delta_flops));
  }
  return out.str();
}

nlohmann::json ablation_to_json(const std::vector<AblationRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const AblationRow& r : rows) {
    arr.push_back({{"label", r.label},
                   {"toggles", r.toggles},
                   {"gflops", r.gflops},
                   {"flops", r.flops},
                   {"params", r.params},
                   {"delta_flops", r.delta_flops}});
  }
  return arr;
}

}  // namespace vehdet
