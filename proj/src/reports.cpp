#include "vehdet/reports.hpp"

#include <cstdio>
#include <sstream>

#include "vehdet/analysis.hpp"
#include "vehdet/plan.hpp"
#include "vehdet/ssd_head.hpp"

namespace vehdet {

namespace {

std::string line(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

}  // namespace

nlohmann::json priors_report_json(const NetworkConfig& cfg) {
  const NetworkPlan plan = plan_network(cfg);
  const PriorSet priors = generate_priors(cfg);
  nlohmann::json taps = nlohmann::json::array();
  for (std::size_t t = 0; t < plan.taps.size(); ++t) {
    const TapPlan& tap = plan.taps[t];
    taps.push_back({{"tap", tap.name},
                    {"h", tap.h},
                    {"w", tap.w},
                    {"boxes", tap.boxes},
                    {"scale", priors.scales[t]},
                    {"priors", priors.per_tap[t]}});
  }
  const auto total = static_cast<long long>(priors.size());
  const auto published = static_cast<long long>(kPublishedPriorCount);
  return {{"taps", taps},
          {"total", total},
          {"published_reference", published},
          {"difference", total - published}};
}

std::string priors_report_text(const NetworkConfig& cfg) {
  const nlohmann::json j = priors_report_json(cfg);
  std::ostringstream out;
  out << line("%-8s %9s %6s %8s %8s\n", "tap", "grid", "boxes", "scale", "priors");
  for (const auto& t : j["taps"]) {
    const std::string grid =
        std::to_string(t["h"].get<int>()) + "x" + std::to_string(t["w"].get<int>());
    out << line("%-8s %9s %6d %8.4f %8zu\n", t["tap"].get<std::string>().c_str(), grid.c_str(),
                t["boxes"].get<int>(), t["scale"].get<double>(), t["priors"].get<std::size_t>());
  }
  out << line("total priors: %lld\n", j["total"].get<long long>());
  out << line("published reference: %lld (difference %+lld)\n",
              j["published_reference"].get<long long>(), j["difference"].get<long long>());
  out << "note: the published count is not reproduced by sum(h * w * boxes) over these taps; "
         "the computed total is authoritative.\n";
  return out.str();
}

nlohmann::json flops_summary_json(const NetworkConfig& cfg) {
  const FlopsReport full = network_cost(cfg);
  const FlopsReport base = network_cost(baseline_config(cfg));
  return {{"full", full.to_json()["totals"]},
          {"baseline", base.to_json()["totals"]},
          {"delta_flops", full.totals.flops - base.totals.flops},
          {"delta_gflops", full.totals.gflops() - base.totals.gflops()},
          {"published_reference_gflops",
           {{"baseline", kPublishedBaselineGflops}, {"full", kPublishedFullGflops}}}};
}

std::string flops_summary_text(const NetworkConfig& cfg) {
  const FlopsReport full = network_cost(cfg);
  const FlopsReport base = network_cost(baseline_config(cfg));
  std::ostringstream out;
  out << full.to_text();
  out << "\n";
  out << line("%-10s %10s %12s %12s\n", "network", "GFLOPs", "params", "reference");
  out << line("%-10s %10.4f %12lld %12.2f\n", "baseline", base.totals.gflops(),
              static_cast<long long>(base.totals.params), kPublishedBaselineGflops);
  out << line("%-10s %10.4f %12lld %12.2f\n", "full", full.totals.gflops(),
              static_cast<long long>(full.totals.params), kPublishedFullGflops);
  out << line("%-10s %10.4f %12s %12.2f\n", "delta", full.totals.gflops() - base.totals.gflops(),
              "", kPublishedFullGflops - kPublishedBaselineGflops);
  return out.str();
}

}  // namespace vehdet
