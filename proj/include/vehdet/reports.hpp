#pragma once

#include <cstddef>
#include <string>

#include "json.hpp"
#include "vehdet/config.hpp"

namespace vehdet {

/// Prior count quoted for the 512 x 512 detector in the published description.
inline constexpr std::size_t kPublishedPriorCount = 28642;
/// Published complexity figures (GFLOPs) for the SSD baseline and the full detector.
inline constexpr double kPublishedBaselineGflops = 2.94;
inline constexpr double kPublishedFullGflops = 3.8;

/// Per-tap grid, boxes per cell and prior count, the total, and the gap to
/// kPublishedPriorCount.
std::string priors_report_text(const NetworkConfig& cfg);
nlohmann::json priors_report_json(const NetworkConfig& cfg);

/// Totals of `cfg` and of its baseline counterpart with the delta between them.
std::string flops_summary_text(const NetworkConfig& cfg);
nlohmann::json flops_summary_json(const NetworkConfig& cfg);

}  // namespace vehdet
