#pragma once

#include <vector>

#include "vehdet/image.hpp"
#include "vehdet/network.hpp"
#include "vehdet/postprocess.hpp"
#include "vehdet/ssd_head.hpp"

namespace vehdet {

struct DetectOptions {
  bool tile = false;
  int tile_size = 512;
  int overlap = 100;
};

/// Resize, forward and postprocess one image; boxes in its pixel coordinates.
std::vector<Detection> detect_single(const Network& net, const PriorSet& priors,
                                     const RgbImage& image);

/// detect_single per window of plan_tiles, each window already NMS-filtered,
/// then merged with a global NMS. Without `tile` this is detect_single.
std::vector<Detection> detect(const Network& net, const PriorSet& priors, const RgbImage& image,
                              const DetectOptions& opts = {});

}  // namespace vehdet
