#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vehdet/ssd_head.hpp"

namespace vehdet {

struct Detection {
  int class_id = 1;
  double score = 0;
  Box box;  ///< pixels of the source image

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Greedy per-class NMS. Candidates are visited by descending score, ties
/// broken by box coordinates and then input position, so the result does not
/// depend on input order. A box survives iff its IoU with every kept box of
/// its class is <= iou_threshold. Output is sorted the same way.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold);

/// Softmax per prior, drop background, keep scores >= conf_threshold, decode
/// against the priors, scale to image pixels, then per-class NMS.
std::vector<Detection> run_postprocess(const HeadOutput& head, const PriorSet& priors,
                                       double conf_threshold, double nms_threshold,
                                       int image_width, int image_height, Variances v = {});

struct TileWindow {
  int x0 = 0, y0 = 0, width = 0, height = 0;

  friend bool operator==(const TileWindow&, const TileWindow&) = default;
};

/// Window origins step by tile - overlap; the last window on each axis is
/// shifted back so it ends at the image edge. An axis shorter than the tile
/// gets one window of the full extent.
std::vector<TileWindow> plan_tiles(int image_width, int image_height, int tile = 512,
                                   int overlap = 100);

/// Window origins along one axis.
std::vector<int> tile_origins(int extent, int tile, int overlap);

/// Translates tile-local detections by their window origin, concatenates and
/// applies per-class NMS. Boxes that collapse to zero extent after the shift
/// are dropped. Throws ShapeError if a box leaves its window.
std::vector<Detection> merge_tiles(
    const std::vector<std::pair<TileWindow, std::vector<Detection>>>& per_tile,
    double nms_threshold);

/// JSON array of {image_id, class, score, xmin, ymin, xmax, ymax}.
nlohmann::json detections_to_json(const std::string& image_id,
                                  const std::vector<Detection>& dets);
/// Detections grouped by image_id.
std::vector<std::pair<std::string, std::vector<Detection>>> detections_from_json(
    const nlohmann::json& j);

}  // namespace vehdet
