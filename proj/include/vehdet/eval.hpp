#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vehdet/postprocess.hpp"

namespace vehdet {

/// Ground-truth box from an annotation row.
struct Annotation {
  int class_id = 1;
  Box box;  ///< pixels
};

using AnnotationsByImage = std::map<std::string, std::vector<Annotation>>;
using DetectionsByImage = std::map<std::string, std::vector<Detection>>;

/// CSV rows `image_id,xmin,ymin,xmax,ymax,class` in pixels. A header line
/// starting with "image_id" is skipped.
AnnotationsByImage parse_annotations_csv(const std::string& text);
AnnotationsByImage load_annotations_csv(const std::filesystem::path& path);

struct ImageCount {
  std::string image_id;
  std::size_t predicted = 0;
  std::size_t ground_truth = 0;
};

struct EvalSummary {
  std::vector<ImageCount> per_image;
  double mae = 0;
  double rmse = 0;
  std::optional<double> ap;
};

/// MAE and RMSE of per-image object counts. Both maps must cover the same image ids.
EvalSummary evaluate_counts(const std::map<std::string, std::size_t>& predicted,
                            const std::map<std::string, std::size_t>& ground_truth);
EvalSummary evaluate_counts(const DetectionsByImage& dets, const AnnotationsByImage& gts);

/// Point of the precision/recall curve after each ranked detection.
struct PrPoint {
  double precision = 0;
  double recall = 0;
};

/// VOC-style average precision: detections ranked by score, each matched to
/// the unmatched same-class gt of highest IoU >= iou_threshold, AP as the
/// area under the monotone (interpolated) precision envelope.
double evaluate_ap(const DetectionsByImage& dets, const AnnotationsByImage& gts,
                   double iou_threshold = 0.5, std::vector<PrPoint>* curve = nullptr);

nlohmann::json eval_to_json(const EvalSummary& s);

}  // namespace vehdet
