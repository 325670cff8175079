#pragma once

#include <array>
#include <optional>
#include <vector>

#include "vehdet/config.hpp"
#include "vehdet/network.hpp"

namespace vehdet {

/// Corner-form box (xmin, ymin, xmax, ymax).
struct Box {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;

  [[nodiscard]] double width() const { return xmax - xmin; }
  [[nodiscard]] double height() const { return ymax - ymin; }
  [[nodiscard]] double area() const { return width() * height(); }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Default box in centre form, normalised to [0, 1] image coordinates.
struct PriorBox {
  double cx = 0, cy = 0, w = 0, h = 0;

  [[nodiscard]] Box corners() const { return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2}; }
};

/// Ordered default boxes: tap-major, then row-major over the tap grid, then
/// box index within the cell.
struct PriorSet {
  std::vector<PriorBox> boxes;
  std::vector<std::size_t> per_tap;
  std::vector<double> scales;  ///< s_k per present tap

  [[nodiscard]] std::size_t size() const { return boxes.size(); }
};

struct Variances {
  double center = 0.1;
  double size = 0.2;
};

/// Scale of tap k (0-based) out of m: s_min + (s_max - s_min) k / (m - 1).
double prior_scale(double s_min, double s_max, int k, int m);

/// Aspect ratios for one cell: B = 4 -> {1, 1', 2, 1/2}; B = 6 adds {3, 1/3}.
/// The second ratio-1 box uses scale sqrt(s_k s_{k+1}) with s_{m+1} = 1.
PriorSet generate_priors(const NetworkConfig& cfg);

/// Same, for explicit tap grids (h, w) and boxes per location.
PriorSet generate_priors(const std::vector<std::pair<int, int>>& tap_shapes,
                         const std::vector<int>& boxes, double s_min, double s_max);

std::array<double, 4> encode_box(const Box& gt, const PriorBox& prior, Variances v = {});
/// Inverse of encode_box, with corners clamped to [0, 1].
Box decode_box(const std::array<double, 4>& t, const PriorBox& prior, Variances v = {});

/// Intersection over union of corner-form boxes; 0 when disjoint. Throws
/// ShapeError on boxes with non-positive extent.
double iou(const Box& a, const Box& b);

struct MatchResult {
  std::vector<int> matched_gt;    ///< per prior; -1 is background
  std::vector<double> best_iou;   ///< per prior IoU with its best gt (0 without gts)
};

/// Each gt first claims its best prior (greedy on the global IoU maximum so
/// gts never share), then every other prior takes its best gt if the IoU
/// reaches the threshold.
MatchResult match_priors(const std::vector<Box>& gts, const PriorSet& priors,
                         double iou_threshold = 0.5);

struct LossReport {
  double loc_loss = 0;
  double conf_loss = 0;
  std::size_t num_pos = 0;
  std::size_t num_neg_mined = 0;
  std::vector<std::size_t> mined;  ///< prior indices of the kept negatives
};

/// Indices of the `count` highest-loss negatives; ties prefer lower prior index.
std::vector<std::size_t> mine_hard_negatives(const std::vector<double>& background_loss,
                                             const std::vector<bool>& is_positive,
                                             std::size_t count);

/// Multibox loss for a single image: smooth-L1 over positives plus softmax
/// cross-entropy over positives and the top 3 * num_pos negatives ranked by
/// background loss, both divided by num_pos. Class labels are >= 1 (0 is
/// background). With no positives every term is zero.
LossReport multibox_loss(const HeadOutput& head, const PriorSet& priors,
                         const std::vector<Box>& gts, const std::vector<int>& labels,
                         double iou_threshold = 0.5, Variances v = {}, double neg_pos_ratio = 3.0);

/// Flattened (num_priors, 4) loc predictions and (num_priors, classes) logits
/// in prior order.
std::vector<std::array<double, 4>> flatten_loc(const HeadOutput& head);
std::vector<std::vector<double>> flatten_conf(const HeadOutput& head);

std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace vehdet
