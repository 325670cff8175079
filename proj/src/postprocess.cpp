#include "vehdet/postprocess.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "vehdet/error.hpp"

namespace vehdet {

namespace {

bool ranks_before(const Detection& a, std::size_t ia, const Detection& b, std::size_t ib) {
  if (a.score != b.score) return a.score > b.score;
  if (a.class_id != b.class_id) return a.class_id < b.class_id;
  if (a.box.xmin != b.box.xmin) return a.box.xmin < b.box.xmin;
  if (a.box.ymin != b.box.ymin) return a.box.ymin < b.box.ymin;
  if (a.box.xmax != b.box.xmax) return a.box.xmax < b.box.xmax;
  if (a.box.ymax != b.box.ymax) return a.box.ymax < b.box.ymax;
  return ia < ib;
}

/// IoU where an empty box overlaps nothing; nms must not fail on such input.
double overlap(const Box& a, const Box& b) {
  if (!(a.width() > 0 && a.height() > 0 && b.width() > 0 && b.height() > 0)) return 0;
  return iou(a, b);
}

}  // namespace

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranks_before(dets[a], a, dets[b], b);
  });

  std::map<int, std::vector<Box>> kept_by_class;
  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const Detection& d = dets[idx];
    auto& same_class = kept_by_class[d.class_id];
    const bool suppressed = std::any_of(same_class.begin(), same_class.end(),
                                        [&](const Box& k) { return overlap(d.box, k) > iou_threshold; });
    if (suppressed) continue;
    same_class.push_back(d.box);
    kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> run_postprocess(const HeadOutput& head, const PriorSet& priors,
                                       double conf_threshold, double nms_threshold,
                                       int image_width, int image_height, Variances v) {
  if (head.num_priors() != priors.size()) {
    throw ShapeError("head predicts " + std::to_string(head.num_priors()) +
                     " priors, prior set has " + std::to_string(priors.size()));
  }
  if (image_width < 1 || image_height < 1) throw ShapeError("image dimensions must be positive");
  const auto loc = flatten_loc(head);
  const auto conf = flatten_conf(head);

  std::vector<Detection> candidates;
  for (std::size_t p = 0; p < priors.size(); ++p) {
    const std::vector<double> prob = softmax(conf[p]);
    std::optional<Box> box;
    for (int c = 1; c < head.num_classes; ++c) {
      const double score = prob[static_cast<std::size_t>(c)];
      if (score < conf_threshold) continue;
      if (!box) {
        const Box b = decode_box(loc[p], priors.boxes[p], v);
        box = Box{b.xmin * image_width, b.ymin * image_height, b.xmax * image_width,
                  b.ymax * image_height};
      }
      if (!(box->width() > 0 && box->height() > 0)) break;
      candidates.push_back({c, score, *box});
    }
  }
  return nms(candidates, nms_threshold);
}

std::vector<int> tile_origins(int extent, int tile, int overlap) {
  if (tile < 1 || overlap < 0 || overlap >= tile) {
    throw ShapeError("tiling needs tile > overlap >= 0");
  }
  if (extent < 1) throw ShapeError("image extent must be positive");
  if (extent <= tile) return {0};
  const int stride = tile - overlap;
  std::vector<int> origins;
  for (int o = 0; o + tile < extent; o += stride) origins.push_back(o);
  origins.push_back(extent - tile);
  return origins;
}

std::vector<TileWindow> plan_tiles(int image_width, int image_height, int tile, int overlap) {
  const std::vector<int> xs = tile_origins(image_width, tile, overlap);
  const std::vector<int> ys = tile_origins(image_height, tile, overlap);
  const int w = std::min(tile, image_width);
  const int h = std::min(tile, image_height);
  std::vector<TileWindow> windows;
  for (int y : ys) {
    for (int x : xs) windows.push_back({x, y, w, h});
  }
  return windows;
}

std::vector<Detection> merge_tiles(
    const std::vector<std::pair<TileWindow, std::vector<Detection>>>& per_tile,
    double nms_threshold) {
  std::vector<Detection> all;
  for (const auto& [win, dets] : per_tile) {
    for (const Detection& d : dets) {
      if (d.box.xmin < 0 || d.box.ymin < 0 || d.box.xmax > win.width || d.box.ymax > win.height) {
        throw ShapeError("detection box lies outside its tile window");
      }
      Detection moved = d;
      moved.box = {d.box.xmin + win.x0, d.box.ymin + win.y0, d.box.xmax + win.x0,
                   d.box.ymax + win.y0};
      // Sub-ulp boxes can collapse when shifted by the window origin.
      if (!(moved.box.width() > 0 && moved.box.height() > 0)) continue;
      all.push_back(moved);
    }
  }
  return nms(all, nms_threshold);
}

nlohmann::json detections_to_json(const std::string& image_id,
                                  const std::vector<Detection>& dets) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Detection& d : dets) {
    arr.push_back({{"image_id", image_id},
                   {"class", d.class_id},
                   {"score", d.score},
                   {"xmin", d.box.xmin},
                   {"ymin", d.box.ymin},
                   {"xmax", d.box.xmax},
                   {"ymax", d.box.ymax}});
  }
  return arr;
}

std::vector<std::pair<std::string, std::vector<Detection>>> detections_from_json(
    const nlohmann::json& j) {
  if (!j.is_array()) throw IoError("detections JSON must be an array");
  std::vector<std::pair<std::string, std::vector<Detection>>> grouped;
  std::map<std::string, std::size_t> index;
  try {
    for (const auto& item : j) {
      const std::string id = item.at("image_id").is_string()
                                 ? item.at("image_id").get<std::string>()
                                 : item.at("image_id").dump();
      Detection d;
      d.class_id = item.at("class").get<int>();
      d.score = item.at("score").get<double>();
      d.box = {item.at("xmin").get<double>(), item.at("ymin").get<double>(),
               item.at("xmax").get<double>(), item.at("ymax").get<double>()};
      auto [it, inserted] = index.emplace(id, grouped.size());
      if (inserted) grouped.emplace_back(id, std::vector<Detection>{});
      grouped[it->second].second.push_back(d);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed detection record: ") + e.what());
  }
  return grouped;
}

}  // namespace vehdet
