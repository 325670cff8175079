#include "vehdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "vehdet/error.hpp"

namespace vehdet {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_number(const std::string& field, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used == field.size() && std::isfinite(v)) return v;
  } catch (const std::logic_error&) {
  }
  throw IoError("annotations line " + std::to_string(line_no) + ": bad number '" + field + "'");
}

/// IoU that treats degenerate boxes as non-overlapping instead of failing.
double overlap(const Box& a, const Box& b) {
  if (a.width() <= 0 || a.height() <= 0 || b.width() <= 0 || b.height() <= 0) return 0;
  return iou(a, b);
}

template <typename A, typename B>
void require_same_ids(const std::map<std::string, A>& a, const std::map<std::string, B>& b) {
  std::vector<std::string> only_a, only_b;
  for (const auto& [id, _] : a) {
    if (!b.contains(id)) only_a.push_back(id);
  }
  for (const auto& [id, _] : b) {
    if (!a.contains(id)) only_b.push_back(id);
  }
  if (only_a.empty() && only_b.empty()) return;
  std::string msg = "image id sets differ:";
  if (!only_a.empty()) msg += " '" + only_a.front() + "' has detections but no ground truth";
  if (!only_b.empty()) msg += " '" + only_b.front() + "' has ground truth but no detections entry";
  throw Error(msg);
}

}  // namespace

AnnotationsByImage parse_annotations_csv(const std::string& text) {
  AnnotationsByImage out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.starts_with('#') || line.starts_with("image_id")) continue;
    std::vector<std::string> fields;
    std::stringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) fields.push_back(trim(field));
    if (fields.size() != 6) {
      throw IoError("annotations line " + std::to_string(line_no) + ": expected 6 fields, got " +
                    std::to_string(fields.size()));
    }
    Annotation a;
    a.box = {parse_number(fields[1], line_no), parse_number(fields[2], line_no),
             parse_number(fields[3], line_no), parse_number(fields[4], line_no)};
    const double cls = parse_number(fields[5], line_no);
    if (cls < 1 || cls != std::floor(cls)) {
      throw IoError("annotations line " + std::to_string(line_no) + ": class must be an integer >= 1");
    }
    a.class_id = static_cast<int>(cls);
    if (a.box.width() <= 0 || a.box.height() <= 0) {
      throw IoError("annotations line " + std::to_string(line_no) + ": empty box");
    }
    out[fields[0]].push_back(a);
  }
  return out;
}

AnnotationsByImage load_annotations_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_annotations_csv(buf.str());
}

EvalSummary evaluate_counts(const std::map<std::string, std::size_t>& predicted,
                            const std::map<std::string, std::size_t>& ground_truth) {
  require_same_ids(predicted, ground_truth);
  EvalSummary s;
  double abs_sum = 0, sq_sum = 0;
  for (const auto& [id, gt] : ground_truth) {
    const std::size_t pred = predicted.at(id);
    s.per_image.push_back({id, pred, gt});
    const double d = static_cast<double>(pred) - static_cast<double>(gt);
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  if (!s.per_image.empty()) {
    const auto n = static_cast<double>(s.per_image.size());
    s.mae = abs_sum / n;
    s.rmse = std::sqrt(sq_sum / n);
  }
  return s;
}

EvalSummary evaluate_counts(const DetectionsByImage& dets, const AnnotationsByImage& gts) {
  std::map<std::string, std::size_t> pred, truth;
  for (const auto& [id, d] : dets) pred[id] = d.size();
  for (const auto& [id, g] : gts) truth[id] = g.size();
  return evaluate_counts(pred, truth);
}

double evaluate_ap(const DetectionsByImage& dets, const AnnotationsByImage& gts,
                   double iou_threshold, std::vector<PrPoint>* curve) {
  require_same_ids(dets, gts);
  struct Ranked {
    const std::string* image;
    const Detection* det;
    std::size_t order;
  };
  std::vector<Ranked> ranked;
  for (const auto& [id, list] : dets) {
    for (const Detection& d : list) ranked.push_back({&id, &d, ranked.size()});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    return a.det->score > b.det->score;
  });

  std::size_t total_gt = 0;
  std::map<std::string, std::vector<bool>> taken;
  for (const auto& [id, list] : gts) {
    total_gt += list.size();
    taken[id].assign(list.size(), false);
  }

  std::vector<PrPoint> points;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& truth = gts.at(*ranked[i].image);
    auto& used = taken[*ranked[i].image];
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (used[g] || truth[g].class_id != ranked[i].det->class_id) continue;
      const double o = overlap(ranked[i].det->box, truth[g].box);
      if (o >= best_iou && (best < 0 || o > best_iou)) {
        best = static_cast<int>(g);
        best_iou = o;
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      ++tp;
    }
    points.push_back({static_cast<double>(tp) / static_cast<double>(i + 1),
                      total_gt ? static_cast<double>(tp) / static_cast<double>(total_gt) : 0.0});
  }
  if (curve) *curve = points;
  if (total_gt == 0) return 0;

  // All-point interpolation: precision envelope from the right, summed over recall steps.
  std::vector<double> envelope(points.size());
  double running = 0;
  for (std::size_t i = points.size(); i-- > 0;) {
    running = std::max(running, points[i].precision);
    envelope[i] = running;
  }
  double ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    ap += (points[i].recall - prev_recall) * envelope[i];
    prev_recall = points[i].recall;
  }
  return ap;
}

nlohmann::json eval_to_json(const EvalSummary& s) {
  nlohmann::json per_image = nlohmann::json::array();
  for (const ImageCount& c : s.per_image) {
    per_image.push_back({{"image_id", c.image_id}, {"predicted", c.predicted},
                         {"ground_truth", c.ground_truth}});
  }
  nlohmann::json j = {{"images", per_image}, {"mae", s.mae}, {"rmse", s.rmse}};
  if (s.ap) j["ap"] = *s.ap;
  return j;
}

}  // namespace vehdet
