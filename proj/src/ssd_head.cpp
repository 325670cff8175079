#include "vehdet/ssd_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vehdet/error.hpp"

namespace vehdet {

double prior_scale(double s_min, double s_max, int k, int m) {
  if (m < 2) throw ConfigError("prior scales need at least two taps");
  return s_min + (s_max - s_min) * static_cast<double>(k) / static_cast<double>(m - 1);
}

PriorSet generate_priors(const std::vector<std::pair<int, int>>& tap_shapes,
                         const std::vector<int>& boxes, double s_min, double s_max) {
  const int m = static_cast<int>(tap_shapes.size());
  if (m < 2) throw ConfigError("prior generation needs at least two taps");
  if (boxes.size() != tap_shapes.size()) throw ConfigError("one box count per tap required");
  PriorSet set;
  for (int k = 0; k < m; ++k) {
    const double s = prior_scale(s_min, s_max, k, m);
    const double s_next = k + 1 < m ? prior_scale(s_min, s_max, k + 1, m) : 1.0;
    const int b = boxes[static_cast<std::size_t>(k)];
    if (b != 4 && b != 6) throw ConfigError("boxes per location must be 4 or 6");

    std::vector<std::pair<double, double>> shapes;  // (w, h)
    shapes.emplace_back(s, s);
    const double s_prime = std::sqrt(s * s_next);
    shapes.emplace_back(s_prime, s_prime);
    std::vector<double> ratios{2.0, 0.5};
    if (b == 6) {
      ratios.push_back(3.0);
      ratios.push_back(1.0 / 3.0);
    }
    for (double r : ratios) shapes.emplace_back(s * std::sqrt(r), s / std::sqrt(r));

    const auto [h, w] = tap_shapes[static_cast<std::size_t>(k)];
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double cx = std::clamp((j + 0.5) / w, 0.0, 1.0);
        const double cy = std::clamp((i + 0.5) / h, 0.0, 1.0);
        for (const auto& [bw, bh] : shapes) set.boxes.push_back({cx, cy, bw, bh});
      }
    }
    set.per_tap.push_back(static_cast<std::size_t>(h) * w * b);
    set.scales.push_back(s);
  }
  return set;
}

PriorSet generate_priors(const NetworkConfig& cfg) {
  const NetworkPlan plan = plan_network(cfg);
  std::vector<std::pair<int, int>> shapes;
  std::vector<int> boxes;
  for (const TapPlan& t : plan.taps) {
    shapes.emplace_back(t.h, t.w);
    boxes.push_back(t.boxes);
  }
  return generate_priors(shapes, boxes, cfg.prior_min_scale, cfg.prior_max_scale);
}

std::array<double, 4> encode_box(const Box& gt, const PriorBox& prior, Variances v) {
  if (!(gt.width() > 0 && gt.height() > 0)) throw ShapeError("ground-truth box has no extent");
  const double gcx = (gt.xmin + gt.xmax) / 2;
  const double gcy = (gt.ymin + gt.ymax) / 2;
  return {(gcx - prior.cx) / (prior.w * v.center), (gcy - prior.cy) / (prior.h * v.center),
          std::log(gt.width() / prior.w) / v.size, std::log(gt.height() / prior.h) / v.size};
}

Box decode_box(const std::array<double, 4>& t, const PriorBox& prior, Variances v) {
  const double cx = prior.cx + t[0] * v.center * prior.w;
  const double cy = prior.cy + t[1] * v.center * prior.h;
  const double w = prior.w * std::exp(t[2] * v.size);
  const double h = prior.h * std::exp(t[3] * v.size);
  auto clamp01 = [](double x) { return std::clamp(x, 0.0, 1.0); };
  return {clamp01(cx - w / 2), clamp01(cy - h / 2), clamp01(cx + w / 2), clamp01(cy + h / 2)};
}

double iou(const Box& a, const Box& b) {
  if (!(a.width() > 0 && a.height() > 0 && b.width() > 0 && b.height() > 0)) {
    throw ShapeError("iou of a degenerate box");
  }
  const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

MatchResult match_priors(const std::vector<Box>& gts, const PriorSet& priors,
                         double iou_threshold) {
  const std::size_t np = priors.size();
  MatchResult result{std::vector<int>(np, -1), std::vector<double>(np, 0.0)};
  if (gts.empty()) return result;

  std::vector<std::vector<double>> overlaps(gts.size(), std::vector<double>(np));
  for (std::size_t g = 0; g < gts.size(); ++g) {
    for (std::size_t p = 0; p < np; ++p) {
      overlaps[g][p] = iou(gts[g], priors.boxes[p].corners());
      if (overlaps[g][p] > result.best_iou[p]) result.best_iou[p] = overlaps[g][p];
    }
  }

  // Bipartite step: repeatedly take the largest remaining (gt, prior) overlap.
  std::vector<bool> gt_done(gts.size(), false);
  std::vector<bool> prior_taken(np, false);
  for (std::size_t round = 0; round < std::min(gts.size(), np); ++round) {
    double best = -1.0;
    std::size_t best_g = 0, best_p = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_done[g]) continue;
      for (std::size_t p = 0; p < np; ++p) {
        if (!prior_taken[p] && overlaps[g][p] > best) {
          best = overlaps[g][p];
          best_g = g;
          best_p = p;
        }
      }
    }
    gt_done[best_g] = true;
    prior_taken[best_p] = true;
    result.matched_gt[best_p] = static_cast<int>(best_g);
  }

  for (std::size_t p = 0; p < np; ++p) {
    if (prior_taken[p]) continue;
    double best = -1.0;
    int best_g = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (overlaps[g][p] > best) {
        best = overlaps[g][p];
        best_g = static_cast<int>(g);
      }
    }
    if (best >= iou_threshold) result.matched_gt[p] = best_g;
  }
  return result;
}

std::vector<std::array<double, 4>> flatten_loc(const HeadOutput& head) {
  std::vector<std::array<double, 4>> out;
  out.reserve(head.num_priors());
  for (std::size_t t = 0; t < head.loc.size(); ++t) {
    const Tensor& loc = head.loc[t];
    const auto [h, w] = head.tap_shapes[t];
    if (loc.shape() != Shape4{1, head.boxes[t] * 4, h, w}) {
      throw ShapeError("loc tensor " + loc.shape().str() + " does not match tap shape");
    }
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        for (int b = 0; b < head.boxes[t]; ++b) {
          out.push_back({loc.at(0, b * 4, i, j), loc.at(0, b * 4 + 1, i, j),
                         loc.at(0, b * 4 + 2, i, j), loc.at(0, b * 4 + 3, i, j)});
        }
      }
    }
  }
  return out;
}

std::vector<std::vector<double>> flatten_conf(const HeadOutput& head) {
  std::vector<std::vector<double>> out;
  out.reserve(head.num_priors());
  const int classes = head.num_classes;
  for (std::size_t t = 0; t < head.conf.size(); ++t) {
    const Tensor& conf = head.conf[t];
    const auto [h, w] = head.tap_shapes[t];
    if (conf.shape() != Shape4{1, head.boxes[t] * classes, h, w}) {
      throw ShapeError("conf tensor " + conf.shape().str() + " does not match tap shape");
    }
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        for (int b = 0; b < head.boxes[t]; ++b) {
          std::vector<double> logits(static_cast<std::size_t>(classes));
          for (int c = 0; c < classes; ++c) {
            logits[static_cast<std::size_t>(c)] = conf.at(0, b * classes + c, i, j);
          }
          out.push_back(std::move(logits));
        }
      }
    }
  }
  return out;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

namespace {

double cross_entropy(const std::vector<double>& logits, int label) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  for (double x : logits) sum += std::exp(x - mx);
  return mx + std::log(sum) - logits[static_cast<std::size_t>(label)];
}

double smooth_l1(double x) {
  const double a = std::fabs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

}  // namespace

std::vector<std::size_t> mine_hard_negatives(const std::vector<double>& background_loss,
                                             const std::vector<bool>& is_positive,
                                             std::size_t count) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < background_loss.size(); ++i) {
    if (!is_positive[i]) candidates.push_back(i);
  }
  count = std::min(count, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(count),
                    candidates.end(), [&](std::size_t a, std::size_t b) {
                      if (background_loss[a] != background_loss[b]) {
                        return background_loss[a] > background_loss[b];
                      }
                      return a < b;
                    });
  candidates.resize(count);
  return candidates;
}

LossReport multibox_loss(const HeadOutput& head, const PriorSet& priors,
                         const std::vector<Box>& gts, const std::vector<int>& labels,
                         double iou_threshold, Variances v, double neg_pos_ratio) {
  if (gts.size() != labels.size()) throw ShapeError("one label per ground-truth box required");
  if (head.num_priors() != priors.size()) {
    throw ShapeError("head predicts " + std::to_string(head.num_priors()) + " priors, prior set has " +
                     std::to_string(priors.size()));
  }
  for (int label : labels) {
    if (label < 1 || label >= head.num_classes) throw ShapeError("label out of range");
  }
  const auto loc = flatten_loc(head);
  const auto conf = flatten_conf(head);
  const MatchResult match = match_priors(gts, priors, iou_threshold);

  LossReport report;
  std::vector<bool> positive(priors.size(), false);
  std::vector<double> background_loss(priors.size(), 0.0);
  double loc_sum = 0, conf_sum = 0;
  for (std::size_t p = 0; p < priors.size(); ++p) {
    const int g = match.matched_gt[p];
    if (g < 0) {
      background_loss[p] = cross_entropy(conf[p], 0);
      continue;
    }
    positive[p] = true;
    ++report.num_pos;
    const auto target = encode_box(gts[static_cast<std::size_t>(g)], priors.boxes[p], v);
    for (int q = 0; q < 4; ++q) {
      loc_sum += smooth_l1(loc[p][static_cast<std::size_t>(q)] - target[static_cast<std::size_t>(q)]);
    }
    conf_sum += cross_entropy(conf[p], labels[static_cast<std::size_t>(g)]);
  }
  if (report.num_pos == 0) return report;

  const auto budget = static_cast<std::size_t>(neg_pos_ratio * static_cast<double>(report.num_pos));
  report.mined = mine_hard_negatives(background_loss, positive, budget);
  report.num_neg_mined = report.mined.size();
  for (std::size_t p : report.mined) conf_sum += background_loss[p];

  const auto n = static_cast<double>(report.num_pos);
  report.loc_loss = loc_sum / n;
  report.conf_loss = conf_sum / n;
  return report;
}

}  // namespace vehdet
