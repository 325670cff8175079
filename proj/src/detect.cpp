#include "vehdet/detect.hpp"

namespace vehdet {

std::vector<Detection> detect_single(const Network& net, const PriorSet& priors,
                                     const RgbImage& image) {
  const NetworkConfig& cfg = net.config();
  const Tensor input = preprocess(image, cfg.input_size, cfg.pixel_mean);
  const HeadOutput head = net.forward(input);
  return run_postprocess(head, priors, cfg.conf_threshold, cfg.nms_threshold, image.width,
                         image.height, {cfg.variances[0], cfg.variances[1]});
}

std::vector<Detection> detect(const Network& net, const PriorSet& priors, const RgbImage& image,
                              const DetectOptions& opts) {
  if (!opts.tile) return detect_single(net, priors, image);
  std::vector<std::pair<TileWindow, std::vector<Detection>>> per_tile;
  for (const TileWindow& w : plan_tiles(image.width, image.height, opts.tile_size, opts.overlap)) {
    const RgbImage crop = image.crop(w.x0, w.y0, w.width, w.height);
    per_tile.emplace_back(w, detect_single(net, priors, crop));
  }
  return merge_tiles(per_tile, net.config().nms_threshold);
}

}  // namespace vehdet
