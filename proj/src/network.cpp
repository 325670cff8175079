#include "vehdet/network.hpp"

#include <cmath>
#include <random>
#include <set>

#include "vehdet/error.hpp"
#include "vehdet/ops.hpp"

namespace vehdet {

std::size_t HeadOutput::num_priors() const {
  std::size_t total = 0;
  for (std::size_t i = 0; i < tap_shapes.size(); ++i) {
    total += static_cast<std::size_t>(tap_shapes[i].first) * tap_shapes[i].second * boxes[i];
  }
  return total;
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

ParamStore random_params(const NetworkPlan& plan, std::uint64_t seed) {
  ParamStore store;
  for (const ParamSpec& spec : param_specs(plan)) {
    Tensor t(spec.shape);
    switch (spec.init) {
      case ParamSpec::Init::Zero:
        break;
      case ParamSpec::Init::One:
        std::fill(t.data().begin(), t.data().end(), 1.0f);
        break;
      case ParamSpec::Init::Kaiming: {
        const std::uint64_t key = fnv1a(spec.name);
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
        std::mt19937 gen(seq);
        const float bound = std::sqrt(6.0f / static_cast<float>(spec.fan_in));
        for (float& v : t.data()) {
          const float u = static_cast<float>(gen() >> 8) * (1.0f / 16777216.0f);
          v = (2.0f * u - 1.0f) * bound;
        }
        break;
      }
    }
    store.emplace(spec.name, std::move(t));
  }
  return store;
}

Network::Network(NetworkPlan plan, ParamStore params)
    : plan_(std::move(plan)), params_(std::move(params)) {
  std::set<std::string> expected;
  for (const ParamSpec& spec : param_specs(plan_)) {
    expected.insert(spec.name);
    auto it = params_.find(spec.name);
    if (it == params_.end()) throw ConfigError("missing parameter " + spec.name);
    if (it->second.shape() != spec.shape) {
      throw ConfigError("parameter " + spec.name + " has shape " + it->second.shape().str() +
                        ", expected " + spec.shape.str());
    }
  }
  for (const auto& [name, tensor] : params_) {
    if (!expected.contains(name)) throw ConfigError("unknown parameter " + name);
  }
}

const Tensor& Network::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("missing parameter " + name);
  return it->second;
}

ConvParams Network::conv(const LayerSpec& layer) const {
  ConvParams p;
  p.weights = param(layer.name + ".weight");
  if (layer.bias) {
    auto b = param(layer.name + ".bias").data();
    p.bias.assign(b.begin(), b.end());
  }
  p.stride = layer.stride;
  p.pad = layer.pad;
  p.groups = layer.groups;
  return p;
}

ConvParams Network::conv(const BlockPlan& block, const std::string& suffix) const {
  return conv(block.layer(suffix));
}

BnParams Network::bn(const BlockPlan& block, const std::string& suffix) const {
  const std::string base = block.layer(suffix).name;
  auto vec = [&](const char* field) {
    auto d = param(base + "." + field).data();
    return std::vector<float>(d.begin(), d.end());
  };
  return {vec("gamma"), vec("beta"), vec("mean"), vec("var"), 1e-5f};
}

Tensor Network::run_block(const BlockPlan& block, const Tensor& x) const {
  switch (block.kind) {
    case BlockKind::Stem: {
      const Tensor y = relu(batch_norm(conv2d(x, conv(block, "conv")), bn(block, "bn")));
      const LayerSpec& pool = block.layer("pool");
      return max_pool(y, pool.kernel, pool.stride, pool.pad);
    }
    case BlockKind::ShuffleUnit: {
      ShuffleUnitParams p;
      p.gconv1 = conv(block, "gconv1");
      p.bn1 = bn(block, "bn1");
      p.dwconv = conv(block, "dwconv");
      p.bn2 = bn(block, "bn2");
      p.gconv2 = conv(block, "gconv2");
      p.bn3 = bn(block, "bn3");
      p.stride = block.stride;
      p.groups = p.gconv1.groups;
      return shuffle_unit(x, p);
    }
    case BlockKind::Mincep: {
      MincepParams p;
      p.a_conv = conv(block, "a_conv");
      p.a_bn = bn(block, "a_bn");
      p.b_conv = conv(block, "b_conv");
      p.b_bn = bn(block, "b_bn");
      p.b_dw = conv(block, "b_dw");
      p.b_dw_bn = bn(block, "b_dw_bn");
      p.c_conv = conv(block, "c_conv");
      p.c_bn = bn(block, "c_bn");
      p.c_dw1 = conv(block, "c_dw1");
      p.c_dw1_bn = bn(block, "c_dw1_bn");
      p.c_dw2 = conv(block, "c_dw2");
      p.c_dw2_bn = bn(block, "c_dw2_bn");
      p.out_conv = conv(block, "out_conv");
      p.out_bn = bn(block, "out_bn");
      return mincep_block(x, p);
    }
    case BlockKind::PlainExtra: {
      const Tensor y = relu(batch_norm(conv2d(x, conv(block, "conv1")), bn(block, "bn1")));
      return relu(batch_norm(conv2d(y, conv(block, "conv2")), bn(block, "bn2")));
    }
    case BlockKind::Dab:
    case BlockKind::Head:
      break;
  }
  throw ConfigError("block " + block.name + " is not a backbone block");
}

std::vector<Tensor> Network::tap_features(const Tensor& image) const {
  const int size = plan_.cfg.input_size;
  if (image.shape() != Shape4{1, 3, size, size}) {
    throw ShapeError("network input must be " + Shape4{1, 3, size, size}.str() + ", got " +
                     image.shape().str());
  }
  std::vector<Tensor> features;
  features.reserve(plan_.taps.size());
  Tensor x = image;
  auto tap = plan_.taps.begin();
  for (std::size_t i = 0; i < plan_.backbone.size(); ++i) {
    x = run_block(plan_.backbone[i], x);
    for (; tap != plan_.taps.end() && tap->source == static_cast<int>(i); ++tap) {
      if (!tap->dab) {
        features.push_back(x);
        continue;
      }
      const BlockPlan& d = *tap->dab;
      DabParams p;
      p.offset_conv = conv(d, "offset_conv");
      p.conv1 = conv(d, "conv1");
      p.bn1 = bn(d, "bn1");
      p.dconv = conv(d, "dconv");
      p.bn2 = bn(d, "bn2");
      p.input_portion = plan_.cfg.dab_portions[static_cast<std::size_t>(tap->slot)];
      features.push_back(dab_passthrough(x, p));
    }
  }
  return features;
}

HeadOutput Network::forward(const Tensor& image) const {
  const std::vector<Tensor> features = tap_features(image);
  HeadOutput out;
  out.num_classes = plan_.cfg.num_classes;
  for (std::size_t t = 0; t < plan_.taps.size(); ++t) {
    const TapPlan& tap = plan_.taps[t];
    out.loc.push_back(conv2d(features[t], conv(tap.head, "loc")));
    out.conf.push_back(conv2d(features[t], conv(tap.head, "conf")));
    out.tap_shapes.emplace_back(tap.h, tap.w);
    out.boxes.push_back(tap.boxes);
  }
  return out;
}

Network build_network(const NetworkConfig& cfg, std::uint64_t seed) {
  NetworkPlan plan = plan_network(cfg);
  ParamStore params = random_params(plan, seed);
  return Network(std::move(plan), std::move(params));
}

Network build_network(const NetworkConfig& cfg, ParamStore params) {
  return Network(plan_network(cfg), std::move(params));
}

Tensor preprocess(const RgbImage& image, int size, const std::array<float, 3>& mean) {
  if (image.width < 1 || image.height < 1) throw ShapeError("cannot preprocess an empty image");
  if (size < 1) throw ShapeError("preprocess size must be positive");
  Tensor out({1, 3, size, size});
  const double sx = static_cast<double>(image.width) / size;
  const double sy = static_cast<double>(image.height) / size;

  struct Tap {
    int i0, i1;
    double frac;
  };
  auto taps_for = [](int count, int extent, double scale) {
    std::vector<Tap> taps(static_cast<std::size_t>(count));
    for (int o = 0; o < count; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(extent - 1));
      const int i0 = static_cast<int>(std::floor(src));
      taps[static_cast<std::size_t>(o)] = {i0, std::min(i0 + 1, extent - 1), src - i0};
    }
    return taps;
  };
  const std::vector<Tap> xs = taps_for(size, image.width, sx);
  const std::vector<Tap> ys = taps_for(size, image.height, sy);

  for (int c = 0; c < 3; ++c) {
    auto plane = out.plane(0, c);
    for (int y = 0; y < size; ++y) {
      const Tap& ty = ys[static_cast<std::size_t>(y)];
      for (int x = 0; x < size; ++x) {
        const Tap& tx = xs[static_cast<std::size_t>(x)];
        const double top = (1.0 - tx.frac) * image.at(tx.i0, ty.i0, c) +
                           tx.frac * image.at(tx.i1, ty.i0, c);
        const double bottom = (1.0 - tx.frac) * image.at(tx.i0, ty.i1, c) +
                              tx.frac * image.at(tx.i1, ty.i1, c);
        const double v = (1.0 - ty.frac) * top + ty.frac * bottom;
        plane[static_cast<std::size_t>(y) * size + x] =
            static_cast<float>(v / 255.0) - mean[static_cast<std::size_t>(c)];
      }
    }
  }
  return out;
}

}  // namespace vehdet
