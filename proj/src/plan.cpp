#include "vehdet/plan.hpp"

#include "vehdet/error.hpp"
#include "vehdet/ops.hpp"

namespace vehdet {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::DepthwiseConv: return "dwconv";
    case LayerKind::DeformableConv: return "deformconv";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::ChannelShuffle: return "shuffle";
    case LayerKind::Add: return "add";
    case LayerKind::Concat: return "concat";
    case LayerKind::Slice: return "slice";
  }
  return "?";
}

const LayerSpec& BlockPlan::layer(const std::string& suffix) const {
  const std::string full = name + "." + suffix;
  for (const LayerSpec& l : layers) {
    if (l.name == full) return l;
  }
  throw ConfigError("block " + name + " has no layer " + suffix);
}

namespace {

// Appends layers to a block while tracking the running activation extent.
class BlockBuilder {
 public:
  BlockBuilder(BlockPlan& block, int c, int h, int w) : block_(block), c_(c), h_(h), w_(w) {}

  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  void reset(int c, int h, int w) {
    c_ = c;
    h_ = h;
    w_ = w;
  }

  LayerSpec& conv(const std::string& suffix, int out_c, int k, int stride, int pad, int groups,
                  LayerKind kind = LayerKind::Conv, bool bias = false) {
    LayerSpec l = base(suffix, kind);
    l.out_c = out_c;
    l.kernel = k;
    l.stride = stride;
    l.pad = pad;
    l.groups = groups;
    l.bias = bias;
    l.out_h = conv_out_size(h_, k, stride, pad);
    l.out_w = conv_out_size(w_, k, stride, pad);
    return push(std::move(l));
  }
  LayerSpec& depthwise(const std::string& suffix, int stride) {
    return conv(suffix, c_, 3, stride, 1, c_, LayerKind::DepthwiseConv);
  }
  LayerSpec& pool(const std::string& suffix, LayerKind kind, int k, int stride, int pad) {
    LayerSpec l = base(suffix, kind);
    l.kernel = k;
    l.stride = stride;
    l.pad = pad;
    l.out_h = conv_out_size(h_, k, stride, pad);
    l.out_w = conv_out_size(w_, k, stride, pad);
    return push(std::move(l));
  }
  LayerSpec& elementwise(const std::string& suffix, LayerKind kind) {
    return push(base(suffix, kind));
  }
  LayerSpec& bn(const std::string& suffix) { return elementwise(suffix, LayerKind::BatchNorm); }
  LayerSpec& relu(const std::string& suffix) { return elementwise(suffix, LayerKind::Relu); }
  LayerSpec& reshape_channels(const std::string& suffix, LayerKind kind, int in_c, int out_c) {
    LayerSpec l = base(suffix, kind);
    l.in_c = in_c;
    l.out_c = out_c;
    return push(std::move(l));
  }

 private:
  LayerSpec base(const std::string& suffix, LayerKind kind) const {
    LayerSpec l;
    l.name = block_.name + "." + suffix;
    l.kind = kind;
    l.in_c = l.out_c = c_;
    l.in_h = l.out_h = h_;
    l.in_w = l.out_w = w_;
    return l;
  }
  LayerSpec& push(LayerSpec l) {
    c_ = l.out_c;
    h_ = l.out_h;
    w_ = l.out_w;
    block_.layers.push_back(std::move(l));
    return block_.layers.back();
  }

  BlockPlan& block_;
  int c_, h_, w_;
};

BlockPlan make_block(std::string name, BlockKind kind, std::string stage, int c, int h, int w) {
  BlockPlan b;
  b.name = std::move(name);
  b.kind = kind;
  b.stage = std::move(stage);
  b.in_c = c;
  b.in_h = h;
  b.in_w = w;
  return b;
}

void finish(BlockPlan& b, const BlockBuilder& bb) {
  b.out_c = bb.c();
  b.out_h = bb.h();
  b.out_w = bb.w();
}

BlockPlan plan_stem(const NetworkConfig& cfg) {
  BlockPlan b = make_block("stage1", BlockKind::Stem, "stage1", 3, cfg.input_size, cfg.input_size);
  BlockBuilder bb(b, 3, cfg.input_size, cfg.input_size);
  bb.conv("conv", cfg.stage_widths[0], 3, 2, 1, 1);
  bb.bn("bn");
  bb.relu("relu");
  bb.pool("pool", LayerKind::MaxPool, 3, 2, 1);
  b.stride = 4;
  finish(b, bb);
  return b;
}

BlockPlan plan_unit(const NetworkConfig& cfg, int stage, int index, int in_c, int width, int h,
                    int w) {
  const int stride = index == 0 ? 2 : 1;
  const int bottleneck = width / cfg.bottleneck_divisor;
  const int branch_out = stride == 2 ? width - in_c : width;
  BlockPlan b = make_block("stage" + std::to_string(stage) + ".unit" + std::to_string(index),
                           BlockKind::ShuffleUnit, "stage" + std::to_string(stage), in_c, h, w);
  b.stride = stride;
  BlockBuilder bb(b, in_c, h, w);
  bb.conv("gconv1", bottleneck, 1, 1, 0, cfg.groups);
  bb.bn("bn1");
  bb.relu("relu1");
  bb.elementwise("shuffle", LayerKind::ChannelShuffle);
  bb.depthwise("dwconv", stride);
  bb.bn("bn2");
  bb.conv("gconv2", branch_out, 1, 1, 0, cfg.groups);
  bb.bn("bn3");
  const int out_h = bb.h();
  const int out_w = bb.w();
  if (stride == 2) {
    bb.reset(in_c, h, w);
    bb.pool("shortcut_pool", LayerKind::AvgPool, 3, 2, 1);
    bb.reshape_channels("concat", LayerKind::Concat, width, width);
  } else {
    bb.elementwise("add", LayerKind::Add);
  }
  if (bb.h() != out_h || bb.w() != out_w) throw ConfigError(b.name + ": branch/shortcut mismatch");
  bb.reset(width, out_h, out_w);
  bb.relu("relu");
  finish(b, bb);
  return b;
}

BlockPlan plan_plain_extra(int index, int in_c, int width, int h, int w) {
  BlockPlan b = make_block("extra" + std::to_string(index + 1), BlockKind::PlainExtra, "extra",
                           in_c, h, w);
  b.stride = 2;
  BlockBuilder bb(b, in_c, h, w);
  bb.conv("conv1", width / 2, 1, 1, 0, 1);
  bb.bn("bn1");
  bb.relu("relu1");
  bb.conv("conv2", width, 3, 2, 1, 1);
  bb.bn("bn2");
  bb.relu("relu2");
  finish(b, bb);
  return b;
}

BlockPlan plan_mincep(int index, int in_c, int width, int h, int w) {
  BlockPlan b =
      make_block("extra" + std::to_string(index + 1), BlockKind::Mincep, "extra", in_c, h, w);
  b.stride = 2;
  const auto split = mincep_split(in_c);
  const auto outs = mincep_split(width);
  BlockBuilder bb(b, in_c, h, w);

  bb.reshape_channels("a_slice", LayerKind::Slice, in_c, split[0]);
  bb.pool("a_pool", LayerKind::MaxPool, 3, 2, 1);
  bb.conv("a_conv", outs[0], 1, 1, 0, 1);
  bb.bn("a_bn");
  bb.relu("a_relu");
  const int out_h = bb.h();
  const int out_w = bb.w();

  bb.reset(in_c, h, w);
  bb.reshape_channels("b_slice", LayerKind::Slice, in_c, split[1]);
  bb.conv("b_conv", outs[1], 1, 1, 0, 1);
  bb.bn("b_bn");
  bb.relu("b_relu");
  bb.depthwise("b_dw", 2);
  bb.bn("b_dw_bn");
  bb.relu("b_dw_relu");
  if (bb.h() != out_h || bb.w() != out_w) throw ConfigError(b.name + ": branch b mismatch");

  bb.reset(in_c, h, w);
  bb.reshape_channels("c_slice", LayerKind::Slice, in_c, split[2]);
  bb.conv("c_conv", outs[2], 1, 1, 0, 1);
  bb.bn("c_bn");
  bb.relu("c_relu");
  bb.depthwise("c_dw1", 1);
  bb.bn("c_dw1_bn");
  bb.relu("c_dw1_relu");
  bb.depthwise("c_dw2", 2);
  bb.bn("c_dw2_bn");
  bb.relu("c_dw2_relu");
  if (bb.h() != out_h || bb.w() != out_w) throw ConfigError(b.name + ": branch c mismatch");

  bb.reset(width, out_h, out_w);
  bb.reshape_channels("concat", LayerKind::Concat, width, width);
  bb.conv("out_conv", width, 1, 1, 0, 1);
  bb.bn("out_bn");
  bb.relu("out_relu");
  finish(b, bb);
  return b;
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

BlockPlan plan_dab(const NetworkConfig& cfg, int slot, int c, int h, int w) {
  const Fraction portion = cfg.dab_portions[static_cast<std::size_t>(slot)];
  const int consumed = portion.of(c);
  const Fraction reduce = cfg.dab_branch_portions[0];
  const int reduced = std::max(1, ceil_div(consumed * reduce.num, reduce.den));
  BlockPlan b = make_block("dab." + tap_slot_names()[static_cast<std::size_t>(slot)],
                           BlockKind::Dab, "dab", c, h, w);
  BlockBuilder bb(b, c, h, w);
  if (consumed != c) bb.reshape_channels("slice", LayerKind::Slice, c, consumed);
  LayerSpec& offsets = bb.conv("offset_conv", 2 * 3 * 3, 3, 1, 1, 1, LayerKind::Conv, true);
  offsets.zero_init = true;
  bb.reset(consumed, h, w);
  bb.conv("conv1", reduced, 1, 1, 0, 1);
  bb.bn("bn1");
  bb.conv("dconv", consumed, 3, 1, 1, 1, LayerKind::DeformableConv);
  bb.bn("bn2");
  bb.elementwise("add", LayerKind::Add);
  bb.relu("relu");
  if (consumed != c) bb.reshape_channels("concat", LayerKind::Concat, c, c);
  finish(b, bb);
  return b;
}

BlockPlan plan_head(const NetworkConfig& cfg, const std::string& tap, int c, int h, int w,
                    int boxes) {
  BlockPlan b = make_block("head." + tap, BlockKind::Head, "head", c, h, w);
  BlockBuilder bb(b, c, h, w);
  bb.conv("loc", boxes * 4, 3, 1, 1, 1, LayerKind::Conv, true);
  bb.reset(c, h, w);
  bb.conv("conf", boxes * cfg.num_classes, 3, 1, 1, 1, LayerKind::Conv, true);
  b.out_c = boxes * (4 + cfg.num_classes);
  b.out_h = h;
  b.out_w = w;
  return b;
}

}  // namespace

NetworkPlan plan_network(const NetworkConfig& cfg) {
  cfg.validate();
  NetworkPlan plan;
  plan.cfg = cfg;

  plan.backbone.push_back(plan_stem(cfg));
  std::vector<int> tap_sources(kNumTaps, -1);

  for (int stage = 2; stage <= 4; ++stage) {
    const int width = cfg.stage_widths[static_cast<std::size_t>(stage - 1)];
    const int units = cfg.unit_counts[static_cast<std::size_t>(stage - 2)];
    for (int u = 0; u < units; ++u) {
      const BlockPlan& prev = plan.backbone.back();
      plan.backbone.push_back(plan_unit(cfg, stage, u, prev.out_c, width, prev.out_h, prev.out_w));
    }
    tap_sources[static_cast<std::size_t>(stage - 2)] = static_cast<int>(plan.backbone.size()) - 1;
  }

  for (int k = 0; k < kNumExtraLayers; ++k) {
    if (!extra_layer_present(cfg, k)) break;
    const BlockPlan& prev = plan.backbone.back();
    const int width = cfg.mincep_widths[static_cast<std::size_t>(k)];
    if (cfg.mincep_enabled[static_cast<std::size_t>(k)]) {
      plan.backbone.push_back(plan_mincep(k, prev.out_c, width, prev.out_h, prev.out_w));
    } else {
      plan.backbone.push_back(plan_plain_extra(k, prev.out_c, width, prev.out_h, prev.out_w));
    }
    tap_sources[static_cast<std::size_t>(3 + k)] = static_cast<int>(plan.backbone.size()) - 1;
  }

  for (int slot = 0; slot < kNumTaps; ++slot) {
    if (!tap_present(cfg, slot)) continue;
    const auto s = static_cast<std::size_t>(slot);
    const BlockPlan& src = plan.backbone[static_cast<std::size_t>(tap_sources[s])];
    TapPlan tap;
    tap.slot = slot;
    tap.name = tap_slot_names()[s];
    tap.source = tap_sources[s];
    tap.channels = src.out_c;
    tap.h = src.out_h;
    tap.w = src.out_w;
    tap.boxes = cfg.boxes_per_location[s];
    if (cfg.dab_enabled[s]) tap.dab = plan_dab(cfg, slot, src.out_c, src.out_h, src.out_w);
    tap.head = plan_head(cfg, tap.name, src.out_c, src.out_h, src.out_w, tap.boxes);
    plan.taps.push_back(std::move(tap));
  }
  return plan;
}

std::vector<const BlockPlan*> all_blocks(const NetworkPlan& plan) {
  std::vector<const BlockPlan*> blocks;
  for (const BlockPlan& b : plan.backbone) blocks.push_back(&b);
  for (const TapPlan& t : plan.taps) {
    if (t.dab) blocks.push_back(&*t.dab);
    blocks.push_back(&t.head);
  }
  return blocks;
}

std::vector<ParamSpec> param_specs(const NetworkPlan& plan) {
  std::vector<ParamSpec> specs;
  for (const BlockPlan* block : all_blocks(plan)) {
    for (const LayerSpec& l : block->layers) {
      if (l.is_conv()) {
        const Shape4 ws = l.weight_shape();
        const int fan_in = ws.c * ws.h * ws.w;
        specs.push_back({l.name + ".weight", l.name, ws,
                         l.zero_init ? ParamSpec::Init::Zero : ParamSpec::Init::Kaiming, fan_in});
        if (l.bias) {
          specs.push_back({l.name + ".bias", l.name, {l.out_c, 1, 1, 1}, ParamSpec::Init::Zero,
                           fan_in});
        }
      } else if (l.kind == LayerKind::BatchNorm) {
        const Shape4 vs{l.out_c, 1, 1, 1};
        specs.push_back({l.name + ".gamma", l.name, vs, ParamSpec::Init::One, 1});
        specs.push_back({l.name + ".beta", l.name, vs, ParamSpec::Init::Zero, 1});
        specs.push_back({l.name + ".mean", l.name, vs, ParamSpec::Init::Zero, 1});
        specs.push_back({l.name + ".var", l.name, vs, ParamSpec::Init::One, 1});
      }
    }
  }
  return specs;
}

}  // namespace vehdet
