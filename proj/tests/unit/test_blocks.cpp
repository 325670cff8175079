#include "doctest.h"
#include "helpers.hpp"
#include "vehdet/blocks.hpp"
#include "vehdet/error.hpp"

using namespace vehdet;
using test::zero_conv;

namespace {

ShuffleUnitParams zero_unit(int in_c, int branch_out, int bottleneck, int groups, int stride) {
  ShuffleUnitParams p;
  p.gconv1 = zero_conv(bottleneck, in_c / groups, 1, 1, 0, groups);
  p.bn1 = BnParams::identity(bottleneck);
  p.dwconv = zero_conv(bottleneck, 1, 3, stride, 1, bottleneck);
  p.bn2 = BnParams::identity(bottleneck);
  p.gconv2 = zero_conv(branch_out, bottleneck / groups, 1, 1, 0, groups);
  p.bn3 = BnParams::identity(branch_out);
  p.stride = stride;
  p.groups = groups;
  return p;
}

MincepParams zero_mincep(int in_c, int width) {
  const auto split = mincep_split(in_c);
  const auto outs = mincep_split(width);
  MincepParams p;
  p.a_conv = zero_conv(outs[0], split[0], 1, 1, 0, 1);
  p.a_bn = BnParams::identity(outs[0]);
  p.b_conv = zero_conv(outs[1], split[1], 1, 1, 0, 1);
  p.b_bn = BnParams::identity(outs[1]);
  p.b_dw = zero_conv(outs[1], 1, 3, 2, 1, outs[1]);
  p.b_dw_bn = BnParams::identity(outs[1]);
  p.c_conv = zero_conv(outs[2], split[2], 1, 1, 0, 1);
  p.c_bn = BnParams::identity(outs[2]);
  p.c_dw1 = zero_conv(outs[2], 1, 3, 1, 1, outs[2]);
  p.c_dw1_bn = BnParams::identity(outs[2]);
  p.c_dw2 = zero_conv(outs[2], 1, 3, 2, 1, outs[2]);
  p.c_dw2_bn = BnParams::identity(outs[2]);
  p.out_conv = zero_conv(width, width, 1, 1, 0, 1);
  p.out_bn = BnParams::identity(width);
  return p;
}

DabParams zero_dab(int channels, Fraction portion) {
  const int consumed = portion.of(channels);
  const int reduced = (consumed + 4) / 5;
  DabParams p;
  p.conv1 = zero_conv(reduced, consumed, 1, 1, 0, 1);
  p.bn1 = BnParams::identity(reduced);
  p.offset_conv = zero_conv(18, consumed, 3, 1, 1, 1, true);
  p.dconv = zero_conv(consumed, reduced, 3, 1, 1, 1);
  p.bn2 = BnParams::identity(consumed);
  p.input_portion = portion;
  return p;
}

void randomize(ConvParams& p, std::mt19937& rng) {
  p.weights = oracle::random_tensor(p.weights.shape(), rng, -0.3f, 0.3f);
}

}  // namespace

TEST_SUITE("blocks") {
  TEST_CASE("fractions") {
    CHECK(Fraction{1, 8}.of(240) == 30);
    CHECK(Fraction{1, 1}.of(7) == 7);
    CHECK(Fraction{1, 8}.str() == "1/8");
    CHECK_THROWS_AS((Fraction{1, 8}.of(12)), ShapeError);
    CHECK_THROWS_AS((Fraction{1, 8}.of(4)), ShapeError);
  }

  TEST_CASE("shuffle unit with zero branch is ReLU of the input") {
    std::mt19937 rng(20);
    const Tensor x = oracle::random_tensor({1, 24, 8, 8}, rng);
    CHECK(shuffle_unit(x, zero_unit(24, 24, 6, 3, 1)) == relu(x));
  }

  TEST_CASE("shuffle unit shape contracts") {
    const Tensor x({1, 240, 64, 64}, 0.5f);
    CHECK(shuffle_unit(x, zero_unit(240, 240, 60, 3, 1)).shape() == Shape4{1, 240, 64, 64});
    CHECK(shuffle_unit(x, zero_unit(240, 240, 60, 3, 2)).shape() == Shape4{1, 480, 32, 32});
  }

  TEST_CASE("stride-2 shuffle unit concatenates the pooled shortcut") {
    std::mt19937 rng(21);
    const Tensor x = oracle::random_tensor({1, 12, 7, 7}, rng);
    ShuffleUnitParams p = zero_unit(12, 24, 6, 3, 2);
    randomize(p.gconv1, rng);
    randomize(p.dwconv, rng);
    randomize(p.gconv2, rng);
    const Tensor y = shuffle_unit(x, p);
    CHECK(y.shape().c == 12 + 24);
    CHECK(slice_channels(y, 0, 12) == relu(avg_pool(x, 3, 2, 1)));
  }

  TEST_CASE("shuffle unit matches a hand composition") {
    std::mt19937 rng(22);
    const Tensor x = oracle::random_tensor({1, 12, 6, 6}, rng);
    ShuffleUnitParams p = zero_unit(12, 12, 6, 3, 1);
    randomize(p.gconv1, rng);
    randomize(p.dwconv, rng);
    randomize(p.gconv2, rng);
    Tensor branch = relu(batch_norm(conv2d(x, p.gconv1), p.bn1));
    branch = channel_shuffle(branch, 3);
    branch = batch_norm(depthwise_conv2d(branch, p.dwconv), p.bn2);
    branch = batch_norm(conv2d(branch, p.gconv2), p.bn3);
    CHECK(shuffle_unit(x, p) == relu(add(x, branch)));
  }

  TEST_CASE("mincep split") {
    CHECK(mincep_split(960) == std::array{320, 320, 320});
    CHECK(mincep_split(512) == std::array{171, 171, 170});
    CHECK(mincep_split(256) == std::array{86, 85, 85});
    CHECK_THROWS_AS(mincep_split(2), ShapeError);
  }

  TEST_CASE("mincep shape contracts and zero weights") {
    const Tensor x1({1, 960, 16, 16}, 0.25f);
    const Tensor y1 = mincep_block(x1, zero_mincep(960, 512));
    CHECK(y1.shape() == Shape4{1, 512, 8, 8});
    CHECK(std::ranges::all_of(y1.data(), [](float v) { return v == 0.0f; }));
    const Tensor y2 = mincep_block(y1, zero_mincep(512, 256));
    CHECK(y2.shape() == Shape4{1, 256, 4, 4});
    CHECK(mincep_block(Tensor({1, 256, 1, 1}, 1.0f), zero_mincep(256, 256)).shape() ==
          Shape4{1, 256, 1, 1});
  }

  TEST_CASE("mincep branch a with identity convs is the pooled slice") {
    std::mt19937 rng(23);
    const Tensor x = oracle::random_tensor({1, 9, 6, 6}, rng);
    MincepParams p = zero_mincep(9, 9);
    p.a_conv = test::identity_1x1(3);
    p.out_conv = test::identity_1x1(9);
    const Tensor y = mincep_block(x, p);
    CHECK(slice_channels(y, 0, 3) == relu(max_pool(slice_channels(x, 0, 3), 3, 2, 1)));
    CHECK(std::ranges::all_of(slice_channels(y, 3, 9).data(), [](float v) { return v == 0.0f; }));
  }

  TEST_CASE("DAB with zero weights is ReLU of the consumed slice") {
    std::mt19937 rng(24);
    const Tensor x = oracle::random_tensor({1, 240, 16, 16}, rng);
    const DabParams p = zero_dab(240, {1, 8});
    const Tensor y = dab_block(x, p);
    CHECK(y.shape() == Shape4{1, 30, 16, 16});
    CHECK(y == relu(slice_channels(x, 0, 30)));

    const Tensor full = dab_passthrough(x, p);
    CHECK(full.shape() == x.shape());
    CHECK(slice_channels(full, 0, 30) == y);
    CHECK(slice_channels(full, 30, 240) == slice_channels(x, 30, 240));
  }

  TEST_CASE("DAB shape contract") {
    const Tensor x({1, 240, 64, 64}, 0.1f);
    CHECK(dab_block(x, zero_dab(240, {1, 8})).shape() == Shape4{1, 30, 64, 64});
    const Tensor small({1, 20, 5, 5}, 0.1f);
    CHECK(dab_block(small, zero_dab(20, {1, 1})).shape() == small.shape());
    CHECK(dab_passthrough(small, zero_dab(20, {1, 1})) == dab_block(small, zero_dab(20, {1, 1})));
  }

  TEST_CASE("DAB with zero offsets equals the plain residual") {
    std::mt19937 rng(25);
    const Tensor x = oracle::random_tensor({1, 16, 6, 6}, rng);
    DabParams p = zero_dab(16, {1, 2});
    randomize(p.conv1, rng);
    randomize(p.dconv, rng);
    const Tensor xs = slice_channels(x, 0, 8);
    const Tensor reduced = batch_norm(conv2d(xs, p.conv1), p.bn1);
    const Tensor expected = relu(add(xs, batch_norm(conv2d(reduced, p.dconv), p.bn2)));
    CHECK(max_abs_diff(dab_block(x, p), expected) < 1e-5f);
  }

  TEST_CASE("blocks are deterministic") {
    std::mt19937 rng(26);
    const Tensor x = oracle::random_tensor({1, 12, 8, 8}, rng);
    ShuffleUnitParams p = zero_unit(12, 12, 6, 3, 1);
    randomize(p.gconv1, rng);
    randomize(p.dwconv, rng);
    randomize(p.gconv2, rng);
    CHECK(shuffle_unit(x, p) == shuffle_unit(x, p));
  }
}
