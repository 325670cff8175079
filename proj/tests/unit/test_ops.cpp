#include "doctest.h"
#include "helpers.hpp"
#include "vehdet/error.hpp"
#include "vehdet/ops_reference.hpp"

using namespace vehdet;
using test::iota_tensor;
using test::values;

namespace {

Tensor plane_tensor(int h, int w, std::vector<float> v) { return Tensor({1, 1, h, w}, std::move(v)); }

}  // namespace

TEST_SUITE("nn-ops") {
  TEST_CASE("conv2d identity and sum kernels") {
    std::mt19937 rng(2);
    const Tensor x = oracle::random_tensor({1, 3, 5, 4}, rng);
    CHECK(conv2d(x, test::identity_1x1(3)) == x);

    ConvParams sum = test::zero_conv(1, 1, 3, 1, 0, 1);
    for (float& v : sum.weights.data()) v = 1.0f;
    const Tensor y = conv2d(Tensor({1, 1, 3, 3}, 1.0f), sum);
    CHECK(y.shape() == Shape4{1, 1, 1, 1});
    CHECK(y.at(0, 0, 0, 0) == 9.0f);
  }

  TEST_CASE("conv2d bias is added per output channel") {
    ConvParams p = test::zero_conv(2, 1, 1, 1, 0, 1, true);
    p.bias = {0.5f, -2.0f};
    const Tensor y = conv2d(Tensor({1, 1, 2, 2}, 3.0f), p);
    CHECK(values(y) == std::vector<float>{0.5f, 0.5f, 0.5f, 0.5f, -2, -2, -2, -2});
  }

  TEST_CASE("grouped conv equals block-diagonal dense conv") {
    std::mt19937 rng(3);
    for (int groups : {2, 4}) {
      for (int trial = 0; trial < 5; ++trial) {
        ConvParams p{oracle::random_tensor({8, 8 / groups, 3, 3}, rng), {}, 1 + trial % 2, 1, groups};
        const Tensor x = oracle::random_tensor({1, 8, 9, 7}, rng);
        CHECK(max_abs_diff(conv2d(x, p), oracle::grouped_conv(x, p)) < 1e-5f);
      }
    }
    // Up to 16 channels.
    ConvParams p{oracle::random_tensor({16, 4, 3, 3}, rng), {}, 1, 1, 4};
    const Tensor x = oracle::random_tensor({2, 16, 6, 6}, rng);
    CHECK(max_abs_diff(conv2d(x, p), oracle::grouped_conv(x, p)) < 1e-5f);
  }

  TEST_CASE("conv2d rejects inconsistent parameters") {
    const Tensor x({1, 4, 4, 4}, 1.0f);
    CHECK_THROWS_AS(conv2d(x, test::zero_conv(6, 4, 3, 1, 1, 3)), ShapeError);
    CHECK_THROWS_AS(conv2d(x, test::zero_conv(4, 3, 1, 1, 0, 1)), ShapeError);
    CHECK_THROWS_AS(conv2d(x, test::zero_conv(4, 4, 7, 1, 0, 1)), ShapeError);
    ConvParams bad_bias = test::zero_conv(4, 4, 1, 1, 0, 1);
    bad_bias.bias = {1.0f};
    CHECK_THROWS_AS(conv2d(x, bad_bias), ShapeError);
  }

  TEST_CASE("depthwise conv") {
    std::mt19937 rng(4);
    const Tensor x = oracle::random_tensor({1, 5, 6, 6}, rng);
    ConvParams id = test::zero_conv(5, 1, 1, 1, 0, 5);
    for (float& v : id.weights.data()) v = 1.0f;
    CHECK(depthwise_conv2d(x, id) == x);

    Tensor constant({1, 3, 3, 3}, 0.0f);
    for (int c = 0; c < 3; ++c) {
      for (float& v : constant.plane(0, c)) v = static_cast<float>(c + 1);
    }
    ConvParams ones = test::zero_conv(3, 1, 3, 1, 0, 3);
    for (float& v : ones.weights.data()) v = 1.0f;
    CHECK(values(depthwise_conv2d(constant, ones)) == std::vector<float>{9, 18, 27});

    ConvParams p{oracle::random_tensor({5, 1, 3, 3}, rng), {}, 2, 1, 5};
    CHECK(max_abs_diff(depthwise_conv2d(x, p), oracle::grouped_conv(x, p)) < 1e-6f);
    CHECK_THROWS_AS(depthwise_conv2d(x, test::zero_conv(5, 5, 1, 1, 0, 1)), ShapeError);
  }

  TEST_CASE("channel shuffle") {
    std::mt19937 rng(5);
    const Tensor x = oracle::random_tensor({2, 6, 3, 3}, rng);
    CHECK(channel_shuffle(x, 1) == x);
    CHECK(channel_shuffle(x, 6) == x);
    CHECK(channel_shuffle_sources(6, 3) == std::vector<int>{0, 2, 4, 1, 3, 5});
    const Tensor s = channel_shuffle(x, 3);
    const std::vector<int> src = channel_shuffle_sources(6, 3);
    for (int c = 0; c < 6; ++c) CHECK(slice_channels(s, c, c + 1) == slice_channels(x, src[c], src[c] + 1));
    CHECK_THROWS_AS(channel_shuffle(x, 4), ShapeError);
  }

  TEST_CASE("shuffle with g then C/g is the identity") {
    std::mt19937 rng(6);
    for (auto [c, g] : {std::pair{6, 3}, {12, 3}, {12, 4}, {24, 2}, {240, 3}}) {
      const Tensor x = oracle::random_tensor({1, c, 2, 2}, rng);
      CHECK(channel_shuffle(channel_shuffle(x, g), c / g) == x);
      std::vector<int> sorted = channel_shuffle_sources(c, g);
      std::ranges::sort(sorted);
      for (int i = 0; i < c; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
    }
  }

  TEST_CASE("max pool") {
    std::mt19937 rng(7);
    const Tensor x = oracle::random_tensor({1, 2, 4, 5}, rng);
    CHECK(max_pool(x, 1, 1, 0) == x);
    CHECK(values(max_pool(plane_tensor(2, 2, {1, 2, 3, 4}), 2, 2, 0)) == std::vector<float>{4});
    CHECK(values(max_pool(iota_tensor({1, 1, 4, 4}), 3, 2, 1)) == std::vector<float>{5, 7, 13, 15});
    CHECK_THROWS_AS(max_pool(x, 3, 2, 3), ShapeError);
  }

  TEST_CASE("average pool") {
    std::mt19937 rng(8);
    const Tensor x = oracle::random_tensor({1, 2, 4, 5}, rng);
    CHECK(avg_pool(x, 1, 1, 0) == x);
    CHECK(values(avg_pool(plane_tensor(2, 2, {1, 2, 3, 4}), 2, 2, 0)) == std::vector<float>{2.5f});
    for (auto [k, s, p] : {std::tuple{3, 2, 1}, {2, 1, 0}, {3, 1, 1}}) {
      const Tensor y = avg_pool(Tensor({1, 3, 7, 6}, 0.75f), k, s, p);
      CHECK(std::ranges::all_of(y.data(), [](float v) { return v == 0.75f; }));
    }
  }

  TEST_CASE("batch norm") {
    std::mt19937 rng(9);
    const Tensor x = oracle::random_tensor({1, 3, 2, 2}, rng);
    CHECK(batch_norm(x, BnParams::identity(3)) == x);

    BnParams p{{3.0f}, {1.0f}, {2.0f}, {4.0f}, 0.0f};
    CHECK(values(batch_norm(plane_tensor(1, 2, {2, 4}), p)) == std::vector<float>{1.0f, 4.0f});
    CHECK_THROWS_AS(batch_norm(x, BnParams::identity(2)), ShapeError);
  }

  TEST_CASE("relu") {
    CHECK(values(relu(plane_tensor(1, 3, {-1, -2, -0.5f}))) == std::vector<float>{0, 0, 0});
    CHECK(values(relu(plane_tensor(1, 3, {1, 2, 0.5f}))) == std::vector<float>{1, 2, 0.5f});
    CHECK(values(relu(plane_tensor(1, 3, {-1, 0, 2}))) == std::vector<float>{0, 0, 2});
  }

  TEST_CASE("add requires equal shapes") {
    const Tensor a({1, 2, 2, 2}, 1.0f), b({1, 2, 2, 2}, 2.5f);
    CHECK(add(a, b) == Tensor({1, 2, 2, 2}, 3.5f));
    CHECK_THROWS_AS(add(a, Tensor({1, 1, 2, 2})), ShapeError);
  }

  TEST_CASE("bilinear sampling") {
    const std::vector<float> row{0, 2};
    CHECK(bilinear_sample(row, 1, 2, 0.0f, 0.5f) == 1.0f);
    CHECK(bilinear_sample(row, 1, 2, 0.0f, 1.0f) == 2.0f);
    CHECK(bilinear_sample(row, 1, 2, 0.0f, -1.0f) == 0.0f);
    CHECK(bilinear_sample(row, 1, 2, 0.0f, 1.5f) == 1.0f);  // half of the right neighbour
  }

  TEST_CASE("deformable conv with zero offsets equals conv2d") {
    std::mt19937 rng(10);
    ConvParams p{oracle::random_tensor({4, 3, 3, 3}, rng), {}, 1, 1, 1};
    p.bias = {0.1f, 0.2f, 0.3f, 0.4f};
    const Tensor x = oracle::random_tensor({1, 3, 7, 8}, rng);
    const Tensor zero({1, 18, 7, 8}, 0.0f);
    CHECK(max_abs_diff(deformable_conv2d(x, zero, p), conv2d(x, p)) < 1e-5f);
  }

  TEST_CASE("deformable conv integer offset shifts the input") {
    const Tensor x = iota_tensor({1, 1, 3, 4}, 1.0f);
    Tensor offsets({1, 2, 3, 4}, 0.0f);
    for (float& v : offsets.plane(0, 1)) v = 1.0f;  // dx = 1
    const Tensor y = deformable_conv2d(x, offsets, test::identity_1x1(1));
    for (int h = 0; h < 3; ++h) {
      for (int w = 0; w < 4; ++w) CHECK(y.at(0, 0, h, w) == (w < 3 ? x.at(0, 0, h, w + 1) : 0.0f));
    }
  }

  TEST_CASE("deformable conv half offset averages neighbours") {
    const Tensor x({1, 1, 1, 2}, std::vector<float>{0, 2});
    Tensor offsets({1, 2, 1, 2}, 0.0f);
    offsets.at(0, 1, 0, 0) = 0.5f;
    CHECK(deformable_conv2d(x, offsets, test::identity_1x1(1)).at(0, 0, 0, 0) == 1.0f);

    // Piecewise linear in each coordinate away from the border.
    std::mt19937 rng(11);
    const Tensor img = oracle::random_tensor({1, 2, 6, 6}, rng);
    ConvParams p{oracle::random_tensor({3, 2, 1, 1}, rng), {}, 1, 0, 1};
    auto at_offset = [&](float dy, float dx) {
      Tensor off({1, 2, 6, 6}, 0.0f);
      for (float& v : off.plane(0, 0)) v = dy;
      for (float& v : off.plane(0, 1)) v = dx;
      return deformable_conv2d(img, off, p);
    };
    const Tensor a = at_offset(0, 0), b = at_offset(0, 1), mid = at_offset(0, 0.5f);
    const Tensor c = at_offset(1, 0), midy = at_offset(0.5f, 0);
    for (int o = 0; o < 3; ++o) {
      for (int h = 0; h < 4; ++h) {
        for (int w = 0; w < 4; ++w) {
          CHECK(mid.at(0, o, h, w) == doctest::Approx((a.at(0, o, h, w) + b.at(0, o, h, w)) / 2).epsilon(1e-5));
          CHECK(midy.at(0, o, h, w) == doctest::Approx((a.at(0, o, h, w) + c.at(0, o, h, w)) / 2).epsilon(1e-5));
        }
      }
    }
  }

  TEST_CASE("deformable conv checks the offset field") {
    const Tensor x({1, 1, 4, 4}, 1.0f);
    CHECK_THROWS_AS(deformable_conv2d(x, Tensor({1, 3, 4, 4}), test::identity_1x1(1)), ShapeError);
    CHECK_THROWS_AS(deformable_conv2d(x, Tensor({1, 2, 3, 4}), test::identity_1x1(1)), ShapeError);
  }

  TEST_CASE("parallel kernels match the serial reference bitwise") {
    std::mt19937 rng(12);
    const Tensor x = oracle::random_tensor({2, 12, 11, 9}, rng);
    for (int groups : {1, 3, 12}) {
      ConvParams p{oracle::random_tensor({12, 12 / groups, 3, 3}, rng), {}, 2, 1, groups};
      p.bias.assign(12, 0.25f);
      CHECK(conv2d(x, p) == reference::conv2d(x, p));
    }
    ConvParams dw{oracle::random_tensor({12, 1, 3, 3}, rng), {}, 1, 1, 12};
    CHECK(depthwise_conv2d(x, dw) == reference::depthwise_conv2d(x, dw));
    CHECK(channel_shuffle(x, 3) == reference::channel_shuffle(x, 3));
    CHECK(max_pool(x, 3, 2, 1) == reference::max_pool(x, 3, 2, 1));
    CHECK(avg_pool(x, 3, 2, 1) == reference::avg_pool(x, 3, 2, 1));
    BnParams bn{std::vector<float>(12, 1.5f), std::vector<float>(12, -0.2f),
                std::vector<float>(12, 0.1f), std::vector<float>(12, 2.0f), 1e-5f};
    CHECK(batch_norm(x, bn) == reference::batch_norm(x, bn));
    CHECK(relu(x) == reference::relu(x));

    ConvParams dp{oracle::random_tensor({5, 12, 3, 3}, rng), {}, 1, 1, 1};
    const Tensor offsets = oracle::random_tensor({2, 18, 11, 9}, rng, -2.0f, 2.0f);
    CHECK(deformable_conv2d(x, offsets, dp) == reference::deformable_conv2d(x, offsets, dp));
  }

  TEST_CASE("kernels are deterministic across runs") {
    std::mt19937 rng(13);
    const Tensor x = oracle::random_tensor({1, 6, 16, 16}, rng);
    ConvParams p{oracle::random_tensor({6, 2, 3, 3}, rng), {}, 1, 1, 3};
    const Tensor first = conv2d(x, p);
    for (int i = 0; i < 3; ++i) CHECK(conv2d(x, p) == first);
  }
}
