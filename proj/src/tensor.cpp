#include "vehdet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vehdet/error.hpp"

namespace vehdet {

std::string Shape4::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

namespace {

void check_dims(const Shape4& s) {
  if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
    throw ShapeError("negative tensor dimension " + s.str());
  }
}

}  // namespace

Tensor::Tensor(Shape4 shape, float fill) : shape_(shape) {
  check_dims(shape);
  data_.assign(shape.count(), fill);
}

Tensor::Tensor(Shape4 shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  check_dims(shape);
  if (data_.size() != shape.count()) {
    throw ShapeError("buffer length " + std::to_string(data_.size()) + " does not match shape " +
                     shape.str());
  }
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape_ == b.shape_ &&
         std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0;
}

Tensor slice_channels(const Tensor& t, int lo, int hi) {
  const Shape4& s = t.shape();
  if (lo < 0 || lo >= hi || hi > s.c) {
    throw ShapeError("channel slice [" + std::to_string(lo) + "," + std::to_string(hi) +
                     ") out of range for " + s.str());
  }
  Tensor out({s.n, hi - lo, s.h, s.w});
  const std::size_t block = static_cast<std::size_t>(hi - lo) * s.plane();
  for (int n = 0; n < s.n; ++n) {
    auto src = t.data().subspan(t.index(n, lo, 0, 0), block);
    std::copy(src.begin(), src.end(), out.data().begin() + out.index(n, 0, 0, 0));
  }
  return out;
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_channels needs at least one part");
  const Shape4& first = parts.front().shape();
  int channels = 0;
  for (const Tensor& p : parts) {
    const Shape4& s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: " + s.str() + " incompatible with " + first.str());
    }
    channels += s.c;
  }
  Tensor out({first.n, channels, first.h, first.w});
  for (int n = 0; n < first.n; ++n) {
    int c0 = 0;
    for (const Tensor& p : parts) {
      const std::size_t block = static_cast<std::size_t>(p.shape().c) * first.plane();
      auto src = p.data().subspan(p.index(n, 0, 0, 0), block);
      std::copy(src.begin(), src.end(), out.data().begin() + out.index(n, c0, 0, 0));
      c0 += p.shape().c;
    }
  }
  return out;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: " + a.shape().str() + " vs " + b.shape().str());
  }
  float m = 0.0f;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) m = std::max(m, std::fabs(da[i] - db[i]));
  return m;
}

}  // namespace vehdet
