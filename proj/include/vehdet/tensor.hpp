#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vehdet {

/// NCHW extent of a rank-4 tensor.
struct Shape4 {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  [[nodiscard]] std::size_t count() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Shape4&, const Shape4&) = default;
};

/// Dense 32-bit float tensor, row-major in (n, c, h, w) order.
///
/// index(n, c, h, w) = ((n * C + c) * H + h) * W + w. Operations never
/// mutate their inputs; slices and concatenations copy.
class Tensor {
 public:
  Tensor() = default;
  /// Every element set to `fill`.
  explicit Tensor(Shape4 shape, float fill = 0.0f);
  /// Takes ownership of `data`; throws ShapeError if its length differs from shape.count().
  Tensor(Shape4 shape, std::vector<float> data);

  [[nodiscard]] const Shape4& shape() const { return shape_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  [[nodiscard]] float at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }
  float& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }

  [[nodiscard]] std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  /// Contiguous (h, w) plane of one channel.
  [[nodiscard]] std::span<const float> plane(int n, int c) const {
    return std::span<const float>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }
  std::span<float> plane(int n, int c) {
    return std::span<float>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }

  /// Bitwise equality of shape and contents.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  Shape4 shape_{0, 0, 0, 0};
  std::vector<float> data_;
};

/// Copy of channels [lo, hi) of every batch item.
Tensor slice_channels(const Tensor& t, int lo, int hi);

/// Channel-wise concatenation in list order. All parts share n, h and w.
Tensor concat_channels(std::span<const Tensor> parts);

/// Largest absolute elementwise difference; shapes must match.
float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace vehdet
