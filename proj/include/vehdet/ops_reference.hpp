#pragma once

#include "vehdet/ops.hpp"

// Serial, loop-per-output-element versions of the kernels in ops.hpp. They
// exist for testing and benchmarking: each one walks exactly the same
// summation order as its parallel counterpart, so results compare bitwise.
namespace vehdet::reference {

Tensor conv2d(const Tensor& input, const ConvParams& p);
Tensor depthwise_conv2d(const Tensor& input, const ConvParams& p);
Tensor channel_shuffle(const Tensor& input, int groups);
Tensor max_pool(const Tensor& input, int k, int stride, int pad);
Tensor avg_pool(const Tensor& input, int k, int stride, int pad);
Tensor batch_norm(const Tensor& input, const BnParams& p);
Tensor relu(const Tensor& input);
Tensor deformable_conv2d(const Tensor& input, const Tensor& offsets, const ConvParams& p);

}  // namespace vehdet::reference
