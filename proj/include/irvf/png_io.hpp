#pragma once

// 8-bit PNG read/write. Values map linearly between [0,1] floats and byte
// levels; writing twice produces identical bytes.

#include <string>

#include "irvf/tensor.hpp"

namespace irvf {

// Reads to (1,H,W) for grayscale sources or (3,H,W) for color, values in [0,1].
TensorF read_png(const std::string& path);

// Reads an infrared image as a single channel. A color PNG is accepted only
// when its channels are identical.
TensorF read_png_gray(const std::string& path);

// img must be (1,H,W) or (3,H,W); values are clamped and rounded to 8 bits.
void write_png(const std::string& path, const TensorF& img);

}  // namespace irvf
