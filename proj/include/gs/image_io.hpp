#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gs/tensor.hpp"

namespace gs {

/// [-1,1] ↔ [0,65535]: q = round((v+1)/2·65535) after clamping. Decoding a
/// written file reproduces the quantised value exactly; the distance to the
/// original is at most 1/65535 (half a step of 2/65535).
std::uint16_t quantize16(double v);
double dequantize16(std::uint16_t q);

/// Writes a single-channel [1,H,W] image as 16-bit grayscale PNG.
void write_png16(const std::filesystem::path& path, const Tensor& image);

/// Reads any PNG as grayscale in [-1,1], shape [1,H,W]. 8-bit samples map via
/// v/255, 16-bit via v/65535; RGB uses Rec. 601 luma; alpha is ignored.
Tensor read_png(const std::filesystem::path& path);

/// All *.png files in `dir` (sorted by name). Every image must be size×size.
std::vector<Tensor> load_png_folder(const std::filesystem::path& dir, std::size_t size);

}  // namespace gs
