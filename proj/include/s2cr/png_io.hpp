#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "s2cr/image.hpp"

namespace s2cr {

/// Decodes 8- or 16-bit gray/RGB/RGBA (and palette) PNGs to [0,1] intensities.
/// Gray is replicated to three channels; alpha is dropped.
ImageBuffer load_png(const std::filesystem::path& path);
ImageBuffer decode_png(const std::string& bytes);

/// Mask PNG: first channel >= 128/255 (>= 0.5) marks foreground.
MaskBuffer load_mask_png(const std::filesystem::path& path);
MaskBuffer decode_mask_png(const std::string& bytes);

/// 8-bit RGB encoding, round-half-up quantization.
std::string encode_png(const ImageBuffer& image);
void save_png(const ImageBuffer& image, const std::filesystem::path& path);
void save_mask_png(const MaskBuffer& mask, const std::filesystem::path& path);

/// 8-bit quantization used by the encoder: floor(v * 255 + 0.5).
inline std::uint8_t quantize8(double v) {
  const double q = v * 255.0 + 0.5;
  if (q <= 0.0) return 0;
  if (q >= 255.0) return 255;
  return static_cast<std::uint8_t>(q);
}

}  // namespace s2cr
