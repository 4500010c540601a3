#pragma once

#include "tweezer/common.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tweezer {

struct PhaseMask;
struct IntensityVolume;

/// Row-major image with non-negative pixel values.
struct Image2D {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  Image2D() = default;
  Image2D(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  [[nodiscard]] double& at(int x, int y) {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  [[nodiscard]] double at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  [[nodiscard]] double max_value() const;

  friend bool operator==(const Image2D&, const Image2D&) = default;
};

/// Per-pixel maximum over a stack of equally sized images.
Image2D max_intensity_projection(std::span<const Image2D> stack);

/// z slices of a volume, slice k at index k.
std::vector<Image2D> volume_slices(const IntensityVolume& volume);

/// Binary 8-bit PGM (P5, maxval 255), value = round(phi / 2pi * 255).
void export_phase_pgm(const PhaseMask& mask, const std::filesystem::path& path);

/// Inverse of export_phase_pgm up to quantization (pi/255 at most).
PhaseMask import_phase_pgm(const std::filesystem::path& path);

/// Raw PGM contents: samples and declared maxval (255 or 65535).
struct PgmImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> samples;
};

/// Reads binary P5 files with 8- or 16-bit (big-endian) samples.
PgmImage read_pgm(const std::filesystem::path& path);

/// Writes P5; 16-bit samples are big-endian when maxval > 255.
void write_pgm(const PgmImage& image, const std::filesystem::path& path);

/// Quantizes an image to 16-bit counts: round(value * scale) clamped to 65535.
PgmImage to_pgm16(const Image2D& image, double scale = 1.0);

Image2D from_pgm(const PgmImage& pgm);

}  // namespace tweezer
