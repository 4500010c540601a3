#include "tweezer/imaging.hpp"
#include "tweezer/hologram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tweezer {

double Image2D::max_value() const {
  return pixels.empty() ? 0.0 : *std::max_element(pixels.begin(), pixels.end());
}

Image2D max_intensity_projection(std::span<const Image2D> stack) {
  if (stack.empty()) {
    throw Error(ErrorCode::invalid_argument, "maximum intensity projection needs at least one image");
  }
  Image2D out = stack.front();
  for (std::size_t k = 1; k < stack.size(); ++k) {
    const auto& img = stack[k];
    if (img.width != out.width || img.height != out.height) {
      throw Error(ErrorCode::dimension_mismatch, "image " + std::to_string(k) + " is " +
                                                     std::to_string(img.width) + "x" + std::to_string(img.height) +
                                                     ", expected " + std::to_string(out.width) + "x" +
                                                     std::to_string(out.height));
    }
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
      out.pixels[i] = std::max(out.pixels[i], img.pixels[i]);
    }
  }
  return out;
}

std::vector<Image2D> volume_slices(const IntensityVolume& volume) {
  std::vector<Image2D> out;
  out.reserve(static_cast<std::size_t>(volume.nz));
  for (int k = 0; k < volume.nz; ++k) {
    Image2D img(volume.nx, volume.ny);
    for (int j = 0; j < volume.ny; ++j) {
      for (int i = 0; i < volume.nx; ++i) {
        img.at(i, j) = volume.at(i, j, k);
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

namespace {

// Skips whitespace and '#' comments between PGM header tokens.
void skip_separators(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

int read_header_int(std::istream& in, const std::filesystem::path& path) {
  skip_separators(in);
  int v = 0;
  if (!(in >> v)) {
    throw Error(ErrorCode::parse_error, "malformed PGM header in " + path.string());
  }
  return v;
}

}  // namespace

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::io_error, "cannot open " + path.string());
  }
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") {
    throw Error(ErrorCode::parse_error, path.string() + " is not a binary PGM (P5)");
  }
  PgmImage img;
  img.width = read_header_int(in, path);
  img.height = read_header_int(in, path);
  img.maxval = read_header_int(in, path);
  if (img.width <= 0 || img.height <= 0 || img.maxval <= 0 || img.maxval > 65535) {
    throw Error(ErrorCode::parse_error, "invalid PGM dimensions or maxval in " + path.string());
  }
  in.get();  // single whitespace before the raster
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.samples.resize(n);
  if (img.maxval < 256) {
    std::vector<unsigned char> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    std::copy(raw.begin(), raw.end(), img.samples.begin());
  } else {
    std::vector<unsigned char> raw(2 * n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(2 * n));
    for (std::size_t i = 0; i < n; ++i) {
      img.samples[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
  }
  if (!in) {
    throw Error(ErrorCode::parse_error, "truncated PGM raster in " + path.string());
  }
  return img;
}

void write_pgm(const PgmImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::io_error, "cannot write " + path.string());
  }
  out << "P5\n" << image.width << ' ' << image.height << '\n' << image.maxval << '\n';
  if (image.maxval < 256) {
    std::vector<unsigned char> raw(image.samples.begin(), image.samples.end());
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  } else {
    std::vector<unsigned char> raw(2 * image.samples.size());
    for (std::size_t i = 0; i < image.samples.size(); ++i) {
      raw[2 * i] = static_cast<unsigned char>(image.samples[i] >> 8);
      raw[2 * i + 1] = static_cast<unsigned char>(image.samples[i] & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  }
  if (!out) {
    throw Error(ErrorCode::io_error, "failed writing " + path.string());
  }
}

void export_phase_pgm(const PhaseMask& mask, const std::filesystem::path& path) {
  PgmImage img;
  img.width = mask.nx;
  img.height = mask.ny;
  img.maxval = 255;
  img.samples.resize(mask.phases.size());
  for (std::size_t i = 0; i < mask.phases.size(); ++i) {
    const double phi = mask.phases[i];
    if (!(phi >= 0.0 && phi < kTwoPi)) {
      throw Error(ErrorCode::invalid_argument, "phase mask value outside [0, 2pi)");
    }
    img.samples[i] = static_cast<std::uint16_t>(std::lround(phi / kTwoPi * 255.0));
  }
  write_pgm(img, path);
}

PhaseMask import_phase_pgm(const std::filesystem::path& path) {
  const auto img = read_pgm(path);
  if (img.maxval != 255) {
    throw Error(ErrorCode::parse_error, "phase masks are stored with maxval 255");
  }
  PhaseMask mask{img.width, img.height, std::vector<double>(img.samples.size())};
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    const double phi = img.samples[i] / 255.0 * kTwoPi;
    mask.phases[i] = phi >= kTwoPi ? 0.0 : phi;
  }
  return mask;
}

PgmImage to_pgm16(const Image2D& image, double scale) {
  PgmImage out;
  out.width = image.width;
  out.height = image.height;
  out.maxval = 65535;
  out.samples.resize(image.pixels.size());
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const double v = std::clamp(std::round(image.pixels[i] * scale), 0.0, 65535.0);
    out.samples[i] = static_cast<std::uint16_t>(v);
  }
  return out;
}

Image2D from_pgm(const PgmImage& pgm) {
  Image2D img(pgm.width, pgm.height);
  std::copy(pgm.samples.begin(), pgm.samples.end(), img.pixels.begin());
  return img;
}

}  // namespace tweezer
