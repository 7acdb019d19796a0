#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "feedreg/error.hpp"

namespace feedreg {

/// Row-major grayscale raster with intensities in [0, 1].
class GrayImage {
 public:
  GrayImage() = default;

  GrayImage(int width, int height, double fill = 0.0)
      : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    }
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  GrayImage(int width, int height, std::vector<double> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1 ||
        pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error(ErrorCode::InvalidArgument, "pixel buffer does not match dimensions");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  double& at(int x, int y) { return pixels_[index(x, y)]; }
  double at(int x, int y) const { return pixels_[index(x, y)]; }

  const std::vector<double>& pixels() const { return pixels_; }
  std::vector<double>& pixels() { return pixels_; }

  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width_ - 1 && y <= height_ - 1;
  }

  /// Bilinear interpolation; the caller guarantees contains(x, y).
  double bilinear(double x, double y) const {
    const int x0 = std::min(static_cast<int>(std::floor(x)), width_ - 1);
    const int y0 = std::min(static_cast<int>(std::floor(y)), height_ - 1);
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = (1.0 - fx) * at(x0, y0) + fx * at(x1, y0);
    const double bot = (1.0 - fx) * at(x0, y1) + fx * at(x1, y1);
    return (1.0 - fy) * top + fy * bot;
  }

  void clamp() {
    for (auto& v : pixels_) v = std::clamp(v, 0.0, 1.0);
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

// ---------------------------------------------------------------------------
// Binary PGM (P5, maxval 255)

inline void write_pgm(std::ostream& os, const GrayImage& img) {
  os << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width()));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double v = std::clamp(img.at(x, y), 0.0, 1.0);
      row[static_cast<std::size_t>(x)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  write_pgm(os, img);
  if (!os) throw Error(ErrorCode::Io, "write failed for " + path);
}

namespace detail {

inline int read_pgm_int(std::istream& is) {
  int c = is.peek();
  while (c != EOF) {
    if (c == '#') {
      std::string skip;
      std::getline(is, skip);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
    c = is.peek();
  }
  int v = 0;
  if (!(is >> v)) throw Error(ErrorCode::Parse, "malformed PGM header");
  return v;
}

}  // namespace detail

inline GrayImage read_pgm(std::istream& is) {
  char magic[2] = {0, 0};
  is.read(magic, 2);
  if (!is || magic[0] != 'P' || magic[1] != '5') {
    throw Error(ErrorCode::Parse, "not a binary PGM (P5) stream");
  }
  const int w = detail::read_pgm_int(is);
  const int h = detail::read_pgm_int(is);
  const int maxval = detail::read_pgm_int(is);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) {
    throw Error(ErrorCode::Parse, "unsupported PGM dimensions or maxval");
  }
  is.get();  // single whitespace before raster
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!is) throw Error(ErrorCode::Parse, "truncated PGM raster");
  std::vector<double> px(raw.size());
  std::transform(raw.begin(), raw.end(), px.begin(),
                 [maxval](unsigned char v) { return static_cast<double>(v) / maxval; });
  return GrayImage(w, h, std::move(px));
}

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_pgm(is);
}

}  // namespace feedreg
