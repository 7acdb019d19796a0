#pragma once

// Separable convolution helpers shared by the extractor and the generator.

#include <algorithm>
#include <cmath>
#include <vector>

#include "feedreg/image.hpp"

namespace feedreg {

/// Normalized 1-D Gaussian taps of length 2 * radius + 1.
inline std::vector<double> gaussian_kernel(double sigma, int radius) {
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable filter with replicated borders.
inline GrayImage convolve_separable(const GrayImage& img, const std::vector<double>& kx,
                                    const std::vector<double>& ky) {
  const int w = img.width();
  const int h = img.height();
  const int rx = static_cast<int>(kx.size() / 2);
  const int ry = static_cast<int>(ky.size() / 2);
  GrayImage tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -rx; i <= rx; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        acc += kx[static_cast<std::size_t>(i + rx)] * img.at(xx, y);
      }
      tmp.at(x, y) = acc;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -ry; i <= ry; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        acc += ky[static_cast<std::size_t>(i + ry)] * tmp.at(x, yy);
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const auto k = gaussian_kernel(sigma, radius);
  return convolve_separable(img, k, k);
}

/// Gaussian filter with a fixed odd mask size.
inline GrayImage gaussian_blur_mask(const GrayImage& img, int mask, double sigma) {
  if (mask <= 1) return img;
  const auto k = gaussian_kernel(sigma, mask / 2);
  return convolve_separable(img, k, k);
}

}  // namespace feedreg
