#include "wsvt/frame.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wsvt/errors.hpp"

namespace wsvt {

double clamp_pixel(double v) {
  if (std::isnan(v)) throw_degenerate("frame: NaN pixel value");
  return std::clamp(v, 0.0, 255.0);
}

Frame::Frame(int width, int height, double fill) : width_(width), height_(height) {
  if (width < 1 || height < 1)
    throw_invalid("frame: dimensions must be positive, got " + std::to_string(width) + "x" + std::to_string(height));
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), clamp_pixel(fill));
}

Frame::Frame(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1)
    throw_invalid("frame: dimensions must be positive, got " + std::to_string(width) + "x" + std::to_string(height));
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw_invalid("frame: pixel count does not match " + std::to_string(width) + "x" + std::to_string(height));
  for (double& p : pixels_) p = clamp_pixel(p);
}

void Frame::set(int x, int y, double value) { pixels_[index(x, y)] = clamp_pixel(value); }

}  // namespace wsvt
