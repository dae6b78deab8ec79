#pragma once

#include <vector>

namespace wsvt {

/// Grayscale image with pixel values clamped to [0, 255], stored row-major
/// (pixel (x, y) at index y * width + x). Binary masks use 0 and 255.
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, double fill = 0.0);
  /// Takes `pixels` in row-major order; values are clamped into [0, 255].
  Frame(int width, int height, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  double operator()(int x, int y) const { return pixels_[index(x, y)]; }
  void set(int x, int y, double value);

  const std::vector<double>& pixels() const noexcept { return pixels_; }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

double clamp_pixel(double v);

}  // namespace wsvt
