#pragma once

#include <cstddef>
#include <cstdint>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace vlmap {

/// Dense row-major 2D buffer. Pixel (u, v) is column u, row v.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, const T& fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int u, int v) { return data_[index(u, v)]; }
  const T& operator()(int u, int v) const { return data_[index(u, v)]; }

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width_ + u;
  }
  bool contains(int u, int v) const {
    return u >= 0 && v >= 0 && u < width_ && v < height_;
  }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Rgb8 = Eigen::Matrix<std::uint8_t, 3, 1>;
using DepthImage = Image<double>;          // metres, 0 = invalid
using ColorImage = Image<Rgb8>;
using IntensityImage = Image<float>;       // [0, 1]

/// Per-pixel 3D point; NaN in x marks an invalid pixel.
using PointImage = Image<Eigen::Vector3d>;
using NormalImage = Image<Eigen::Vector3d>;

inline bool is_valid(const Eigen::Vector3d& p) { return !std::isnan(p.x()); }
inline Eigen::Vector3d invalid_point() {
  return Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
}

}  // namespace vlmap
