#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "tumornet/error.hpp"
#include "tumornet/rng.hpp"
#include "tumornet/tensor.hpp"

namespace tumornet {

/// 8-bit interleaved pixels in RGB (or single-channel gray) order.
struct RawImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;
};

inline RawImage decode_image(const std::filesystem::path& path) {
  cv::Mat m;
  try {
    m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw DataError("cannot decode image " + path.string() + ": " + e.what());
  }
  if (m.empty()) throw DataError("cannot decode image " + path.string());
  if (m.rows <= 0 || m.cols <= 0) throw DataError("zero-dimension image " + path.string());
  if (m.depth() == CV_16U) {
    cv::Mat eight;
    m.convertTo(eight, CV_8U, 1.0 / 257.0);
    m = eight;
  } else if (m.depth() != CV_8U) {
    throw DataError("unsupported pixel depth in " + path.string());
  }
  const int ch = m.channels();
  if (ch != 1 && ch != 3 && ch != 4) throw DataError("unsupported channel count in " + path.string());

  RawImage img;
  img.height = static_cast<std::size_t>(m.rows);
  img.width = static_cast<std::size_t>(m.cols);
  img.channels = ch == 1 ? 1 : 3;
  img.pixels.resize(img.height * img.width * img.channels);
  for (int y = 0; y < m.rows; ++y) {
    const std::uint8_t* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) {
      std::uint8_t* dst = img.pixels.data() + (static_cast<std::size_t>(y) * img.width + x) * img.channels;
      const std::uint8_t* src = row + static_cast<std::size_t>(x) * ch;
      if (ch == 1) {
        dst[0] = src[0];
      } else {  // BGR(A) -> RGB, alpha dropped
        dst[0] = src[2];
        dst[1] = src[1];
        dst[2] = src[0];
      }
    }
  }
  return img;
}

// Writes 8-bit gray (C=1) or RGB (C=3) pixels; format chosen by extension.
inline void encode_image(const std::filesystem::path& path, const RawImage& img) {
  cv::Mat m;
  if (img.channels == 1) {
    m = cv::Mat(static_cast<int>(img.height), static_cast<int>(img.width), CV_8UC1,
                const_cast<std::uint8_t*>(img.pixels.data()))
            .clone();
  } else {
    m = cv::Mat(static_cast<int>(img.height), static_cast<int>(img.width), CV_8UC3);
    for (std::size_t i = 0; i < img.height * img.width; ++i) {
      m.data[i * 3 + 0] = img.pixels[i * 3 + 2];
      m.data[i * 3 + 1] = img.pixels[i * 3 + 1];
      m.data[i * 3 + 2] = img.pixels[i * 3 + 0];
    }
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw DataError("cannot write image " + path.string());
}

namespace detail {

// Bilinear read with coordinates clamped to the image (nearest-edge fill).
template <class T>
double sample_clamped(const Tensor<T>& img, double y, double x, std::size_t ch) {
  const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
  const T* p = img.raw();
  const double v00 = p[(y0 * w + x0) * c + ch], v01 = p[(y0 * w + x1) * c + ch];
  const double v10 = p[(y1 * w + x0) * c + ch], v11 = p[(y1 * w + x1) * c + ch];
  return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

} // namespace detail

/// Bilinear resize of an H,W,C tensor using pixel-center alignment.
template <class T>
Tensor<T> resize_bilinear(const Tensor<T>& img, std::size_t out_h, std::size_t out_w) {
  if (img.rank() != 3) throw ShapeError("resize expects [H,W,C], got " + to_string(img.shape()));
  const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  if (h == out_h && w == out_w) return img;
  Tensor<T> out({out_h, out_w, c});
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
    for (std::size_t x = 0; x < out_w; ++x) {
      const double src_x = (static_cast<double>(x) + 0.5) * sx - 0.5;
      for (std::size_t ch = 0; ch < c; ++ch)
        out[(y * out_w + x) * c + ch] = static_cast<T>(detail::sample_clamped(img, src_y, src_x, ch));
    }
  }
  return out;
}

/// 8-bit pixels scaled to [0,1], gray replicated to three channels.
template <class T>
Tensor<T> to_tensor(const RawImage& img) {
  Tensor<T> t({img.height, img.width, 3});
  for (std::size_t i = 0; i < img.height * img.width; ++i)
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const std::uint8_t v = img.channels == 1 ? img.pixels[i] : img.pixels[i * 3 + ch];
      t[i * 3 + ch] = static_cast<T>(v) / T{255};
    }
  return t;
}

template <class T = float>
Tensor<T> load_and_preprocess(const std::filesystem::path& path, std::size_t height = 224,
                              std::size_t width = 224) {
  return resize_bilinear(to_tensor<T>(decode_image(path)), height, width);
}

// ------------------------------------------------------------- augmentation

enum class FillMode { Nearest };

struct AugmentParams {
  double max_rotation_degrees = 40.0;
  double max_shift_fraction = 0.20;
  bool shear_enabled = true;
  double max_shear_degrees = 10.0;
  double max_zoom_fraction = 0.20;
  bool horizontal_flip_enabled = true;
  FillMode fill_mode = FillMode::Nearest;

  static AugmentParams none() {
    AugmentParams p;
    p.max_rotation_degrees = 0;
    p.max_shift_fraction = 0;
    p.shear_enabled = false;
    p.max_zoom_fraction = 0;
    p.horizontal_flip_enabled = false;
    return p;
  }

  void validate() const {
    if (!(max_rotation_degrees >= 0 && max_rotation_degrees <= 180))
      throw ConfigError("rotation must lie in [0,180] degrees", "augment.rotation");
    if (!(max_shift_fraction >= 0 && max_shift_fraction <= 1))
      throw ConfigError("shift fraction must lie in [0,1]", "augment.shift");
    if (!(max_zoom_fraction >= 0 && max_zoom_fraction <= 1))
      throw ConfigError("zoom fraction must lie in [0,1]", "augment.zoom");
    if (!(max_shear_degrees >= 0 && max_shear_degrees < 90))
      throw ConfigError("shear must lie in [0,90) degrees", "augment.shear_degrees");
  }
};

/// One concrete draw of the random transform.
struct AffineDraw {
  double rotation_degrees = 0;
  double shift_x = 0;  // fraction of width
  double shift_y = 0;  // fraction of height
  double shear_degrees = 0;
  double zoom = 1;
  bool flip = false;

  bool is_identity() const {
    return rotation_degrees == 0 && shift_x == 0 && shift_y == 0 && shear_degrees == 0 &&
           zoom == 1 && !flip;
  }
};

// Always consumes the same six draws so streams stay aligned whatever is enabled.
inline AffineDraw sample_affine(const AugmentParams& p, Rng& rng) {
  AffineDraw d;
  d.rotation_degrees = rng.uniform(-p.max_rotation_degrees, p.max_rotation_degrees);
  d.shift_x = rng.uniform(-p.max_shift_fraction, p.max_shift_fraction);
  d.shift_y = rng.uniform(-p.max_shift_fraction, p.max_shift_fraction);
  const double shear = rng.uniform(-p.max_shear_degrees, p.max_shear_degrees);
  d.shear_degrees = p.shear_enabled ? shear : 0.0;
  d.zoom = rng.uniform(1.0 - p.max_zoom_fraction, 1.0 + p.max_zoom_fraction);
  const bool flip = rng.bernoulli(0.5);
  d.flip = p.horizontal_flip_enabled && flip;
  return d;
}

/// Applies flip, shear, rotation, zoom and shift as one affine map about the
/// image center, resampled once with bilinear interpolation and nearest-edge
/// fill. Zoom > 1 enlarges the content.
template <class T>
Tensor<T> apply_affine(const Tensor<T>& img, const AffineDraw& d) {
  if (img.rank() != 3) throw ShapeError("augment expects [H,W,C], got " + to_string(img.shape()));
  if (d.is_identity()) return img;
  const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  const double pi = std::numbers::pi;
  const double th = d.rotation_degrees * pi / 180.0;
  const double sh = std::tan(d.shear_degrees * pi / 180.0);
  const double f = d.flip ? -1.0 : 1.0;
  // forward = zoom * R * Shear * Flip
  const double cs = std::cos(th), sn = std::sin(th);
  const double a = d.zoom * cs * f, b = d.zoom * (cs * sh - sn);
  const double cc = d.zoom * sn * f, dd = d.zoom * (sn * sh + cs);
  const double det = a * dd - b * cc;
  if (det == 0) throw NumericError("degenerate augmentation transform");
  const double ia = dd / det, ib = -b / det, ic = -cc / det, id = a / det;
  const double cx = (static_cast<double>(w) - 1) / 2, cy = (static_cast<double>(h) - 1) / 2;
  const double tx = d.shift_x * static_cast<double>(w), ty = d.shift_y * static_cast<double>(h);

  Tensor<T> out(img.shape());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double qx = static_cast<double>(x) - cx - tx, qy = static_cast<double>(y) - cy - ty;
      const double sx = ia * qx + ib * qy + cx, sy = ic * qx + id * qy + cy;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = detail::sample_clamped(img, sy, sx, ch);
        out[(y * w + x) * c + ch] = static_cast<T>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> augment(const Tensor<T>& img, const AugmentParams& params, Rng& rng) {
  return apply_affine(img, sample_affine(params, rng));
}

} // namespace tumornet
