#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "tumornet/image.hpp"
#include "tumornet/rng.hpp"

namespace tumornet {

// Class directories written by the synthetic fixture generator, in
// lexicographic (label id) order.
inline const std::array<std::string, 4> kFixtureClasses{"glioma", "meningioma", "notumor", "pituitary"};

/// Draws one synthetic gray "scan": a textured ellipse on black, plus a
/// class-specific structure.
///   glioma      large bright disk at a random spot inside the ellipse
///   meningioma  bright ring
///   notumor     nothing added
///   pituitary   small bright spot below the center
inline RawImage synthesize_fixture(std::size_t class_id, std::size_t size, Rng& rng) {
  RawImage img;
  img.height = img.width = size;
  img.channels = 1;
  img.pixels.assign(size * size, 0);

  const double s = static_cast<double>(size);
  const double cx = s / 2 + rng.uniform(-0.04, 0.04) * s;
  const double cy = s / 2 + rng.uniform(-0.04, 0.04) * s;
  const double rx = s * rng.uniform(0.36, 0.42), ry = s * rng.uniform(0.40, 0.46);
  const double tissue = rng.uniform(60, 95);
  const double fx = rng.uniform(0.15, 0.35), fy = rng.uniform(0.15, 0.35), ph = rng.uniform(0, 6.28);

  // class structure
  const double ang = rng.uniform(0, 6.283185307179586);
  const double off = rng.uniform(0.0, 0.18) * s;
  double ox = cx + off * std::cos(ang), oy = cy + off * std::sin(ang) * 0.8;
  double radius = 0, inner = 0;
  switch (class_id) {
    case 0: radius = s * rng.uniform(0.14, 0.19); break;
    case 1:
      radius = s * rng.uniform(0.15, 0.20);
      inner = radius - s * rng.uniform(0.035, 0.05);
      break;
    case 3:
      radius = s * rng.uniform(0.05, 0.07);
      ox = cx + rng.uniform(-0.04, 0.04) * s;
      oy = cy + rng.uniform(0.16, 0.22) * s;
      break;
    default: break;
  }
  const double bright = rng.uniform(200, 240);

  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      const double ex = (px - cx) / rx, ey = (py - cy) / ry;
      double v = 0;
      if (ex * ex + ey * ey <= 1.0) {
        v = tissue + 12 * std::sin(fx * px + ph) * std::cos(fy * py - ph);
        if (radius > 0) {
          const double d = std::hypot(px - ox, py - oy);
          if (d <= radius && d >= inner) v = bright;
        }
      }
      v += rng.uniform(-10, 10);
      img.pixels[y * size + x] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

/// Writes root/<class>/<class>_<NNNN>.png for the four fixture classes.
/// Image k of class c comes from its own stream, so output does not depend
/// on per_class of other runs.
inline void make_fixtures(const std::filesystem::path& root, std::size_t per_class, std::uint64_t seed,
                          std::size_t size = 64) {
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec || !std::filesystem::is_directory(root)) throw DataError("cannot create fixture root " + root.string());
  for (std::size_t c = 0; c < kFixtureClasses.size(); ++c) {
    const auto dir = root / kFixtureClasses[c];
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string());
    for (std::size_t k = 0; k < per_class; ++k) {
      Rng rng(derive_seed(derive_seed(seed, c), k));
      char name[64];
      std::snprintf(name, sizeof name, "%s_%04zu.png", kFixtureClasses[c].c_str(), k);
      encode_image(dir / name, synthesize_fixture(c, size, rng));
    }
  }
}

} // namespace tumornet
