#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "tumornet/tensor.hpp"

namespace tumornet {

enum class Padding { Same, Valid };

struct ConvGeometry {
  std::size_t kernel_height = 3;
  std::size_t kernel_width = 3;
  std::size_t stride = 1;
  Padding padding = Padding::Same;

  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

namespace detail {

struct Axis {
  std::size_t out = 0;
  std::size_t pad_before = 0;
};

// 'same': out = ceil(in/stride), zero padding split evenly with the odd
// pixel on the bottom/right. 'valid': no padding.
inline Axis conv_axis(std::size_t in, std::size_t k, std::size_t stride, Padding pad) {
  if (k == 0 || stride == 0) throw ShapeError("kernel extent and stride must be positive");
  if (pad == Padding::Same) {
    const std::size_t out = (in + stride - 1) / stride;
    const std::size_t needed = (out - 1) * stride + k;
    const std::size_t total = needed > in ? needed - in : 0;
    return {out, total / 2};
  }
  if (in < k) {
    throw ShapeError("valid convolution leaves no output: extent " + std::to_string(in) +
                     " smaller than kernel " + std::to_string(k));
  }
  return {(in - k) / stride + 1, 0};
}

} // namespace detail

inline Shape conv2d_output_shape(const Shape& input, const Shape& kernels, const ConvGeometry& g) {
  if (input.size() != 4 || kernels.size() != 4) {
    throw ShapeError("conv2d expects input [N,H,W,C] and kernels [kh,kw,Cin,Cout], got " +
                     to_string(input) + " and " + to_string(kernels));
  }
  if (kernels[0] != g.kernel_height || kernels[1] != g.kernel_width) {
    throw ShapeError("kernel tensor " + to_string(kernels) + " disagrees with geometry");
  }
  if (input[3] != kernels[2]) {
    throw ShapeError("conv2d channel mismatch: input " + to_string(input) + " vs kernels " +
                     to_string(kernels));
  }
  const auto h = detail::conv_axis(input[1], g.kernel_height, g.stride, g.padding);
  const auto w = detail::conv_axis(input[2], g.kernel_width, g.stride, g.padding);
  return {input[0], h.out, w.out, kernels[3]};
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul dimension mismatch: " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c({m, n});
  const T* pa = a.raw();
  const T* pb = b.raw();
  T* pc = c.raw();
  for (std::size_t i = 0; i < m; ++i) {
    T* row = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = pa[i * k + p];
      const T* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  require_finite(c, "matmul");
  return c;
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects a matrix, got " + to_string(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor<T> t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
  return t;
}

/// Cross-correlation of an N,H,W,Cin batch with kh,kw,Cin,Cout kernels plus a
/// per-output-channel bias.
template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias,
                         const ConvGeometry& g) {
  const Shape out_shape = conv2d_output_shape(input.shape(), kernels.shape(), g);
  require_shape(bias, Shape{kernels.dim(3)}, "conv2d bias");

  const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), cin = input.dim(3);
  const std::size_t oh = out_shape[1], ow = out_shape[2], cout = out_shape[3];
  const std::size_t kh = g.kernel_height, kw = g.kernel_width, s = g.stride;
  const std::size_t pad_t = detail::conv_axis(h, kh, s, g.padding).pad_before;
  const std::size_t pad_l = detail::conv_axis(w, kw, s, g.padding).pad_before;

  Tensor<T> out(out_shape);
  const T* x = input.raw();
  const T* k = kernels.raw();
  const T* b = bias.raw();
  T* y = out.raw();

  for (std::size_t ni = 0; ni < n; ++ni) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T* acc = y + ((ni * oh + oy) * ow + ox) * cout;
        for (std::size_t co = 0; co < cout; ++co) acc[co] = b[co];
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) -
                                    static_cast<std::ptrdiff_t>(pad_t);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kx) -
                                      static_cast<std::ptrdiff_t>(pad_l);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const T* px = x + ((ni * h + static_cast<std::size_t>(iy)) * w +
                               static_cast<std::size_t>(ix)) * cin;
            const T* pk = k + (ky * kw + kx) * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const T xv = px[ci];
              const T* krow = pk + ci * cout;
              for (std::size_t co = 0; co < cout; ++co) acc[co] += xv * krow[co];
            }
          }
        }
      }
    }
  }
  require_finite(out, "conv2d_forward");
  return out;
}

template <class T>
struct ConvGradients {
  Tensor<T> input;
  Tensor<T> kernels;
  Tensor<T> bias;
};

template <class T>
ConvGradients<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                                 const Tensor<T>& kernels, const ConvGeometry& g) {
  const Shape out_shape = conv2d_output_shape(input.shape(), kernels.shape(), g);
  require_shape(grad_out, out_shape, "conv2d_backward grad_out");

  const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), cin = input.dim(3);
  const std::size_t oh = out_shape[1], ow = out_shape[2], cout = out_shape[3];
  const std::size_t kh = g.kernel_height, kw = g.kernel_width, s = g.stride;
  const std::size_t pad_t = detail::conv_axis(h, kh, s, g.padding).pad_before;
  const std::size_t pad_l = detail::conv_axis(w, kw, s, g.padding).pad_before;

  ConvGradients<T> grads{Tensor<T>(input.shape()), Tensor<T>(kernels.shape()),
                         Tensor<T>(Shape{cout})};

  // Kernels laid out as kh,kw,Cout,Cin so the input-gradient inner loop is contiguous.
  std::vector<T> kt(kernels.size());
  for (std::size_t tap = 0; tap < kh * kw; ++tap)
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t co = 0; co < cout; ++co)
        kt[(tap * cout + co) * cin + ci] = kernels[(tap * cin + ci) * cout + co];

  const T* x = input.raw();
  const T* gy = grad_out.raw();
  T* gx = grads.input.raw();
  T* gk = grads.kernels.raw();
  T* gb = grads.bias.raw();

  for (std::size_t ni = 0; ni < n; ++ni) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const T* go = gy + ((ni * oh + oy) * ow + ox) * cout;
        for (std::size_t co = 0; co < cout; ++co) gb[co] += go[co];
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) -
                                    static_cast<std::ptrdiff_t>(pad_t);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kx) -
                                      static_cast<std::ptrdiff_t>(pad_l);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const std::size_t pix = ((ni * h + static_cast<std::size_t>(iy)) * w +
                                     static_cast<std::size_t>(ix)) * cin;
            const std::size_t tap = ky * kw + kx;
            const T* px = x + pix;
            T* pgx = gx + pix;
            T* pgk = gk + tap * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const T xv = px[ci];
              T* krow = pgk + ci * cout;
              for (std::size_t co = 0; co < cout; ++co) krow[co] += xv * go[co];
            }
            const T* pkt = kt.data() + tap * cout * cin;
            for (std::size_t co = 0; co < cout; ++co) {
              const T gv = go[co];
              const T* krow = pkt + co * cin;
              for (std::size_t ci = 0; ci < cin; ++ci) pgx[ci] += gv * krow[ci];
            }
          }
        }
      }
    }
  }
  require_finite(grads.input, "conv2d_backward");
  require_finite(grads.kernels, "conv2d_backward");
  require_finite(grads.bias, "conv2d_backward");
  return grads;
}

/// Winning input position for every pooled output element, tied to the
/// input and output shapes it was produced for.
struct PoolIndex {
  Shape input_shape;
  Shape output_shape;
  std::vector<std::size_t> argmax;
};

struct PoolWindow {
  std::size_t height = 2;
  std::size_t width = 2;

  friend bool operator==(const PoolWindow&, const PoolWindow&) = default;
};

inline Shape maxpool2d_output_shape(const Shape& input, PoolWindow window, std::size_t stride) {
  if (input.size() != 4) throw ShapeError("maxpool expects [N,H,W,C], got " + to_string(input));
  if (window.height == 0 || window.width == 0 || stride == 0) {
    throw ShapeError("pool window and stride must be positive");
  }
  if (input[1] < window.height || input[2] < window.width) {
    throw ShapeError("pool window " + std::to_string(window.height) + "x" +
                     std::to_string(window.width) + " larger than input " + to_string(input));
  }
  return {input[0], (input[1] - window.height) / stride + 1, (input[2] - window.width) / stride + 1,
          input[3]};
}

template <class T>
struct PoolResult {
  Tensor<T> output;
  PoolIndex index;
};

// Ties resolve to the first position in raster order.
template <class T>
PoolResult<T> maxpool2d_forward(const Tensor<T>& input, PoolWindow window, std::size_t stride) {
  const Shape out_shape = maxpool2d_output_shape(input.shape(), window, stride);
  const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const std::size_t oh = out_shape[1], ow = out_shape[2];
  (void)h;

  PoolResult<T> r{Tensor<T>(out_shape), PoolIndex{input.shape(), out_shape, {}}};
  r.index.argmax.resize(r.output.size());
  const T* x = input.raw();
  T* y = r.output.raw();

  for (std::size_t ni = 0; ni < n; ++ni) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const std::size_t o = ((ni * oh + oy) * ow + ox) * c + ch;
          std::size_t best = ((ni * h + oy * stride) * w + ox * stride) * c + ch;
          T best_v = x[best];
          for (std::size_t wy = 0; wy < window.height; ++wy) {
            for (std::size_t wx = 0; wx < window.width; ++wx) {
              const std::size_t i = ((ni * h + oy * stride + wy) * w + ox * stride + wx) * c + ch;
              if (x[i] > best_v) {
                best_v = x[i];
                best = i;
              }
            }
          }
          y[o] = best_v;
          r.index.argmax[o] = best;
        }
      }
    }
  }
  require_finite(r.output, "maxpool2d_forward");
  return r;
}

template <class T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, const PoolIndex& index,
                             const Shape& input_shape) {
  if (index.input_shape != input_shape || index.output_shape != grad_out.shape() ||
      index.argmax.size() != grad_out.size()) {
    throw ShapeError("maxpool index map does not match: recorded " + to_string(index.input_shape) +
                     " -> " + to_string(index.output_shape) + ", requested " +
                     to_string(input_shape) + " with grad " + to_string(grad_out.shape()));
  }
  Tensor<T> grad_in(input_shape);
  const std::size_t limit = grad_in.size();
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    const std::size_t i = index.argmax[o];
    if (i >= limit) throw ShapeError("maxpool index map entry out of range");
    grad_in[i] += grad_out[o];
  }
  return grad_in;
}

} // namespace tumornet
