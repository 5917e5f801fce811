#include "lvsr/conv.hpp"

#include <algorithm>
#include <array>

#include "lvsr/errors.hpp"
#include "lvsr/mac_counter.hpp"
#include "lvsr/parallel.hpp"
#include "spatial.hpp"

namespace lvsr {

using detail::Extent3;
using detail::make_result;
using detail::Node;

std::size_t ConvDescriptor::kernel_volume() const {
  std::size_t v = 1;
  for (auto k : kernel) v *= k;
  return v;
}

std::size_t ConvDescriptor::pad_before(std::size_t axis) const {
  const std::size_t span = (kernel[axis] - 1) * dilation_at(axis);
  return padding == Padding::kCausalLeft ? span : span / 2;
}

std::size_t ConvDescriptor::pad_after(std::size_t axis) const {
  const std::size_t span = (kernel[axis] - 1) * dilation_at(axis);
  return padding == Padding::kCausalLeft ? 0 : span - span / 2;
}

std::size_t ConvDescriptor::output_extent(std::size_t axis, std::size_t in) const {
  const std::size_t padded = in + pad_before(axis) + pad_after(axis);
  const std::size_t span = (kernel[axis] - 1) * dilation_at(axis) + 1;
  if (in == 0 || padded < span) {
    throw ShapeError("conv: spatial extent " + std::to_string(in) + " too small for kernel " +
                     std::to_string(kernel[axis]));
  }
  return (padded - span) / stride_at(axis) + 1;
}

Shape ConvDescriptor::weight_shape() const {
  Shape s{out_channels, in_channels / groups};
  s.insert(s.end(), kernel.begin(), kernel.end());
  return s;
}

void ConvDescriptor::validate() const {
  if (kernel.empty() || kernel.size() > 3) throw ShapeError("conv: kernel must have 1 to 3 dimensions");
  for (auto k : kernel)
    if (k == 0) throw ShapeError("conv: kernel extents must be positive");
  if (!stride.empty() && stride.size() != kernel.size()) throw ShapeError("conv: stride rank mismatch");
  if (!dilation.empty() && dilation.size() != kernel.size()) throw ShapeError("conv: dilation rank mismatch");
  for (auto s : stride)
    if (s == 0) throw ShapeError("conv: stride must be positive");
  for (auto d : dilation)
    if (d == 0) throw ShapeError("conv: dilation must be positive");
  if (in_channels == 0 || out_channels == 0 || groups == 0) throw ShapeError("conv: channel counts must be positive");
  if (in_channels % groups != 0 || out_channels % groups != 0) {
    throw ShapeError("conv: channels " + std::to_string(in_channels) + "->" + std::to_string(out_channels) +
                     " not divisible by " + std::to_string(groups) + " groups");
  }
  if (padding == Padding::kCausalLeft && kernel.size() != 1) {
    throw ShapeError("conv: causal padding is only defined for 1-D kernels");
  }
}

ConvDescriptor conv1d(std::size_t in, std::size_t out, std::size_t k, std::size_t dilation, std::size_t groups,
                      Padding padding) {
  ConvDescriptor d;
  d.kernel = {k};
  d.in_channels = in;
  d.out_channels = out;
  d.dilation = {dilation};
  d.groups = groups;
  d.padding = padding;
  return d;
}

ConvDescriptor conv2d(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw, std::size_t stride,
                      std::size_t groups) {
  ConvDescriptor d;
  d.kernel = {kh, kw};
  d.in_channels = in;
  d.out_channels = out;
  d.stride = {stride, stride};
  d.groups = groups;
  d.padding = Padding::kSymmetric;
  return d;
}

namespace {

struct Geometry {
  std::size_t batch = 0, cin = 0, cout = 0, groups = 1, cin_g = 0, cout_g = 0;
  Extent3 in, out;
  std::array<std::size_t, 3> k{1, 1, 1}, s{1, 1, 1}, d{1, 1, 1}, pad{0, 0, 0};
  std::size_t kv = 1;

  std::size_t rows() const { return cin_g * kv; }  // im2col rows per group
  std::size_t positions() const { return out.size(); }
  bool pointwise() const {
    return kv == 1 && s == std::array<std::size_t, 3>{1, 1, 1} && pad == std::array<std::size_t, 3>{0, 0, 0};
  }

  /// Input offset inside one channel plane for a tap, or -1 when it lands in padding.
  std::ptrdiff_t input_offset(std::size_t od, std::size_t oh, std::size_t ow, std::size_t a, std::size_t b,
                              std::size_t c) const {
    const auto zd = static_cast<std::ptrdiff_t>(od * s[0] + a * d[0]) - static_cast<std::ptrdiff_t>(pad[0]);
    const auto zh = static_cast<std::ptrdiff_t>(oh * s[1] + b * d[1]) - static_cast<std::ptrdiff_t>(pad[1]);
    const auto zw = static_cast<std::ptrdiff_t>(ow * s[2] + c * d[2]) - static_cast<std::ptrdiff_t>(pad[2]);
    if (zd < 0 || zh < 0 || zw < 0 || zd >= static_cast<std::ptrdiff_t>(in.d) ||
        zh >= static_cast<std::ptrdiff_t>(in.h) || zw >= static_cast<std::ptrdiff_t>(in.w)) {
      return -1;
    }
    return (zd * static_cast<std::ptrdiff_t>(in.h) + zh) * static_cast<std::ptrdiff_t>(in.w) + zw;
  }
};

Geometry make_geometry(const Shape& x, const ConvDescriptor& desc) {
  desc.validate();
  const std::size_t sr = desc.spatial_rank();
  if (x.size() != sr + 2) {
    throw ShapeError("conv: expected input rank " + std::to_string(sr + 2) + " for a " + std::to_string(sr) +
                     "-D kernel, got " + to_string(x));
  }
  if (x[1] != desc.in_channels) {
    throw ShapeError("conv: input has " + std::to_string(x[1]) + " channels, descriptor expects " +
                     std::to_string(desc.in_channels));
  }
  Geometry g;
  g.batch = x[0];
  g.cin = desc.in_channels;
  g.cout = desc.out_channels;
  g.groups = desc.groups;
  g.cin_g = g.cin / g.groups;
  g.cout_g = g.cout / g.groups;
  g.in = detail::extent_from(x);
  Shape out_shape{x[0], desc.out_channels};
  std::vector<std::size_t> strides, dilations, pads;
  for (std::size_t a = 0; a < sr; ++a) {
    out_shape.push_back(desc.output_extent(a, x[a + 2]));
    strides.push_back(desc.stride_at(a));
    dilations.push_back(desc.dilation_at(a));
    pads.push_back(desc.pad_before(a));
  }
  g.out = detail::extent_from(out_shape);
  g.k = detail::align3(desc.kernel, 1);
  g.s = detail::align3(strides, 1);
  g.d = detail::align3(dilations, 1);
  g.pad = detail::align3(pads, 0);
  g.kv = desc.kernel_volume();
  return g;
}

Shape output_shape(const Shape& x, const ConvDescriptor& desc) {
  Shape out{x[0], desc.out_channels};
  for (std::size_t a = 0; a < desc.spatial_rank(); ++a) out.push_back(desc.output_extent(a, x[a + 2]));
  return out;
}

/// col[(c*kv + tap) * P + o] for channels [group*cin_g, (group+1)*cin_g) of one sample.
template <typename T>
void im2col(const Geometry& g, const T* sample, std::size_t group, T* col) {
  const std::size_t plane = g.in.size();
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.cin_g; ++c) {
    const T* src = sample + (group * g.cin_g + c) * plane;
    std::size_t tap = 0;
    for (std::size_t a = 0; a < g.k[0]; ++a)
      for (std::size_t b = 0; b < g.k[1]; ++b)
        for (std::size_t e = 0; e < g.k[2]; ++e, ++tap) {
          T* row = col + (c * g.kv + tap) * positions;
          std::size_t o = 0;
          for (std::size_t od = 0; od < g.out.d; ++od)
            for (std::size_t oh = 0; oh < g.out.h; ++oh)
              for (std::size_t ow = 0; ow < g.out.w; ++ow, ++o) {
                const auto off = g.input_offset(od, oh, ow, a, b, e);
                row[o] = off < 0 ? T{0} : src[off];
              }
        }
  }
}

/// Transposed layout colT[o * rows + (c*kv + tap)], used for weight gradients.
template <typename T>
void im2col_transposed(const Geometry& g, const T* sample, std::size_t group, T* colt) {
  const std::size_t plane = g.in.size();
  const std::size_t rows = g.rows();
  for (std::size_t c = 0; c < g.cin_g; ++c) {
    const T* src = sample + (group * g.cin_g + c) * plane;
    std::size_t tap = 0;
    for (std::size_t a = 0; a < g.k[0]; ++a)
      for (std::size_t b = 0; b < g.k[1]; ++b)
        for (std::size_t e = 0; e < g.k[2]; ++e, ++tap) {
          const std::size_t r = c * g.kv + tap;
          std::size_t o = 0;
          for (std::size_t od = 0; od < g.out.d; ++od)
            for (std::size_t oh = 0; oh < g.out.h; ++oh)
              for (std::size_t ow = 0; ow < g.out.w; ++ow, ++o) {
                const auto off = g.input_offset(od, oh, ow, a, b, e);
                colt[o * rows + r] = off < 0 ? T{0} : src[off];
              }
        }
  }
}

template <typename T>
void col2im_add(const Geometry& g, const T* col, std::size_t group, T* sample_grad) {
  const std::size_t plane = g.in.size();
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.cin_g; ++c) {
    T* dst = sample_grad + (group * g.cin_g + c) * plane;
    std::size_t tap = 0;
    for (std::size_t a = 0; a < g.k[0]; ++a)
      for (std::size_t b = 0; b < g.k[1]; ++b)
        for (std::size_t e = 0; e < g.k[2]; ++e, ++tap) {
          const T* row = col + (c * g.kv + tap) * positions;
          std::size_t o = 0;
          for (std::size_t od = 0; od < g.out.d; ++od)
            for (std::size_t oh = 0; oh < g.out.h; ++oh)
              for (std::size_t ow = 0; ow < g.out.w; ++ow, ++o) {
                const auto off = g.input_offset(od, oh, ow, a, b, e);
                if (off >= 0) dst[off] += row[o];
              }
        }
  }
}

template <typename T>
void forward_im2col(const Geometry& g, const T* x, const T* w, T* y) {
  const std::size_t rows = g.rows(), positions = g.positions();
  const std::size_t in_sample = g.cin * g.in.size(), out_sample = g.cout * positions;
  parallel_for(0, g.batch, [&](std::size_t b) {
    std::vector<T> col;
    if (!g.pointwise()) col.resize(rows * positions);
    for (std::size_t grp = 0; grp < g.groups; ++grp) {
      const T* cols = nullptr;
      if (g.pointwise()) {
        cols = x + b * in_sample + grp * g.cin_g * positions;
      } else {
        im2col(g, x + b * in_sample, grp, col.data());
        cols = col.data();
      }
      detail::gemm_accumulate(g.cout_g, positions, rows, w + grp * g.cout_g * rows, rows, false, cols, positions,
                              y + b * out_sample + grp * g.cout_g * positions, positions);
    }
  });
}

template <typename T>
void forward_direct(const Geometry& g, const T* x, const T* w, T* y) {
  const std::size_t positions = g.positions(), plane = g.in.size();
  parallel_for(0, g.batch * g.cout, [&](std::size_t bc) {
    const std::size_t b = bc / g.cout, co = bc % g.cout, grp = co / g.cout_g;
    const T* wk = w + co * g.rows();
    T* out = y + bc * positions;
    std::size_t o = 0;
    for (std::size_t od = 0; od < g.out.d; ++od)
      for (std::size_t oh = 0; oh < g.out.h; ++oh)
        for (std::size_t ow = 0; ow < g.out.w; ++ow, ++o) {
          T acc{0};
          for (std::size_t c = 0; c < g.cin_g; ++c) {
            const T* src = x + (b * g.cin + grp * g.cin_g + c) * plane;
            std::size_t tap = 0;
            for (std::size_t a = 0; a < g.k[0]; ++a)
              for (std::size_t bb = 0; bb < g.k[1]; ++bb)
                for (std::size_t e = 0; e < g.k[2]; ++e, ++tap) {
                  const auto off = g.input_offset(od, oh, ow, a, bb, e);
                  if (off >= 0) acc += wk[c * g.kv + tap] * src[off];
                }
          }
          out[o] = acc;
        }
  });
}

template <typename T>
void backward_im2col(const Geometry& g, const Node<T>* xn, const Node<T>* wn, const std::vector<T>& gy, T* gx, T* gw) {
  const std::size_t rows = g.rows(), positions = g.positions();
  const std::size_t in_sample = g.cin * g.in.size(), out_sample = g.cout * positions;
  const T* x = xn->value.data();
  const T* w = wn->value.data();
  if (gx != nullptr) {
    parallel_for(0, g.batch, [&](std::size_t b) {
      std::vector<T> dcol(g.pointwise() ? 0 : rows * positions);
      for (std::size_t grp = 0; grp < g.groups; ++grp) {
        const T* dy = gy.data() + b * out_sample + grp * g.cout_g * positions;
        if (g.pointwise()) {
          detail::gemm_accumulate(rows, positions, g.cout_g, w + grp * g.cout_g * rows, rows, true, dy, positions,
                                  gx + b * in_sample + grp * g.cin_g * positions, positions);
        } else {
          std::fill(dcol.begin(), dcol.end(), T{0});
          detail::gemm_accumulate(rows, positions, g.cout_g, w + grp * g.cout_g * rows, rows, true, dy, positions,
                                  dcol.data(), positions);
          col2im_add(g, dcol.data(), grp, gx + b * in_sample);
        }
      }
    });
  }
  if (gw != nullptr) {
    std::vector<T> colt(rows * positions);
    for (std::size_t b = 0; b < g.batch; ++b) {
      for (std::size_t grp = 0; grp < g.groups; ++grp) {
        im2col_transposed(g, x + b * in_sample, grp, colt.data());
        const T* dy = gy.data() + b * out_sample + grp * g.cout_g * positions;
        detail::gemm_accumulate(g.cout_g, rows, positions, dy, positions, false, colt.data(), rows,
                                gw + grp * g.cout_g * rows, rows);
      }
    }
  }
}

template <typename T>
void backward_direct(const Geometry& g, const Node<T>* xn, const Node<T>* wn, const std::vector<T>& gy, T* gx, T* gw) {
  const std::size_t positions = g.positions(), plane = g.in.size();
  const T* x = xn->value.data();
  const T* w = wn->value.data();
  // Input channels of a group are only touched by that group's outputs, so
  // work is split per (sample, group) for the input gradient.
  if (gx != nullptr) {
    parallel_for(0, g.batch * g.groups, [&](std::size_t bg) {
      const std::size_t b = bg / g.groups, grp = bg % g.groups;
      for (std::size_t cog = 0; cog < g.cout_g; ++cog) {
        const std::size_t co = grp * g.cout_g + cog;
        const T* wk = w + co * g.rows();
        const T* dy = gy.data() + (b * g.cout + co) * positions;
        std::size_t o = 0;
        for (std::size_t od = 0; od < g.out.d; ++od)
          for (std::size_t oh = 0; oh < g.out.h; ++oh)
            for (std::size_t ow = 0; ow < g.out.w; ++ow, ++o) {
              const T go = dy[o];
              for (std::size_t c = 0; c < g.cin_g; ++c) {
                T* dst = gx + (b * g.cin + grp * g.cin_g + c) * plane;
                std::size_t tap = 0;
                for (std::size_t a = 0; a < g.k[0]; ++a)
                  for (std::size_t bb = 0; bb < g.k[1]; ++bb)
                    for (std::size_t e = 0; e < g.k[2]; ++e, ++tap) {
                      const auto off = g.input_offset(od, oh, ow, a, bb, e);
                      if (off >= 0) dst[off] += wk[c * g.kv + tap] * go;
                    }
              }
            }
      }
    });
  }
  if (gw != nullptr) {
    parallel_for(0, g.cout, [&](std::size_t co) {
      const std::size_t grp = co / g.cout_g;
      T* wk = gw + co * g.rows();
      for (std::size_t b = 0; b < g.batch; ++b) {
        const T* dy = gy.data() + (b * g.cout + co) * positions;
        std::size_t o = 0;
        for (std::size_t od = 0; od < g.out.d; ++od)
          for (std::size_t oh = 0; oh < g.out.h; ++oh)
            for (std::size_t ow = 0; ow < g.out.w; ++ow, ++o) {
              const T go = dy[o];
              for (std::size_t c = 0; c < g.cin_g; ++c) {
                const T* src = x + (b * g.cin + grp * g.cin_g + c) * plane;
                std::size_t tap = 0;
                for (std::size_t a = 0; a < g.k[0]; ++a)
                  for (std::size_t bb = 0; bb < g.k[1]; ++bb)
                    for (std::size_t e = 0; e < g.k[2]; ++e, ++tap) {
                      const auto off = g.input_offset(od, oh, ow, a, bb, e);
                      if (off >= 0) wk[c * g.kv + tap] += src[off] * go;
                    }
              }
            }
      }
    });
  }
}

}  // namespace

template <typename T>
Tensor<T> conv(const Tensor<T>& input, const ConvDescriptor& desc, const Tensor<T>& weight, const Tensor<T>& bias,
               ConvAlgo algo) {
  if (!input.defined() || !weight.defined()) throw ShapeError("conv: undefined input or weight");
  const Geometry g = make_geometry(input.shape(), desc);
  if (weight.shape() != desc.weight_shape()) {
    throw ShapeError("conv: weight shape " + to_string(weight.shape()) + ", descriptor expects " +
                     to_string(desc.weight_shape()));
  }
  if (bias.defined() && bias.shape() != Shape{desc.out_channels}) {
    throw ShapeError("conv: bias shape " + to_string(bias.shape()) + " does not match " +
                     std::to_string(desc.out_channels) + " outputs");
  }
  const bool direct = algo == ConvAlgo::kDirect || (algo == ConvAlgo::kAuto && g.rows() <= 8);
  const std::size_t positions = g.positions();
  std::vector<T> out(g.batch * g.cout * positions, T{0});
  if (direct) {
    forward_direct(g, input.data().data(), weight.data().data(), out.data());
  } else {
    forward_im2col(g, input.data().data(), weight.data().data(), out.data());
  }
  if (bias.defined()) {
    auto bv = bias.data();
    for (std::size_t b = 0; b < g.batch; ++b)
      for (std::size_t co = 0; co < g.cout; ++co) {
        T* row = out.data() + (b * g.cout + co) * positions;
        for (std::size_t o = 0; o < positions; ++o) row[o] += bv[co];
      }
  }
  detail::record_macs(static_cast<std::uint64_t>(g.batch) * g.cout * positions * g.rows());

  auto* xn = input.node().get();
  auto* wn = weight.node().get();
  auto* bn = bias.defined() ? bias.node().get() : nullptr;
  std::vector<Tensor<T>> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(output_shape(input.shape(), desc), std::move(out), inputs, "conv", [=](Node<T>* self) {
    return [=] {
      T* gx = xn->requires_grad ? xn->grad_buffer().data() : nullptr;
      T* gw = wn->requires_grad ? wn->grad_buffer().data() : nullptr;
      if (direct) {
        backward_direct(g, xn, wn, self->grad, gx, gw);
      } else {
        backward_im2col(g, xn, wn, self->grad, gx, gw);
      }
      if (bn != nullptr && bn->requires_grad) {
        auto& gb = bn->grad_buffer();
        for (std::size_t b = 0; b < g.batch; ++b)
          for (std::size_t co = 0; co < g.cout; ++co) {
            const T* row = self->grad.data() + (b * g.cout + co) * positions;
            T acc{0};
            for (std::size_t o = 0; o < positions; ++o) acc += row[o];
            gb[co] += acc;
          }
      }
    };
  });
}

template Tensor<float> conv(const Tensor<float>&, const ConvDescriptor&, const Tensor<float>&, const Tensor<float>&,
                            ConvAlgo);
template Tensor<double> conv(const Tensor<double>&, const ConvDescriptor&, const Tensor<double>&,
                             const Tensor<double>&, ConvAlgo);

}  // namespace lvsr
