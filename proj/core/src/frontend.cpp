#include "lvsr/frontend.hpp"

#include "lvsr/errors.hpp"

namespace lvsr {

std::string trunk_block_path(std::size_t stage, std::size_t block) {
  return "layer" + std::to_string(stage + 1) + "." + std::to_string(block);
}

ConvDescriptor stem_descriptor(std::size_t in_channels, std::size_t width) {
  ConvDescriptor d;
  d.kernel = {5, 7, 7};
  d.stride = {1, 2, 2};
  d.in_channels = in_channels;
  d.out_channels = width;
  return d;
}

template <typename T>
FrontendConv<T>::FrontendConv(FrontendVariant variant, const GhostSettings& gs, std::size_t in, std::size_t out,
                              std::size_t stride, Rng& rng)
    : kind(variant) {
  if (kind != FrontendVariant::kStandard && gs.keep_strided && stride != 1) kind = FrontendVariant::kStandard;
  switch (kind) {
    case FrontendVariant::kStandard:
      conv = Conv<T>(conv2d(in, out, 3, 3, stride), false, rng);
      bn = BatchNorm<T>(out);
      break;
    case FrontendVariant::kGhost:
      ghost = GhostModule<T>(frontend_ghost_config(gs, in, out, 3, stride), rng);
      break;
    case FrontendVariant::kGhostV2: {
      const auto g = frontend_ghost_config(gs, in, out, 3, stride);
      ghostv2 = GhostV2Module<T>(g, dfc_for(g, gs.dfc_entry == PrimaryKernel::kInherit ? 3 : 1), rng);
      break;
    }
  }
}

template <typename T>
Tensor<T> FrontendConv<T>::forward(const Tensor<T>& x, const ForwardContext& ctx, bool relu_after) {
  switch (kind) {
    case FrontendVariant::kStandard: {
      auto y = bn.forward(conv.forward(x, ctx), ctx);
      return relu_after ? relu(y) : y;
    }
    case FrontendVariant::kGhost: return ghost.forward(x, ctx);
    case FrontendVariant::kGhostV2: return ghostv2.forward(x, ctx);
  }
  return {};
}

template <typename T>
void FrontendConv<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  switch (kind) {
    case FrontendVariant::kStandard:
      conv.register_in(reg, path + ".conv");
      bn.register_in(reg, path + ".bn");
      break;
    case FrontendVariant::kGhost: ghost.register_in(reg, path + ".ghost"); break;
    case FrontendVariant::kGhostV2: ghostv2.register_in(reg, path + ".ghostv2"); break;
  }
}

template <typename T>
BasicBlock<T>::BasicBlock(FrontendVariant variant, const GhostSettings& gs, std::size_t in, std::size_t out,
                          std::size_t stride, Rng& rng)
    : c1(variant, gs, in, out, stride, rng), c2(variant, gs, out, out, 1, rng), projection(stride != 1 || in != out) {
  if (projection) {
    down = Conv<T>(conv2d(in, out, 1, 1, stride), false, rng);
    down_bn = BatchNorm<T>(out);
  }
}

template <typename T>
Tensor<T> BasicBlock<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  auto y = c2.forward(c1.forward(x, ctx, true), ctx, false);
  auto skip = projection ? down_bn.forward(down.forward(x, ctx), ctx) : x;
  return relu(add(y, skip));
}

template <typename T>
void BasicBlock<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  c1.register_in(reg, path + ".c1");
  c2.register_in(reg, path + ".c2");
  if (projection) {
    down.register_in(reg, path + ".down");
    down_bn.register_in(reg, path + ".down_bn");
  }
}

template <typename T>
Frontend<T>::Frontend(const ModelSpec& spec, Rng& rng)
    : stem(stem_descriptor(spec.input.channels, spec.frontend_width), false, rng), stem_bn(spec.frontend_width) {
  std::size_t in = spec.frontend_width;
  for (std::size_t stage = 0; stage < 4; ++stage) {
    const std::size_t width = spec.frontend_width << stage;
    for (std::size_t b = 0; b < 2; ++b) {
      const std::size_t stride = (stage > 0 && b == 0) ? 2 : 1;
      blocks.emplace_back(spec.frontend_variant, spec.frontend_ghost, in, width, stride, rng);
      in = width;
    }
  }
  out_width = in;
}

template <typename T>
Tensor<T> Frontend<T>::stem_forward(const Tensor<T>& x, const ForwardContext& ctx) {
  auto y = relu(stem_bn.forward(stem.forward(x, ctx), ctx));
  return max_pool(y, kStemPoolWindow, kStemPoolStride, kStemPoolPadding);
}

template <typename T>
Tensor<T> Frontend<T>::trunk(const Tensor<T>& x, const ForwardContext& ctx) {
  auto y = x;
  for (auto& b : blocks) y = b.forward(y, ctx);
  return global_avg_pool_spatial(y);
}

template <typename T>
Tensor<T> Frontend<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  if (x.rank() != 5) throw ShapeError("frontend: expected [N,C,T,H,W], got " + to_string(x.shape()));
  if (x.dim(3) < 32 || x.dim(4) < 32) {
    throw ShapeError("frontend: spatial input " + std::to_string(x.dim(3)) + "x" + std::to_string(x.dim(4)) +
                     " is below the 32x32 minimum");
  }
  const std::size_t n = x.dim(0), t = x.dim(2);
  auto s = stem_forward(x, ctx);  // [N, w, T, H', W']
  const std::size_t w = s.dim(1), h = s.dim(3), wd = s.dim(4);
  auto frames = reshape(permute(s, {0, 2, 1, 3, 4}), Shape{n * t, w, h, wd});
  auto f = trunk(frames, ctx);  // [N*T, 8w]
  return permute(reshape(f, Shape{n, t, out_width}), {0, 2, 1});
}

template <typename T>
void Frontend<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  stem.register_in(reg, path + ".stem.conv");
  stem_bn.register_in(reg, path + ".stem.bn");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].register_in(reg, path + ".trunk." + trunk_block_path(i / 2, i % 2));
  }
}

template struct FrontendConv<float>;
template struct FrontendConv<double>;
template struct BasicBlock<float>;
template struct BasicBlock<double>;
template struct Frontend<float>;
template struct Frontend<double>;

}  // namespace lvsr
