#include "lvsr/ghost.hpp"

#include <cmath>
#include <numeric>

#include "lvsr/errors.hpp"

namespace lvsr {

std::size_t GhostConfig::primary_channels() const {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(out_channels)));
}

std::size_t GhostConfig::cheap_groups() const { return std::gcd(primary_channels(), cheap_channels()); }

void GhostConfig::validate() const {
  if (in_channels == 0 || out_channels == 0) throw ConfigError("ghost: channel counts must be positive");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("ghost: ratio must lie in (0,1), got " + std::to_string(ratio));
  if (primary_channels() == 0 || cheap_channels() == 0) {
    throw ConfigError("ghost: ratio " + std::to_string(ratio) + " leaves an empty branch for " +
                      std::to_string(out_channels) + " output channels");
  }
  if (cheap_kernel == 0 || primary_kernel == 0 || stride == 0 || dilation == 0) {
    throw ConfigError("ghost: kernel, stride and dilation must be positive");
  }
  if (dims == Dims::k1D && stride != 1) throw ConfigError("ghost: 1-D modules do not support stride");
}

ConvDescriptor GhostConfig::primary_desc() const {
  if (dims == Dims::k1D) return conv1d(in_channels, primary_channels(), primary_kernel, dilation);
  return conv2d(in_channels, primary_channels(), primary_kernel, primary_kernel, stride);
}

ConvDescriptor GhostConfig::cheap_desc() const {
  if (dims == Dims::k1D) return conv1d(primary_channels(), cheap_channels(), cheap_kernel, 1, cheap_groups());
  return conv2d(primary_channels(), cheap_channels(), cheap_kernel, cheap_kernel, 1, cheap_groups());
}

template <typename T>
GhostModule<T>::GhostModule(const GhostConfig& config, Rng& rng) : cfg(config) {
  cfg.validate();
  primary = Conv<T>(cfg.primary_desc(), false, rng);
  primary_bn = BatchNorm<T>(cfg.primary_channels());
  cheap = Conv<T>(cfg.cheap_desc(), false, rng);
  cheap_bn = BatchNorm<T>(cfg.cheap_channels());
}

template <typename T>
Tensor<T> GhostModule<T>::primary_branch(const Tensor<T>& x, const ForwardContext& ctx) {
  if (x.rank() < 2 || x.dim(1) != cfg.in_channels) {
    throw ShapeError("ghost: expected " + std::to_string(cfg.in_channels) + " input channels, got shape " +
                     to_string(x.shape()));
  }
  return activate(primary_bn.forward(primary.forward(x, ctx), ctx), cfg.activation);
}

template <typename T>
Tensor<T> GhostModule<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  auto x1 = primary_branch(x, ctx);
  auto x2 = activate(cheap_bn.forward(cheap.forward(x1, ctx), ctx), cfg.activation);
  return concat_channels(x1, x2);
}

template <typename T>
void GhostModule<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  primary.register_in(reg, path + ".primary");
  primary_bn.register_in(reg, path + ".primary_bn");
  cheap.register_in(reg, path + ".cheap");
  cheap_bn.register_in(reg, path + ".cheap_bn");
}

void DFCConfig::validate() const {
  if (in_channels == 0 || channels == 0) throw ConfigError("dfc: channel counts must be positive");
  if (entry_kernel == 0 || directional_kernel == 0 || downsample == 0 || stride == 0) {
    throw ConfigError("dfc: kernels, downsample factor and stride must be positive");
  }
}

ConvDescriptor DFCConfig::entry_desc() const {
  return conv2d(in_channels, channels, entry_kernel, entry_kernel, stride);
}
ConvDescriptor DFCConfig::horizontal_desc() const {
  return conv2d(channels, channels, 1, directional_kernel, 1, channels);
}
ConvDescriptor DFCConfig::vertical_desc() const {
  return conv2d(channels, channels, directional_kernel, 1, 1, channels);
}

DFCConfig dfc_for(const GhostConfig& g, std::size_t entry_kernel) {
  DFCConfig d;
  d.in_channels = g.in_channels;
  d.channels = g.out_channels;
  d.entry_kernel = entry_kernel;
  d.stride = g.stride;
  return d;
}

template <typename T>
DFCAttention<T>::DFCAttention(const DFCConfig& config, Rng& rng) : cfg(config) {
  cfg.validate();
  entry = Conv<T>(cfg.entry_desc(), false, rng);
  entry_bn = BatchNorm<T>(cfg.channels);
  horizontal = Conv<T>(cfg.horizontal_desc(), false, rng);
  horizontal_bn = BatchNorm<T>(cfg.channels);
  vertical = Conv<T>(cfg.vertical_desc(), false, rng);
  vertical_bn = BatchNorm<T>(cfg.channels);
}

template <typename T>
Tensor<T> DFCAttention<T>::forward(const Tensor<T>& x, const ForwardContext& ctx,
                                   const std::vector<std::size_t>& target) {
  if (x.rank() != 4) throw ShapeError("dfc: expected [N,C,H,W], got " + to_string(x.shape()));
  if (x.dim(2) < cfg.downsample || x.dim(3) < cfg.downsample) {
    throw ShapeError("dfc: spatial size " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                     " is below the downsample factor " + std::to_string(cfg.downsample));
  }
  const std::vector<std::size_t> win{cfg.downsample, cfg.downsample};
  auto a = avg_pool(x, win, win);
  a = entry_bn.forward(entry.forward(a, ctx), ctx);
  a = horizontal_bn.forward(horizontal.forward(a, ctx), ctx);
  a = vertical_bn.forward(vertical.forward(a, ctx), ctx);
  return upsample_nearest(sigmoid(a), target);
}

template <typename T>
Tensor<T> DFCAttention<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  if (x.rank() != 4) throw ShapeError("dfc: expected [N,C,H,W], got " + to_string(x.shape()));
  return forward(x, ctx, {x.dim(2), x.dim(3)});
}

template <typename T>
void DFCAttention<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  entry.register_in(reg, path + ".entry");
  entry_bn.register_in(reg, path + ".entry_bn");
  horizontal.register_in(reg, path + ".horizontal");
  horizontal_bn.register_in(reg, path + ".horizontal_bn");
  vertical.register_in(reg, path + ".vertical");
  vertical_bn.register_in(reg, path + ".vertical_bn");
}

template <typename T>
GhostV2Module<T>::GhostV2Module(const GhostConfig& gcfg, const DFCConfig& dcfg, Rng& rng)
    : ghost(gcfg, rng), dfc(dcfg, rng) {
  if (gcfg.dims != Dims::k2D) throw ConfigError("ghostv2: DFC attention is only defined for 2-D modules");
  if (dcfg.in_channels != gcfg.in_channels || dcfg.channels != gcfg.out_channels) {
    throw ConfigError("ghostv2: attention channels must match the ghost module");
  }
}

template <typename T>
Tensor<T> GhostV2Module<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  auto g = ghost.forward(x, ctx);
  auto a = dfc.forward(x, ctx, {g.dim(2), g.dim(3)});
  return mul(g, a);
}

template <typename T>
void GhostV2Module<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  ghost.register_in(reg, path + ".ghost");
  dfc.register_in(reg, path + ".dfc");
}

template struct GhostModule<float>;
template struct GhostModule<double>;
template struct DFCAttention<float>;
template struct DFCAttention<double>;
template struct GhostV2Module<float>;
template struct GhostV2Module<double>;

}  // namespace lvsr
