#include "lvsr/partial.hpp"

#include <cmath>

#include "lvsr/errors.hpp"

namespace lvsr {

CoreKind parse_core(const std::string& name) {
  if (name == "temporal") return CoreKind::kTemporal;
  if (name == "shuffle") return CoreKind::kShuffle;
  if (name == "faster") return CoreKind::kFaster;
  throw ConfigError("unknown core '" + name + "' (expected temporal, shuffle or faster)");
}

std::string to_string(CoreKind k) {
  switch (k) {
    case CoreKind::kTemporal: return "temporal";
    case CoreKind::kShuffle: return "shuffle";
    case CoreKind::kFaster: return "faster";
  }
  return "?";
}

std::size_t PartialBlockConfig::branch_channels() const {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(channels)));
}

void PartialBlockConfig::validate() const {
  if (channels == 0) throw ConfigError("partial block: channels must be positive");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("partial block: ratio must lie in (0,1], got " + std::to_string(ratio));
  const std::size_t b = branch_channels();
  if (b == 0 || (ratio < 1.0 && b == channels)) {
    throw ConfigError("partial block: ratio " + std::to_string(ratio) + " leaves an empty branch for " +
                      std::to_string(channels) + " channels");
  }
  if (kernel == 0 || kernel % 2 == 0) throw ConfigError("partial block: kernel must be a positive odd integer");
  if (dilation == 0) throw ConfigError("partial block: dilation must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("partial block: dropout must lie in [0,1)");
  if (core == CoreKind::kFaster && mlp_expand == 0) throw ConfigError("partial block: mlp_expand must be positive");
  if (core == CoreKind::kShuffle && (shuffle_groups == 0 || channels % shuffle_groups != 0)) {
    throw ConfigError("partial block: channels must be divisible by shuffle_groups");
  }
}

template <typename T>
TemporalCore<T>::TemporalCore(std::size_t channels, std::size_t kernel, std::size_t dilation, double dropout_rate,
                              Activation act, Rng& rng)
    : conv1(conv1d(channels, channels, kernel, dilation), false, rng),
      bn1(channels),
      conv2(conv1d(channels, channels, kernel, dilation), false, rng),
      bn2(channels),
      activation(act),
      dropout(dropout_rate) {}

template <typename T>
Tensor<T> TemporalCore<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  auto y = activate(bn1.forward(conv1.forward(x, ctx), ctx), activation);
  y = ctx.dropout(y, dropout);
  y = activate(bn2.forward(conv2.forward(y, ctx), ctx), activation);
  return ctx.dropout(y, dropout);
}

template <typename T>
void TemporalCore<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  conv1.register_in(reg, path + ".conv1");
  bn1.register_in(reg, path + ".bn1");
  conv2.register_in(reg, path + ".conv2");
  bn2.register_in(reg, path + ".bn2");
}

template <typename T>
ShuffleCore<T>::ShuffleCore(std::size_t channels, std::size_t kernel, std::size_t dilation, double dropout_rate,
                            Activation act, bool final_act, Rng& rng)
    : pw1(conv1d(channels, channels, 1), false, rng),
      bn1(channels),
      dw(conv1d(channels, channels, kernel, dilation, channels), false, rng),
      bn2(channels),
      pw2(conv1d(channels, channels, 1), false, rng),
      bn3(channels),
      activation(act),
      final_activation(final_act),
      dropout(dropout_rate) {}

template <typename T>
Tensor<T> ShuffleCore<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  auto y = activate(bn1.forward(pw1.forward(x, ctx), ctx), activation);
  y = bn2.forward(dw.forward(y, ctx), ctx);
  y = bn3.forward(pw2.forward(y, ctx), ctx);
  if (final_activation) y = activate(y, activation);
  return ctx.dropout(y, dropout);
}

template <typename T>
void ShuffleCore<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  pw1.register_in(reg, path + ".pw1");
  bn1.register_in(reg, path + ".bn1");
  dw.register_in(reg, path + ".dw");
  bn2.register_in(reg, path + ".bn2");
  pw2.register_in(reg, path + ".pw2");
  bn3.register_in(reg, path + ".bn3");
}

template <typename T>
FasterCore<T>::FasterCore(std::size_t channels, std::size_t branch, std::size_t kernel, std::size_t dilation,
                          std::size_t mlp_expand, double dropout_rate, Activation act, Rng& rng)
    : spatial(conv1d(branch, branch, kernel, dilation), false, rng),
      expand(conv1d(channels, channels * mlp_expand, 1), false, rng),
      bn(channels * mlp_expand),
      project(conv1d(channels * mlp_expand, channels, 1), false, rng),
      activation(act),
      dropout(dropout_rate) {}

template <typename T>
Tensor<T> FasterCore<T>::forward(const Tensor<T>& x1, const ForwardContext& ctx) {
  return spatial.forward(x1, ctx);
}

template <typename T>
Tensor<T> FasterCore<T>::mlp(const Tensor<T>& merged, const ForwardContext& ctx) {
  auto h = activate(bn.forward(expand.forward(merged, ctx), ctx), activation);
  return project.forward(ctx.dropout(h, dropout), ctx);
}

template <typename T>
void FasterCore<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  spatial.register_in(reg, path + ".spatial");
  expand.register_in(reg, path + ".mlp_expand");
  bn.register_in(reg, path + ".mlp_bn");
  project.register_in(reg, path + ".mlp_project");
}

template <typename T>
PartialBlock<T>::PartialBlock(const PartialBlockConfig& config, Rng& rng) : cfg(config) {
  cfg.validate();
  const std::size_t b = cfg.branch_channels();
  switch (cfg.core) {
    case CoreKind::kTemporal:
      core = TemporalCore<T>(b, cfg.kernel, cfg.dilation, cfg.dropout, cfg.activation, rng);
      break;
    case CoreKind::kShuffle:
      core = ShuffleCore<T>(b, cfg.kernel, cfg.dilation, cfg.dropout, cfg.activation, cfg.shuffle_final_activation,
                            rng);
      break;
    case CoreKind::kFaster:
      core = FasterCore<T>(cfg.channels, b, cfg.kernel, cfg.dilation, cfg.mlp_expand, cfg.dropout, cfg.activation,
                           rng);
      break;
  }
}

template <typename T>
Tensor<T> PartialBlock<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  if (x.rank() != 3 || x.dim(1) != cfg.channels) {
    throw ShapeError("partial block: expected [N," + std::to_string(cfg.channels) + ",T], got " +
                     to_string(x.shape()));
  }
  const std::size_t split = cfg.branch_channels();
  auto identity = [](const Tensor<T>& t) { return t; };
  if (auto* c = std::get_if<TemporalCore<T>>(&core)) {
    return partial_forward(x, split, [&](const Tensor<T>& t) { return c->forward(t, ctx); }, identity, identity);
  }
  if (auto* c = std::get_if<ShuffleCore<T>>(&core)) {
    const std::size_t groups = cfg.shuffle_groups;
    return partial_forward(
        x, split, [&](const Tensor<T>& t) { return c->forward(t, ctx); }, identity,
        [&](const Tensor<T>& t) { return channel_shuffle(t, groups); });
  }
  auto& f = std::get<FasterCore<T>>(core);
  return partial_forward(
      x, split, [&](const Tensor<T>& t) { return f.forward(t, ctx); },
      [&](const Tensor<T>& t) { return f.mlp(t, ctx); }, identity);
}

template <typename T>
void PartialBlock<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  std::visit([&](auto& c) { c.register_in(reg, path + ".core"); }, core);
}

template struct TemporalCore<float>;
template struct TemporalCore<double>;
template struct ShuffleCore<float>;
template struct ShuffleCore<double>;
template struct FasterCore<float>;
template struct FasterCore<double>;
template struct PartialBlock<float>;
template struct PartialBlock<double>;

}  // namespace lvsr
