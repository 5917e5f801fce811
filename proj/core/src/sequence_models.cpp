#include "lvsr/sequence_models.hpp"

#include "lvsr/errors.hpp"

namespace lvsr {

namespace {

template <typename T>
Tensor<T> run_branches(std::vector<TemporalUnit<T>>& units, const Tensor<T>& x, const ForwardContext& ctx) {
  std::vector<Tensor<T>> outs;
  outs.reserve(units.size());
  for (auto& u : units) outs.push_back(u.forward(x, ctx));
  return concat_channels(outs);
}

template <typename T>
void register_branches(std::vector<TemporalUnit<T>>& units, const std::vector<std::size_t>& kernels,
                       ParameterRegistry<T>& reg, const std::string& path) {
  for (std::size_t i = 0; i < units.size(); ++i) units[i].register_in(reg, path + "_k" + std::to_string(kernels[i]));
}

}  // namespace

template <typename T>
TemporalUnit<T>::TemporalUnit(bool use_ghost, const GhostSettings& gs, std::size_t in, std::size_t out,
                              std::size_t kernel, std::size_t dilation, bool bias, Activation act, Rng& rng)
    : ghost_kind(use_ghost), activation(act) {
  if (ghost_kind) {
    ghost = GhostModule<T>(temporal_ghost_config(gs, in, out, kernel, dilation, act), rng);
  } else {
    conv = Conv<T>(conv1d(in, out, kernel, dilation), bias, rng);
    bn = BatchNorm<T>(out);
  }
}

template <typename T>
Tensor<T> TemporalUnit<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  if (ghost_kind) return ghost.forward(x, ctx);
  return activate(bn.forward(conv.forward(x, ctx), ctx), activation);
}

template <typename T>
void TemporalUnit<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  if (ghost_kind) {
    ghost.register_in(reg, path + ".ghost");
  } else {
    conv.register_in(reg, path + ".conv");
    bn.register_in(reg, path + ".bn");
  }
}

template <typename T>
MultiScaleBlock<T>::MultiScaleBlock(const ModelSpec& spec, std::size_t in, std::size_t dilation, Rng& rng)
    : kernels(spec.branch_kernels), dropout(spec.dropout) {
  const std::size_t hidden = spec.resolved_hidden();
  const std::size_t per = hidden / kernels.size();
  for (auto k : kernels) {
    first.emplace_back(spec.seq_ghost, spec.seq_ghost_settings, in, per, k, dilation, true, spec.activation, rng);
  }
  for (auto k : kernels) {
    second.emplace_back(spec.seq_ghost, spec.seq_ghost_settings, hidden, per, k, dilation, true, spec.activation, rng);
  }
  projection = in != hidden;
  if (projection) down = Conv<T>(conv1d(in, hidden, 1), true, rng);
}

template <typename T>
Tensor<T> MultiScaleBlock<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  auto h = ctx.dropout(run_branches(first, x, ctx), dropout);
  h = ctx.dropout(run_branches(second, h, ctx), dropout);
  return relu(add(h, projection ? down.forward(x, ctx) : x));
}

template <typename T>
void MultiScaleBlock<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  register_branches(first, kernels, reg, path + ".layer1");
  register_branches(second, kernels, reg, path + ".layer2");
  if (projection) down.register_in(reg, path + ".down");
}

template <typename T>
MSTCN<T>::MSTCN(const ModelSpec& spec, std::size_t in, Rng& rng) {
  for (auto d : spec.resolved_dilations()) {
    blocks.emplace_back(spec, in, d, rng);
    in = spec.resolved_hidden();
  }
}

template <typename T>
Tensor<T> MSTCN<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  auto y = x;
  for (auto& b : blocks) y = b.forward(y, ctx);
  return y;
}

template <typename T>
void MSTCN<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].register_in(reg, path + ".block" + std::to_string(i));
}

template <typename T>
DenseLayer<T>::DenseLayer(const ModelSpec& spec, std::size_t in, std::size_t dilation, Rng& rng)
    : kernels(spec.branch_kernels), residual(conv1d(in, spec.dense_growth, 1), true, rng), dropout(spec.dropout) {
  const std::size_t g = spec.dense_growth;
  const std::size_t per = g / kernels.size();
  for (auto k : kernels) {
    first.emplace_back(spec.seq_ghost, spec.seq_ghost_settings, in, per, k, dilation, false, spec.activation, rng);
  }
  for (auto k : kernels) {
    second.emplace_back(spec.seq_ghost, spec.seq_ghost_settings, g, per, k, dilation, false, spec.activation, rng);
  }
}

template <typename T>
Tensor<T> DenseLayer<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  auto h = run_branches(second, run_branches(first, x, ctx), ctx);
  auto y = ctx.dropout(relu(add(h, residual.forward(x, ctx))), dropout);
  return concat_channels(x, y);
}

template <typename T>
void DenseLayer<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  register_branches(first, kernels, reg, path + ".layer1");
  register_branches(second, kernels, reg, path + ".layer2");
  residual.register_in(reg, path + ".residual");
}

template <typename T>
DenseBlock<T>::DenseBlock(const ModelSpec& spec, std::size_t in, Rng& rng) : activation(spec.activation) {
  const auto dil = spec.resolved_dilations();
  std::size_t n = in;
  for (std::size_t l = 0; l < spec.dense_layers; ++l) {
    layers.emplace_back(spec, n, dil[l % dil.size()], rng);
    n += spec.dense_growth;
  }
  transition_bn = BatchNorm<T>(n);
  transition = Conv<T>(conv1d(n, spec.resolved_hidden(), 1), true, rng);
}

template <typename T>
Tensor<T> DenseBlock<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  auto y = x;
  for (auto& l : layers) y = l.forward(y, ctx);
  return transition.forward(activate(transition_bn.forward(y, ctx), activation), ctx);
}

template <typename T>
void DenseBlock<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].register_in(reg, path + ".dense" + std::to_string(i));
  transition_bn.register_in(reg, path + ".transition_bn");
  transition.register_in(reg, path + ".transition");
}

template <typename T>
DCTCN<T>::DCTCN(const ModelSpec& spec, std::size_t in, Rng& rng) {
  for (std::size_t b = 0; b < spec.num_blocks; ++b) {
    blocks.emplace_back(spec, in, rng);
    in = spec.resolved_hidden();
  }
}

template <typename T>
Tensor<T> DCTCN<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  auto y = x;
  for (auto& b : blocks) y = b.forward(y, ctx);
  return y;
}

template <typename T>
void DCTCN<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].register_in(reg, path + ".block" + std::to_string(i));
}

PartialBlockConfig partial_block_config(const ModelSpec& spec, std::size_t dilation) {
  PartialBlockConfig c;
  c.channels = spec.resolved_hidden();
  c.ratio = spec.ratio;
  c.core = spec.partial_core;
  c.kernel = spec.kernel;
  c.dilation = dilation;
  c.dropout = spec.dropout;
  c.activation = spec.activation;
  c.mlp_expand = spec.mlp_expand;
  c.shuffle_final_activation = spec.shuffle_final_activation;
  return c;
}

template <typename T>
PartialTCN<T>::PartialTCN(const ModelSpec& spec, std::size_t in, Rng& rng) : projection(in != spec.resolved_hidden()) {
  if (projection) input_proj = Conv<T>(conv1d(in, spec.resolved_hidden(), 1), true, rng);
  for (auto d : spec.resolved_dilations()) blocks.emplace_back(partial_block_config(spec, d), rng);
}

template <typename T>
Tensor<T> PartialTCN<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  auto y = projection ? input_proj.forward(x, ctx) : x;
  for (auto& b : blocks) y = b.forward(y, ctx);
  return y;
}

template <typename T>
void PartialTCN<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  if (projection) input_proj.register_in(reg, path + ".input_proj");
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].register_in(reg, path + ".block" + std::to_string(i));
}

template <typename T>
SequenceModel<T>::SequenceModel(const ModelSpec& spec, std::size_t in, Rng& rng) {
  switch (spec.seq_model) {
    case SeqModel::kMSTCN: net.template emplace<MSTCN<T>>(spec, in, rng); break;
    case SeqModel::kDCTCN: net.template emplace<DCTCN<T>>(spec, in, rng); break;
    case SeqModel::kPartial: net.template emplace<PartialTCN<T>>(spec, in, rng); break;
  }
}

template <typename T>
Tensor<T> SequenceModel<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  return std::visit([&](auto& m) { return m.forward(x, ctx); }, net);
}

template <typename T>
void SequenceModel<T>::register_in(ParameterRegistry<T>& reg, const std::string& path) {
  std::visit([&](auto& m) { m.register_in(reg, path); }, net);
}

template struct TemporalUnit<float>;
template struct TemporalUnit<double>;
template struct MultiScaleBlock<float>;
template struct MultiScaleBlock<double>;
template struct MSTCN<float>;
template struct MSTCN<double>;
template struct DenseLayer<float>;
template struct DenseLayer<double>;
template struct DenseBlock<float>;
template struct DenseBlock<double>;
template struct DCTCN<float>;
template struct DCTCN<double>;
template struct PartialTCN<float>;
template struct PartialTCN<double>;
template struct SequenceModel<float>;
template struct SequenceModel<double>;

}  // namespace lvsr
