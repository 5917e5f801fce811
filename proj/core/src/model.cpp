#include "lvsr/model.hpp"

#include "lvsr/errors.hpp"

namespace lvsr {

FrontendVariant parse_frontend(const std::string& s) {
  if (s == "standard") return FrontendVariant::kStandard;
  if (s == "ghost") return FrontendVariant::kGhost;
  if (s == "ghostv2") return FrontendVariant::kGhostV2;
  throw ConfigError("unknown frontend variant '" + s + "' (expected standard, ghost or ghostv2)");
}

SeqModel parse_seq_model(const std::string& s) {
  if (s == "mstcn") return SeqModel::kMSTCN;
  if (s == "dctcn") return SeqModel::kDCTCN;
  if (s == "partial") return SeqModel::kPartial;
  throw ConfigError("unknown sequence model '" + s + "' (expected mstcn, dctcn or partial)");
}

PrimaryKernel parse_primary_kernel(const std::string& s) {
  if (s == "pointwise") return PrimaryKernel::kPointwise;
  if (s == "inherit") return PrimaryKernel::kInherit;
  throw ConfigError("unknown primary kernel mode '" + s + "' (expected pointwise or inherit)");
}

std::string to_string(FrontendVariant v) {
  switch (v) {
    case FrontendVariant::kStandard: return "standard";
    case FrontendVariant::kGhost: return "ghost";
    case FrontendVariant::kGhostV2: return "ghostv2";
  }
  return "?";
}

std::string to_string(SeqModel m) {
  switch (m) {
    case SeqModel::kMSTCN: return "mstcn";
    case SeqModel::kDCTCN: return "dctcn";
    case SeqModel::kPartial: return "partial";
  }
  return "?";
}

std::string to_string(PrimaryKernel p) { return p == PrimaryKernel::kPointwise ? "pointwise" : "inherit"; }

GhostSettings calibrated_frontend_ghost() {
  GhostSettings s;
  s.ratio = 0.25;
  s.primary = PrimaryKernel::kInherit;
  s.dfc_entry = PrimaryKernel::kInherit;
  return s;
}

GhostSettings calibrated_tcn_ghost() {
  GhostSettings s;
  s.ratio = 0.5;
  s.primary = PrimaryKernel::kInherit;
  return s;
}

GhostConfig frontend_ghost_config(const GhostSettings& s, std::size_t in, std::size_t out, std::size_t kernel,
                                  std::size_t stride) {
  GhostConfig g;
  g.in_channels = in;
  g.out_channels = out;
  g.ratio = s.ratio;
  g.cheap_kernel = s.cheap_kernel;
  g.dims = Dims::k2D;
  g.primary_kernel = s.primary == PrimaryKernel::kInherit ? kernel : 1;
  g.stride = stride;
  return g;
}

GhostConfig temporal_ghost_config(const GhostSettings& s, std::size_t in, std::size_t out, std::size_t kernel,
                                  std::size_t dilation, Activation act) {
  GhostConfig g;
  g.in_channels = in;
  g.out_channels = out;
  g.ratio = s.ratio;
  g.cheap_kernel = s.cheap_kernel;
  g.dims = Dims::k1D;
  g.primary_kernel = s.primary == PrimaryKernel::kInherit ? kernel : 1;
  g.dilation = s.primary == PrimaryKernel::kInherit ? dilation : 1;
  g.activation = act;
  return g;
}

std::size_t ModelSpec::resolved_hidden() const {
  if (hidden_width != 0) return hidden_width;
  return seq_model == SeqModel::kMSTCN ? 768 : 512;
}

std::vector<std::size_t> ModelSpec::resolved_dilations() const {
  if (!dilations.empty()) return dilations;
  if (seq_model == SeqModel::kDCTCN) return {1, 2, 5};
  return {1, 2, 4, 8};
}

void ModelSpec::validate() const {
  if (num_classes < 2) throw ConfigError("must be at least 2", "model.num_classes");
  if (frontend_width == 0) throw ConfigError("must be positive", "model.frontend_width");
  if (input.frames == 0) throw ConfigError("must be positive", "model.input.frames");
  if (input.channels == 0) throw ConfigError("must be positive", "model.input.channels");
  if (input.height < 32 || input.width < 32) throw ConfigError("spatial input must be at least 32x32", "model.input");
  if (frontend_variant == FrontendVariant::kGhostV2 && (input.height < 64 || input.width < 64)) {
    throw ConfigError("ghostv2 attention needs at least 64x64 input (2x2 maps in the last stage)", "model.input");
  }
  if (frontend_variant != FrontendVariant::kStandard) {
    GhostConfig probe = frontend_ghost_config(frontend_ghost, frontend_width, frontend_width, 3, 1);
    try {
      probe.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), "model.frontend_ghost");
    }
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("must lie in [0,1)", "model.dropout");
  if (resolved_hidden() == 0) throw ConfigError("must be positive", "model.hidden_width");
  const auto dil = resolved_dilations();
  for (auto d : dil)
    if (d == 0) throw ConfigError("dilations must be positive", "model.dilations");
  if (branch_kernels.empty()) throw ConfigError("must not be empty", "model.branch_kernels");
  switch (seq_model) {
    case SeqModel::kPartial: {
      if (seq_ghost) throw ConfigError("ghost substitution applies to mstcn and dctcn only", "model.seq_ghost");
      if (dil.size() != 4) throw ConfigError("partial TCN needs exactly 4 dilations", "model.dilations");
      for (std::size_t i = 1; i < dil.size(); ++i)
        if (dil[i] <= dil[i - 1]) throw ConfigError("must be strictly increasing", "model.dilations");
      try {
        partial_block_config(*this, dil[0]).validate();
      } catch (const ConfigError& e) {
        throw ConfigError(e.what(), "model");
      }
      break;
    }
    case SeqModel::kMSTCN:
      if (resolved_hidden() % branch_kernels.size() != 0) {
        throw ConfigError("hidden width must be divisible by the number of branches", "model.hidden_width");
      }
      break;
    case SeqModel::kDCTCN:
      if (dense_growth == 0 || dense_growth % branch_kernels.size() != 0) {
        throw ConfigError("growth must be a positive multiple of the number of branches", "model.dense_growth");
      }
      if (dense_layers == 0 || num_blocks == 0) throw ConfigError("must be positive", "model.dense_layers");
      break;
  }
  if (seq_ghost) {
    GhostConfig probe = temporal_ghost_config(seq_ghost_settings, 8, resolved_hidden() / branch_kernels.size(), 3, 1,
                                              activation);
    if (seq_model == SeqModel::kDCTCN) probe.out_channels = dense_growth / branch_kernels.size();
    try {
      probe.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), "model.seq_ghost_settings");
    }
  }
}

template <typename T>
VSRModel<T>::VSRModel(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  Rng rng(seed);
  frontend_ = Frontend<T>(spec_, rng);
  sequence_ = SequenceModel<T>(spec_, frontend_.out_width, rng);
  head_ = Linear<T>(spec_.output_width(), spec_.num_classes, rng);
  frontend_.register_in(registry_, "frontend");
  sequence_.register_in(registry_, "sequence");
  head_.register_in(registry_, "head");
}

template <typename T>
Tensor<T> VSRModel<T>::features(const Tensor<T>& clips, const ForwardContext& ctx) {
  if (clips.rank() != 5 || clips.dim(1) != spec_.input.channels) {
    throw ShapeError("model: expected clips [N," + std::to_string(spec_.input.channels) + ",T,H,W], got " +
                     to_string(clips.shape()));
  }
  return frontend_.forward(clips, ctx);
}

template <typename T>
Tensor<T> VSRModel<T>::head_logits(const Tensor<T>& features, const ForwardContext& ctx) {
  auto seq = sequence_.forward(features, ctx);
  return head_.forward(mean_axis(seq, 2), ctx);
}

template <typename T>
Tensor<T> VSRModel<T>::logits(const Tensor<T>& clips, const ForwardContext& ctx) {
  return head_logits(features(clips, ctx), ctx);
}

template <typename T>
Tensor<T> VSRModel<T>::forward(const Tensor<T>& clips, const ForwardContext& ctx) {
  return softmax(logits(clips, ctx), 1);
}

template class VSRModel<float>;
template class VSRModel<double>;

}  // namespace lvsr
