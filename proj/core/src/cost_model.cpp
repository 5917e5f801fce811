#include "lvsr/cost_model.hpp"

#include <numeric>
#include <stdexcept>

#include "lvsr/errors.hpp"
#include "lvsr/frontend.hpp"
#include "lvsr/sequence_models.hpp"

namespace lvsr {

namespace {

using Extents = std::vector<std::size_t>;

std::uint64_t product(const Extents& e) {
  return std::accumulate(e.begin(), e.end(), std::uint64_t{1}, std::multiplies<>());
}

/// Walks a spec and appends one row per layer. Output extents are derived here
/// from closed forms ("same" padding gives ceil(in/stride), causal keeps T)
/// rather than from the layer implementations.
class Walker {
 public:
  explicit Walker(const CountingConvention& c) : cv_(c) {}

  CostReport take(const InputSpec& in) {
    report_.input = in;
    report_.convention = cv_;
    return std::move(report_);
  }

  // Every MAC of the per-frame trunk is multiplied by this.
  std::uint64_t batch = 1;

  Extents conv(const std::string& path, std::size_t cin, std::size_t cout, const Extents& kernel,
               const Extents& stride, const Extents& dilation, std::size_t groups, bool causal, bool bias,
               const Extents& in) {
    if (kernel.size() != in.size()) throw ShapeError("cost model: kernel rank mismatch at " + path);
    if (cin % groups != 0 || cout % groups != 0) throw ShapeError("cost model: bad groups at " + path);
    Extents out(in.size()), counted(in.size());
    std::uint64_t kvol = 1;
    for (std::size_t a = 0; a < in.size(); ++a) {
      const std::size_t s = stride.empty() ? 1 : stride[a];
      const std::size_t d = dilation.empty() ? 1 : dilation[a];
      kvol *= kernel[a];
      out[a] = causal ? in[a] : (in[a] + s - 1) / s;
      counted[a] = causal && cv_.padded_causal_outputs ? in[a] + (kernel[a] - 1) * d : out[a];
    }
    const std::uint64_t positions = product(counted);
    std::uint64_t params = static_cast<std::uint64_t>(cout) * (cin / groups) * kvol;
    std::uint64_t macs = batch * cout * positions * (cin / groups) * kvol;
    if (bias) {
      params += cout;
      if (cv_.macs_count_bias) macs += batch * cout * positions;
    }
    report_.rows.push_back({path, params, macs});
    return out;
  }

  Extents conv1d(const std::string& path, std::size_t cin, std::size_t cout, std::size_t k, std::size_t d,
                 std::size_t groups, bool bias, const Extents& in) {
    return conv(path, cin, cout, {k}, {}, {d}, groups, true, bias, in);
  }

  Extents conv2d(const std::string& path, std::size_t cin, std::size_t cout, std::size_t kh, std::size_t kw,
                 std::size_t stride, std::size_t groups, const Extents& in) {
    return conv(path, cin, cout, {kh, kw}, {stride, stride}, {}, groups, false, false, in);
  }

  void bn(const std::string& path, std::size_t channels, const Extents& in) {
    const std::uint64_t params = cv_.count_bn_affine_params ? 2 * channels : 0;
    const std::uint64_t macs = cv_.count_elementwise_macs ? batch * channels * product(in) : 0;
    report_.rows.push_back({path, params, macs});
  }

  void elementwise(const std::string& path, std::uint64_t count) {
    if (cv_.count_elementwise_macs) report_.rows.push_back({path, 0, batch * count});
  }

  void linear(const std::string& path, std::size_t in, std::size_t out) {
    std::uint64_t macs = static_cast<std::uint64_t>(in) * out;
    if (cv_.macs_count_bias) macs += out;
    report_.rows.push_back({path, static_cast<std::uint64_t>(in) * out + out, macs});
  }

  const CountingConvention& convention() const { return cv_; }

 private:
  CountingConvention cv_;
  CostReport report_;
};

Extents ghost(Walker& w, const GhostConfig& g, const std::string& path, const Extents& in) {
  g.validate();
  const std::size_t p = g.primary_channels(), c = g.cheap_channels();
  Extents out;
  if (g.dims == Dims::k2D) {
    out = w.conv2d(path + ".primary", g.in_channels, p, g.primary_kernel, g.primary_kernel, g.stride, 1, in);
    w.bn(path + ".primary_bn", p, out);
    w.elementwise(path + ".primary_act", p * product(out));
    w.conv2d(path + ".cheap", p, c, g.cheap_kernel, g.cheap_kernel, 1, std::gcd(p, c), out);
  } else {
    out = w.conv1d(path + ".primary", g.in_channels, p, g.primary_kernel, g.dilation, 1, false, in);
    w.bn(path + ".primary_bn", p, out);
    w.elementwise(path + ".primary_act", p * product(out));
    w.conv1d(path + ".cheap", p, c, g.cheap_kernel, 1, std::gcd(p, c), false, out);
  }
  w.bn(path + ".cheap_bn", c, out);
  w.elementwise(path + ".cheap_act", c * product(out));
  return out;
}

void dfc(Walker& w, const DFCConfig& d, const std::string& path, const Extents& in, const Extents& target) {
  d.validate();
  if (in.size() != 2 || in[0] < d.downsample || in[1] < d.downsample) {
    throw ShapeError("cost model: DFC input too small at " + path);
  }
  Extents pooled{in[0] / d.downsample, in[1] / d.downsample};
  w.elementwise(path + ".pool", static_cast<std::uint64_t>(d.in_channels) * in[0] / d.downsample * d.downsample *
                                    (in[1] / d.downsample * d.downsample));
  auto a = w.conv2d(path + ".entry", d.in_channels, d.channels, d.entry_kernel, d.entry_kernel, d.stride, 1, pooled);
  w.bn(path + ".entry_bn", d.channels, a);
  a = w.conv2d(path + ".horizontal", d.channels, d.channels, 1, d.directional_kernel, 1, d.channels, a);
  w.bn(path + ".horizontal_bn", d.channels, a);
  a = w.conv2d(path + ".vertical", d.channels, d.channels, d.directional_kernel, 1, 1, d.channels, a);
  w.bn(path + ".vertical_bn", d.channels, a);
  w.elementwise(path + ".sigmoid", d.channels * product(a));
  w.elementwise(path + ".gate", d.channels * product(target));
}

Extents frontend_conv(Walker& w, FrontendVariant variant, const GhostSettings& gs, std::size_t in, std::size_t out,
                      std::size_t stride, bool relu_after, const std::string& path, const Extents& hw) {
  if (variant != FrontendVariant::kStandard && gs.keep_strided && stride != 1) variant = FrontendVariant::kStandard;
  switch (variant) {
    case FrontendVariant::kStandard: {
      auto o = w.conv2d(path + ".conv", in, out, 3, 3, stride, 1, hw);
      w.bn(path + ".bn", out, o);
      if (relu_after) w.elementwise(path + ".act", out * product(o));
      return o;
    }
    case FrontendVariant::kGhost:
      return ghost(w, frontend_ghost_config(gs, in, out, 3, stride), path + ".ghost", hw);
    case FrontendVariant::kGhostV2: {
      const auto g = frontend_ghost_config(gs, in, out, 3, stride);
      auto o = ghost(w, g, path + ".ghostv2.ghost", hw);
      dfc(w, dfc_for(g, gs.dfc_entry == PrimaryKernel::kInherit ? 3 : 1), path + ".ghostv2.dfc", hw, o);
      return o;
    }
  }
  return hw;
}

void stem(Walker& w, const ModelSpec& s, Extents& thw) {
  const auto d = stem_descriptor(s.input.channels, s.frontend_width);
  thw = w.conv("frontend.stem.conv", d.in_channels, d.out_channels, d.kernel, d.stride, {}, 1, false, false, thw);
  w.bn("frontend.stem.bn", s.frontend_width, thw);
  w.elementwise("frontend.stem.act", s.frontend_width * product(thw));
  for (std::size_t a = 1; a < 3; ++a) thw[a] = (thw[a] + 1) / 2;  // 3x3 / stride 2 / pad 1
  w.elementwise("frontend.stem.pool", 9ULL * s.frontend_width * product(thw));
}

void trunk(Walker& w, const ModelSpec& s, Extents hw) {
  std::size_t in = s.frontend_width;
  for (std::size_t stage = 0; stage < 4; ++stage) {
    const std::size_t width = s.frontend_width << stage;
    for (std::size_t b = 0; b < 2; ++b) {
      const std::size_t stride = (stage > 0 && b == 0) ? 2 : 1;
      const std::string path = "frontend.trunk." + trunk_block_path(stage, b);
      auto mid = frontend_conv(w, s.frontend_variant, s.frontend_ghost, in, width, stride, true, path + ".c1", hw);
      auto out = frontend_conv(w, s.frontend_variant, s.frontend_ghost, width, width, 1, false, path + ".c2", mid);
      if (stride != 1 || in != width) {
        w.conv2d(path + ".down", in, width, 1, 1, stride, 1, hw);
        w.bn(path + ".down_bn", width, out);
      }
      w.elementwise(path + ".residual", 2ULL * width * product(out));
      in = width;
      hw = out;
    }
  }
  w.elementwise("frontend.trunk.pool", static_cast<std::uint64_t>(in) * product(hw));
}

void temporal_unit(Walker& w, const ModelSpec& s, std::size_t in, std::size_t out, std::size_t k, std::size_t d,
                   bool bias, const std::string& path, const Extents& t) {
  if (s.seq_ghost) {
    ghost(w, temporal_ghost_config(s.seq_ghost_settings, in, out, k, d, s.activation), path + ".ghost", t);
    return;
  }
  w.conv1d(path + ".conv", in, out, k, d, 1, bias, t);
  w.bn(path + ".bn", out, t);
  w.elementwise(path + ".act", out * t[0]);
}

void mstcn(Walker& w, const ModelSpec& s, std::size_t in, const Extents& t) {
  const std::size_t hidden = s.resolved_hidden();
  const std::size_t per = hidden / s.branch_kernels.size();
  const auto dil = s.resolved_dilations();
  for (std::size_t b = 0; b < dil.size(); ++b) {
    const std::string path = "sequence.block" + std::to_string(b);
    for (auto k : s.branch_kernels)
      temporal_unit(w, s, in, per, k, dil[b], true, path + ".layer1_k" + std::to_string(k), t);
    for (auto k : s.branch_kernels)
      temporal_unit(w, s, hidden, per, k, dil[b], true, path + ".layer2_k" + std::to_string(k), t);
    if (in != hidden) w.conv1d(path + ".down", in, hidden, 1, 1, 1, true, t);
    w.elementwise(path + ".residual", 2ULL * hidden * t[0]);
    in = hidden;
  }
}

void dctcn(Walker& w, const ModelSpec& s, std::size_t in, const Extents& t) {
  const std::size_t g = s.dense_growth;
  const std::size_t per = g / s.branch_kernels.size();
  const auto dil = s.resolved_dilations();
  for (std::size_t b = 0; b < s.num_blocks; ++b) {
    const std::string path = "sequence.block" + std::to_string(b);
    std::size_t n = in;
    for (std::size_t l = 0; l < s.dense_layers; ++l) {
      const std::string lp = path + ".dense" + std::to_string(l);
      const std::size_t d = dil[l % dil.size()];
      for (auto k : s.branch_kernels) temporal_unit(w, s, n, per, k, d, false, lp + ".layer1_k" + std::to_string(k), t);
      for (auto k : s.branch_kernels) temporal_unit(w, s, g, per, k, d, false, lp + ".layer2_k" + std::to_string(k), t);
      w.conv1d(lp + ".residual", n, g, 1, 1, 1, true, t);
      w.elementwise(lp + ".residual_add", 2ULL * g * t[0]);
      n += g;
    }
    w.bn(path + ".transition_bn", n, t);
    w.elementwise(path + ".transition_act", n * t[0]);
    w.conv1d(path + ".transition", n, s.resolved_hidden(), 1, 1, 1, true, t);
    in = s.resolved_hidden();
  }
}

void partial_block(Walker& w, const PartialBlockConfig& c, const std::string& path, const Extents& t) {
  c.validate();
  const std::size_t b = c.branch_channels();
  const std::string p = path + ".core";
  switch (c.core) {
    case CoreKind::kTemporal:
      w.conv1d(p + ".conv1", b, b, c.kernel, c.dilation, 1, false, t);
      w.bn(p + ".bn1", b, t);
      w.elementwise(p + ".act1", b * t[0]);
      w.conv1d(p + ".conv2", b, b, c.kernel, c.dilation, 1, false, t);
      w.bn(p + ".bn2", b, t);
      w.elementwise(p + ".act2", b * t[0]);
      break;
    case CoreKind::kShuffle:
      w.conv1d(p + ".pw1", b, b, 1, 1, 1, false, t);
      w.bn(p + ".bn1", b, t);
      w.elementwise(p + ".act1", b * t[0]);
      w.conv1d(p + ".dw", b, b, c.kernel, c.dilation, b, false, t);
      w.bn(p + ".bn2", b, t);
      w.conv1d(p + ".pw2", b, b, 1, 1, 1, false, t);
      w.bn(p + ".bn3", b, t);
      if (c.shuffle_final_activation) w.elementwise(p + ".act3", b * t[0]);
      break;
    case CoreKind::kFaster: {
      const std::size_t e = c.channels * c.mlp_expand;
      w.conv1d(p + ".spatial", b, b, c.kernel, c.dilation, 1, false, t);
      w.conv1d(p + ".mlp_expand", c.channels, e, 1, 1, 1, false, t);
      w.bn(p + ".mlp_bn", e, t);
      w.elementwise(p + ".mlp_act", e * t[0]);
      w.conv1d(p + ".mlp_project", e, c.channels, 1, 1, 1, false, t);
      break;
    }
  }
  w.elementwise(path + ".residual", c.channels * t[0]);
}

void partial_tcn(Walker& w, const ModelSpec& s, std::size_t in, const Extents& t) {
  if (in != s.resolved_hidden()) w.conv1d("sequence.input_proj", in, s.resolved_hidden(), 1, 1, 1, true, t);
  const auto dil = s.resolved_dilations();
  for (std::size_t i = 0; i < dil.size(); ++i) {
    partial_block(w, partial_block_config(s, dil[i]), "sequence.block" + std::to_string(i), t);
  }
}

void walk(Walker& w, const ModelSpec& s, bool with_stem, bool with_trunk, bool with_sequence) {
  s.validate();
  Extents thw{s.input.frames, s.input.height, s.input.width};
  if (with_stem) {
    stem(w, s, thw);
  } else {
    Walker scratch(w.convention());
    stem(scratch, s, thw);
  }
  if (with_trunk) {
    w.batch = s.input.frames;
    trunk(w, s, {thw[1], thw[2]});
    w.batch = 1;
  }
  if (!with_sequence) return;
  const Extents t{s.input.frames};
  switch (s.seq_model) {
    case SeqModel::kMSTCN: mstcn(w, s, s.feature_width(), t); break;
    case SeqModel::kDCTCN: dctcn(w, s, s.feature_width(), t); break;
    case SeqModel::kPartial: partial_tcn(w, s, s.feature_width(), t); break;
  }
  w.elementwise("sequence.temporal_mean", static_cast<std::uint64_t>(s.output_width()) * s.input.frames);
  if (w.convention().include_head) w.linear("head", s.output_width(), s.num_classes);
}

}  // namespace

std::string CountingConvention::tag() const {
  std::string t = "macs";
  t += macs_count_bias ? ";bias" : "";
  t += count_bn_affine_params ? "" : ";no-bn-params";
  t += count_elementwise_macs ? ";elementwise" : "";
  t += padded_causal_outputs ? ";causal-padded" : "";
  t += include_head ? ";head" : ";no-head";
  return t;
}

std::uint64_t CostReport::total_params() const { return params_under(""); }
std::uint64_t CostReport::total_macs() const { return macs_under(""); }

std::uint64_t CostReport::params_under(const std::string& prefix) const {
  std::uint64_t n = 0;
  for (const auto& r : rows)
    if (r.path.starts_with(prefix)) n += r.params;
  return n;
}

std::uint64_t CostReport::macs_under(const std::string& prefix) const {
  std::uint64_t n = 0;
  for (const auto& r : rows)
    if (r.path.starts_with(prefix)) n += r.macs;
  return n;
}

CostReport CostReport::select(const std::vector<std::string>& prefixes) const {
  CostReport out;
  out.input = input;
  out.convention = convention;
  for (const auto& r : rows) {
    for (const auto& p : prefixes) {
      if (r.path.starts_with(p)) {
        out.rows.push_back(r);
        break;
      }
    }
  }
  return out;
}

CostReport& CostReport::append(const CostReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  return *this;
}

CostReport count_model(const ModelSpec& spec, const CountingConvention& conv) {
  Walker w(conv);
  walk(w, spec, true, true, true);
  return w.take(spec.input);
}

CostReport count_component(const ModelSpec& spec, const std::string& component, const CountingConvention& conv) {
  Walker w(conv);
  if (component == "stem") {
    walk(w, spec, true, false, false);
  } else if (component == "trunk") {
    walk(w, spec, false, true, false);
  } else if (component == "frontend") {
    walk(w, spec, true, true, false);
  } else if (component == "sequence") {
    walk(w, spec, false, false, true);
  } else if (component == "total") {
    walk(w, spec, true, true, true);
  } else {
    throw ConfigError("unknown component '" + component + "' (expected stem, trunk, frontend, sequence or total)");
  }
  return w.take(spec.input);
}

std::uint64_t count_params(const ModelSpec& spec, const CountingConvention& conv) {
  return count_model(spec, conv).total_params();
}

std::uint64_t count_macs(const ModelSpec& spec, const CountingConvention& conv) {
  return count_model(spec, conv).total_macs();
}

CostReport count_conv(const ConvDescriptor& desc, const std::vector<std::size_t>& spatial, bool bias,
                      const CountingConvention& conv, const std::string& path) {
  desc.validate();
  Walker w(conv);
  w.conv(path, desc.in_channels, desc.out_channels, desc.kernel, desc.stride, desc.dilation, desc.groups,
         desc.padding == Padding::kCausalLeft, bias, spatial);
  return w.take({});
}

CostReport count_ghost(const GhostConfig& cfg, const std::vector<std::size_t>& spatial, const CountingConvention& conv,
                       const std::string& path) {
  Walker w(conv);
  ghost(w, cfg, path, spatial);
  return w.take({});
}

CostReport count_dfc(const DFCConfig& cfg, const std::vector<std::size_t>& spatial, const std::vector<std::size_t>& target,
                     const CountingConvention& conv, const std::string& path) {
  Walker w(conv);
  dfc(w, cfg, path, spatial, target);
  return w.take({});
}

CostReport count_partial_block(const PartialBlockConfig& cfg, std::size_t frames, const CountingConvention& conv,
                               const std::string& path) {
  Walker w(conv);
  partial_block(w, cfg, path, {frames});
  return w.take({});
}

double percent_reduction(double base, double variant) {
  if (base == 0.0) throw std::invalid_argument("percent_reduction: zero baseline");
  return 100.0 * (1.0 - variant / base);
}

Reduction percent_reduction(const CostReport& base, const CostReport& variant) {
  if (!(base.input == variant.input)) throw std::invalid_argument("percent_reduction: input specs differ");
  return {percent_reduction(static_cast<double>(base.total_params()), static_cast<double>(variant.total_params())),
          percent_reduction(static_cast<double>(base.total_macs()), static_cast<double>(variant.total_macs()))};
}

}  // namespace lvsr
