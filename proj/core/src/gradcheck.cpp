#include "lvsr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lvsr/errors.hpp"
#include "lvsr/frontend.hpp"
#include "lvsr/ghost.hpp"
#include "lvsr/partial.hpp"
#include "lvsr/sequence_models.hpp"

namespace lvsr {

Precision parse_precision(const std::string& s) {
  if (s == "standard") return Precision::kStandard;
  if (s == "high") return Precision::kHigh;
  throw ConfigError("unknown precision '" + s + "' (expected standard or high)");
}

std::string to_string(Precision p) { return p == Precision::kHigh ? "high" : "standard"; }

template <typename T>
GradCheckResult check_gradients(const std::string& name, const std::function<Tensor<T>()>& loss_fn,
                                const std::vector<NamedTensor<T>>& wrt, const GradCheckOptions& opts) {
  const double h = opts.step > 0.0 ? opts.step : (sizeof(T) == 8 ? 1e-6 : 1e-3);
  for (auto e : wrt) e.tensor.zero_grad();
  auto loss = loss_fn();
  const double l0 = static_cast<double>(loss.item());
  backward(loss);
  const double floor = 1e-3 * std::max(1.0, std::abs(l0));

  GradCheckResult res{name, 0.0, "", 0, true};
  Rng rng(opts.seed);
  for (std::size_t ti = 0; ti < wrt.size(); ++ti) {
    auto t = wrt[ti].tensor;
    const std::size_t n = t.numel();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (n > opts.max_coords) {
      for (std::size_t i = 0; i < opts.max_coords; ++i) {
        std::swap(coords[i], coords[static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(i),
                                                                         static_cast<std::int64_t>(n - 1)))]);
      }
      coords.resize(opts.max_coords);
    }
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    auto w = t.mutable_data();
    NoGradGuard guard;
    for (auto i : coords) {
      const T orig = w[i];
      w[i] = static_cast<T>(orig + h);
      const double lp = static_cast<double>(loss_fn().item());
      w[i] = static_cast<T>(orig - h);
      const double lm = static_cast<double>(loss_fn().item());
      w[i] = orig;
      const double num = (lp - lm) / (2.0 * h);
      diff2 += (analytic[i] - num) * (analytic[i] - num);
      a2 += analytic[i] * analytic[i];
      n2 += num * num;
    }
    res.coordinates += coords.size();
    const double err = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), floor});
    if (std::isnan(err) || err > res.max_error || res.worst_tensor.empty()) {
      res.max_error = std::isnan(err) ? INFINITY : std::max(res.max_error, err);
      res.worst_tensor = wrt[ti].name;
    }
  }
  res.passed = res.max_error <= opts.tolerance;
  return res;
}

template GradCheckResult check_gradients(const std::string&, const std::function<Tensor<float>()>&,
                                         const std::vector<NamedTensor<float>>&, const GradCheckOptions&);
template GradCheckResult check_gradients(const std::string&, const std::function<Tensor<double>()>&,
                                         const std::vector<NamedTensor<double>>&, const GradCheckOptions&);

namespace {

// Stable across standard libraries, unlike std::hash.
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

template <typename T>
Tensor<T> random_input(const Shape& s, Rng& rng) {
  std::vector<T> v(numel(s));
  for (auto& x : v) x = static_cast<T>(rng.normal());
  Tensor<T> t(s, std::move(v));
  t.set_requires_grad(true);
  return t;
}

/// Runs one block: registers its parameters, adds the input to the checked set and
/// reduces the output with a fixed random projection.
template <typename T, typename Block, typename Fwd>
GradCheckResult check_block(const std::string& name, Block& block, const Shape& input_shape, Fwd fwd,
                            const BlockSuiteOptions& opts, Rng& rng) {
  ParameterRegistry<T> reg;
  block.register_in(reg, name);
  auto x = random_input<T>(input_shape, rng);
  std::vector<NamedTensor<T>> wrt{{"input", x, true}};
  for (const auto& e : reg.entries())
    if (e.trainable) wrt.push_back(e);
  ForwardContext ctx;
  ctx.mode = Mode::kTrain;  // batch statistics; every block below runs with dropout 0
  std::vector<T> proj;
  auto loss_fn = [&]() {
    auto y = fwd(block, x, ctx);
    if (proj.empty()) {
      proj.resize(y.numel());
      for (auto& p : proj) p = static_cast<T>(rng.normal());
    }
    return weighted_sum(y, std::span<const T>(proj));
  };
  GradCheckOptions go;
  go.tolerance = opts.tolerance;
  go.max_coords = opts.max_coords;
  go.step = opts.step;
  go.seed = derive_seed(opts.seed, fnv1a(name));
  return check_gradients<T>(name, loss_fn, wrt, go);
}

template <typename T>
std::vector<GradCheckResult> run_suite(const BlockSuiteOptions& opts) {
  std::vector<GradCheckResult> out;
  Rng rng(opts.seed);
  auto plain = [](auto& b, const Tensor<T>& x, const ForwardContext& ctx) { return b.forward(x, ctx); };

  {
    GhostConfig g{3, 6, 0.5, 3, Dims::k2D, 1, 1, 1, opts.activation};
    GhostModule<T> b(g, rng);
    out.push_back(check_block<T>("ghost2d", b, {2, 3, 5, 5}, plain, opts, rng));
  }
  {
    GhostConfig g{4, 8, 0.25, 3, Dims::k2D, 3, 2, 1, opts.activation};
    GhostModule<T> b(g, rng);
    out.push_back(check_block<T>("ghost2d_strided", b, {2, 4, 6, 6}, plain, opts, rng));
  }
  {
    GhostConfig g{4, 6, 0.5, 3, Dims::k1D, 3, 1, 2, opts.activation};
    GhostModule<T> b(g, rng);
    out.push_back(check_block<T>("ghost1d", b, {2, 4, 9}, plain, opts, rng));
  }
  {
    DFCConfig d{4, 6, 3, 5, 2, 1};
    DFCAttention<T> b(d, rng);
    out.push_back(check_block<T>("dfc", b, {2, 4, 6, 6},
                                 [](auto& blk, const Tensor<T>& x, const ForwardContext& ctx) {
                                   return blk.forward(x, ctx);
                                 },
                                 opts, rng));
  }
  {
    GhostConfig g{4, 6, 0.5, 3, Dims::k2D, 3, 1, 1, opts.activation};
    GhostV2Module<T> b(g, dfc_for(g, 3), rng);
    out.push_back(check_block<T>("ghostv2", b, {2, 4, 6, 6}, plain, opts, rng));
  }
  for (auto core : {CoreKind::kTemporal, CoreKind::kShuffle, CoreKind::kFaster}) {
    PartialBlockConfig c;
    c.channels = 8;
    c.ratio = opts.ratio;
    c.core = core;
    c.kernel = opts.kernel;
    c.dilation = 2;
    c.dropout = 0.0;
    c.activation = opts.activation;
    PartialBlock<T> b(c, rng);
    out.push_back(check_block<T>("partial_" + to_string(core), b, {2, 8, 9}, plain, opts, rng));
  }
  for (bool ghost : {false, true}) {
    ModelSpec s;
    s.seq_model = SeqModel::kMSTCN;
    s.hidden_width = 6;
    s.dropout = 0.0;
    s.activation = opts.activation;
    s.seq_ghost = ghost;
    s.seq_ghost_settings = calibrated_tcn_ghost();
    MultiScaleBlock<T> b(s, 4, 2, rng);
    out.push_back(check_block<T>(ghost ? "mstcn_block_ghost" : "mstcn_block", b, {2, 4, 9}, plain, opts, rng));
  }
  for (bool ghost : {false, true}) {
    ModelSpec s;
    s.seq_model = SeqModel::kDCTCN;
    s.hidden_width = 4;
    s.dense_growth = 6;
    s.dense_layers = 2;
    s.dropout = 0.0;
    s.activation = opts.activation;
    s.seq_ghost = ghost;
    s.seq_ghost_settings = calibrated_tcn_ghost();
    DenseBlock<T> b(s, 4, rng);
    out.push_back(check_block<T>(ghost ? "dctcn_block_ghost" : "dctcn_block", b, {2, 4, 9}, plain, opts, rng));
  }
  for (auto v : {FrontendVariant::kStandard, FrontendVariant::kGhost, FrontendVariant::kGhostV2}) {
    BasicBlock<T> b(v, calibrated_frontend_ghost(), 4, 8, 2, rng);
    out.push_back(check_block<T>("basic_block_" + to_string(v), b, {2, 4, 8, 8}, plain, opts, rng));
  }
  return out;
}

}  // namespace

std::vector<GradCheckResult> run_block_gradchecks(const BlockSuiteOptions& opts) {
  return opts.precision == Precision::kHigh ? run_suite<double>(opts) : run_suite<float>(opts);
}

}  // namespace lvsr
