// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Targets and tolerances are pinned here; nothing is tuned at run time.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "config.hpp"
#include "lvsr/cost_model.hpp"
#include "lvsr/gradcheck.hpp"
#include "lvsr/model.hpp"
#include "lvsr/parallel.hpp"
#include "lvsr/synthetic.hpp"
#include "lvsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace lvsr;

namespace {

const std::string kSource = LVSR_SOURCE_DIR;

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string f(const char* fmt, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a);
  return buf;
}

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * target; }

void note(Verdict& v, bool ok, const std::string& what) {
  v.pass = v.pass && ok;
  if (!v.detail.empty()) v.detail += "; ";
  v.detail += what + (ok ? "" : " [miss]");
}

ModelSpec ghost_frontend() {
  ModelSpec s;
  s.frontend_variant = FrontendVariant::kGhost;
  s.frontend_ghost = calibrated_frontend_ghost();
  return s;
}

ModelSpec tcn(SeqModel m, bool ghost) {
  ModelSpec s;
  s.seq_model = m;
  s.seq_ghost = ghost;
  s.seq_ghost_settings = calibrated_tcn_ghost();
  return s;
}

ModelSpec partial(CoreKind core, double ratio, std::size_t kernel) {
  ModelSpec s;
  s.partial_core = core;
  s.ratio = ratio;
  s.kernel = kernel;
  return s;
}

Verdict criterion1() {
  Verdict v;
  const auto trunk = count_component(ModelSpec{}, "trunk");
  const double p = trunk.total_params() / 1e6, m = trunk.total_macs() / 1e9;
  note(v, within(p, 11.16, 0.05), "standard trunk " + f("%.3fM", p) + " params vs 11.16M +-5%");
  note(v, within(m, 8.29, 0.10), f("%.3fG", m) + " MACs vs 8.29G +-10%");
  return v;
}

Verdict criterion2() {
  Verdict v;
  struct Pair { const char* name; SeqModel m; double dp, dm; };
  for (auto c : {Pair{"MS-TCN", SeqModel::kMSTCN, 44.8, 47.3}, Pair{"DC-TCN", SeqModel::kDCTCN, 35.6, 42.8}}) {
    const auto r = percent_reduction(count_component(tcn(c.m, false), "sequence"),
                                     count_component(tcn(c.m, true), "sequence"));
    note(v, std::abs(r.params_percent - c.dp) <= 5.0,
         std::string(c.name) + " ghost params -" + f("%.1f", r.params_percent) + "% vs -" + f("%.1f", c.dp) + " +-5pp");
    note(v, std::abs(r.macs_percent - c.dm) <= 5.0,
         "MACs -" + f("%.1f", r.macs_percent) + "% vs -" + f("%.1f", c.dm) + " +-5pp");
  }
  const auto g = count_component(ghost_frontend(), "trunk");
  note(v, within(g.total_params() / 1e6, 2.83, 0.25),
       "ghost trunk (ratio 0.25, inherited 3x3 primary) " + f("%.3fM", g.total_params() / 1e6) + " vs 2.83M +-25%, " +
           f("%.3fG", g.total_macs() / 1e9) + " MACs");
  return v;
}

Verdict criterion3() {
  Verdict v;
  const double ratios[] = {0.25, 0.5, 0.75};
  const double macs_t[] = {0.12, 0.15, 0.18}, params_t[] = {7.80, 8.39, 9.38};
  double prev_p = 0, prev_m = 0;
  bool monotone = true;
  std::string ps, ms;
  bool p_ok = true, m_ok = true;
  for (int i = 0; i < 3; ++i) {
    const auto r = count_component(partial(CoreKind::kFaster, ratios[i], 3), "sequence");
    const double p = r.total_params() / 1e6, m = r.total_macs() / 1e9;
    p_ok = p_ok && within(p, params_t[i], 0.10);
    m_ok = m_ok && within(m, macs_t[i], 0.10);
    monotone = monotone && p > prev_p && m > prev_m;
    prev_p = p;
    prev_m = m;
    ps += (i ? "/" : "") + f("%.3f", p);
    ms += (i ? "/" : "") + f("%.4f", m);
  }
  note(v, m_ok, "faster MACs " + ms + "G vs 0.12/0.15/0.18 +-10%");
  note(v, p_ok, "faster params " + ps + "M vs 7.80/8.39/9.38 +-10%");
  note(v, monotone, "strictly increasing in ratio");

  double smin = 1e18, smax = 0, mmin = 1e18, mmax = 0;
  for (std::size_t k : {3u, 5u, 7u, 9u}) {
    const auto r = count_component(partial(CoreKind::kShuffle, 0.75, k), "sequence");
    smin = std::min(smin, r.total_params() / 1e6);
    smax = std::max(smax, r.total_params() / 1e6);
    mmin = std::min(mmin, r.total_macs() / 1e9);
    mmax = std::max(mmax, r.total_macs() / 1e9);
  }
  note(v, mmax - mmin <= 0.03 && smax - smin <= 0.02,
       "shuffle k=3..9 spread " + f("%.4fM", smax - smin) + " params, " + f("%.4fG", mmax - mmin) + " MACs");
  const double temporal_t[] = {3.80, 6.18, 8.52, 10.87};
  std::string ts;
  bool t_ok = true;
  int i = 0;
  for (std::size_t k : {3u, 5u, 7u, 9u}) {
    const double p = count_component(partial(CoreKind::kTemporal, 0.75, k), "sequence").total_params() / 1e6;
    t_ok = t_ok && within(p, temporal_t[i++], 0.10);
    ts += (k > 3 ? "/" : "") + f("%.3f", p);
  }
  note(v, t_ok, "temporal k=3..9 params " + ts + "M vs 3.80/6.18/8.52/10.87 +-10%");
  return v;
}

Verdict criterion4() {
  Verdict v;
  BlockSuiteOptions opts;
  opts.precision = Precision::kHigh;
  opts.tolerance = 1e-4;
  opts.seed = 2024;
  double worst = 0;
  std::string worst_name, failed;
  std::size_t n = 0;
  for (const auto& r : run_block_gradchecks(opts)) {
    ++n;
    if (r.max_error > worst) {
      worst = r.max_error;
      worst_name = r.name;
    }
    if (!r.passed) failed += " " + r.name;
  }
  note(v, failed.empty(), std::to_string(n) + " blocks, worst relative error " + f("%.2e", worst) + " (" + worst_name +
                              ") vs 1e-4" + (failed.empty() ? "" : ", failing:" + failed));
  return v;
}

template <typename T>
std::vector<T> vals(const Tensor<T>& t) {
  return {t.data().begin(), t.data().end()};
}

Verdict criterion5() {
  Verdict v;
  Rng rng(5);
  auto randn = [&](Shape s) {
    std::vector<float> d(numel(s));
    for (auto& x : d) x = static_cast<float>(rng.normal());
    return Tensor<float>(s, d);
  };
  ForwardContext ctx;

  bool causal = true;
  for (auto seq : {SeqModel::kPartial, SeqModel::kMSTCN, SeqModel::kDCTCN}) {
    for (auto core : {CoreKind::kTemporal, CoreKind::kShuffle, CoreKind::kFaster}) {
      if (seq != SeqModel::kPartial && core != CoreKind::kFaster) continue;
      ModelSpec s;
      s.seq_model = seq;
      s.partial_core = core;
      s.hidden_width = 24;
      s.dense_growth = 12;
      s.dense_layers = 2;
      SequenceModel<float> net(s, 16, rng);
      auto x = randn({1, 16, 24});
      auto y0 = vals(net.forward(x, ctx));
      for (std::size_t t0 : {0u, 11u, 23u}) {
        auto xp = x.clone();
        for (std::size_t c = 0; c < 16; ++c) xp.mutable_data()[c * 24 + t0] += 3.0f;
        auto y1 = vals(net.forward(xp, ctx));
        for (std::size_t c = 0; c < 24; ++c)
          for (std::size_t t = 0; t < t0; ++t) causal = causal && y1[c * 24 + t] == y0[c * 24 + t];
      }
    }
  }
  note(v, causal, "causality under future perturbation");

  auto x = randn({2, 12, 7});
  bool round = true;
  for (double r : {0.25, 0.5, 0.75, 1.0}) {
    auto [a, b] = split_channels(x, r);
    round = round && vals(concat_channels(a, b)) == vals(x);
  }
  note(v, round, "split/concat round-trip");

  bool bij = true;
  for (std::size_t g : {2u, 3u, 4u, 6u}) bij = bij && vals(channel_shuffle(channel_shuffle(x, g), 12 / g)) == vals(x);
  note(v, bij, "channel-shuffle bijection");

  auto id = [](const Tensor<float>& t) { return t; };
  auto twice = vals(partial_forward(x, 9, id, id, id));
  bool ident = true;
  for (std::size_t i = 0; i < twice.size(); ++i) ident = ident && twice[i] == 2.0f * x.data()[i];
  note(v, ident, "identity branches give 2x");

  PartialBlockConfig c;
  c.channels = 12;
  c.ratio = 1.0;
  c.core = CoreKind::kTemporal;
  c.dilation = 2;
  Rng ra(8), rb(8);
  PartialBlock<float> block(c, ra);
  TemporalCore<float> plain(12, 3, 2, c.dropout, c.activation, rb);
  note(v, vals(block.forward(x, ctx)) == vals(add(plain.forward(x, ctx), x)), "ratio 1.0 equals standard temporal block");
  return v;
}

struct LearnOutcome {
  double train_acc = 0, val_acc = 0, best_val = 0;
  std::vector<EpochLog> log;
  std::size_t n_val = 0;
};

LearnOutcome learn(const cli::RunConfig& cfg) {
  const auto tr = generate_synthetic(cfg.data, Split::kTrain);
  const auto va = generate_synthetic(cfg.data, Split::kVal);
  VSRModel<float> model(cfg.model, derive_seed(cfg.train.seed, 0x6d6f64656cULL));
  auto r = train(model, tr, va, cfg.train);
  return {evaluate(model, tr), r.log.back().val_acc, r.best_val_acc, r.log, va.size()};
}

Verdict criterion6() {
  Verdict v;
  const auto cfg = cli::load_run_config(kSource + "/configs/train.json");
  const auto o = learn(cfg);
  const double chance = 1.0 / static_cast<double>(cfg.data.num_classes);
  const double bound = chance + 3.0 * std::sqrt(chance * (1.0 - chance) / static_cast<double>(o.n_val));
  note(v, o.train_acc >= 0.90, "final train accuracy " + f("%.3f", o.train_acc) + " vs >= 0.90");
  note(v, o.val_acc > bound, "final val accuracy " + f("%.3f", o.val_acc) + " vs > " + f("%.3f", bound) + " (n=" +
                                 std::to_string(o.n_val) + ")");
  bool falling = true;
  for (std::size_t e = 1; e < std::min<std::size_t>(5, o.log.size()); ++e)
    falling = falling && o.log[e].train_loss < o.log[e - 1].train_loss;
  v.detail += std::string("; loss strictly falling over first 5 epochs: ") + (falling ? "yes" : "no") +
              " (reported, not gated); " + std::to_string(o.log.size()) + " epochs";
  return v;
}

Verdict criterion7() {
  Verdict v;
  v.detail = "word accuracies on the licensed 500-word corpus are not reproducible here and are replaced by "
             "criteria 1-6; ratio trend on the synthetic task (reported, not gated):";
  auto cfg = cli::load_run_config(kSource + "/configs/train.json");
  cfg.model.frontend_width = 8;
  cfg.model.hidden_width = 64;
  cfg.train.epochs = 8;
  double prev = -1;
  bool nondecreasing = true;
  for (double r : {0.25, 0.5, 0.75}) {
    cfg.model.ratio = r;
    const auto o = learn(cfg);
    v.detail += " ratio " + f("%.2f", r) + " val " + f("%.3f", o.val_acc);
    nondecreasing = nondecreasing && o.val_acc >= prev;
    prev = o.val_acc;
  }
  v.detail += std::string(", non-decreasing: ") + (nondecreasing ? "yes" : "no");
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Verdict criterion8() {
  Verdict v;
  set_thread_count(1);
  const auto root = fs::temp_directory_path() / "lvsr_acceptance_repro";
  fs::remove_all(root);
  std::ostringstream sink;
  const auto smoke = cli::load_run_config(kSource + "/configs/smoke.json");
  const auto t5 = cli::load_run_config(kSource + "/tables/table5.json");
  for (const char* run : {"a", "b"}) {
    const auto dir = root / run;
    fs::create_directories(dir);
    cli::cmd_train(smoke, std::nullopt, dir, sink);
    cli::cmd_analyze(t5, cli::TableFormat::kCsv, dir / "table5.csv", sink);
    cli::cmd_gen_data(smoke, dir / "data", sink);
  }
  for (const char* file : {"train_log.csv", "best.ckpt", "table5.csv", "data/train.f32", "data/val.json"}) {
    const auto a = slurp(root / "a" / file), b = slurp(root / "b" / file);
    note(v, !a.empty() && a == b, std::string(file) + " byte-identical");
  }
  fs::remove_all(root);
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const Criterion criteria[] = {
      {1, "cost-model fidelity", criterion1},   {2, "ghost reduction ratios", criterion2},
      {3, "partial-TCN tables", criterion3},    {4, "gradient suite", criterion4},
      {5, "structural invariants", criterion5}, {6, "learnability", criterion6},
      {7, "desk-scale scope", criterion7},      {8, "reproducibility", criterion8},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures, std::size(criteria));
  return failures == 0 ? 0 : 1;
}
