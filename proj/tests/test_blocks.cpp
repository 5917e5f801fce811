#include <filesystem>

#include "lvsr/checkpoint.hpp"
#include "lvsr/cost_model.hpp"
#include "lvsr/errors.hpp"
#include "lvsr/frontend.hpp"
#include "lvsr/ghost.hpp"
#include "lvsr/gradcheck.hpp"
#include "lvsr/model.hpp"
#include "lvsr/partial.hpp"
#include "test_util.hpp"

namespace lvsr {
namespace {

using test::values;

TEST(Ghost, ConcatenatesPrimaryAndCheapHalves) {
  Rng rng(1);
  GhostConfig g{4, 10, 0.5, 3, Dims::k2D};
  GhostModule<float> m(g, rng);
  auto x = test::randn<float>({2, 4, 6, 6}, rng);
  ForwardContext ctx;
  auto y = m.forward(x, ctx);
  EXPECT_EQ(y.shape(), (Shape{2, 10, 6, 6}));
  auto x1 = values(m.primary_branch(x, ctx));
  auto all = values(y);
  // Channels [0, 5) of the output are X1 itself.
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 5 * 36; ++i) EXPECT_EQ(all[b * 360 + i], x1[b * 180 + i]);
}

TEST(Ghost, RejectsEmptyBranch) {
  EXPECT_THROW((GhostConfig{4, 2, 0.25, 3, Dims::k2D}.validate()), ConfigError);
  EXPECT_THROW((GhostConfig{4, 4, 1.0, 3, Dims::k2D}.validate()), ConfigError);
}

TEST(Ghost, CheaperThanTheConvItReplaces) {
  for (std::size_t c = 16; c <= 512; c *= 2) {
    GhostConfig g{c, c, 0.5, 3, Dims::k2D};
    auto ghost = count_ghost(g, {22, 22});
    auto plain = count_conv(conv2d(c, c, 3, 3), {22, 22}, false);
    EXPECT_LT(ghost.total_params(), plain.total_params()) << c;
    EXPECT_LT(ghost.total_macs(), plain.total_macs()) << c;
  }
}

TEST(DFC, GateLiesStrictlyBetweenZeroAndOne) {
  Rng rng(2);
  DFCAttention<float> a({3, 5, 1, 5, 2, 1}, rng);
  auto x = test::randn<float>({2, 3, 8, 10}, rng);
  ForwardContext ctx;
  auto g = a.forward(x, ctx);
  EXPECT_EQ(g.shape(), (Shape{2, 5, 8, 10}));
  for (float v : g.data()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  EXPECT_THROW(a.forward(test::randn<float>({1, 3, 1, 6}, rng), ctx), ShapeError);
}

TEST(GhostV2, IsGhostOutputTimesAttention) {
  Rng rng(3);
  GhostConfig g{4, 6, 0.5, 3, Dims::k2D};
  GhostV2Module<double> m(g, dfc_for(g, 1), rng);
  auto x = test::randn<double>({1, 4, 6, 6}, rng);
  ForwardContext ctx;
  auto y = values(m.forward(x, ctx));
  auto ghost = values(m.ghost.forward(x, ctx));
  auto gate = values(m.dfc.forward(x, ctx));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], ghost[i] * gate[i]);
}

TEST(PartialBlock, IdentityBranchesDoubleTheInput) {
  Rng rng(4);
  auto x = test::randn<float>({2, 8, 5}, rng);
  auto id = [](const Tensor<float>& t) { return t; };
  for (std::size_t split : {1u, 3u, 6u, 8u}) {
    auto y = values(partial_forward(x, split, id, id, id));
    auto xs = values(x);
    for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(y[i], 2.0f * xs[i]);
  }
}

TEST(PartialBlock, RatioOneEqualsStandardTemporalBlock) {
  PartialBlockConfig c;
  c.channels = 6;
  c.ratio = 1.0;
  c.core = CoreKind::kTemporal;
  c.kernel = 3;
  c.dilation = 2;
  Rng a(9), b(9);
  PartialBlock<float> block(c, a);
  TemporalCore<float> plain(6, 3, 2, c.dropout, c.activation, b);
  Rng rng(1);
  auto x = test::randn<float>({2, 6, 11}, rng);
  ForwardContext ctx;
  EXPECT_EQ(values(block.forward(x, ctx)), values(add(plain.forward(x, ctx), x)));
}

TEST(PartialBlock, ShapesAndValidation) {
  Rng rng(5);
  for (auto core : {CoreKind::kTemporal, CoreKind::kShuffle, CoreKind::kFaster}) {
    PartialBlockConfig c;
    c.channels = 16;
    c.core = core;
    PartialBlock<float> b(c, rng);
    ForwardContext ctx;
    EXPECT_EQ(b.forward(test::randn<float>({1, 16, 7}, rng), ctx).shape(), (Shape{1, 16, 7}));
  }
  PartialBlockConfig bad;
  bad.kernel = 4;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.kernel = 3;
  bad.ratio = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(GradCheck, EveryBlockPassesInHighPrecision) {
  BlockSuiteOptions opts;
  opts.seed = 17;
  const auto results = run_block_gradchecks(opts);
  EXPECT_EQ(results.size(), 15u);
  for (const auto& r : results) {
    EXPECT_TRUE(r.passed) << r.name << " error " << r.max_error << " at " << r.worst_tensor;
    EXPECT_GT(r.coordinates, 0u);
  }
}

TEST(GradCheck, DetectsAWrongGradient) {
  // sin has derivative cos; a backward that returns 2cos must fail the check.
  auto x = test::make<double>({3}, {0.1, 0.7, -0.4}, true);
  auto loss_fn = [&]() {
    std::vector<double> v;
    for (double a : x.data()) v.push_back(std::sin(a));
    return detail::make_result<double>({1}, {v[0] + v[1] + v[2]}, {x}, "bad_sin", [x](detail::Node<double>* n) mutable {
      return [x, n]() mutable {
        auto g = x.mutable_grad();
        for (std::size_t i = 0; i < 3; ++i) g[i] += 2.0 * std::cos(x.data()[i]) * n->grad[0];
      };
    });
  };
  auto r = check_gradients<double>("bad", loss_fn, {{"x", x, true}}, {});
  EXPECT_FALSE(r.passed);
  EXPECT_NEAR(r.max_error, 0.5, 1e-6);
}

TEST(Checkpoint, RoundTripAndMismatchReporting) {
  ModelSpec s;
  s.frontend_width = 4;
  s.hidden_width = 16;
  s.num_classes = 3;
  s.input = {5, 32, 32, 1};
  VSRModel<float> a(s, 1), b(s, 2);
  const auto path = std::filesystem::temp_directory_path() / "lvsr_ckpt_test.ckpt";
  save_checkpoint(path, a.registry());
  load_checkpoint(path, b.registry());
  for (std::size_t i = 0; i < a.registry().entries().size(); ++i) {
    EXPECT_EQ(values(a.registry().entries()[i].tensor), values(b.registry().entries()[i].tensor));
  }
  ModelSpec other = s;
  other.num_classes = 4;
  VSRModel<float> c(other, 1);
  try {
    load_checkpoint(path, c.registry());
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("head.weight"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path, c.registry()), IoError);
}

TEST(Checkpoint, RejectsCorruptBytes) {
  auto bytes = encode_checkpoint({{"w", {2}, {1.0f, 2.0f}}});
  auto ok = decode_checkpoint(bytes);
  ASSERT_EQ(ok.size(), 1u);
  EXPECT_EQ(ok[0].data, (std::vector<float>{1.0f, 2.0f}));
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_checkpoint(truncated), IoError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), IoError);
}

TEST(Frontend, ProducesFeatureSequence) {
  ModelSpec s;
  s.frontend_variant = FrontendVariant::kGhost;
  s.frontend_ghost = calibrated_frontend_ghost();
  s.frontend_width = 8;
  s.input = {3, 32, 32, 1};
  Rng rng(1);
  Frontend<float> f(s, rng);
  ForwardContext ctx;
  EXPECT_EQ(f.forward(test::randn<float>({2, 1, 3, 32, 32}, rng), ctx).shape(), (Shape{2, 64, 3}));
}

}  // namespace
}  // namespace lvsr
