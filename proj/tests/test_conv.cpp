#include "lvsr/conv.hpp"
#include "lvsr/mac_counter.hpp"

#include "lvsr/cost_model.hpp"
#include "lvsr/errors.hpp"
#include "lvsr/ops.hpp"
#include "lvsr/sequence_models.hpp"
#include "test_util.hpp"

namespace lvsr {
namespace {

using test::make;
using test::values;

// Independent reference: explicit loops with bounds checks instead of padding.
std::vector<double> naive_conv2d(const std::vector<double>& x, std::size_t n, std::size_t cin, std::size_t h,
                                 std::size_t w, const std::vector<double>& wt, const ConvDescriptor& d) {
  const std::size_t kh = d.kernel[0], kw = d.kernel[1];
  const std::size_t oh = d.output_extent(0, h), ow = d.output_extent(1, w);
  const std::size_t cin_g = cin / d.groups, cout_g = d.out_channels / d.groups;
  std::vector<double> y(n * d.out_channels * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t co = 0; co < d.out_channels; ++co)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double s = 0.0;
          const std::size_t g = co / cout_g;
          for (std::size_t ci = 0; ci < cin_g; ++ci)
            for (std::size_t a = 0; a < kh; ++a)
              for (std::size_t c = 0; c < kw; ++c) {
                const long yy = long(i * d.stride_at(0) + a * d.dilation_at(0)) - long(d.pad_before(0));
                const long xx = long(j * d.stride_at(1) + c * d.dilation_at(1)) - long(d.pad_before(1));
                if (yy < 0 || xx < 0 || yy >= long(h) || xx >= long(w)) continue;
                s += wt[((co * cin_g + ci) * kh + a) * kw + c] *
                     x[((b * cin + g * cin_g + ci) * h + std::size_t(yy)) * w + std::size_t(xx)];
              }
          y[((b * d.out_channels + co) * oh + i) * ow + j] = s;
        }
  return y;
}

TEST(Conv, CausalKernelOfOnes) {
  auto x = make<float>({1, 1, 3}, {1, 2, 3});
  auto w = make<float>({1, 1, 2}, {1, 1});
  EXPECT_EQ(values(conv(x, conv1d(1, 1, 2), w, Tensor<float>{})), (std::vector<float>{1, 3, 5}));
}

TEST(Conv, CausalDilatedKeepsLength) {
  auto x = make<float>({1, 1, 5}, {1, 2, 3, 4, 5});
  auto w = make<float>({1, 1, 2}, {1, 1});
  EXPECT_EQ(values(conv(x, conv1d(1, 1, 2, 2), w, Tensor<float>{})), (std::vector<float>{1, 2, 4, 6, 8}));
}

TEST(Conv, MatchesNaiveReferenceAcrossGeometries) {
  Rng rng(11);
  struct Case { std::size_t cin, cout, k, stride, groups, dil; };
  for (auto c : {Case{3, 4, 3, 1, 1, 1}, Case{4, 4, 3, 2, 4, 1}, Case{4, 6, 5, 2, 2, 1}, Case{2, 3, 3, 1, 1, 2},
                 Case{6, 6, 1, 1, 3, 1}, Case{3, 2, 7, 2, 1, 1}}) {
    ConvDescriptor d = conv2d(c.cin, c.cout, c.k, c.k, c.stride, c.groups);
    d.dilation = {c.dil, c.dil};
    auto x = test::randn<double>({2, c.cin, 9, 8}, rng);
    auto w = test::randn<double>(d.weight_shape(), rng);
    auto ref = naive_conv2d(values(x), 2, c.cin, 9, 8, values(w), d);
    for (auto algo : {ConvAlgo::kDirect, ConvAlgo::kIm2col}) {
      auto y = values(conv(x, d, w, Tensor<double>{}, algo));
      ASSERT_EQ(y.size(), ref.size());
      for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
    }
  }
}

TEST(Conv, DirectAndIm2colAgreeBitForBit) {
  Rng rng(12);
  for (std::size_t groups : {1u, 2u, 4u}) {
    auto d = conv2d(4, 8, 3, 3, 2, groups);
    auto x = test::randn<float>({2, 4, 11, 10}, rng);
    auto w = test::randn<float>(d.weight_shape(), rng);
    auto b = test::randn<float>({8}, rng);
    EXPECT_EQ(values(conv(x, d, w, b, ConvAlgo::kDirect)), values(conv(x, d, w, b, ConvAlgo::kIm2col)));
  }
  auto d1 = conv1d(6, 4, 5, 3);
  auto x = test::randn<float>({3, 6, 17}, rng);
  auto w = test::randn<float>(d1.weight_shape(), rng);
  EXPECT_EQ(values(conv(x, d1, w, Tensor<float>{}, ConvAlgo::kDirect)),
            values(conv(x, d1, w, Tensor<float>{}, ConvAlgo::kIm2col)));
}

TEST(Conv, ShapeErrors) {
  auto x = make<float>({1, 2, 4}, std::vector<float>(8, 1.0f));
  auto w = make<float>({1, 3, 2}, std::vector<float>(6, 1.0f));
  EXPECT_THROW(conv(x, conv1d(3, 1, 2), w, Tensor<float>{}), ShapeError);
  EXPECT_THROW(conv1d(3, 2, 3, 1, 2).validate(), ShapeError);
}

TEST(Conv, MacCounterAgreesWithCostModel) {
  Rng rng(2);
  auto d = conv2d(8, 16, 3, 3, 2, 2);
  auto x = test::randn<float>({1, 8, 14, 13}, rng);
  auto w = test::randn<float>(d.weight_shape(), rng);
  MacCounter counter;
  conv(x, d, w, Tensor<float>{});
  EXPECT_EQ(counter.count(), count_conv(d, {14, 13}, false).total_macs());
}

// Changing input at time t0 must leave every output before t0 bit-identical.
template <typename Net>
void expect_causal(Net& net, std::size_t channels, std::size_t frames, std::uint64_t seed) {
  Rng rng(seed);
  auto x = test::randn<float>({1, channels, frames}, rng);
  ForwardContext ctx;
  auto y0 = values(net.forward(x, ctx));
  const std::size_t out_c = y0.size() / frames;
  for (std::size_t t0 : {std::size_t{0}, frames / 2, frames - 1}) {
    auto xp = x.clone();
    for (std::size_t c = 0; c < channels; ++c) xp.mutable_data()[c * frames + t0] += 5.0f;
    auto y1 = values(net.forward(xp, ctx));
    bool changed_at_t0 = false;
    for (std::size_t c = 0; c < out_c; ++c) {
      for (std::size_t t = 0; t < t0; ++t) ASSERT_EQ(y1[c * frames + t], y0[c * frames + t]) << "t=" << t;
      changed_at_t0 = changed_at_t0 || y1[c * frames + t0] != y0[c * frames + t0];
    }
    EXPECT_TRUE(changed_at_t0);
  }
}

TEST(Causality, CausalConvolution) {
  struct Wrap {
    ConvDescriptor d = conv1d(3, 4, 3, 2);
    Tensor<float> w;
    Tensor<float> forward(const Tensor<float>& x, const ForwardContext&) { return conv(x, d, w, Tensor<float>{}); }
  } net;
  Rng rng(1);
  net.w = test::randn<float>(net.d.weight_shape(), rng);
  expect_causal(net, 3, 16, 9);
}

TEST(Causality, EverySequenceModel) {
  for (auto seq : {SeqModel::kPartial, SeqModel::kMSTCN, SeqModel::kDCTCN}) {
    for (bool ghost : {false, true}) {
      if (ghost && seq == SeqModel::kPartial) continue;
      for (auto core : {CoreKind::kTemporal, CoreKind::kShuffle, CoreKind::kFaster}) {
        if (seq != SeqModel::kPartial && core != CoreKind::kFaster) continue;
        ModelSpec s;
        s.seq_model = seq;
        s.partial_core = core;
        s.seq_ghost = ghost;
        s.seq_ghost_settings = calibrated_tcn_ghost();
        s.hidden_width = 12;
        s.dense_growth = 6;
        s.dense_layers = 2;
        Rng rng(4);
        SequenceModel<float> net(s, 10, rng);
        SCOPED_TRACE(to_string(seq) + (ghost ? " ghost " : " ") + to_string(core));
        expect_causal(net, 10, 20, 3);
      }
    }
  }
}

}  // namespace
}  // namespace lvsr
