#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <numeric>

#include "lvsr/augment.hpp"
#include "lvsr/checkpoint.hpp"
#include "lvsr/errors.hpp"
#include "lvsr/model.hpp"
#include "lvsr/synthetic.hpp"
#include "lvsr/trainer.hpp"
#include "test_util.hpp"

namespace lvsr {
namespace {

using test::make;
using test::values;

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 20, 0.01), 0.01);
  EXPECT_NEAR(cosine_lr(20, 20, 0.01), 0.0, 1e-18);
  EXPECT_NEAR(cosine_lr(10, 20, 0.01), 0.005, 1e-15);
  EXPECT_THROW(cosine_lr(21, 20, 0.01), std::invalid_argument);
}

TEST(Mixup, LambdaOneIsIdentity) {
  Rng rng(1);
  auto x = test::randn<float>({3, 1, 2, 2, 2}, rng);
  std::vector<std::size_t> labels{0, 1, 2};
  auto y = one_hot(labels, 3);
  std::vector<std::size_t> perm{2, 0, 1};
  auto m = mixup_with(x, y, 1.0, perm);
  EXPECT_EQ(values(m.inputs), values(x));
  EXPECT_EQ(values(m.targets), values(y));
}

TEST(Mixup, HalfMixOfConstantClips) {
  auto x = make<float>({2, 1, 1, 2, 2}, {1, 1, 1, 1, 3, 3, 3, 3});
  std::vector<std::size_t> labels{0, 1};
  std::vector<std::size_t> perm{1, 0};
  auto m = mixup_with(x, one_hot(labels, 2), 0.5, perm);
  for (float v : m.inputs.data()) EXPECT_EQ(v, 2.0f);
}

TEST(Mixup, LabelRowsSumToOneAndErrors) {
  Rng rng(2);
  auto x = test::randn<float>({6, 1, 1, 2, 2}, rng);
  std::vector<std::size_t> labels{0, 1, 2, 3, 0, 1};
  auto y = one_hot(labels, 4);
  for (int rep = 0; rep < 20; ++rep) {
    auto m = mixup(x, y, 0.4, rng);
    EXPECT_GE(m.lambda, 0.0);
    EXPECT_LE(m.lambda, 1.0);
    for (std::size_t r = 0; r < 6; ++r) {
      float s = 0.0f;
      for (std::size_t c = 0; c < 4; ++c) s += m.targets.data()[r * 4 + c];
      EXPECT_NEAR(s, 1.0f, 1e-6f);
    }
  }
  EXPECT_THROW(mixup(x, y, 0.0, rng), ConfigError);
  std::vector<std::size_t> one{0};
  EXPECT_THROW(mixup(test::randn<float>({1, 1, 1, 2, 2}, rng), one_hot(one, 2), 0.4, rng), ShapeError);
}

TEST(VariableLength, KeepsFrameCountAndWindow) {
  Rng rng(3);
  std::vector<float> clip(2 * 10 * 4);
  std::iota(clip.begin(), clip.end(), 1.0f);
  EXPECT_EQ(variable_length_augment(clip, 2, 10, 4, 1.0, rng), clip);
  for (int rep = 0; rep < 30; ++rep) {
    auto out = variable_length_augment(clip, 2, 10, 4, 0.5, rng);
    ASSERT_EQ(out.size(), clip.size());
    // Kept frames are a contiguous run from the source, moved to the front.
    const float first = out[0];
    const std::size_t start = static_cast<std::size_t>(first - 1.0f) / 4;
    std::size_t kept = 0;
    while (kept < 10 && out[kept * 4] != 0.0f) ++kept;
    EXPECT_GE(kept, 5u);
    for (std::size_t t = 0; t < kept; ++t) EXPECT_EQ(out[t * 4], clip[(start + t) * 4]);
    for (std::size_t t = kept; t < 10; ++t) EXPECT_EQ(out[t * 4], 0.0f);
  }
  EXPECT_THROW(variable_length_augment(clip, 2, 10, 4, 0.0, rng), ConfigError);
}

TEST(Synthetic, DeterministicAndLabelled) {
  SyntheticDatasetSpec s;
  s.samples_per_class = 2;
  auto a = generate_synthetic(s, Split::kTrain);
  auto b = generate_synthetic(s, Split::kTrain);
  EXPECT_EQ(a.data, b.data);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.size(), 20u);
  EXPECT_NE(generate_synthetic(s, Split::kVal).data, a.data);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.labels[i], i % 10);
}

// Re-renders a noiseless clip from (class, phase) alone.
std::vector<double> render(const SyntheticDatasetSpec& s, std::size_t k, double phase) {
  const double w = double(s.width);
  std::vector<double> clip(s.frames * s.height * s.width);
  for (std::size_t t = 0; t < s.frames; ++t) {
    const double cx = 0.5 * (w - 1.0) + 0.3 * w * std::sin(2 * std::numbers::pi * double(k + 1) * double(t) /
                                                                double(s.frames) + phase);
    for (std::size_t y = 0; y < s.height; ++y)
      for (std::size_t x = 0; x < s.width; ++x) {
        const double dx = (double(x) - cx) / std::max(1.0, w / 16.0);
        clip[(t * s.height + y) * s.width + x] = std::exp(-0.5 * dx * dx);
      }
  }
  double mean = std::accumulate(clip.begin(), clip.end(), 0.0) / double(clip.size());
  double var = 0.0;
  for (double v : clip) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / double(clip.size()));
  for (auto& v : clip) v = (v - mean) / sd;
  return clip;
}

TEST(Synthetic, NoiselessSamplesDependOnlyOnClassAndPhase) {
  SyntheticDatasetSpec s;
  s.noise_std = 0.0;
  for (std::size_t i : {0u, 10u, 13u}) {
    std::size_t label = 0;
    double phase = 0.0;
    auto clip = synthetic_clip(s, Split::kTrain, i, &label, &phase);
    auto ref = render(s, label, phase);
    for (std::size_t j = 0; j < clip.size(); ++j) ASSERT_NEAR(clip[j], ref[j], 1e-4) << j;
  }
}

// Softmax regression by full-batch gradient descent; returns validation accuracy.
double fit_linear(const std::vector<std::vector<double>>& xtr, const std::vector<std::size_t>& ytr,
                  const std::vector<std::vector<double>>& xva, const std::vector<std::size_t>& yva, std::size_t k) {
  const std::size_t d = xtr[0].size();
  std::vector<double> w(d * k, 0.0), b(k, 0.0);
  auto scores = [&](const std::vector<double>& x) {
    std::vector<double> s(b);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t c = 0; c < k; ++c) s[c] += x[j] * w[j * k + c];
    return s;
  };
  for (int it = 0; it < 300; ++it) {
    std::vector<double> gw(d * k, 0.0), gb(k, 0.0);
    for (std::size_t n = 0; n < xtr.size(); ++n) {
      auto s = scores(xtr[n]);
      const double m = *std::max_element(s.begin(), s.end());
      double z = 0.0;
      for (auto& v : s) z += (v = std::exp(v - m));
      for (std::size_t c = 0; c < k; ++c) {
        const double g = s[c] / z - (c == ytr[n] ? 1.0 : 0.0);
        gb[c] += g;
        for (std::size_t j = 0; j < d; ++j) gw[j * k + c] += g * xtr[n][j];
      }
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= 0.5 * gw[i] / double(xtr.size());
    for (std::size_t c = 0; c < k; ++c) b[c] -= 0.5 * gb[c] / double(xtr.size());
  }
  std::size_t correct = 0;
  for (std::size_t n = 0; n < xva.size(); ++n) {
    auto s = scores(xva[n]);
    correct += std::size_t(std::max_element(s.begin(), s.end()) - s.begin()) == yva[n];
  }
  return double(correct) / double(xva.size());
}

TEST(Synthetic, ClassLivesInMotionNotAppearance) {
  SyntheticDatasetSpec s;
  s.samples_per_class = 30;
  s.val_samples_per_class = 30;
  auto tr = generate_synthetic(s, Split::kTrain);
  auto va = generate_synthetic(s, Split::kVal);
  const std::size_t plane = s.height * s.width;
  // Static features: the time-averaged frame, column profile.
  auto mean_frame = [&](const Dataset& ds, std::size_t i) {
    std::vector<double> f(s.width, 0.0);
    auto c = ds.clip(i);
    for (std::size_t t = 0; t < s.frames; ++t)
      for (std::size_t p = 0; p < plane; ++p) f[p % s.width] += c[t * plane + p];
    return f;
  };
  // Temporal features: DFT magnitudes of the bar-centre trajectory.
  auto spectrum = [&](const Dataset& ds, std::size_t i) {
    auto c = ds.clip(i);
    std::vector<double> centre(s.frames);
    for (std::size_t t = 0; t < s.frames; ++t) {
      double num = 0.0, den = 0.0;
      for (std::size_t p = 0; p < plane; ++p) {
        const double v = std::max(0.0, double(c[t * plane + p]));
        num += v * double(p % s.width);
        den += v;
      }
      centre[t] = num / den;
    }
    std::vector<double> f;
    for (std::size_t q = 1; q <= 12; ++q) {
      std::complex<double> acc = 0.0;
      for (std::size_t t = 0; t < s.frames; ++t)
        acc += centre[t] * std::polar(1.0, -2 * std::numbers::pi * double(q * t) / double(s.frames));
      f.push_back(std::abs(acc) / double(s.frames));
    }
    return f;
  };
  auto collect = [&](const Dataset& ds, auto feat) {
    std::vector<std::vector<double>> x;
    for (std::size_t i = 0; i < ds.size(); ++i) x.push_back(feat(ds, i));
    return x;
  };
  const double n = double(va.size());
  const double sigma = std::sqrt(0.1 * 0.9 / n);
  const double static_acc = fit_linear(collect(tr, mean_frame), tr.labels, collect(va, mean_frame), va.labels, 10);
  const double temporal_acc = fit_linear(collect(tr, spectrum), tr.labels, collect(va, spectrum), va.labels, 10);
  EXPECT_LT(static_acc, 0.1 + 3 * sigma) << "static baseline should stay near chance";
  EXPECT_GT(temporal_acc, 0.1 + 3 * sigma) << "motion features should beat chance";
  EXPECT_GT(temporal_acc, static_acc + 0.3);
}

TEST(Synthetic, ExportImportIsBitIdentical) {
  SyntheticDatasetSpec s;
  s.samples_per_class = 2;
  auto ds = generate_synthetic(s, Split::kTrain);
  const auto dir = std::filesystem::temp_directory_path() / "lvsr_export_test";
  export_dataset(ds, dir, "train");
  auto back = import_dataset(dir, "train");
  EXPECT_EQ(back.data, ds.data);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.clip_shape(), ds.clip_shape());
  std::filesystem::remove_all(dir);
}

/// Single linear layer over flattened clips, enough for trainer plumbing tests.
class LinearProbe : public Classifier<float> {
 public:
  LinearProbe(std::size_t in, std::size_t k, std::uint64_t seed) : k_(k) {
    Rng rng(seed);
    layer_ = Linear<float>(in, k, rng);
    layer_.register_in(reg_, "probe");
  }
  Tensor<float> logits(const Tensor<float>& batch, const ForwardContext& ctx) override {
    return layer_.forward(reshape(batch, {batch.dim(0), batch.numel() / batch.dim(0)}), ctx);
  }
  ParameterRegistry<float>& registry() override { return reg_; }
  std::size_t num_classes() const override { return k_; }

 private:
  std::size_t k_;
  Linear<float> layer_;
  ParameterRegistry<float> reg_;
};

SyntheticDatasetSpec tiny_data() {
  SyntheticDatasetSpec s;
  s.num_classes = 3;
  s.samples_per_class = 4;
  s.val_samples_per_class = 2;
  s.frames = 5;
  s.height = 8;
  s.width = 8;
  return s;
}

TEST(Trainer, ReducesToPlainSgdWithoutDecayOrMixing) {
  auto spec = tiny_data();
  auto tr = generate_synthetic(spec, Split::kTrain);
  auto va = generate_synthetic(spec, Split::kVal);
  LinearProbe model(tr.clip_size(), 3, 5), ref(tr.clip_size(), 3, 5);

  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = tr.size();
  cfg.weight_decay = 0.0;
  cfg.mixup_lambda = 1.0;
  cfg.variable_length = false;
  cfg.crop_flip = false;
  train(model, tr, va, cfg);

  std::vector<std::size_t> all(tr.size());
  std::iota(all.begin(), all.end(), 0);
  ForwardContext ctx;
  auto loss = cross_entropy(ref.logits(tr.batch(all), ctx), std::span<const std::size_t>(tr.labels));
  backward(loss);
  for (std::size_t e = 0; e < ref.registry().entries().size(); ++e) {
    auto w = ref.registry().entries()[e].tensor;
    auto got = model.registry().entries()[e].tensor;
    for (std::size_t i = 0; i < w.numel(); ++i) {
      ASSERT_NEAR(got.data()[i], w.data()[i] - 0.01f * w.grad()[i], 1e-6f);
    }
  }
}

TEST(Trainer, DeterministicLogAndCheckpointRoundTrip) {
  auto spec = tiny_data();
  auto tr = generate_synthetic(spec, Split::kTrain);
  auto va = generate_synthetic(spec, Split::kVal);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.crop_jitter = 1;
  const auto dir = std::filesystem::temp_directory_path() / "lvsr_trainer_test";
  std::filesystem::remove_all(dir);
  LinearProbe a(tr.clip_size(), 3, 1), b(tr.clip_size(), 3, 1);
  auto ra = train(a, tr, va, cfg, {{}, dir});
  auto rb = train(b, tr, va, cfg);
  EXPECT_EQ(format_log_csv(ra.log), format_log_csv(rb.log));
  for (std::size_t e = 0; e < ra.log.size(); ++e) {
    EXPECT_EQ(ra.log[e].lr, cosine_lr(e, cfg.epochs, cfg.lr_init));
  }

  LinearProbe restored(tr.clip_size(), 3, 99);
  load_checkpoint(dir / "best.ckpt", restored.registry());
  EXPECT_EQ(evaluate(restored, va), ra.best_val_acc);
  std::filesystem::remove_all(dir);
}

TEST(Evaluate, EmptyAndDuplicatedDatasets) {
  auto spec = tiny_data();
  auto va = generate_synthetic(spec, Split::kVal);
  LinearProbe model(va.clip_size(), 3, 2);
  Dataset empty = va;
  empty.data.clear();
  empty.labels.clear();
  EXPECT_THROW(evaluate(model, empty), std::invalid_argument);
  Dataset twice = va;
  for (std::size_t i = 0; i < va.size(); ++i) twice.push_back(va.clip(i), va.labels[i]);
  EXPECT_EQ(evaluate(model, twice), evaluate(model, va));
  const double acc = evaluate(model, va);
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
}

TEST(Trainer, NonFiniteLossNamesTheStage) {
  ModelSpec s;
  s.frontend_width = 4;
  s.hidden_width = 16;
  s.num_classes = 3;
  s.input = {5, 32, 32, 1};
  SyntheticDatasetSpec d = tiny_data();
  d.height = d.width = 32;
  auto tr = generate_synthetic(d, Split::kTrain);
  tr.data[0] = std::numeric_limits<float>::quiet_NaN();
  VSRModel<float> m(s, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = tr.size();
  cfg.variable_length = false;
  cfg.crop_flip = false;
  cfg.use_mixup = false;
  try {
    train(m, tr, tr, cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("frontend"), std::string::npos) << e.what();
  }
}

TEST(Trainer, GhostModelLossFallsOverFirstEpochs) {
  ModelSpec s;
  s.frontend_variant = FrontendVariant::kGhost;
  s.frontend_ghost = calibrated_frontend_ghost();
  s.frontend_width = 8;
  s.hidden_width = 32;
  s.num_classes = 4;
  s.input = {9, 32, 32, 1};
  SyntheticDatasetSpec d;
  d.num_classes = 4;
  d.samples_per_class = 8;
  d.val_samples_per_class = 2;
  d.frames = 9;
  VSRModel<float> m(s, 3);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.use_mixup = false;
  cfg.lr_init = 0.05;
  auto r = train(m, generate_synthetic(d, Split::kTrain), generate_synthetic(d, Split::kVal), cfg);
  EXPECT_LT(r.log.back().train_loss, r.log.front().train_loss);
}

}  // namespace
}  // namespace lvsr
