#include "lvsr/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "lvsr/augment.hpp"
#include "lvsr/checkpoint.hpp"
#include "lvsr/errors.hpp"

namespace lvsr {

void TrainConfig::validate() const {
  if (!(lr_init > 0.0) || !std::isfinite(lr_init)) throw ConfigError("must be positive", "train.lr_init");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("must lie in [0,1)", "train.momentum");
  if (weight_decay < 0.0) throw ConfigError("must be non-negative", "train.weight_decay");
  if (epochs == 0) throw ConfigError("must be positive", "train.epochs");
  if (batch_size == 0) throw ConfigError("must be positive", "train.batch_size");
  if (use_mixup && !(mixup_alpha > 0.0)) throw ConfigError("must be positive", "train.mixup_alpha");
  if (mixup_lambda && (*mixup_lambda < 0.0 || *mixup_lambda > 1.0)) {
    throw ConfigError("must lie in [0,1]", "train.mixup_lambda");
  }
  if (!(var_len_min_keep > 0.0 && var_len_min_keep <= 1.0)) throw ConfigError("must lie in (0,1]", "train.var_len_min_keep");
}

double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr_init) {
  if (total_epochs == 0 || epoch > total_epochs) throw std::invalid_argument("cosine_lr: epoch out of range");
  const double x = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return lr_init * (1.0 + std::cos(std::numbers::pi * x)) / 2.0;
}

std::string format_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,lr,train_loss,val_acc\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.lr, e.train_loss, e.val_acc);
    out += buf;
  }
  return out;
}

template <typename T>
void Sgd<T>::step(ParameterRegistry<T>& registry, double lr) {
  auto params = registry.trainable();
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.emplace_back(p.numel(), T{0});
  }
  if (velocity_.size() != params.size()) throw std::logic_error("Sgd: registry changed between steps");
  const T mu = static_cast<T>(momentum_), eta = static_cast<T>(lr), wd = static_cast<T>(weight_decay_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto w = p.mutable_data();
    auto g = p.grad();
    auto& v = velocity_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = mu * v[j] + g[j];
      w[j] = w[j] - eta * v[j] - eta * wd * w[j];
    }
  }
}

template class Sgd<float>;
template class Sgd<double>;

namespace {

Tensor<float> augment_batch(const Dataset& ds, std::span<const std::size_t> idx, const TrainConfig& cfg, Rng& rng) {
  std::vector<float> v;
  v.reserve(idx.size() * ds.clip_size());
  const std::size_t frame = ds.height * ds.width;
  for (auto i : idx) {
    auto c = ds.clip(i);
    std::vector<float> clip(c.begin(), c.end());
    if (cfg.variable_length) {
      clip = variable_length_augment(clip, ds.channels, ds.frames, frame, cfg.var_len_min_keep, rng);
    }
    if (cfg.crop_flip) {
      clip = random_crop_flip(clip, ds.channels * ds.frames, ds.height, ds.width, cfg.crop_jitter, true, rng);
    }
    v.insert(v.end(), clip.begin(), clip.end());
  }
  return Tensor<float>(Shape{idx.size(), ds.channels, ds.frames, ds.height, ds.width}, std::move(v));
}

[[noreturn]] void diagnose_non_finite(Classifier<float>& model, const Tensor<float>& inputs, double loss) {
  NoGradGuard guard;
  ForwardContext probe;
  probe.mode = Mode::kEval;
  probe.check_finite = true;
  model.logits(inputs, probe);  // throws naming the layer when one is at fault
  throw NumericError("non-finite training loss (" + std::to_string(loss) + ") produced by the loss itself");
}

}  // namespace

TrainResult train(Classifier<float>& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
  if (train_set.num_classes != model.num_classes()) {
    throw ShapeError("train: dataset has " + std::to_string(train_set.num_classes) + " classes, model head has " +
                     std::to_string(model.num_classes()));
  }
  if (!hooks.checkpoint_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(hooks.checkpoint_dir, ec);
    if (ec || !std::filesystem::is_directory(hooks.checkpoint_dir)) {
      throw IoError("cannot create checkpoint directory " + hooks.checkpoint_dir.string());
    }
  }

  Rng rng(derive_seed(cfg.seed, 0x7261696eULL));
  Sgd<float> opt(cfg.momentum, cfg.weight_decay);
  auto& reg = model.registry();
  TrainResult result;
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr_init);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i)))]);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      auto inputs = augment_batch(train_set, idx, cfg, rng);
      std::vector<std::size_t> labels;
      for (auto i : idx) labels.push_back(train_set.labels[i]);
      auto targets = one_hot(labels, train_set.num_classes);
      if (cfg.use_mixup && idx.size() >= 2) {
        MixupResult m = cfg.mixup_lambda ? [&] {
          std::vector<std::size_t> perm(idx.size());
          std::iota(perm.begin(), perm.end(), 0);
          for (std::size_t i = perm.size() - 1; i > 0; --i)
            std::swap(perm[i], perm[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i)))]);
          return mixup_with(inputs, targets, *cfg.mixup_lambda, perm);
        }()
                                         : mixup(inputs, targets, cfg.mixup_alpha, rng);
        inputs = m.inputs;
        targets = m.targets;
      }
      ForwardContext ctx;
      ctx.mode = Mode::kTrain;
      ctx.rng = &rng;
      reg.zero_grad();
      auto loss = cross_entropy(model.logits(inputs, ctx), targets);
      const double lv = loss.item();
      if (!std::isfinite(lv)) diagnose_non_finite(model, inputs, lv);
      backward(loss);
      opt.step(reg, lr);
      loss_sum += lv;
      ++batches;
    }
    EpochLog entry{epoch, lr, loss_sum / static_cast<double>(batches), val_set.size() ? evaluate(model, val_set) : 0.0};
    result.log.push_back(entry);
    if (entry.val_acc > result.best_val_acc) {
      result.best_val_acc = entry.val_acc;
      result.best_epoch = epoch;
      if (!hooks.checkpoint_dir.empty()) save_checkpoint(hooks.checkpoint_dir / "best.ckpt", reg);
    }
    if (hooks.on_epoch) hooks.on_epoch(entry);
  }
  return result;
}

double evaluate(Classifier<float>& model, const Dataset& ds, std::size_t batch_size) {
  if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  NoGradGuard guard;
  ForwardContext ctx;
  ctx.mode = Mode::kEval;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(ds.size(), start + batch_size); ++i) idx.push_back(i);
    auto logits = model.logits(ds.batch(idx), ctx);
    const std::size_t k = logits.dim(1);
    auto v = logits.data();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c)
        if (v[r * k + c] > v[r * k + best]) best = c;
      if (best == ds.labels[idx[r]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace lvsr
