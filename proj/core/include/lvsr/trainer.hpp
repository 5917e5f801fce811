#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lvsr/layers.hpp"
#include "lvsr/synthetic.hpp"

namespace lvsr {

struct TrainConfig {
  double lr_init = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.01;  // decoupled: w -= lr * wd * w
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  bool use_mixup = true;
  double mixup_alpha = 0.4;
  std::optional<double> mixup_lambda;  // fixes lambda instead of sampling it
  bool variable_length = true;
  double var_len_min_keep = 0.5;
  bool crop_flip = true;
  std::size_t crop_jitter = 4;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending `train.*` field.
  void validate() const;
};

/// lr_init * (1 + cos(pi * epoch / total)) / 2
double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr_init);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double best_val_acc = -1.0;
  std::size_t best_epoch = 0;
};

/// `epoch,lr,train_loss,val_acc` with round-trippable number formatting.
std::string format_log_csv(const std::vector<EpochLog>& log);

/// SGD with momentum and decoupled weight decay on every trainable tensor.
template <typename T>
class Sgd {
 public:
  Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}
  void step(ParameterRegistry<T>& registry, double lr);

 private:
  double momentum_;
  double weight_decay_;
  std::vector<std::vector<T>> velocity_;
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  /// Directory for best.ckpt; empty disables checkpointing.
  std::filesystem::path checkpoint_dir;
};

/// Per-epoch: shuffle, augment, mixup, SGD; then validation. The checkpoint is
/// rewritten whenever validation accuracy strictly improves. A non-finite loss
/// raises NumericError naming the first layer that produced NaN/Inf.
TrainResult train(Classifier<float>& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

/// Top-1 accuracy in eval mode. Throws std::invalid_argument on an empty dataset.
double evaluate(Classifier<float>& model, const Dataset& ds, std::size_t batch_size = 32);

}  // namespace lvsr
