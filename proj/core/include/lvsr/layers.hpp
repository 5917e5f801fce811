#pragma once

#include <cstddef>
#include <string>
#include <unordered_set>
#include <vector>

#include "lvsr/batch_norm.hpp"
#include "lvsr/conv.hpp"
#include "lvsr/ops.hpp"
#include "lvsr/random.hpp"
#include "lvsr/tensor.hpp"

namespace lvsr {

/// Per-evaluation settings threaded through every layer.
struct ForwardContext {
  Mode mode = Mode::kEval;
  Rng* rng = nullptr;         // dropout source, required in train mode
  bool check_finite = false;  // throw NumericError naming the first stage producing NaN/Inf

  bool training() const { return mode == Mode::kTrain; }
  Rng& dropout_rng() const;

  /// Inverted dropout in train mode, identity otherwise.
  template <typename T>
  Tensor<T> dropout(const Tensor<T>& x, double p) const {
    if (!training() || p == 0.0) return x;
    return lvsr::dropout(x, p, true, dropout_rng());
  }

  template <typename T>
  void check(const std::string& stage, const Tensor<T>& t) const {
    if (check_finite && !all_finite(t.data())) throw_non_finite(stage);
  }

 private:
  [[noreturn]] static void throw_non_finite(const std::string& stage);
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

/// Ordered list of every tensor a model owns. Buffers (BN running stats) are
/// stored with trainable=false so checkpoints capture them too.
template <typename T>
class ParameterRegistry {
 public:
  /// Throws std::logic_error on a duplicate name or a tensor registered twice.
  void add(const std::string& name, const Tensor<T>& tensor, bool trainable = true);

  const std::vector<NamedTensor<T>>& entries() const { return entries_; }
  std::vector<Tensor<T>> trainable() const;
  /// Sum of trainable element counts.
  std::size_t trainable_count() const;
  /// Trainable element count restricted to names starting with `prefix`.
  std::size_t trainable_count(const std::string& prefix) const;
  const NamedTensor<T>* find(const std::string& name) const;
  void zero_grad();

 private:
  std::vector<NamedTensor<T>> entries_;
  std::unordered_set<std::string> names_;
  std::unordered_set<const void*> nodes_;
};

/// Convolution layer with He-normal initialization and optional bias.
template <typename T>
struct Conv {
  ConvDescriptor desc;
  Tensor<T> weight;
  Tensor<T> bias;
  std::string name = "conv";

  Conv() = default;
  Conv(ConvDescriptor d, bool with_bias, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx) const;
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

template <typename T>
struct BatchNorm {
  BatchNormState<T> state;
  std::string name = "bn";

  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels) : state(channels) {}
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// y = x W + b with W stored as [in, out].
template <typename T>
struct Linear {
  Tensor<T> weight;
  Tensor<T> bias;
  std::string name = "linear";

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx) const;
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// Common interface for anything the trainer can fit: [N, ...] -> logits [N, K].
template <typename T>
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Tensor<T> logits(const Tensor<T>& batch, const ForwardContext& ctx) = 0;
  virtual ParameterRegistry<T>& registry() = 0;
  virtual std::size_t num_classes() const = 0;
};

}  // namespace lvsr
