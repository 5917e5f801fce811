#pragma once

#include <cstdint>
#include <memory>

#include "lvsr/frontend.hpp"
#include "lvsr/layers.hpp"
#include "lvsr/model_spec.hpp"
#include "lvsr/sequence_models.hpp"

namespace lvsr {

/// Frontend -> sequence model -> mean over time -> linear (-> softmax).
/// Parameters are created in a fixed order from `seed`, so equal (spec, seed)
/// pairs give identical weights.
template <typename T>
class VSRModel : public Classifier<T> {
 public:
  VSRModel(const ModelSpec& spec, std::uint64_t seed);

  /// [N,C,T,H,W] -> logits [N, classes]
  Tensor<T> logits(const Tensor<T>& clips, const ForwardContext& ctx) override;
  /// Class probabilities; rows sum to 1.
  Tensor<T> forward(const Tensor<T>& clips, const ForwardContext& ctx);
  /// Frontend output [N, F, T].
  Tensor<T> features(const Tensor<T>& clips, const ForwardContext& ctx);
  /// Sequence model plus head on precomputed features.
  Tensor<T> head_logits(const Tensor<T>& features, const ForwardContext& ctx);

  ParameterRegistry<T>& registry() override { return registry_; }
  std::size_t num_classes() const override { return spec_.num_classes; }
  const ModelSpec& spec() const { return spec_; }

  Frontend<T>& frontend() { return frontend_; }
  SequenceModel<T>& sequence() { return sequence_; }
  Linear<T>& head() { return head_; }

 private:
  ModelSpec spec_;
  Frontend<T> frontend_;
  SequenceModel<T> sequence_;
  Linear<T> head_;
  ParameterRegistry<T> registry_;
};

}  // namespace lvsr
