#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lvsr/ghost.hpp"
#include "lvsr/model_spec.hpp"
#include "lvsr/partial.hpp"

namespace lvsr {

/// "FLOPs" are counted as multiply-accumulates.
struct CountingConvention {
  bool macs_count_bias = false;
  bool count_bn_affine_params = true;
  bool count_elementwise_macs = false;  // BN, activations, pooling, residual adds, gating
  /// Count causal conv outputs at T + (k-1)d (the padded length before trimming)
  /// instead of T. Off by default: with it on, MACs are no longer linear in T.
  bool padded_causal_outputs = false;
  bool include_head = true;

  /// Compact, comma-free tag recorded with every report.
  std::string tag() const;
};

struct CostRow {
  std::string path;  // matches the parameter registry prefix of the layer
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

struct CostReport {
  std::vector<CostRow> rows;
  InputSpec input;
  CountingConvention convention;

  std::uint64_t total_params() const;
  std::uint64_t total_macs() const;
  /// Sums over rows whose path starts with `prefix`.
  std::uint64_t params_under(const std::string& prefix) const;
  std::uint64_t macs_under(const std::string& prefix) const;
  /// Rows whose path starts with any of `prefixes`.
  CostReport select(const std::vector<std::string>& prefixes) const;
  /// Concatenates rows; totals add.
  CostReport& append(const CostReport& other);
};

/// Whole model at spec.input (batch 1).
CostReport count_model(const ModelSpec& spec, const CountingConvention& conv = {});
/// Model parts: "stem", "trunk", "frontend" (stem + trunk), "sequence" (+ head when the
/// convention includes it) or "total".
CostReport count_component(const ModelSpec& spec, const std::string& component, const CountingConvention& conv = {});
std::uint64_t count_params(const ModelSpec& spec, const CountingConvention& conv = {});
std::uint64_t count_macs(const ModelSpec& spec, const CountingConvention& conv = {});

/// Single blocks on a batch-1 input. `spatial` lists the trailing input extents.
CostReport count_conv(const ConvDescriptor& desc, const std::vector<std::size_t>& spatial, bool bias,
                      const CountingConvention& conv = {}, const std::string& path = "conv");
CostReport count_ghost(const GhostConfig& cfg, const std::vector<std::size_t>& spatial,
                       const CountingConvention& conv = {}, const std::string& path = "ghost");
CostReport count_dfc(const DFCConfig& cfg, const std::vector<std::size_t>& spatial, const std::vector<std::size_t>& target,
                     const CountingConvention& conv = {}, const std::string& path = "dfc");
CostReport count_partial_block(const PartialBlockConfig& cfg, std::size_t frames, const CountingConvention& conv = {},
                               const std::string& path = "block");

struct Reduction {
  double params_percent = 0.0;
  double macs_percent = 0.0;
};
/// 100 * (1 - variant / base) per metric; throws std::invalid_argument on a zero base.
Reduction percent_reduction(const CostReport& base, const CostReport& variant);
double percent_reduction(double base, double variant);

}  // namespace lvsr
