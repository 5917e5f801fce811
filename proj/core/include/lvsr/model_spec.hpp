#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lvsr/ghost.hpp"
#include "lvsr/ops.hpp"
#include "lvsr/partial.hpp"

namespace lvsr {

enum class FrontendVariant { kStandard, kGhost, kGhostV2 };
enum class SeqModel { kMSTCN, kDCTCN, kPartial };
/// Primary conv of a substituted Ghost module: 1x1 as written, or the kernel of the conv it replaces.
enum class PrimaryKernel { kPointwise, kInherit };

FrontendVariant parse_frontend(const std::string& s);
SeqModel parse_seq_model(const std::string& s);
PrimaryKernel parse_primary_kernel(const std::string& s);
std::string to_string(FrontendVariant v);
std::string to_string(SeqModel m);
std::string to_string(PrimaryKernel p);

/// How a standard conv is swapped for a Ghost module.
struct GhostSettings {
  double ratio = 0.5;
  PrimaryKernel primary = PrimaryKernel::kPointwise;
  std::size_t cheap_kernel = 3;
  bool keep_strided = false;                        // leave stride-2 convs standard
  PrimaryKernel dfc_entry = PrimaryKernel::kPointwise;  // GhostV2 attention entry conv
};

/// Frozen settings that bring the 2-D ghost frontend closest to the reported totals.
GhostSettings calibrated_frontend_ghost();
/// Frozen settings for ghost-substituted MS-TCN / DC-TCN.
GhostSettings calibrated_tcn_ghost();

struct InputSpec {
  std::size_t frames = 29;
  std::size_t height = 88;
  std::size_t width = 88;
  std::size_t channels = 1;

  bool operator==(const InputSpec&) const = default;
};

struct ModelSpec {
  FrontendVariant frontend_variant = FrontendVariant::kStandard;
  std::size_t frontend_width = 64;  // stage widths w, 2w, 4w, 8w
  GhostSettings frontend_ghost;

  SeqModel seq_model = SeqModel::kPartial;
  bool seq_ghost = false;
  GhostSettings seq_ghost_settings;
  CoreKind partial_core = CoreKind::kFaster;
  double ratio = 0.75;
  std::size_t kernel = 3;
  std::vector<std::size_t> dilations;  // empty: model default
  std::vector<std::size_t> branch_kernels{3, 5, 7};
  std::size_t hidden_width = 0;        // 0: model default
  std::size_t dense_growth = 384;
  std::size_t dense_layers = 3;
  std::size_t num_blocks = 4;
  double dropout = 0.2;
  std::size_t mlp_expand = 2;
  bool shuffle_final_activation = true;
  Activation activation = Activation::kRelu;
  std::size_t num_classes = 500;
  InputSpec input;

  std::size_t feature_width() const { return 8 * frontend_width; }
  /// 512 for Partial-TCN and DC-TCN, 768 for MS-TCN unless set.
  std::size_t resolved_hidden() const;
  /// (1,2,4,8) for Partial-TCN and MS-TCN, (1,2,5) for DC-TCN unless set.
  std::vector<std::size_t> resolved_dilations() const;
  std::size_t output_width() const { return resolved_hidden(); }
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Ghost config replacing a 2-D conv a->o with a kxk kernel at `stride`.
GhostConfig frontend_ghost_config(const GhostSettings& s, std::size_t in, std::size_t out, std::size_t kernel,
                                  std::size_t stride);
/// Ghost config replacing a causal 1-D conv a->o with kernel k and dilation d.
GhostConfig temporal_ghost_config(const GhostSettings& s, std::size_t in, std::size_t out, std::size_t kernel,
                                  std::size_t dilation, Activation act);

}  // namespace lvsr
