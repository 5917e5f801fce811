#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lvsr/cost_model.hpp"
#include "lvsr/model_spec.hpp"

namespace lvsr {

/// One requested table row: a model part plus an optional baseline row for the delta column.
struct TableEntry {
  std::string model;
  std::string variant;
  std::string component = "total";  // see count_component
  ModelSpec spec;
  std::string baseline;  // model name of an earlier entry; empty for none
};

struct TableRow {
  std::string model;
  std::string variant;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  std::optional<Reduction> delta;  // reduction vs baseline, percent
  std::string convention;
};

/// Rows in input order. Throws ConfigError for an unknown or later baseline.
std::vector<TableRow> compute_table(const std::vector<TableEntry>& entries, const CountingConvention& conv);

/// "| Model | Variant | FLOPs (G) | Params (M) |" with values like "2.13 (-74.3%)".
std::string to_markdown(const std::vector<TableRow>& rows);
/// Header `model,variant,params_millions,flops_gigamacs,convention`.
std::string to_csv(const std::vector<TableRow>& rows);

/// Two-decimal fixed formatting of v / scale.
std::string format_scaled(std::uint64_t v, double scale);
/// "-74.3%" style signed change of variant relative to base.
std::string format_change(double reduction_percent);

}  // namespace lvsr
