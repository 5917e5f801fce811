#include "lvsr/tables.hpp"

#include <cstdio>
#include <map>

#include "lvsr/errors.hpp"

namespace lvsr {

std::string format_scaled(std::uint64_t v, double scale) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", static_cast<double>(v) / scale);
  return buf;
}

std::string format_change(double reduction_percent) {
  const double change = -reduction_percent;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%+.1f%%", change);
  return buf;
}

std::vector<TableRow> compute_table(const std::vector<TableEntry>& entries, const CountingConvention& conv) {
  std::vector<TableRow> rows;
  std::map<std::string, CostReport> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const auto report = count_component(e.spec, e.component, conv);
    TableRow row{e.model, e.variant, report.total_params(), report.total_macs(), std::nullopt, conv.tag()};
    if (!e.baseline.empty()) {
      auto it = seen.find(e.baseline);
      if (it == seen.end()) {
        throw ConfigError("baseline '" + e.baseline + "' must name an earlier entry",
                          "models[" + std::to_string(i) + "].baseline");
      }
      row.delta = percent_reduction(it->second, report);
    }
    seen.emplace(e.model + (e.variant.empty() ? "" : "/" + e.variant), report);
    seen.emplace(e.model, report);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_markdown(const std::vector<TableRow>& rows) {
  std::string out = "| Model | Variant | FLOPs (G) | Params (M) |\n|---|---|---|---|\n";
  for (const auto& r : rows) {
    std::string flops = format_scaled(r.macs, 1e9);
    std::string params = format_scaled(r.params, 1e6);
    if (r.delta) {
      flops += " (" + format_change(r.delta->macs_percent) + ")";
      params += " (" + format_change(r.delta->params_percent) + ")";
    }
    out += "| " + r.model + " | " + r.variant + " | " + flops + " | " + params + " |\n";
  }
  return out;
}

std::string to_csv(const std::vector<TableRow>& rows) {
  std::string out = "model,variant,params_millions,flops_gigamacs,convention\n";
  for (const auto& r : rows) {
    out += r.model + "," + r.variant + "," + format_scaled(r.params, 1e6) + "," + format_scaled(r.macs, 1e9) + "," +
           r.convention + "\n";
  }
  return out;
}

}  // namespace lvsr
