#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "config.hpp"
#include "lvsr/gradcheck.hpp"

namespace lvsr::cli {

/// Stable process exit codes.
enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kIo = 3, kNumeric = 4, kShape = 5 };

enum class TableFormat { kMarkdown, kCsv };

/// Cost table for `models` (or the single `model` section when no list is given).
/// Writes to `out_file` when set, otherwise to `os`.
int cmd_analyze(const RunConfig& cfg, TableFormat format, const std::optional<std::filesystem::path>& out_file,
                std::ostream& os);
/// Trains on the synthetic task; writes train_log.csv and best.ckpt under `ckpt_dir`.
int cmd_train(RunConfig cfg, std::optional<std::uint64_t> seed, const std::filesystem::path& ckpt_dir,
              std::ostream& os);
/// Prints `acc=<value>` for the checkpoint on the validation (or training) split.
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, bool train_split, std::ostream& os);
/// One line per block; kNumeric when any block exceeds the tolerance.
int cmd_gradcheck(const RunConfig& cfg, Precision precision, std::optional<double> tolerance, std::uint64_t seed,
                  std::ostream& os);
/// Writes train/val splits as <dir>/{train,val}.{f32,json}.
int cmd_gen_data(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& os);

/// Full command line; maps library exceptions to exit codes and reports them on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lvsr::cli
