#include "commands.hpp"

#include <cstdio>
#include <fstream>

#include "CLI11.hpp"
#include "lvsr/checkpoint.hpp"
#include "lvsr/errors.hpp"
#include "lvsr/model.hpp"
#include "lvsr/synthetic.hpp"

namespace lvsr::cli {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

/// The model must see the clips the dataset produces.
void check_compatible(const ModelSpec& m, const SyntheticDatasetSpec& d) {
  if (m.num_classes != d.num_classes) {
    throw ConfigError("must equal data.num_classes (" + std::to_string(d.num_classes) + ")", "model.num_classes");
  }
  const InputSpec expect{d.frames, d.height, d.width, 1};
  if (!(m.input == expect)) throw ConfigError("must match data.frames/height/width with 1 channel", "model.input");
}

std::uint64_t model_seed(const TrainConfig& t) { return derive_seed(t.seed, 0x6d6f64656cULL); }

}  // namespace

int cmd_analyze(const RunConfig& cfg, TableFormat format, const std::optional<std::filesystem::path>& out_file,
                std::ostream& os) {
  std::vector<TableEntry> entries = cfg.models;
  if (!cfg.has_models) entries.push_back({"model", "", "total", cfg.model, ""});
  const auto rows = compute_table(entries, cfg.cost);
  const std::string text = format == TableFormat::kCsv ? to_csv(rows) : to_markdown(rows);
  if (out_file) {
    write_file(*out_file, text);
    os << "rows=" << rows.size() << "\n"
       << "convention=" << cfg.cost.tag() << "\n"
       << "out=" << out_file->string() << "\n";
  } else {
    os << text;
  }
  return kOk;
}

int cmd_train(RunConfig cfg, std::optional<std::uint64_t> seed, const std::filesystem::path& ckpt_dir,
              std::ostream& os) {
  if (seed) cfg.train.seed = *seed;
  check_compatible(cfg.model, cfg.data);
  const auto train_set = generate_synthetic(cfg.data, Split::kTrain);
  const auto val_set = generate_synthetic(cfg.data, Split::kVal);
  VSRModel<float> model(cfg.model, model_seed(cfg.train));

  TrainHooks hooks;
  hooks.checkpoint_dir = ckpt_dir;
  hooks.on_epoch = [&](const EpochLog& e) {
    os << "epoch=" << e.epoch << " lr=" << fmt(e.lr) << " train_loss=" << fmt(e.train_loss)
       << " val_acc=" << fmt(e.val_acc) << "\n";
    os.flush();
  };
  const auto result = train(model, train_set, val_set, cfg.train, hooks);
  write_file(ckpt_dir / "train_log.csv", format_log_csv(result.log));
  os << "final_train_acc=" << fmt(evaluate(model, train_set)) << "\n"
     << "best_val_acc=" << fmt(result.best_val_acc) << "\n"
     << "best_epoch=" << result.best_epoch << "\n"
     << "checkpoint=" << (ckpt_dir / "best.ckpt").string() << "\n"
     << "log=" << (ckpt_dir / "train_log.csv").string() << "\n";
  return kOk;
}

int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, bool train_split, std::ostream& os) {
  check_compatible(cfg.model, cfg.data);
  VSRModel<float> model(cfg.model, model_seed(cfg.train));
  load_checkpoint(checkpoint, model.registry());
  const auto ds = generate_synthetic(cfg.data, train_split ? Split::kTrain : Split::kVal);
  os << "acc=" << fmt(evaluate(model, ds)) << "\n";
  return kOk;
}

int cmd_gradcheck(const RunConfig& cfg, Precision precision, std::optional<double> tolerance, std::uint64_t seed,
                  std::ostream& os) {
  BlockSuiteOptions opts;
  opts.precision = precision;
  opts.tolerance = tolerance.value_or(precision == Precision::kHigh ? 1e-4 : 1e-2);
  opts.seed = seed;
  opts.ratio = cfg.model.ratio;
  opts.kernel = cfg.model.kernel;
  opts.activation = cfg.model.activation;
  std::size_t passed = 0;
  const auto results = run_block_gradchecks(opts);
  for (const auto& r : results) {
    char err[32];
    std::snprintf(err, sizeof err, "%.3e", r.max_error);
    os << "block=" << r.name << " max_rel_error=" << err << " worst=" << r.worst_tensor
       << " coords=" << r.coordinates << " status=" << (r.passed ? "pass" : "fail") << "\n";
    passed += r.passed ? 1 : 0;
  }
  os << "precision=" << to_string(precision) << "\n"
     << "tolerance=" << fmt(opts.tolerance) << "\n"
     << "passed=" << passed << "\n"
     << "total=" << results.size() << "\n";
  return passed == results.size() ? kOk : kNumeric;
}

int cmd_gen_data(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& os) {
  for (auto [split, name] : {std::pair{Split::kTrain, "train"}, std::pair{Split::kVal, "val"}}) {
    const auto ds = generate_synthetic(cfg.data, split);
    export_dataset(ds, dir, name);
    os << name << "=" << (dir / (std::string(name) + ".f32")).string() << " samples=" << ds.size() << "\n";
  }
  return kOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lightweight visual speech recognition blocks: cost analysis, training and gradient checks",
               "lite-vsr"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_opt;
  std::string format_opt;
  std::string ckpt_dir = "checkpoints";
  std::string checkpoint;
  std::string split = "val";
  std::string precision = "high";
  std::uint64_t seed = 0;
  double tolerance = 0.0;

  auto* analyze = app.add_subcommand("analyze", "Parameter and MAC tables for the configured models");
  analyze->add_option("--config", config_path, "Run config (JSON)")->required();
  analyze->add_option("--out", out_opt, "md or csv for stdout, or an output file (.csv selects CSV)");
  analyze->add_option("--format", format_opt, "Table format")->check(CLI::IsMember({"md", "csv"}));

  auto* train_cmd = app.add_subcommand("train", "Train on the synthetic task");
  train_cmd->add_option("--config", config_path, "Run config (JSON)")->required();
  auto* seed_opt = train_cmd->add_option("--seed", seed, "Overrides train.seed");
  train_cmd->add_option("--ckpt-dir", ckpt_dir, "Directory for best.ckpt and train_log.csv");

  auto* eval_cmd = app.add_subcommand("eval", "Top-1 accuracy of a checkpoint");
  eval_cmd->add_option("--config", config_path, "Run config (JSON)")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--split", split, "Dataset split")->check(CLI::IsMember({"train", "val"}));

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every block");
  grad_cmd->add_option("--config", config_path, "Run config (JSON); block options come from `model`");
  auto* tol_opt = grad_cmd->add_option("--tolerance", tolerance, "Relative error bound (1e-4 high, 1e-2 standard)");
  grad_cmd->add_option("--precision", precision, "Arithmetic precision")->check(CLI::IsMember({"standard", "high"}));
  grad_cmd->add_option("--seed", seed, "Shape and weight seed");

  auto* gen_cmd = app.add_subcommand("gen-data", "Export the synthetic dataset");
  gen_cmd->add_option("--config", config_path, "Run config (JSON)")->required();
  gen_cmd->add_option("--out", out_opt, "Output directory")->required();

  app.add_subcommand("schema", "Print every config section with its defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  }

  try {
    auto load = [&] { return config_path.empty() ? RunConfig{} : load_run_config(config_path); };
    if (analyze->parsed()) {
      TableFormat fmt_kind = TableFormat::kMarkdown;
      std::optional<std::filesystem::path> file;
      if (out_opt == "csv" || out_opt == "md") {
        format_opt = format_opt.empty() ? out_opt : format_opt;
      } else if (!out_opt.empty()) {
        file = out_opt;
        if (format_opt.empty()) format_opt = file->extension() == ".csv" ? "csv" : "md";
      }
      if (format_opt == "csv") fmt_kind = TableFormat::kCsv;
      return cmd_analyze(load(), fmt_kind, file, out);
    }
    if (train_cmd->parsed()) {
      std::optional<std::uint64_t> s;
      if (*seed_opt) s = seed;
      return cmd_train(load(), s, ckpt_dir, out);
    }
    if (eval_cmd->parsed()) return cmd_eval(load(), checkpoint, split == "train", out);
    if (grad_cmd->parsed()) {
      std::optional<double> tol;
      if (*tol_opt) tol = tolerance;
      return cmd_gradcheck(load(), parse_precision(precision), tol, seed, out);
    }
    if (gen_cmd->parsed()) return cmd_gen_data(load(), out_opt, out);
    out << default_config().dump(2) << "\n";
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kShape;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace lvsr::cli
