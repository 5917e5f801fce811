#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "lvsr/errors.hpp"

namespace lvsr::cli {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "lite-vsr");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("lvsr_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_json(const fs::path& dir, const std::string& name, const std::string& text) {
  auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

const std::string kSource = LVSR_SOURCE_DIR;

TEST(Config, UnknownKeyNamesItsPath) {
  try {
    parse_run_config(nlohmann::json::parse(R"({"model": {"ratio": 0.5, "ratoi": 1}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "model.ratoi");
  }
  try {
    parse_run_config(nlohmann::json::parse(R"({"models": [{"name": "a", "spec": {"input": {"frame": 3}}}]})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "models[0].spec.input.frame");
  }
  EXPECT_THROW(parse_run_config(nlohmann::json::parse(R"({"version": 2})")), ConfigError);
  EXPECT_THROW(parse_run_config(nlohmann::json::parse(R"({"train": {"epochs": -1}})")), ConfigError);
  EXPECT_THROW(parse_run_config(nlohmann::json::parse(R"({"model": {"core": "slow"}})")), ConfigError);
}

TEST(Config, DefaultsRoundTripThroughSchema) {
  auto doc = nlohmann::json::parse(default_config().dump());
  doc.erase("models");
  auto cfg = parse_run_config(doc);
  EXPECT_EQ(to_json(cfg.model).dump(), to_json(ModelSpec{}).dump());
  EXPECT_EQ(to_json(cfg.train).dump(), to_json(TrainConfig{}).dump());
}

TEST(Cli, AnalyzeShippedTablesAndDeterminism) {
  auto dir = scratch("analyze");
  for (const char* t : {"table2", "table3", "table4", "table4_kernel", "table5", "table6"}) {
    auto r = run({"analyze", "--config", kSource + "/tables/" + t + ".json"});
    EXPECT_EQ(r.code, 0) << t << r.err;
    EXPECT_EQ(r.out.rfind("| Model | Variant | FLOPs (G) | Params (M) |", 0), 0u) << t;
  }
  auto r5 = run({"analyze", "--config", kSource + "/tables/table5.json"});
  EXPECT_NE(r5.out.find("| ResNet-18 |  | 8.29 |"), std::string::npos) << r5.out;
  const auto csv = (dir / "t5.csv").string();
  ASSERT_EQ(run({"analyze", "--config", kSource + "/tables/table5.json", "--out", csv}).code, 0);
  const auto first = slurp(csv);
  ASSERT_EQ(run({"analyze", "--config", kSource + "/tables/table5.json", "--out", csv}).code, 0);
  EXPECT_EQ(slurp(csv), first);
  EXPECT_EQ(first.rfind("model,variant,params_millions,flops_gigamacs,convention\n", 0), 0u);
  EXPECT_EQ(run({"analyze", "--config", kSource + "/tables/table5.json", "--out", "csv"}).out, first);
}

TEST(Cli, EmptyModelListGivesHeaderOnly) {
  auto dir = scratch("empty");
  auto cfg = write_json(dir, "empty.json", R"({"version": 1, "models": []})");
  auto r = run({"analyze", "--config", cfg.string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "| Model | Variant | FLOPs (G) | Params (M) |\n|---|---|---|---|\n");
}

TEST(Cli, ExitCodes) {
  auto dir = scratch("codes");
  auto bad = write_json(dir, "bad.json", R"({"model": {"widht": 3}})");
  auto r = run({"analyze", "--config", bad.string()});
  EXPECT_EQ(r.code, kConfig);
  EXPECT_NE(r.err.find("model.widht"), std::string::npos) << r.err;
  EXPECT_EQ(run({"analyze", "--config", (dir / "missing.json").string()}).code, kIo);
  auto malformed = write_json(dir, "malformed.json", "{");
  EXPECT_EQ(run({"analyze", "--config", malformed.string()}).code, kConfig);
  EXPECT_EQ(run({"frobnicate"}).code, kConfig);

  write_json(dir, "file", "x");
  auto smoke = kSource + "/configs/smoke.json";
  EXPECT_EQ(run({"train", "--config", smoke, "--ckpt-dir", (dir / "file" / "sub").string()}).code, kIo);
}

TEST(Cli, SmokeTrainEvalAndShapeMismatch) {
  auto dir = scratch("smoke");
  auto smoke = kSource + "/configs/smoke.json";
  auto a = run({"train", "--config", smoke, "--ckpt-dir", (dir / "a").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  auto b = run({"train", "--config", smoke, "--ckpt-dir", (dir / "b").string()});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(slurp(dir / "a" / "train_log.csv"), slurp(dir / "b" / "train_log.csv"));
  EXPECT_EQ(slurp(dir / "a" / "best.ckpt"), slurp(dir / "b" / "best.ckpt"));
  std::size_t ckpts = 0;
  for (auto& e : fs::directory_iterator(dir / "a")) ckpts += e.path().extension() == ".ckpt";
  EXPECT_EQ(ckpts, 1u);

  auto ev = run({"eval", "--config", smoke, "--checkpoint", (dir / "a" / "best.ckpt").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto pos = a.out.find("best_val_acc=");
  ASSERT_NE(pos, std::string::npos);
  const auto best = a.out.substr(pos + 13, a.out.find('\n', pos) - pos - 13);
  EXPECT_EQ(ev.out, "acc=" + best + "\n");

  auto doc = nlohmann::json::parse(slurp(smoke));
  doc["model"]["hidden_width"] = 48;
  auto other = write_json(dir, "other.json", doc.dump());
  auto mismatch = run({"eval", "--config", other.string(), "--checkpoint", (dir / "a" / "best.ckpt").string()});
  EXPECT_EQ(mismatch.code, kShape);
  EXPECT_NE(mismatch.err.find("sequence"), std::string::npos) << mismatch.err;
}

TEST(Cli, GenDataWritesBlobAndSidecar) {
  auto dir = scratch("gen");
  auto r = run({"gen-data", "--config", kSource + "/configs/smoke.json", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"train.f32", "train.json", "val.f32", "val.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  auto meta = nlohmann::json::parse(slurp(dir / "train.json"));
  EXPECT_EQ(meta["labels"].size(), 16u);
}

TEST(Cli, GradcheckReportsEveryBlock) {
  auto r = run({"gradcheck", "--config", kSource + "/configs/gradcheck.json"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("passed=15\ntotal=15\n"), std::string::npos) << r.out;
  auto strict = run({"gradcheck", "--tolerance", "1e-30"});
  EXPECT_EQ(strict.code, kNumeric);
}

TEST(Cli, SchemaListsEverySection) {
  auto r = run({"schema"});
  ASSERT_EQ(r.code, 0);
  auto doc = nlohmann::json::parse(r.out);
  for (const char* k : {"version", "model", "train", "data", "cost", "models"}) EXPECT_TRUE(doc.contains(k)) << k;
}

}  // namespace
}  // namespace lvsr::cli
