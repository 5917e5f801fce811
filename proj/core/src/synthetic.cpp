#include "lvsr/synthetic.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include <json.hpp>

#include "lvsr/errors.hpp"
#include "lvsr/random.hpp"

namespace lvsr {

void SyntheticDatasetSpec::validate() const {
  if (num_classes < 2) throw ConfigError("must be at least 2", "data.num_classes");
  if (samples_per_class == 0) throw ConfigError("must be positive", "data.samples_per_class");
  if (frames == 0) throw ConfigError("must be positive", "data.frames");
  if (height < 8 || width < 8) throw ConfigError("spatial size must be at least 8", "data.height");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("must be finite and >= 0", "data.noise_std");
}

std::span<const float> Dataset::clip(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("dataset index " + std::to_string(i));
  return std::span<const float>(data).subspan(i * clip_size(), clip_size());
}

Tensor<float> Dataset::batch(std::span<const std::size_t> indices) const {
  std::vector<float> v;
  v.reserve(indices.size() * clip_size());
  for (auto i : indices) {
    auto c = clip(i);
    v.insert(v.end(), c.begin(), c.end());
  }
  return Tensor<float>(Shape{indices.size(), channels, frames, height, width}, std::move(v));
}

void Dataset::push_back(std::span<const float> c, std::size_t label) {
  if (c.size() != clip_size()) throw ShapeError("dataset: clip has the wrong size");
  data.insert(data.end(), c.begin(), c.end());
  labels.push_back(label);
}

std::vector<float> synthetic_clip(const SyntheticDatasetSpec& spec, Split split, std::size_t index, std::size_t* label,
                                  double* phase_out) {
  const std::size_t k = index % spec.num_classes;
  Rng rng(derive_seed(derive_seed(spec.seed, static_cast<std::uint64_t>(split) + 1), index));
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double freq = static_cast<double>(k + 1);
  const double w = static_cast<double>(spec.width);
  const double amplitude = 0.3 * w;
  const double sigma = std::max(1.0, w / 16.0);
  const std::size_t plane = spec.height * spec.width;

  std::vector<float> clip(spec.frames * plane);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const double angle = 2.0 * std::numbers::pi * freq * static_cast<double>(t) / static_cast<double>(spec.frames);
    const double cx = 0.5 * (w - 1.0) + amplitude * std::sin(angle + phase);
    for (std::size_t x = 0; x < spec.width; ++x) {
      const double dx = (static_cast<double>(x) - cx) / sigma;
      const float v = static_cast<float>(std::exp(-0.5 * dx * dx));
      for (std::size_t y = 0; y < spec.height; ++y) clip[t * plane + y * spec.width + x] = v;
    }
  }
  if (spec.noise_std > 0.0) {
    for (auto& v : clip) v += static_cast<float>(rng.normal(0.0, spec.noise_std));
  }
  double mean = 0.0;
  for (float v : clip) mean += v;
  mean /= static_cast<double>(clip.size());
  double var = 0.0;
  for (float v : clip) var += (v - mean) * (v - mean);
  const double inv = 1.0 / std::sqrt(var / static_cast<double>(clip.size()) + 1e-12);
  for (auto& v : clip) v = static_cast<float>((v - mean) * inv);

  if (label) *label = k;
  if (phase_out) *phase_out = phase;
  return clip;
}

Dataset generate_synthetic(const SyntheticDatasetSpec& spec, Split split) {
  spec.validate();
  Dataset ds;
  ds.frames = spec.frames;
  ds.height = spec.height;
  ds.width = spec.width;
  ds.num_classes = spec.num_classes;
  const std::size_t per = split == Split::kTrain ? spec.samples_per_class : spec.val_samples_per_class;
  const std::size_t n = per * spec.num_classes;
  ds.data.reserve(n * ds.clip_size());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t label = 0;
    auto c = synthetic_clip(spec, split, i, &label);
    ds.push_back(c, label);
  }
  return ds;
}

void export_dataset(const Dataset& ds, const std::filesystem::path& dir, const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  {
    std::ofstream f(dir / (name + ".f32"), std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + (dir / (name + ".f32")).string());
    std::vector<char> bytes;
    bytes.reserve(ds.data.size() * 4);
    for (float v : ds.data) {
      const auto u = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((u >> (8 * b)) & 0xFF));
    }
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + (dir / (name + ".f32")).string());
  }
  nlohmann::ordered_json j;
  j["format"] = "f32le";
  j["layout"] = "NCTHW";
  j["shape"] = {ds.size(), ds.channels, ds.frames, ds.height, ds.width};
  j["num_classes"] = ds.num_classes;
  j["labels"] = ds.labels;
  std::ofstream f(dir / (name + ".json"), std::ios::trunc);
  if (!f) throw IoError("cannot write " + (dir / (name + ".json")).string());
  f << j.dump(2) << "\n";
  if (!f) throw IoError("write failed: " + (dir / (name + ".json")).string());
}

Dataset import_dataset(const std::filesystem::path& dir, const std::string& name) {
  std::ifstream jf(dir / (name + ".json"));
  if (!jf) throw IoError("cannot open " + (dir / (name + ".json")).string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(jf);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad dataset sidecar: " + std::string(e.what()));
  }
  Dataset ds;
  try {
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 5) throw IoError("dataset sidecar shape must have 5 entries");
    ds.channels = shape[1];
    ds.frames = shape[2];
    ds.height = shape[3];
    ds.width = shape[4];
    ds.num_classes = j.at("num_classes").get<std::size_t>();
    ds.labels = j.at("labels").get<std::vector<std::size_t>>();
    if (ds.labels.size() != shape[0]) throw IoError("dataset sidecar label count does not match shape");
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad dataset sidecar: " + std::string(e.what()));
  }
  std::ifstream bf(dir / (name + ".f32"), std::ios::binary);
  if (!bf) throw IoError("cannot open " + (dir / (name + ".f32")).string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());
  if (bytes.size() != ds.size() * ds.clip_size() * 4) throw IoError("dataset blob size does not match its sidecar");
  ds.data.resize(bytes.size() / 4);
  for (std::size_t i = 0; i < ds.data.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    ds.data[i] = std::bit_cast<float>(u);
  }
  return ds;
}

}  // namespace lvsr
