#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "lvsr/errors.hpp"

namespace lvsr::cli {

using nlohmann::json;

namespace {

/// Reads keys out of one JSON object and remembers which were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("must be an object", path_);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* raw(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  void get(const std::string& key, std::size_t& out) {
    if (auto* v = raw(key)) out = to_size(*v, at(key));
  }
  void get(const std::string& key, int& out) {
    if (auto* v = raw(key)) {
      if (!v->is_number_integer()) throw ConfigError("must be an integer", at(key));
      out = v->get<int>();
    }
  }
  void get(const std::string& key, double& out) {
    if (auto* v = raw(key)) {
      if (!v->is_number()) throw ConfigError("must be a number", at(key));
      out = v->get<double>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (auto* v = raw(key)) {
      if (!v->is_boolean()) throw ConfigError("must be true or false", at(key));
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (auto* v = raw(key)) {
      if (!v->is_string()) throw ConfigError("must be a string", at(key));
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, std::vector<std::size_t>& out) {
    if (auto* v = raw(key)) {
      if (!v->is_array()) throw ConfigError("must be an array of non-negative integers", at(key));
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) out.push_back(to_size((*v)[i], at(key) + "[" + std::to_string(i) + "]"));
    }
  }
  /// Parses a string key through `parse`, re-tagging its ConfigError with the key path.
  template <typename E, typename F>
  void get_enum(const std::string& key, E& out, F parse) {
    if (!raw(key)) return;
    std::string s;
    get(key, s);
    try {
      out = parse(s);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), at(key));
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError("unknown key", at(it.key()));
    }
  }

 private:
  static std::size_t to_size(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::size_t>(v.get<std::int64_t>());
    throw ConfigError("must be a non-negative integer", path);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

GhostSettings parse_ghost(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "literal") return GhostSettings{};
    if (s == "calibrated-frontend") return calibrated_frontend_ghost();
    if (s == "calibrated-tcn") return calibrated_tcn_ghost();
    throw ConfigError("expected literal, calibrated-frontend, calibrated-tcn or an object", path);
  }
  Section s(j, path);
  GhostSettings g;
  if (auto* b = s.raw("base")) g = parse_ghost(*b, s.at("base"));
  s.get("ratio", g.ratio);
  s.get_enum("primary", g.primary, parse_primary_kernel);
  s.get("cheap_kernel", g.cheap_kernel);
  s.get("keep_strided", g.keep_strided);
  s.get_enum("dfc_entry", g.dfc_entry, parse_primary_kernel);
  s.finish();
  return g;
}

nlohmann::ordered_json ghost_json(const GhostSettings& g) {
  return {{"ratio", g.ratio},
          {"primary", to_string(g.primary)},
          {"cheap_kernel", g.cheap_kernel},
          {"keep_strided", g.keep_strided},
          {"dfc_entry", to_string(g.dfc_entry)}};
}

TrainConfig parse_train(const json& j) {
  Section s(j, "train");
  TrainConfig t;
  s.get("lr_init", t.lr_init);
  s.get("momentum", t.momentum);
  s.get("weight_decay", t.weight_decay);
  s.get("epochs", t.epochs);
  s.get("batch_size", t.batch_size);
  s.get("use_mixup", t.use_mixup);
  s.get("mixup_alpha", t.mixup_alpha);
  if (auto* v = s.raw("mixup_lambda")) {
    if (!v->is_null()) {
      if (!v->is_number()) throw ConfigError("must be a number or null", "train.mixup_lambda");
      t.mixup_lambda = v->get<double>();
    }
  }
  s.get("variable_length", t.variable_length);
  s.get("var_len_min_keep", t.var_len_min_keep);
  s.get("crop_flip", t.crop_flip);
  s.get("crop_jitter", t.crop_jitter);
  s.get("seed", t.seed);
  s.finish();
  t.validate();
  return t;
}

SyntheticDatasetSpec parse_data(const json& j) {
  Section s(j, "data");
  SyntheticDatasetSpec d;
  s.get("num_classes", d.num_classes);
  s.get("samples_per_class", d.samples_per_class);
  s.get("val_samples_per_class", d.val_samples_per_class);
  s.get("frames", d.frames);
  s.get("height", d.height);
  s.get("width", d.width);
  s.get("noise_std", d.noise_std);
  s.get("seed", d.seed);
  s.finish();
  d.validate();
  return d;
}

CountingConvention parse_cost(const json& j) {
  Section s(j, "cost");
  CountingConvention c;
  s.get("macs_count_bias", c.macs_count_bias);
  s.get("count_bn_affine_params", c.count_bn_affine_params);
  s.get("count_elementwise_macs", c.count_elementwise_macs);
  s.get("padded_causal_outputs", c.padded_causal_outputs);
  s.get("include_head", c.include_head);
  s.finish();
  return c;
}

}  // namespace

ModelSpec parse_model(const json& j, const std::string& path, ModelSpec m) {
  Section s(j, path);
  s.get_enum("frontend", m.frontend_variant, parse_frontend);
  s.get("frontend_width", m.frontend_width);
  if (auto* g = s.raw("frontend_ghost")) m.frontend_ghost = parse_ghost(*g, s.at("frontend_ghost"));
  s.get_enum("sequence", m.seq_model, parse_seq_model);
  s.get("seq_ghost", m.seq_ghost);
  if (auto* g = s.raw("seq_ghost_settings")) m.seq_ghost_settings = parse_ghost(*g, s.at("seq_ghost_settings"));
  s.get_enum("core", m.partial_core, parse_core);
  s.get("ratio", m.ratio);
  s.get("kernel", m.kernel);
  s.get("dilations", m.dilations);
  s.get("branch_kernels", m.branch_kernels);
  s.get("hidden_width", m.hidden_width);
  s.get("dense_growth", m.dense_growth);
  s.get("dense_layers", m.dense_layers);
  s.get("num_blocks", m.num_blocks);
  s.get("dropout", m.dropout);
  s.get("mlp_expand", m.mlp_expand);
  s.get("shuffle_final_activation", m.shuffle_final_activation);
  s.get_enum("activation", m.activation, parse_activation);
  s.get("num_classes", m.num_classes);
  if (auto* in = s.raw("input")) {
    Section i(*in, s.at("input"));
    i.get("frames", m.input.frames);
    i.get("height", m.input.height);
    i.get("width", m.input.width);
    i.get("channels", m.input.channels);
    i.finish();
  }
  s.finish();
  return m;
}

RunConfig parse_run_config(const json& doc) {
  Section s(doc, "");
  RunConfig cfg;
  if (auto* v = s.raw("version")) {
    if (!v->is_number_integer() || v->get<std::int64_t>() != kConfigVersion) {
      throw ConfigError("unsupported config version (expected " + std::to_string(kConfigVersion) + ")", "version");
    }
  }
  if (auto* v = s.raw("description"); v && !v->is_string()) throw ConfigError("must be a string", "description");
  const json* model_json = s.raw("model");
  if (model_json) cfg.model = parse_model(*model_json, "model");
  cfg.model.validate();
  if (auto* v = s.raw("train")) cfg.train = parse_train(*v);
  if (auto* v = s.raw("data")) cfg.data = parse_data(*v);
  if (auto* v = s.raw("cost")) cfg.cost = parse_cost(*v);
  if (auto* v = s.raw("models")) {
    if (!v->is_array()) throw ConfigError("must be an array", "models");
    cfg.has_models = true;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string p = "models[" + std::to_string(i) + "]";
      Section e((*v)[i], p);
      TableEntry t;
      e.get("name", t.model);
      e.get("variant", t.variant);
      e.get("component", t.component);
      e.get("baseline", t.baseline);
      t.spec = cfg.model;
      if (auto* spec = e.raw("spec")) t.spec = parse_model(*spec, e.at("spec"), cfg.model);
      e.finish();
      if (t.model.empty()) throw ConfigError("is required", e.at("name"));
      static const std::set<std::string> components{"stem", "trunk", "frontend", "sequence", "total"};
      if (!components.count(t.component)) {
        throw ConfigError("expected stem, trunk, frontend, sequence or total", e.at("component"));
      }
      try {
        t.spec.validate();
      } catch (const ConfigError& err) {
        throw ConfigError(err.what(), p + ".spec");
      }
      cfg.models.push_back(std::move(t));
    }
  }
  s.finish();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what(), path.string());
  }
  return parse_run_config(doc);
}

nlohmann::ordered_json to_json(const ModelSpec& m) {
  return {{"frontend", to_string(m.frontend_variant)},
          {"frontend_width", m.frontend_width},
          {"frontend_ghost", ghost_json(m.frontend_ghost)},
          {"sequence", to_string(m.seq_model)},
          {"seq_ghost", m.seq_ghost},
          {"seq_ghost_settings", ghost_json(m.seq_ghost_settings)},
          {"core", to_string(m.partial_core)},
          {"ratio", m.ratio},
          {"kernel", m.kernel},
          {"dilations", m.dilations},
          {"branch_kernels", m.branch_kernels},
          {"hidden_width", m.hidden_width},
          {"dense_growth", m.dense_growth},
          {"dense_layers", m.dense_layers},
          {"num_blocks", m.num_blocks},
          {"dropout", m.dropout},
          {"mlp_expand", m.mlp_expand},
          {"shuffle_final_activation", m.shuffle_final_activation},
          {"activation", to_string(m.activation)},
          {"num_classes", m.num_classes},
          {"input",
           {{"frames", m.input.frames},
            {"height", m.input.height},
            {"width", m.input.width},
            {"channels", m.input.channels}}}};
}

nlohmann::ordered_json to_json(const TrainConfig& t) {
  return {{"lr_init", t.lr_init},
          {"momentum", t.momentum},
          {"weight_decay", t.weight_decay},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"use_mixup", t.use_mixup},
          {"mixup_alpha", t.mixup_alpha},
          {"mixup_lambda", t.mixup_lambda ? nlohmann::ordered_json(*t.mixup_lambda) : nullptr},
          {"variable_length", t.variable_length},
          {"var_len_min_keep", t.var_len_min_keep},
          {"crop_flip", t.crop_flip},
          {"crop_jitter", t.crop_jitter},
          {"seed", t.seed}};
}

nlohmann::ordered_json to_json(const SyntheticDatasetSpec& d) {
  return {{"num_classes", d.num_classes},
          {"samples_per_class", d.samples_per_class},
          {"val_samples_per_class", d.val_samples_per_class},
          {"frames", d.frames},
          {"height", d.height},
          {"width", d.width},
          {"noise_std", d.noise_std},
          {"seed", d.seed}};
}

nlohmann::ordered_json to_json(const CountingConvention& c) {
  return {{"macs_count_bias", c.macs_count_bias},
          {"count_bn_affine_params", c.count_bn_affine_params},
          {"count_elementwise_macs", c.count_elementwise_macs},
          {"padded_causal_outputs", c.padded_causal_outputs},
          {"include_head", c.include_head}};
}

nlohmann::ordered_json default_config() {
  nlohmann::ordered_json row{{"name", "<required>"}, {"variant", ""}, {"component", "total"}, {"baseline", ""},
                             {"spec", "<model section overrides>"}};
  return {{"version", kConfigVersion},
          {"description", ""},
          {"model", to_json(ModelSpec{})},
          {"train", to_json(TrainConfig{})},
          {"data", to_json(SyntheticDatasetSpec{})},
          {"cost", to_json(CountingConvention{})},
          {"models", nlohmann::ordered_json::array({row})}};
}

}  // namespace lvsr::cli
