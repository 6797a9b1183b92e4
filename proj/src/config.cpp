#include "toatod/config.hpp"

#include <cstdio>
#include <fstream>

#include "toatod/checkpoint.hpp"
#include "toatod/error.hpp"

namespace toatod {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

BackboneConfig ExperimentConfig::resolved_backbone(std::size_t vocab_size) const {
  BackboneConfig b = backbone;
  if (b.vocab_size == 0) b.vocab_size = static_cast<int>(vocab_size);
  return b;
}

AdapterSpec ExperimentConfig::resolved_adapter() const {
  return adapter.bottleneck_dim == 0 ? AdapterSpec::defaults_for(backbone.d_model) : adapter;
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

json config_to_json(const ExperimentConfig& c) {
  json tasks = json::array();
  for (TaskId t : c.tasks) tasks.push_back(to_string(t));
  const RLConfig& r = c.rl;
  return {{"backbone", to_json(c.backbone)},
          {"adapter", {{"bottleneck_dim", c.adapter.bottleneck_dim}}},
          {"rl",
           {{"alpha", r.alpha ? json(*r.alpha) : json(nullptr)},
            {"beta", r.beta},
            {"lr_sl", r.lr_sl},
            {"lr_rl_dst", r.lr_rl_dst},
            {"lr_rl_nlg", r.lr_rl_nlg},
            {"batch_sl", r.batch_sl},
            {"batch_dst", r.batch_dst},
            {"batch_nlg", r.batch_nlg},
            {"epochs_sl", r.epochs_sl},
            {"epochs_rl_dst", r.epochs_rl_dst},
            {"epochs_rl_nlg", r.epochs_rl_nlg},
            {"seed", r.seed},
            {"max_decode_len", r.max_decode_len},
            {"length_normalize", r.length_normalize},
            {"rollout", r.rollout == DecodeMode::greedy ? "greedy" : "sample"}}},
          {"data", {{"train", c.train_corpus}, {"eval", c.eval_corpus}}},
          {"tasks", tasks},
          {"output_dir", c.output_dir},
          {"eval_mode", to_string(c.eval_mode)},
          {"model_seed", c.model_seed}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  reject_unknown(j, {"backbone", "adapter", "rl", "data", "tasks", "output_dir", "eval_mode", "model_seed"}, "");
  if (j.contains("backbone")) {
    const json& b = j.at("backbone");
    reject_unknown(b, {"vocab_size", "d_model", "n_layers_enc", "n_layers_dec", "n_heads", "ff_dim"}, "backbone");
    read(b, "vocab_size", c.backbone.vocab_size, "backbone");
    read(b, "d_model", c.backbone.d_model, "backbone");
    read(b, "n_layers_enc", c.backbone.n_layers_enc, "backbone");
    read(b, "n_layers_dec", c.backbone.n_layers_dec, "backbone");
    read(b, "n_heads", c.backbone.n_heads, "backbone");
    read(b, "ff_dim", c.backbone.ff_dim, "backbone");
  }
  if (j.contains("adapter")) {
    reject_unknown(j.at("adapter"), {"bottleneck_dim"}, "adapter");
    read(j.at("adapter"), "bottleneck_dim", c.adapter.bottleneck_dim, "adapter");
  }
  if (j.contains("rl")) {
    const json& r = j.at("rl");
    reject_unknown(r,
                   {"alpha", "beta", "lr_sl", "lr_rl_dst", "lr_rl_nlg", "batch_sl", "batch_dst", "batch_nlg",
                    "epochs_sl", "epochs_rl_dst", "epochs_rl_nlg", "seed", "max_decode_len", "length_normalize",
                    "rollout"},
                   "rl");
    if (r.contains("alpha") && !r.at("alpha").is_null()) {
      double a = 0;
      read(r, "alpha", a, "rl");
      c.rl.alpha = a;
    }
    read(r, "beta", c.rl.beta, "rl");
    read(r, "lr_sl", c.rl.lr_sl, "rl");
    read(r, "lr_rl_dst", c.rl.lr_rl_dst, "rl");
    read(r, "lr_rl_nlg", c.rl.lr_rl_nlg, "rl");
    read(r, "batch_sl", c.rl.batch_sl, "rl");
    read(r, "batch_dst", c.rl.batch_dst, "rl");
    read(r, "batch_nlg", c.rl.batch_nlg, "rl");
    read(r, "epochs_sl", c.rl.epochs_sl, "rl");
    read(r, "epochs_rl_dst", c.rl.epochs_rl_dst, "rl");
    read(r, "epochs_rl_nlg", c.rl.epochs_rl_nlg, "rl");
    read(r, "seed", c.rl.seed, "rl");
    read(r, "max_decode_len", c.rl.max_decode_len, "rl");
    read(r, "length_normalize", c.rl.length_normalize, "rl");
    std::string rollout = "greedy";
    read(r, "rollout", rollout, "rl");
    if (rollout == "greedy") c.rl.rollout = DecodeMode::greedy;
    else if (rollout == "sample") c.rl.rollout = DecodeMode::sample;
    else throw ConfigError("rl.rollout must be 'greedy' or 'sample'");
  }
  if (j.contains("data")) {
    reject_unknown(j.at("data"), {"train", "eval"}, "data");
    read(j.at("data"), "train", c.train_corpus, "data");
    read(j.at("data"), "eval", c.eval_corpus, "data");
  }
  if (j.contains("tasks")) {
    std::vector<std::string> names;
    read(j, "tasks", names, "");
    c.tasks.clear();
    try {
      for (const auto& n : names) c.tasks.push_back(task_from_string(n));
    } catch (const RoutingError& e) {
      throw ConfigError(e.what());
    }
  }
  read(j, "output_dir", c.output_dir, "");
  if (j.contains("eval_mode")) {
    std::string m;
    read(j, "eval_mode", m, "");
    c.eval_mode = pipeline_mode_from_string(m);
  }
  read(j, "model_seed", c.model_seed, "");
  validate_config(c, false);
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  json doc = config_to_json(default_config());
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file " + file->string());
    json from_file;
    try {
      from_file = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(file->string() + ": " + e.what());
    }
    if (!from_file.is_object()) throw ConfigError(file->string() + ": config must be a JSON object");
    doc.merge_patch(from_file);
    // merge_patch drops nulls; an explicit null alpha means "per-task default".
    if (from_file.contains("rl") && from_file["rl"].contains("alpha") && from_file["rl"]["alpha"].is_null()) {
      doc["rl"]["alpha"] = nullptr;
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

void validate_config(const ExperimentConfig& c, bool check_paths) {
  BackboneConfig b = c.backbone;
  if (b.vocab_size == 0) b.vocab_size = 1;
  b.validate();
  if (c.adapter.bottleneck_dim != 0) c.adapter.validate(c.backbone.d_model);
  c.rl.validate();
  if (c.tasks.empty()) throw ConfigError("config selects no tasks");
  if (check_paths) {
    if (c.train_corpus.empty()) throw ConfigError("data.train is not set");
    for (const auto& p : {c.train_corpus, c.eval_corpus}) {
      if (!p.empty() && !std::filesystem::exists(p)) throw ConfigError("corpus file does not exist: " + p);
    }
  }
}

std::string run_stamp(const std::string& cmd, const std::string& task, const std::string& stage, const json& config) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%08llx", static_cast<unsigned long long>(fnv1a(config.dump()) & 0xffffffffull));
  return cmd + "-" + task + "-" + stage + "-" + hex;
}

}  // namespace toatod
