#include "toatod/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <random>

#include "toatod/error.hpp"

namespace toatod {

namespace {

constexpr char kModelMagic[8] = {'T', 'O', 'A', 'T', 'O', 'D', 'C', 'K'};
constexpr char kAdapterMagic[8] = {'T', 'O', 'A', 'T', 'O', 'D', 'A', 'D'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct Tensor {
  std::string name;
  const ag::Mat* value;
};

void write_container(const std::filesystem::path& path, const char (&magic)[8], nlohmann::json header,
                     const std::vector<Tensor>& tensors) {
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& t : tensors) dir.push_back({{"name", t.name}, {"rows", t.value->rows()}, {"cols", t.value->cols()}});
  header["tensors"] = std::move(dir);
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(magic, 8);
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : tensors) {
    out.write(reinterpret_cast<const char*>(t.value->data()), static_cast<std::streamsize>(t.value->size() * sizeof(double)));
  }
  if (!out) throw ConfigError("failed writing " + path.string());
}

struct Container {
  nlohmann::json header;
  std::map<std::string, ag::Mat> tensors;
};

Container read_container(const std::filesystem::path& path, const char (&magic)[8]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char got[8];
  in.read(got, 8);
  if (!in || std::memcmp(got, magic, 8) != 0) throw ParseError(path.string() + ": not a toatod weight file of the expected kind");
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || version != kCheckpointVersion) throw ParseError(path.string() + ": unsupported version " + std::to_string(version));
  if (len > (1ull << 32)) throw ParseError(path.string() + ": corrupt header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  Container c;
  try {
    c.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad header: " + e.what());
  }
  for (const auto& t : c.header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>(), cols = t.at("cols").get<Eigen::Index>();
    ag::Mat m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw ParseError(path.string() + ": truncated tensor data");
    c.tensors.emplace(t.at("name").get<std::string>(), std::move(m));
  }
  return c;
}

void assign(ag::Parameter& p, const std::string& key, std::map<std::string, ag::Mat>& tensors) {
  auto it = tensors.find(key);
  if (it == tensors.end()) throw ConfigError("weight file is missing tensor " + key);
  if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols()) {
    throw ConfigError("tensor " + key + " has shape " + std::to_string(it->second.rows()) + "x" +
                      std::to_string(it->second.cols()) + ", model expects " + std::to_string(p.value.rows()) + "x" +
                      std::to_string(p.value.cols()));
  }
  p.value = std::move(it->second);
  p.zero_grad();
}

std::string adapter_key(TaskId task, const ag::Parameter& p) { return "adapter." + to_string(task) + "." + p.name; }

nlohmann::json arch_json(const Seq2SeqModel& model) {
  return {{"backbone", to_json(model.config())}, {"adapter", {{"bottleneck_dim", model.adapter_spec().bottleneck_dim}}}};
}

}  // namespace

nlohmann::json to_json(const BackboneConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model},   {"n_layers_enc", c.n_layers_enc},
          {"n_layers_dec", c.n_layers_dec}, {"n_heads", c.n_heads}, {"ff_dim", c.ff_dim}};
}

BackboneConfig backbone_from_json(const nlohmann::json& j) {
  BackboneConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.d_model = j.value("d_model", c.d_model);
  c.n_layers_enc = j.value("n_layers_enc", c.n_layers_enc);
  c.n_layers_dec = j.value("n_layers_dec", c.n_layers_dec);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel& model, const CheckpointMeta& meta) {
  nlohmann::json header = arch_json(model);
  header["vocab"] = meta.vocab.tokens();
  header["intent_labels"] = meta.intent_labels;
  header["step"] = meta.step;
  header["config"] = meta.config;
  header["frozen_backbone"] = model.backbone_frozen();
  std::vector<Tensor> tensors;
  for (const auto* p : model.backbone_parameters()) tensors.push_back({p->name, &p->value});
  nlohmann::json tasks = nlohmann::json::array();
  for (TaskId task : kAllTasks) {
    if (!model.has_adapter(task)) continue;
    tasks.push_back(to_string(task));
    for (const auto* p : model.adapter(task).parameters()) tensors.push_back({adapter_key(task, *p), &p->value});
  }
  header["tasks"] = tasks;
  write_container(path, kModelMagic, std::move(header), tensors);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  Container c = read_container(path, kModelMagic);
  const nlohmann::json& h = c.header;
  const BackboneConfig cfg = backbone_from_json(h.at("backbone"));
  const AdapterSpec spec{h.at("adapter").at("bottleneck_dim").get<int>()};

  std::vector<std::string> tokens = h.at("vocab").get<std::vector<std::string>>();
  const auto& reserved = Vocabulary::reserved_tokens();
  if (tokens.size() < reserved.size() || !std::equal(reserved.begin(), reserved.end(), tokens.begin())) {
    throw ParseError(path.string() + ": vocabulary does not start with the reserved tokens");
  }
  CheckpointMeta meta{Vocabulary(std::vector<std::string>(tokens.begin() + static_cast<long>(reserved.size()), tokens.end())),
                      h.at("intent_labels").get<std::vector<std::string>>(), h.at("step").get<std::int64_t>(),
                      h.value("config", nlohmann::json::object())};
  if (meta.vocab.tokens() != tokens) throw ParseError(path.string() + ": vocabulary is not in canonical order");
  if (static_cast<int>(meta.vocab.size()) != cfg.vocab_size) throw ConfigError(path.string() + ": vocab size mismatch");

  Seq2SeqModel model(cfg, spec, 0);
  for (auto* p : model.backbone_parameters()) assign(*p, p->name, c.tensors);
  std::vector<TaskId> present;
  for (const auto& name : h.at("tasks")) present.push_back(task_from_string(name.get<std::string>()));
  for (TaskId task : kAllTasks) {
    if (std::find(present.begin(), present.end(), task) == present.end()) {
      model.remove_adapter(task);
      continue;
    }
    for (auto* p : model.adapter(task).parameters()) assign(*p, adapter_key(task, *p), c.tensors);
  }
  model.set_frozen(h.value("frozen_backbone", true) ? FreezeMode::backbone : FreezeMode::none);
  return LoadedCheckpoint{std::move(model), std::move(meta)};
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const BackboneConfig& expected,
                                 const AdapterSpec& expected_adapter) {
  LoadedCheckpoint ck = load_checkpoint(path);
  if (!(ck.model.config() == expected) || !(ck.model.adapter_spec() == expected_adapter)) {
    throw ConfigError(path.string() + ": checkpoint architecture " + arch_json(ck.model).dump() +
                      " does not match the configured one");
  }
  return ck;
}

void export_adapter(const std::filesystem::path& path, const Seq2SeqModel& model, TaskId task) {
  const AdapterSet& set = model.adapter(task);
  nlohmann::json header = {{"task", to_string(task)},
                           {"d_model", model.config().d_model},
                           {"bottleneck_dim", model.adapter_spec().bottleneck_dim},
                           {"n_layers_enc", set.encoder.size()},
                           {"n_layers_dec", set.decoder.size()}};
  std::vector<Tensor> tensors;
  for (const auto* p : set.parameters()) tensors.push_back({p->name, &p->value});
  write_container(path, kAdapterMagic, std::move(header), tensors);
}

TaskId import_adapter(const std::filesystem::path& path, Seq2SeqModel& model, std::optional<TaskId> task) {
  Container c = read_container(path, kAdapterMagic);
  const nlohmann::json& h = c.header;
  const int d = h.at("d_model").get<int>(), bn = h.at("bottleneck_dim").get<int>();
  if (d != model.config().d_model || bn != model.adapter_spec().bottleneck_dim ||
      h.at("n_layers_enc").get<int>() != model.config().n_layers_enc ||
      h.at("n_layers_dec").get<int>() != model.config().n_layers_dec) {
    throw ConfigError(path.string() + ": adapter (d_model=" + std::to_string(d) + ", h=" + std::to_string(bn) +
                      ") does not fit model (d_model=" + std::to_string(model.config().d_model) +
                      ", h=" + std::to_string(model.adapter_spec().bottleneck_dim) + ")");
  }
  const TaskId target = task.value_or(task_from_string(h.at("task").get<std::string>()));
  // Build a fresh set with the model's layout, fill it, then swap it in whole.
  AdapterSet set;
  std::mt19937_64 rng(0);
  for (int l = 0; l < model.config().n_layers_enc; ++l) set.encoder.push_back(AdapterLayer::init(d, bn, rng, "enc." + std::to_string(l)));
  for (int l = 0; l < model.config().n_layers_dec; ++l) set.decoder.push_back(AdapterLayer::init(d, bn, rng, "dec." + std::to_string(l)));
  for (auto* p : set.parameters()) assign(*p, p->name, c.tensors);
  model.set_adapter(target, std::move(set));
  return target;
}

}  // namespace toatod
