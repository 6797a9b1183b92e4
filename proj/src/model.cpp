#include "toatod/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "toatod/error.hpp"

namespace toatod {

namespace {

constexpr int kPositionTableRows = 512;

ag::Mat sinusoidal(int rows, int d) {
  ag::Mat pe(rows, d);
  for (int p = 0; p < rows; ++p) {
    for (int i = 0; i < d; ++i) {
      const double angle = p / std::pow(10000.0, 2.0 * (i / 2) / d);
      pe(p, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

ag::Mat random_normal(int rows, int cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  ag::Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

Linear make_linear(int in, int out, std::mt19937_64& rng, const std::string& name) {
  return Linear{ag::Parameter(name + ".w", random_normal(in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng)),
                ag::Parameter(name + ".b", ag::Mat::Zero(1, out))};
}

LayerNormParams make_ln(int d, const std::string& name) {
  return LayerNormParams{ag::Parameter(name + ".gamma", ag::Mat::Ones(1, d)),
                         ag::Parameter(name + ".beta", ag::Mat::Zero(1, d))};
}

AttentionParams make_attention(int d, std::mt19937_64& rng, const std::string& name) {
  return AttentionParams{make_linear(d, d, rng, name + ".q"), make_linear(d, d, rng, name + ".k"),
                         make_linear(d, d, rng, name + ".v"), make_linear(d, d, rng, name + ".o")};
}

FeedForwardParams make_ff(int d, int ff, std::mt19937_64& rng, const std::string& name) {
  return FeedForwardParams{make_linear(d, ff, rng, name + ".in"), make_linear(ff, d, rng, name + ".out")};
}

void append(std::vector<ag::Parameter*>& out, Linear& l) {
  out.push_back(&l.w);
  out.push_back(&l.b);
}
void append(std::vector<ag::Parameter*>& out, LayerNormParams& ln) {
  out.push_back(&ln.gamma);
  out.push_back(&ln.beta);
}
void append(std::vector<ag::Parameter*>& out, AttentionParams& a) {
  for (Linear* l : {&a.q, &a.k, &a.v, &a.o}) append(out, *l);
}
void append(std::vector<ag::Parameter*>& out, FeedForwardParams& f) {
  append(out, f.in);
  append(out, f.out);
}

std::size_t total_size(const std::vector<const ag::Parameter*>& ps) {
  std::size_t n = 0;
  for (const auto* p : ps) n += p->size();
  return n;
}

// Task adapters draw from their own stream so they do not depend on which
// other tasks exist.
std::uint64_t adapter_seed(std::uint64_t seed, TaskId task) {
  return seed * 0x9E3779B97F4A7C15ull + 0x632BE59BD9B4E019ull * (static_cast<std::uint64_t>(task) + 1);
}

}  // namespace

std::string to_string(TaskId task) {
  switch (task) {
    case TaskId::NLU: return "nlu";
    case TaskId::DST: return "dst";
    case TaskId::NLG: return "nlg";
  }
  return "?";
}

TaskId task_from_string(const std::string& name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "nlu") return TaskId::NLU;
  if (lower == "dst") return TaskId::DST;
  if (lower == "nlg") return TaskId::NLG;
  throw RoutingError("unknown task '" + name + "' (expected nlu, dst or nlg)");
}

void BackboneConfig::validate() const {
  if (vocab_size < 1 || d_model < 1 || n_layers_enc < 1 || n_layers_dec < 1 || n_heads < 1 || ff_dim < 1) {
    throw ConfigError("backbone config: all sizes must be >= 1");
  }
  if (d_model % n_heads != 0) throw ConfigError("backbone config: d_model must be divisible by n_heads");
}

double Generation::total_log_prob() const {
  double s = 0.0;
  for (double lp : log_probs) s += lp;
  return s;
}

std::vector<ag::Parameter*> AdapterSet::parameters() {
  std::vector<ag::Parameter*> out;
  for (auto* layers : {&encoder, &decoder}) {
    for (auto& l : *layers) {
      for (auto* p : l.parameters()) out.push_back(p);
    }
  }
  return out;
}

std::vector<const ag::Parameter*> AdapterSet::parameters() const {
  std::vector<const ag::Parameter*> out;
  for (const auto* layers : {&encoder, &decoder}) {
    for (const auto& l : *layers) {
      for (const auto* p : l.parameters()) out.push_back(p);
    }
  }
  return out;
}

Seq2SeqModel::Seq2SeqModel(const BackboneConfig& config, const AdapterSpec& adapter, std::uint64_t seed)
    : config_(config), adapter_spec_(adapter) {
  config_.validate();
  adapter_spec_.validate(config_.d_model);
  const int d = config_.d_model;
  std::mt19937_64 rng(seed);
  embedding_ = ag::Parameter("embedding", random_normal(config_.vocab_size, d, 1.0, rng));
  for (int l = 0; l < config_.n_layers_enc; ++l) {
    const std::string p = "enc." + std::to_string(l);
    encoder_.push_back(EncoderLayer{make_ln(d, p + ".ln_attn"), make_ln(d, p + ".ln_ff"),
                                    make_attention(d, rng, p + ".attn"), make_ff(d, config_.ff_dim, rng, p + ".ff")});
  }
  for (int l = 0; l < config_.n_layers_dec; ++l) {
    const std::string p = "dec." + std::to_string(l);
    decoder_.push_back(DecoderLayer{make_ln(d, p + ".ln_self"), make_ln(d, p + ".ln_cross"), make_ln(d, p + ".ln_ff"),
                                    make_attention(d, rng, p + ".self"), make_attention(d, rng, p + ".cross"),
                                    make_ff(d, config_.ff_dim, rng, p + ".ff")});
  }
  enc_final_ = make_ln(d, "enc.final");
  dec_final_ = make_ln(d, "dec.final");
  output_ = ag::Parameter("output", random_normal(d, config_.vocab_size, 1.0 / std::sqrt(static_cast<double>(d)), rng));

  for (TaskId task : kAllTasks) {
    std::mt19937_64 arng(adapter_seed(seed, task));
    AdapterSet set;
    for (int l = 0; l < config_.n_layers_enc; ++l) {
      set.encoder.push_back(AdapterLayer::init(d, adapter_spec_.bottleneck_dim, arng, "enc." + std::to_string(l)));
    }
    for (int l = 0; l < config_.n_layers_dec; ++l) {
      set.decoder.push_back(AdapterLayer::init(d, adapter_spec_.bottleneck_dim, arng, "dec." + std::to_string(l)));
    }
    adapters_.emplace(task, std::move(set));
  }
  positions_ = sinusoidal(kPositionTableRows, d);
}

AdapterSet& Seq2SeqModel::route(TaskId task) {
  auto it = adapters_.find(task);
  if (it == adapters_.end()) throw RoutingError("no adapter registered for task " + to_string(task));
  return it->second;
}

AdapterSet& Seq2SeqModel::adapter(TaskId task) { return route(task); }

const AdapterSet& Seq2SeqModel::adapter(TaskId task) const {
  auto it = adapters_.find(task);
  if (it == adapters_.end()) throw RoutingError("no adapter registered for task " + to_string(task));
  return it->second;
}

void Seq2SeqModel::set_adapter(TaskId task, AdapterSet adapters) {
  const auto check = [&](const std::vector<AdapterLayer>& layers, int expected) {
    if (static_cast<int>(layers.size()) != expected) throw ConfigError("adapter layer count does not match model");
    for (const auto& l : layers) {
      if (l.d_model() != config_.d_model || l.bottleneck() != adapter_spec_.bottleneck_dim) {
        throw ConfigError("adapter shape (d_model=" + std::to_string(l.d_model()) + ", h=" +
                          std::to_string(l.bottleneck()) + ") does not match model (d_model=" +
                          std::to_string(config_.d_model) + ", h=" + std::to_string(adapter_spec_.bottleneck_dim) +
                          ")");
      }
    }
  };
  check(adapters.encoder, config_.n_layers_enc);
  check(adapters.decoder, config_.n_layers_dec);
  adapters_[task] = std::move(adapters);
}

ag::Var Seq2SeqModel::linear(ag::Graph& g, ag::Var x, Linear& l) {
  return g.add_row(g.matmul(x, g.param(l.w, backbone_trainable_)), g.param(l.b, backbone_trainable_));
}

ag::Var Seq2SeqModel::norm(ag::Graph& g, ag::Var x, LayerNormParams& ln) {
  return g.layer_norm(x, g.param(ln.gamma, backbone_trainable_), g.param(ln.beta, backbone_trainable_));
}

ag::Var Seq2SeqModel::mha(ag::Graph& g, ag::Var query_in, ag::Var kv_in, AttentionParams& p, bool causal) {
  ag::Var q = linear(g, query_in, p.q);
  ag::Var k = linear(g, kv_in, p.k);
  ag::Var v = linear(g, kv_in, p.v);
  return linear(g, g.attention(q, k, v, config_.n_heads, causal), p.o);
}

ag::Var Seq2SeqModel::ffn(ag::Graph& g, ag::Var x, FeedForwardParams& p) {
  return linear(g, g.relu(linear(g, x, p.in)), p.out);
}

ag::Var Seq2SeqModel::embed(ag::Graph& g, std::span<const TokenId> ids) {
  const auto n = static_cast<int>(ids.size());
  ag::Mat pos = n <= positions_.rows() ? ag::Mat(positions_.topRows(n)) : sinusoidal(n, config_.d_model);
  return g.add(g.embedding(g.param(embedding_, backbone_trainable_), ids), g.constant(std::move(pos)));
}

ag::Var Seq2SeqModel::encode(ag::Graph& g, std::span<const TokenId> input, AdapterSet& adapters) {
  ag::Var x = embed(g, input);
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    EncoderLayer& layer = encoder_[l];
    ag::Var a = norm(g, x, layer.ln_attn);
    x = g.add(x, mha(g, a, a, layer.self_attn, false));
    x = g.add(x, ffn(g, norm(g, x, layer.ln_ff), layer.ff));
    x = adapter_forward(g, x, adapters.encoder[l], true);
  }
  return norm(g, x, enc_final_);
}

ag::Var Seq2SeqModel::decode(ag::Graph& g, ag::Var memory, std::span<const TokenId> prefix, AdapterSet& adapters) {
  ag::Var x = embed(g, prefix);
  for (std::size_t l = 0; l < decoder_.size(); ++l) {
    DecoderLayer& layer = decoder_[l];
    ag::Var a = norm(g, x, layer.ln_self);
    x = g.add(x, mha(g, a, a, layer.self_attn, true));
    x = g.add(x, mha(g, norm(g, x, layer.ln_cross), memory, layer.cross_attn, false));
    x = g.add(x, ffn(g, norm(g, x, layer.ln_ff), layer.ff));
    x = adapter_forward(g, x, adapters.decoder[l], true);
  }
  return g.matmul(norm(g, x, dec_final_), g.param(output_, backbone_trainable_));
}

ag::Var Seq2SeqModel::forward(ag::Graph& g, std::span<const TokenId> input, std::span<const TokenId> target_prefix,
                              TaskId task) {
  if (input.empty()) throw ContractError("forward: empty input sequence");
  if (target_prefix.empty()) throw ContractError("forward: empty target prefix");
  AdapterSet& adapters = route(task);
  ag::Var memory = encode(g, input, adapters);
  return decode(g, memory, target_prefix, adapters);
}

// Const inference runs on a non-recording graph, which never writes to
// parameters; the cast only satisfies the shared graph-building code.
ag::Mat Seq2SeqModel::forward(std::span<const TokenId> input, std::span<const TokenId> target_prefix,
                              TaskId task) const {
  ag::Graph g(false);
  auto& self = const_cast<Seq2SeqModel&>(*this);
  return g.value(self.forward(g, input, target_prefix, task));
}

std::vector<ag::Mat> Seq2SeqModel::forward_batch(std::span<const Sequence> batch, TaskId task) const {
  std::vector<ag::Mat> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(forward(s.input, s.target_prefix, task));
  return out;
}

Generation Seq2SeqModel::generate(std::span<const TokenId> input, TaskId task, const DecodeOptions& options) const {
  if (options.max_len < 1) throw ContractError("generate: max_len must be >= 1");
  if (input.empty()) throw ContractError("generate: empty input sequence");
  auto& self = const_cast<Seq2SeqModel&>(*this);
  AdapterSet& adapters = self.route(task);

  ag::Mat memory;
  {
    ag::Graph g(false);
    memory = g.value(self.encode(g, input, adapters));
  }
  std::mt19937_64 rng(options.seed);
  Generation out;
  TokenIds prefix = {Vocabulary::kBos};
  for (int step = 0; step < options.max_len; ++step) {
    ag::Graph g(false);
    ag::Var mem = g.constant(memory);
    const ag::Mat& logits = g.value(self.decode(g, mem, prefix, adapters));
    const ag::Mat logp = ag::log_softmax_rows(logits.bottomRows(1));
    Eigen::Index best = 0;
    if (options.mode == DecodeMode::greedy) {
      logp.row(0).maxCoeff(&best);
    } else {
      std::vector<double> w(static_cast<std::size_t>(logp.cols()));
      for (Eigen::Index j = 0; j < logp.cols(); ++j) w[static_cast<std::size_t>(j)] = std::exp(logp(0, j));
      std::discrete_distribution<int> dist(w.begin(), w.end());
      best = dist(rng);
    }
    const auto token = static_cast<TokenId>(best);
    out.tokens.push_back(token);
    out.log_probs.push_back(logp(0, best));
    if (token == Vocabulary::kEos) break;
    prefix.push_back(token);
  }
  return out;
}

double Seq2SeqModel::sequence_log_prob(std::span<const TokenId> input, std::span<const TokenId> output,
                                       TaskId task) const {
  if (output.empty()) return 0.0;
  TokenIds prefix = {Vocabulary::kBos};
  prefix.insert(prefix.end(), output.begin(), output.end() - 1);
  const ag::Mat logp = ag::log_softmax_rows(forward(input, prefix, task));
  double total = 0.0;
  for (std::size_t t = 0; t < output.size(); ++t) total += logp(static_cast<Eigen::Index>(t), output[t]);
  return total;
}

std::vector<ag::Parameter*> Seq2SeqModel::backbone_parameters() {
  std::vector<ag::Parameter*> out = {&embedding_};
  for (auto& l : encoder_) {
    append(out, l.ln_attn);
    append(out, l.self_attn);
    append(out, l.ln_ff);
    append(out, l.ff);
  }
  for (auto& l : decoder_) {
    append(out, l.ln_self);
    append(out, l.self_attn);
    append(out, l.ln_cross);
    append(out, l.cross_attn);
    append(out, l.ln_ff);
    append(out, l.ff);
  }
  append(out, enc_final_);
  append(out, dec_final_);
  out.push_back(&output_);
  return out;
}

std::vector<const ag::Parameter*> Seq2SeqModel::backbone_parameters() const {
  auto ps = const_cast<Seq2SeqModel&>(*this).backbone_parameters();
  return {ps.begin(), ps.end()};
}

std::vector<ag::Parameter*> Seq2SeqModel::trainable_parameters(TaskId task) {
  std::vector<ag::Parameter*> out;
  if (backbone_trainable_) out = backbone_parameters();
  for (auto* p : route(task).parameters()) out.push_back(p);
  return out;
}

std::vector<ParameterGroup> Seq2SeqModel::parameter_groups() const {
  std::vector<ParameterGroup> out;
  out.push_back({"backbone", backbone_trainable_, backbone_parameter_count()});
  for (const auto& [task, set] : adapters_) {
    out.push_back({"adapter." + to_string(task), true, total_size(set.parameters())});
  }
  return out;
}

std::size_t Seq2SeqModel::backbone_parameter_count() const { return total_size(backbone_parameters()); }

std::size_t Seq2SeqModel::adapter_parameter_count(TaskId task) const { return total_size(adapter(task).parameters()); }

std::size_t Seq2SeqModel::trainable_parameter_count(TaskId task) const {
  return adapter_parameter_count(task) + (backbone_trainable_ ? backbone_parameter_count() : 0);
}

void Seq2SeqModel::zero_grad() {
  for (auto* p : backbone_parameters()) p->zero_grad();
  for (auto& [task, set] : adapters_) {
    for (auto* p : set.parameters()) p->zero_grad();
  }
}

double token_ce_loss(const ag::Mat& logits, std::span<const TokenId> targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
    throw ContractError("token_ce_loss: logits rows and targets differ in length");
  }
  const ag::Mat logp = ag::log_softmax_rows(logits);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] == Vocabulary::kPad) continue;
    total -= logp(static_cast<Eigen::Index>(t), targets[t]);
    ++count;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace toatod
