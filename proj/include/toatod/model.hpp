#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toatod/adapter.hpp"
#include "toatod/autograd.hpp"
#include "toatod/text.hpp"

namespace toatod {

enum class TaskId { NLU, DST, NLG };
inline constexpr std::array<TaskId, 3> kAllTasks = {TaskId::NLU, TaskId::DST, TaskId::NLG};

std::string to_string(TaskId task);
TaskId task_from_string(const std::string& name);  // "nlu" / "dst" / "nlg", case-insensitive

struct BackboneConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_layers_enc = 2;
  int n_layers_dec = 2;
  int n_heads = 4;
  int ff_dim = 128;

  void validate() const;
  bool operator==(const BackboneConfig&) const = default;
};

struct Linear {
  ag::Parameter w;  // in x out
  ag::Parameter b;  // 1 x out
};

struct LayerNormParams {
  ag::Parameter gamma;
  ag::Parameter beta;
};

struct AttentionParams {
  Linear q, k, v, o;
};

struct FeedForwardParams {
  Linear in, out;
};

struct EncoderLayer {
  LayerNormParams ln_attn, ln_ff;
  AttentionParams self_attn;
  FeedForwardParams ff;
};

struct DecoderLayer {
  LayerNormParams ln_self, ln_cross, ln_ff;
  AttentionParams self_attn, cross_attn;
  FeedForwardParams ff;
};

// One adapter per transformer block, encoder and decoder each.
struct AdapterSet {
  std::vector<AdapterLayer> encoder;
  std::vector<AdapterLayer> decoder;

  std::vector<ag::Parameter*> parameters();
  std::vector<const ag::Parameter*> parameters() const;
};

enum class FreezeMode { backbone, none };

struct ParameterGroup {
  std::string name;  // "backbone" or "adapter.<task>"
  bool trainable = false;
  std::size_t size = 0;
};

enum class DecodeMode { greedy, sample };

struct DecodeOptions {
  DecodeMode mode = DecodeMode::greedy;
  int max_len = 32;
  std::uint64_t seed = 0;
};

struct Generation {
  TokenIds tokens;                // includes the end token when one was emitted
  std::vector<double> log_probs;  // log P of each emitted token under the model
  double total_log_prob() const;
};

// Pre-LN encoder-decoder transformer. Blocks are
//   x += Attn(LN(x)); x += FFN(LN(x)); x = Adapter_task(x)
// with cross-attention added in the decoder. Token embeddings are shared by
// encoder and decoder, positions are sinusoidal, and the output projection is
// a separate d x V matrix. The backbone starts frozen.
class Seq2SeqModel {
 public:
  Seq2SeqModel(const BackboneConfig& config, const AdapterSpec& adapter, std::uint64_t seed);

  const BackboneConfig& config() const { return config_; }
  const AdapterSpec& adapter_spec() const { return adapter_spec_; }

  // Logits for each target-prefix position: row t predicts the token after prefix[0..t].
  ag::Var forward(ag::Graph& g, std::span<const TokenId> input, std::span<const TokenId> target_prefix, TaskId task);
  ag::Mat forward(std::span<const TokenId> input, std::span<const TokenId> target_prefix, TaskId task) const;

  struct Sequence {
    TokenIds input;
    TokenIds target_prefix;
  };
  std::vector<ag::Mat> forward_batch(std::span<const Sequence> batch, TaskId task) const;

  Generation generate(std::span<const TokenId> input, TaskId task, const DecodeOptions& options) const;

  // Sum of log P(output[t] | input, output[<t]) by teacher forcing.
  double sequence_log_prob(std::span<const TokenId> input, std::span<const TokenId> output, TaskId task) const;

  void set_frozen(FreezeMode mode) { backbone_trainable_ = (mode == FreezeMode::none); }
  bool backbone_frozen() const { return !backbone_trainable_; }

  bool has_adapter(TaskId task) const { return adapters_.count(task) > 0; }
  AdapterSet& adapter(TaskId task);
  const AdapterSet& adapter(TaskId task) const;
  // Replaces one task's adapters; shapes must match this model.
  void set_adapter(TaskId task, AdapterSet adapters);
  void remove_adapter(TaskId task) { adapters_.erase(task); }

  std::vector<ag::Parameter*> backbone_parameters();
  std::vector<const ag::Parameter*> backbone_parameters() const;
  // Parameters a step routed to `task` may update: the task's adapters, plus
  // the backbone when it is not frozen.
  std::vector<ag::Parameter*> trainable_parameters(TaskId task);

  std::vector<ParameterGroup> parameter_groups() const;
  std::size_t backbone_parameter_count() const;
  std::size_t adapter_parameter_count(TaskId task) const;
  std::size_t trainable_parameter_count(TaskId task) const;

  void zero_grad();

 private:
  ag::Var embed(ag::Graph& g, std::span<const TokenId> ids);
  ag::Var encode(ag::Graph& g, std::span<const TokenId> input, AdapterSet& adapters);
  ag::Var decode(ag::Graph& g, ag::Var memory, std::span<const TokenId> prefix, AdapterSet& adapters);
  AdapterSet& route(TaskId task);

  ag::Var linear(ag::Graph& g, ag::Var x, Linear& l);
  ag::Var norm(ag::Graph& g, ag::Var x, LayerNormParams& ln);
  ag::Var mha(ag::Graph& g, ag::Var query_in, ag::Var kv_in, AttentionParams& p, bool causal);
  ag::Var ffn(ag::Graph& g, ag::Var x, FeedForwardParams& p);

  BackboneConfig config_;
  AdapterSpec adapter_spec_;
  bool backbone_trainable_ = false;

  ag::Parameter embedding_;  // V x d
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  LayerNormParams enc_final_, dec_final_;
  ag::Parameter output_;  // d x V
  std::map<TaskId, AdapterSet> adapters_;
  ag::Mat positions_;  // precomputed sinusoidal table
};

// Mean NLL over non-pad target tokens.
double token_ce_loss(const ag::Mat& logits, std::span<const TokenId> targets);

}  // namespace toatod
