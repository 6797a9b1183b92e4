#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "toatod/corpus.hpp"
#include "toatod/metrics.hpp"
#include "toatod/model.hpp"
#include "toatod/task_io.hpp"

namespace toatod {

struct RLConfig {
  std::optional<double> alpha;  // unset: 1.0 for DST, 0.5 for NLG
  double beta = 0.7;
  double lr_sl = 1e-4;
  double lr_rl_dst = 1e-5;
  double lr_rl_nlg = 1e-6;
  int batch_sl = 16;   // utterances
  int batch_dst = 32;  // utterances
  int batch_nlg = 4;   // sessions
  int epochs_sl = 15;
  int epochs_rl_dst = 10;
  int epochs_rl_nlg = 3;
  std::uint64_t seed = 42;
  int max_decode_len = 48;
  bool length_normalize = false;  // divide each rollout's log-prob by its length
  DecodeMode rollout = DecodeMode::greedy;

  double alpha_for(TaskId task) const;
  void validate() const;
};

struct StepRecord {
  std::int64_t step = 0;
  int epoch = 0;
  TaskId task = TaskId::DST;
  std::string stage;  // "sl" or "rl"
  double loss_ce = 0.0;
  double loss_policy = 0.0;
  double reward_mean = 0.0;
  nlohmann::json metrics = nlohmann::json::object();
};

struct EpochRecord {
  int epoch = 0;
  double loss_ce = 0.0;
  double loss_policy = 0.0;
  double reward_mean = 0.0;
};

struct TrainingLog {
  TaskId task = TaskId::DST;
  std::string stage;
  std::int64_t start_step = 0;
  std::int64_t end_step = 0;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  // One JSON object per line: step records, then epoch summaries.
  std::string to_jsonl() const;
  void append_to(const std::filesystem::path& path) const;
};

// Shuffled index batches over [0, n).
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, std::mt19937_64& rng);

double reward_dst(const std::vector<BeliefState>& preds, const std::vector<BeliefState>& golds);
double reward_nlg_terms(double mean_bleu, double success, double beta);
// Mean utterance BLEU over every turn of the batch, Success over its sessions.
double reward_nlg(const std::vector<DialogueSession>& gold, const std::vector<SessionPredictions>& preds,
                  const Database& db, double beta);

struct RolloutBatch {
  std::vector<TokenIds> inputs;
  std::vector<TokenIds> gold_targets;
  std::vector<Generation> outputs;
  double reward = 1.0;  // shared by the whole batch
};

double policy_loss(const RolloutBatch& batch, bool length_normalize = false);
double mixed_loss(double ce, double policy, double alpha);

// Adds d(scale * CE)/dθ into the grads of the model's trainable parameters
// for `task`. CE is mean NLL per gold token over the whole list; returns it.
double accumulate_ce_grad(Seq2SeqModel& model, const std::vector<const Example*>& batch, TaskId task, double scale);
// Adds d(scale * policy_loss)/dθ for a batch of rollouts (reward taken as a constant).
void accumulate_policy_grad(Seq2SeqModel& model, const RolloutBatch& batch, TaskId task, double scale,
                            bool length_normalize);

RolloutBatch rollout(const Seq2SeqModel& model, const std::vector<const Example*>& batch, TaskId task,
                     const RLConfig& cfg, std::uint64_t seed);

TrainingLog train_supervised(Seq2SeqModel& model, const Corpus& corpus, const Vocabulary& vocab, TaskId task,
                             const RLConfig& cfg, std::int64_t start_step = 0);
// DST batches utterances, NLG batches whole sessions. NLU is rejected.
TrainingLog train_reinforce(Seq2SeqModel& model, const Corpus& corpus, const Vocabulary& vocab, TaskId task,
                            const RLConfig& cfg, std::int64_t start_step = 0);

struct RewardSummary {
  double mean_reward = 0.0;
  double jga = 0.0;      // DST
  double bleu = 0.0;     // NLG, mean utterance BLEU
  double success = 0.0;  // NLG
  std::size_t n_batches = 0;
};

// Greedy rollouts over the corpus in unshuffled RL batches, averaging the batch rewards.
RewardSummary evaluate_reward(const Seq2SeqModel& model, const Corpus& corpus, const Vocabulary& vocab, TaskId task,
                              const RLConfig& cfg);

}  // namespace toatod
