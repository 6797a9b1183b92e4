#include "toatod/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "toatod/error.hpp"
#include "toatod/optimizer.hpp"

namespace toatod {

namespace {

TokenIds teacher_prefix(const TokenIds& target) {
  TokenIds prefix = {Vocabulary::kBos};
  prefix.insert(prefix.end(), target.begin(), target.end() - 1);
  return prefix;
}

void zero_trainable(Seq2SeqModel& model, TaskId task) {
  for (auto* p : model.trainable_parameters(task)) p->zero_grad();
}

struct DstBatchOutcome {
  double reward;
  double jga;
};

DstBatchOutcome score_dst(const RolloutBatch& rb, const std::vector<const Example*>& batch, const Corpus& corpus,
                          const Vocabulary& vocab) {
  std::vector<BeliefState> preds, golds;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    preds.push_back(parse_belief(vocab.decode(rb.outputs[i].tokens), corpus.ontology).state);
    golds.push_back(corpus.sessions[batch[i]->session].turns[batch[i]->turn].gold_belief);
  }
  const double r = reward_dst(preds, golds);
  return {r, r - 1.0};
}

struct NlgBatchOutcome {
  double reward;
  double bleu;
  double success;
};

NlgBatchOutcome score_nlg(const RolloutBatch& rb, const std::vector<const Example*>& batch,
                          const std::vector<std::size_t>& session_ids, const Corpus& corpus, const Vocabulary& vocab,
                          double beta) {
  std::vector<DialogueSession> gold;
  std::vector<SessionPredictions> preds;
  std::map<std::size_t, std::size_t> slot;
  for (std::size_t sid : session_ids) {
    slot[sid] = gold.size();
    gold.push_back(corpus.sessions[sid]);
    preds.emplace_back(corpus.sessions[sid].turns.size());
  }
  std::vector<TokenSeq> hyps, refs;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Example& e = *batch[i];
    const Turn& turn = corpus.sessions[e.session].turns[e.turn];
    TurnPrediction& p = preds[slot.at(e.session)][e.turn];
    p.predicted_belief = turn.gold_belief;
    p.predicted_response_delex = vocab.decode(rb.outputs[i].tokens);
    hyps.push_back(p.predicted_response_delex);
    refs.push_back(turn.gold_response_delex);
  }
  const double bleu = mean_sentence_bleu(hyps, refs);
  const double success = inform_success(gold, preds, corpus.db).success;
  return {reward_nlg_terms(bleu, success, beta), bleu, success};
}

// Examples grouped into RL units: single utterances for DST, sessions for NLG.
struct Units {
  std::vector<std::vector<const Example*>> members;
  std::vector<std::size_t> session_of;  // NLG only
};

Units make_units(const std::vector<Example>& examples, TaskId task) {
  Units u;
  if (task == TaskId::NLG) {
    std::map<std::size_t, std::size_t> index;
    for (const auto& e : examples) {
      auto [it, fresh] = index.try_emplace(e.session, u.members.size());
      if (fresh) {
        u.members.emplace_back();
        u.session_of.push_back(e.session);
      }
      u.members[it->second].push_back(&e);
    }
  } else {
    for (const auto& e : examples) u.members.push_back({&e});
  }
  return u;
}

nlohmann::json step_json(const StepRecord& r) {
  return {{"type", "step"},          {"step", r.step},
          {"epoch", r.epoch},        {"task", to_string(r.task)},
          {"stage", r.stage},        {"loss_ce", r.loss_ce},
          {"loss_policy", r.loss_policy}, {"reward_mean", r.reward_mean},
          {"metrics", r.metrics}};
}

}  // namespace

double RLConfig::alpha_for(TaskId task) const {
  if (alpha) return *alpha;
  return task == TaskId::DST ? 1.0 : 0.5;
}

void RLConfig::validate() const {
  const auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (alpha && !unit(*alpha)) throw ConfigError("alpha must lie in [0, 1]");
  if (!unit(beta)) throw ConfigError("beta must lie in [0, 1]");
  for (double lr : {lr_sl, lr_rl_dst, lr_rl_nlg}) {
    if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
  }
  for (int b : {batch_sl, batch_dst, batch_nlg}) {
    if (b < 1) throw ConfigError("batch sizes must be >= 1");
  }
  for (int e : {epochs_sl, epochs_rl_dst, epochs_rl_nlg}) {
    if (e < 0) throw ConfigError("epoch counts must be >= 0");
  }
  if (max_decode_len < 1) throw ConfigError("max_decode_len must be >= 1");
}

std::string TrainingLog::to_jsonl() const {
  std::string out;
  for (const auto& r : steps) out += step_json(r).dump() + "\n";
  for (const auto& e : epochs) {
    out += nlohmann::json{{"type", "epoch"},         {"epoch", e.epoch},
                          {"task", to_string(task)}, {"stage", stage},
                          {"loss_ce", e.loss_ce},    {"loss_policy", e.loss_policy},
                          {"reward_mean", e.reward_mean}}
               .dump() +
           "\n";
  }
  return out;
}

void TrainingLog::append_to(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_jsonl();
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, std::mt19937_64& rng) {
  if (batch_size < 1) throw ContractError("make_batches: batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch_size)) {
    out.emplace_back(order.begin() + static_cast<long>(i),
                     order.begin() + static_cast<long>(std::min(n, i + static_cast<std::size_t>(batch_size))));
  }
  return out;
}

double reward_dst(const std::vector<BeliefState>& preds, const std::vector<BeliefState>& golds) {
  return joint_goal_accuracy(preds, golds) + 1.0;
}

double reward_nlg_terms(double mean_bleu, double success, double beta) {
  return (1.0 - beta) * mean_bleu + beta * success + 1.0;
}

double reward_nlg(const std::vector<DialogueSession>& gold, const std::vector<SessionPredictions>& preds,
                  const Database& db, double beta) {
  if (gold.size() != preds.size()) throw ContractError("reward_nlg: session counts differ");
  std::vector<TokenSeq> hyps, refs;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].turns.size() != preds[i].size()) throw ContractError("reward_nlg: turn counts differ");
    for (std::size_t t = 0; t < preds[i].size(); ++t) {
      hyps.push_back(preds[i][t].predicted_response_delex);
      refs.push_back(gold[i].turns[t].gold_response_delex);
    }
  }
  const double bleu = hyps.empty() ? 0.0 : mean_sentence_bleu(hyps, refs);
  return reward_nlg_terms(bleu, inform_success(gold, preds, db).success, beta);
}

double policy_loss(const RolloutBatch& batch, bool length_normalize) {
  if (batch.outputs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& g : batch.outputs) {
    double nll = -g.total_log_prob();
    if (length_normalize && !g.tokens.empty()) nll /= static_cast<double>(g.tokens.size());
    total += nll;
  }
  return total / static_cast<double>(batch.outputs.size()) * batch.reward;
}

double mixed_loss(double ce, double policy, double alpha) { return alpha * policy + (1.0 - alpha) * ce; }

double accumulate_ce_grad(Seq2SeqModel& model, const std::vector<const Example*>& batch, TaskId task, double scale) {
  std::size_t tokens = 0;
  for (const auto* e : batch) tokens += e->target.size();
  if (tokens == 0) return 0.0;
  const double seed = scale / static_cast<double>(tokens);
  double nll = 0.0;
  for (const auto* e : batch) {
    ag::Graph g(true);
    const TokenIds prefix = teacher_prefix(e->target);
    ag::Var loss = g.nll_sum(model.forward(g, e->input, prefix, task), e->target, Vocabulary::kPad);
    nll += g.value(loss)(0, 0);
    g.backward(loss, seed);
  }
  return nll / static_cast<double>(tokens);
}

void accumulate_policy_grad(Seq2SeqModel& model, const RolloutBatch& batch, TaskId task, double scale,
                            bool length_normalize) {
  if (batch.outputs.empty()) return;
  const double per_example = scale * batch.reward / static_cast<double>(batch.outputs.size());
  for (std::size_t i = 0; i < batch.outputs.size(); ++i) {
    const TokenIds& out = batch.outputs[i].tokens;
    if (out.empty()) continue;
    double seed = per_example;
    if (length_normalize) seed /= static_cast<double>(out.size());
    ag::Graph g(true);
    // -sum log P(y_hat) by teacher forcing the rollout.
    ag::Var loss = g.nll_sum(model.forward(g, batch.inputs[i], teacher_prefix(out), task), out, -1);
    g.backward(loss, seed);
  }
}

RolloutBatch rollout(const Seq2SeqModel& model, const std::vector<const Example*>& batch, TaskId task,
                     const RLConfig& cfg, std::uint64_t seed) {
  RolloutBatch rb;
  DecodeOptions opt{cfg.rollout, cfg.max_decode_len, seed};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    rb.inputs.push_back(batch[i]->input);
    rb.gold_targets.push_back(batch[i]->target);
    opt.seed = seed + i;
    rb.outputs.push_back(model.generate(batch[i]->input, task, opt));
  }
  return rb;
}

TrainingLog train_supervised(Seq2SeqModel& model, const Corpus& corpus, const Vocabulary& vocab, TaskId task,
                             const RLConfig& cfg, std::int64_t start_step) {
  cfg.validate();
  model.adapter(task);  // routing check
  const std::vector<Example> examples = build_examples(corpus.sessions, task, vocab);
  Adam opt(cfg.lr_sl);
  std::mt19937_64 rng(cfg.seed);
  TrainingLog log{task, "sl", start_step, start_step, {}, {}};
  std::int64_t step = start_step;
  for (int epoch = 1; epoch <= cfg.epochs_sl; ++epoch) {
    double ce_sum = 0.0;
    const auto batches = make_batches(examples.size(), cfg.batch_sl, rng);
    for (const auto& idx : batches) {
      std::vector<const Example*> batch;
      for (auto i : idx) batch.push_back(&examples[i]);
      zero_trainable(model, task);
      const double ce = accumulate_ce_grad(model, batch, task, 1.0);
      opt.step(model.trainable_parameters(task));
      ce_sum += ce;
      log.steps.push_back({++step, epoch, task, "sl", ce, 0.0, 0.0, nlohmann::json::object()});
    }
    log.epochs.push_back({epoch, batches.empty() ? 0.0 : ce_sum / static_cast<double>(batches.size()), 0.0, 0.0});
  }
  log.end_step = step;
  return log;
}

TrainingLog train_reinforce(Seq2SeqModel& model, const Corpus& corpus, const Vocabulary& vocab, TaskId task,
                            const RLConfig& cfg, std::int64_t start_step) {
  if (task == TaskId::NLU) throw ConfigError("reinforcement training is defined for dst and nlg only");
  cfg.validate();
  model.adapter(task);
  const double alpha = cfg.alpha_for(task);
  const bool nlg = task == TaskId::NLG;
  const int epochs = nlg ? cfg.epochs_rl_nlg : cfg.epochs_rl_dst;
  const int batch_units = nlg ? cfg.batch_nlg : cfg.batch_dst;
  const std::vector<Example> examples = build_examples(corpus.sessions, task, vocab);
  const Units units = make_units(examples, task);

  Adam opt(nlg ? cfg.lr_rl_nlg : cfg.lr_rl_dst);
  std::mt19937_64 rng(cfg.seed);
  TrainingLog log{task, "rl", start_step, start_step, {}, {}};
  std::int64_t step = start_step;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    EpochRecord summary{epoch, 0.0, 0.0, 0.0};
    const auto batches = make_batches(units.members.size(), batch_units, rng);
    for (const auto& idx : batches) {
      std::vector<const Example*> batch;
      std::vector<std::size_t> sessions;
      for (auto u : idx) {
        batch.insert(batch.end(), units.members[u].begin(), units.members[u].end());
        if (nlg) sessions.push_back(units.session_of[u]);
      }
      // Sampling seeds derive from the step so greedy runs draw nothing from rng.
      RolloutBatch rb = rollout(model, batch, task, cfg, cfg.seed ^ (static_cast<std::uint64_t>(step + 1) << 20));
      nlohmann::json metrics;
      if (nlg) {
        const NlgBatchOutcome o = score_nlg(rb, batch, sessions, corpus, vocab, cfg.beta);
        rb.reward = o.reward;
        metrics = {{"bleu", o.bleu}, {"success", o.success}};
      } else {
        const DstBatchOutcome o = score_dst(rb, batch, corpus, vocab);
        rb.reward = o.reward;
        metrics = {{"jga", o.jga}};
      }
      zero_trainable(model, task);
      double ce = 0.0;
      if (alpha < 1.0) ce = accumulate_ce_grad(model, batch, task, 1.0 - alpha);
      if (alpha > 0.0) accumulate_policy_grad(model, rb, task, alpha, cfg.length_normalize);
      opt.step(model.trainable_parameters(task));
      const double pl = policy_loss(rb, cfg.length_normalize);
      log.steps.push_back({++step, epoch, task, "rl", ce, pl, rb.reward, metrics});
      summary.loss_ce += ce;
      summary.loss_policy += pl;
      summary.reward_mean += rb.reward;
    }
    if (!batches.empty()) {
      const auto n = static_cast<double>(batches.size());
      summary.loss_ce /= n;
      summary.loss_policy /= n;
      summary.reward_mean /= n;
    }
    log.epochs.push_back(summary);
  }
  log.end_step = step;
  return log;
}

RewardSummary evaluate_reward(const Seq2SeqModel& model, const Corpus& corpus, const Vocabulary& vocab, TaskId task,
                              const RLConfig& cfg) {
  if (task == TaskId::NLU) throw ConfigError("rewards are defined for dst and nlg only");
  const bool nlg = task == TaskId::NLG;
  const int batch_units = nlg ? cfg.batch_nlg : cfg.batch_dst;
  const std::vector<Example> examples = build_examples(corpus.sessions, task, vocab);
  const Units units = make_units(examples, task);
  RLConfig greedy = cfg;
  greedy.rollout = DecodeMode::greedy;
  RewardSummary s;
  for (std::size_t start = 0; start < units.members.size(); start += static_cast<std::size_t>(batch_units)) {
    std::vector<const Example*> batch;
    std::vector<std::size_t> sessions;
    const std::size_t end = std::min(units.members.size(), start + static_cast<std::size_t>(batch_units));
    for (std::size_t u = start; u < end; ++u) {
      batch.insert(batch.end(), units.members[u].begin(), units.members[u].end());
      if (nlg) sessions.push_back(units.session_of[u]);
    }
    const RolloutBatch rb = rollout(model, batch, task, greedy, 0);
    if (nlg) {
      const NlgBatchOutcome o = score_nlg(rb, batch, sessions, corpus, vocab, cfg.beta);
      s.mean_reward += o.reward;
      s.bleu += o.bleu;
      s.success += o.success;
    } else {
      const DstBatchOutcome o = score_dst(rb, batch, corpus, vocab);
      s.mean_reward += o.reward;
      s.jga += o.jga;
    }
    ++s.n_batches;
  }
  if (s.n_batches) {
    const auto n = static_cast<double>(s.n_batches);
    s.mean_reward /= n;
    s.jga /= n;
    s.bleu /= n;
    s.success /= n;
  }
  return s;
}

}  // namespace toatod
