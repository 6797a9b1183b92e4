#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "toatod/belief.hpp"
#include "toatod/corpus.hpp"
#include "toatod/database.hpp"
#include "toatod/text.hpp"

namespace toatod {

struct TurnPrediction {
  BeliefState predicted_belief;
  TokenSeq predicted_response_delex;
  std::optional<std::string> predicted_intent;
};

using SessionPredictions = std::vector<TurnPrediction>;

struct SessionDiagnostics {
  std::string session_id;
  double jga = 0.0;
  bool inform = false;
  bool success = false;
};

// Ratios live in [0, 1]; combined is in percent (0..200).
struct EvalReport {
  double jga = 0.0;
  double slot_f1 = 0.0;
  double bleu = 0.0;
  double inform = 0.0;
  double success = 0.0;
  double combined = 0.0;
  std::optional<double> intent_acc;
  std::size_t n_sessions = 0;
  std::size_t n_turns = 0;
  std::vector<SessionDiagnostics> per_session;

  // One level of string -> number; per-session entries use "session.<id>.<field>".
  nlohmann::json to_flat_json() const;
  static EvalReport from_flat_json(const nlohmann::json& j);
};

double joint_goal_accuracy(const std::vector<BeliefState>& preds, const std::vector<BeliefState>& golds);
// Per-turn fraction of correct slots, averaged over turns. The slots scored are
// every (domain, slot) that appears in any prediction or gold state.
double slot_accuracy(const std::vector<BeliefState>& preds, const std::vector<BeliefState>& golds);
double slot_f1(const std::vector<BeliefState>& preds, const std::vector<BeliefState>& golds);

inline constexpr double kBleuEpsilon = 1e-9;

// Corpus BLEU-4, one reference per hypothesis, uniform weights, brevity
// penalty. An order with no matches uses epsilon / max(count, 1); an order with
// no n-grams in the hypotheses nor the references counts as precision 1.
double corpus_bleu(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs);
double sentence_bleu(const TokenSeq& hyp, const TokenSeq& ref);
// Mean sentence BLEU over aligned pairs.
double mean_sentence_bleu(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs);

struct InformSuccess {
  double inform = 0.0;
  double success = 0.0;
};

struct SessionOutcome {
  bool inform = false;
  bool success = false;
};

// A response belongs to the domain that is active at its turn (tracked over
// the predicted states). For each goal domain D, Inform needs a D response
// offering [value_name] and the DB entity matched by the final predicted state
// for D satisfying the goal's constraints. Success also needs every requested
// slot's placeholder in some D response.
SessionOutcome session_inform_success(const DialogueSession& session, const SessionPredictions& preds,
                                      const Database& db);
InformSuccess inform_success(const std::vector<DialogueSession>& sessions, const std::vector<SessionPredictions>& preds,
                             const Database& db);

// All arguments in percent.
double combined_score(double inform_pct, double success_pct, double bleu_pct);

double intent_accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& golds);

// Predictions that copy the gold annotations.
std::vector<SessionPredictions> gold_predictions(const std::vector<DialogueSession>& sessions);

EvalReport evaluate(const std::vector<DialogueSession>& sessions, const std::vector<SessionPredictions>& preds,
                    const Database& db);

}  // namespace toatod
