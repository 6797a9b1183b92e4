#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "toatod/corpus.hpp"
#include "toatod/metrics.hpp"
#include "toatod/model.hpp"
#include "toatod/text.hpp"

namespace toatod {

// What a deployed system has seen so far in a session.
struct DialogueHistory {
  std::vector<TokenSeq> users;    // includes the current user turn last
  std::vector<TokenSeq> systems;  // responses of earlier turns
  BeliefState previous_belief;
  std::string previous_domain;
};

struct PipelineTurn {
  BeliefState predicted_belief;
  bool belief_malformed = false;
  DBResult db_result;
  std::string active_domain;
  TokenSeq predicted_response_delex;
  std::optional<std::string> predicted_intent;
};

struct SessionResult {
  std::string session_id;
  std::vector<PipelineTurn> turns;
  SessionPredictions predictions() const;
};

enum class PipelineMode { end_to_end, oracle_belief };

std::string to_string(PipelineMode mode);
PipelineMode pipeline_mode_from_string(const std::string& name);

struct PipelineContext {
  const Seq2SeqModel& model;
  const Vocabulary& vocab;
  const Ontology& ontology;
  const Database& db;
  std::vector<std::string> intent_labels;  // empty: skip intent prediction
  int max_len = 48;
};

// DST on the history, DB lookup on that state, then NLG on history + state + bucket.
// A gold belief (oracle mode) replaces the DST step.
PipelineTurn run_turn(const DialogueHistory& history, const PipelineContext& ctx,
                      const std::optional<BeliefState>& oracle_belief = std::nullopt);

// End-to-end mode feeds generated responses back as context.
SessionResult run_session(const DialogueSession& session, const PipelineContext& ctx, PipelineMode mode);

struct CorpusRun {
  std::vector<SessionResult> sessions;
  EvalReport report;
};

CorpusRun run_corpus(const Corpus& corpus, const PipelineContext& ctx, PipelineMode mode);

inline const std::string kUnknownIntent = "<unk>";

// A generated label sequence is a known label only when it is exactly one
// token from `labels`; anything else becomes kUnknownIntent.
std::string map_intent_label(const TokenSeq& generated, const std::vector<std::string>& labels);
std::string classify_intent(const TokenSeq& utterance, const Seq2SeqModel& model, const Vocabulary& vocab,
                            const std::vector<std::string>& labels);

// Predictions file: {"format": "toatod-predictions", "version": 1, "mode": ...,
// "sessions": [{"session_id", "turns": [{"belief", "db_bucket", "response", "intent"}]}]}
nlohmann::json predictions_to_json(const std::vector<SessionResult>& sessions, PipelineMode mode);
void save_predictions(const std::filesystem::path& path, const std::vector<SessionResult>& sessions, PipelineMode mode);
// Predictions aligned with `sessions` by id; a missing session or turn count mismatch raises ParseError.
std::vector<SessionPredictions> load_predictions(const std::filesystem::path& path,
                                                 const std::vector<DialogueSession>& sessions);

}  // namespace toatod
