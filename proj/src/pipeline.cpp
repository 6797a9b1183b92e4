#include "toatod/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "toatod/error.hpp"
#include "toatod/task_io.hpp"

namespace toatod {

namespace {

TokenSeq generate_tokens(const Seq2SeqModel& model, const Vocabulary& vocab, const TokenSeq& input, TaskId task,
                         int max_len) {
  DecodeOptions opt;
  opt.max_len = max_len;
  return vocab.decode(model.generate(encode_with_eos(vocab, input), task, opt).tokens);
}

}  // namespace

SessionPredictions SessionResult::predictions() const {
  SessionPredictions out;
  for (const auto& t : turns) out.push_back({t.predicted_belief, t.predicted_response_delex, t.predicted_intent});
  return out;
}

std::string to_string(PipelineMode mode) { return mode == PipelineMode::end_to_end ? "end_to_end" : "oracle_belief"; }

PipelineMode pipeline_mode_from_string(const std::string& name) {
  if (name == "end_to_end" || name == "e2e") return PipelineMode::end_to_end;
  if (name == "oracle_belief" || name == "oracle") return PipelineMode::oracle_belief;
  throw ConfigError("unknown evaluation mode '" + name + "' (expected end_to_end or oracle_belief)");
}

PipelineTurn run_turn(const DialogueHistory& history, const PipelineContext& ctx,
                      const std::optional<BeliefState>& oracle_belief) {
  const TokenSeq context = dialogue_context(history.users, history.systems);
  PipelineTurn out;
  if (oracle_belief) {
    out.predicted_belief = *oracle_belief;
  } else {
    const ParsedBelief parsed =
        parse_belief(generate_tokens(ctx.model, ctx.vocab, dst_input(context), TaskId::DST, ctx.max_len), ctx.ontology);
    out.predicted_belief = parsed.state;
    out.belief_malformed = parsed.malformed;
  }
  out.active_domain = active_domain(out.predicted_belief, history.previous_belief, history.previous_domain);
  out.db_result = out.active_domain.empty() ? DBResult{}
                                            : db_lookup(out.predicted_belief, ctx.db, out.active_domain);
  out.predicted_response_delex = generate_tokens(
      ctx.model, ctx.vocab, nlg_input(context, out.predicted_belief, out.db_result.bucket), TaskId::NLG, ctx.max_len);
  if (!ctx.intent_labels.empty()) {
    out.predicted_intent = classify_intent(history.users.back(), ctx.model, ctx.vocab, ctx.intent_labels);
  }
  return out;
}

SessionResult run_session(const DialogueSession& session, const PipelineContext& ctx, PipelineMode mode) {
  SessionResult result{session.session_id, {}};
  DialogueHistory history;
  for (const auto& turn : session.turns) {
    history.users.push_back(turn.user_utterance);
    std::optional<BeliefState> oracle;
    if (mode == PipelineMode::oracle_belief) oracle = turn.gold_belief;
    PipelineTurn t = run_turn(history, ctx, oracle);
    history.systems.push_back(t.predicted_response_delex);
    history.previous_belief = t.predicted_belief;
    history.previous_domain = t.active_domain;
    result.turns.push_back(std::move(t));
  }
  return result;
}

CorpusRun run_corpus(const Corpus& corpus, const PipelineContext& ctx, PipelineMode mode) {
  CorpusRun run;
  std::vector<SessionPredictions> preds;
  for (const auto& s : corpus.sessions) {
    run.sessions.push_back(run_session(s, ctx, mode));
    preds.push_back(run.sessions.back().predictions());
  }
  run.report = evaluate(corpus.sessions, preds, corpus.db);
  return run;
}

std::string classify_intent(const TokenSeq& utterance, const Seq2SeqModel& model, const Vocabulary& vocab,
                            const std::vector<std::string>& labels) {
  return map_intent_label(generate_tokens(model, vocab, nlu_input(utterance), TaskId::NLU, 4), labels);
}

std::string map_intent_label(const TokenSeq& generated, const std::vector<std::string>& labels) {
  if (generated.size() == 1 && std::find(labels.begin(), labels.end(), generated[0]) != labels.end()) {
    return generated[0];
  }
  return kUnknownIntent;
}

nlohmann::json predictions_to_json(const std::vector<SessionResult>& sessions, PipelineMode mode) {
  nlohmann::json js = nlohmann::json::array();
  for (const auto& s : sessions) {
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& t : s.turns) {
      turns.push_back({{"belief", belief_to_json(t.predicted_belief)},
                       {"belief_malformed", t.belief_malformed},
                       {"domain", t.active_domain.empty() ? nlohmann::json(nullptr) : nlohmann::json(t.active_domain)},
                       {"db_bucket", to_string(t.db_result.bucket)},
                       {"response", join(t.predicted_response_delex)},
                       {"intent", t.predicted_intent ? nlohmann::json(*t.predicted_intent) : nlohmann::json(nullptr)}});
    }
    js.push_back({{"session_id", s.session_id}, {"turns", std::move(turns)}});
  }
  return {{"format", "toatod-predictions"}, {"version", 1}, {"mode", to_string(mode)}, {"sessions", std::move(js)}};
}

void save_predictions(const std::filesystem::path& path, const std::vector<SessionResult>& sessions, PipelineMode mode) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << predictions_to_json(sessions, mode).dump(1) << "\n";
}

std::vector<SessionPredictions> load_predictions(const std::filesystem::path& path,
                                                 const std::vector<DialogueSession>& sessions) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open predictions file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (j.value("format", std::string()) != "toatod-predictions") throw ParseError(path.string() + ": not a predictions file");
  std::map<std::string, const nlohmann::json*> by_id;
  for (const auto& s : j.at("sessions")) by_id[s.at("session_id").get<std::string>()] = &s;
  std::vector<SessionPredictions> out;
  for (const auto& s : sessions) {
    auto it = by_id.find(s.session_id);
    if (it == by_id.end()) throw ParseError(path.string() + ": no predictions for session " + s.session_id);
    const auto& turns = it->second->at("turns");
    if (turns.size() != s.turns.size()) {
      throw ParseError(path.string() + ": session " + s.session_id + " has " + std::to_string(turns.size()) +
                       " predicted turns, corpus has " + std::to_string(s.turns.size()));
    }
    SessionPredictions sp;
    for (const auto& t : turns) {
      TurnPrediction p;
      p.predicted_belief = belief_from_json(t.at("belief"));
      p.predicted_response_delex = tokenize(t.at("response").get<std::string>());
      if (t.contains("intent") && !t.at("intent").is_null()) p.predicted_intent = t.at("intent").get<std::string>();
      sp.push_back(std::move(p));
    }
    out.push_back(std::move(sp));
  }
  return out;
}

}  // namespace toatod
