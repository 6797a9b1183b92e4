#include "toatod/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "toatod/error.hpp"
#include "toatod/ontology.hpp"

namespace toatod {

namespace {

void require_aligned(std::size_t a, std::size_t b, const std::string& what) {
  if (a != b) {
    throw ContractError(what + ": predictions and golds differ in length (" + std::to_string(a) + " vs " +
                        std::to_string(b) + ")");
  }
}

using NgramCounts = std::map<TokenSeq, std::size_t>;

NgramCounts ngrams(const TokenSeq& s, std::size_t n) {
  NgramCounts out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++out[TokenSeq(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i + n))];
  return out;
}

struct BleuStats {
  std::size_t hyp_len = 0, ref_len = 0;
  std::size_t matches[4] = {}, hyp_total[4] = {}, ref_total[4] = {};

  void add(const TokenSeq& hyp, const TokenSeq& ref) {
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const NgramCounts h = ngrams(hyp, n), r = ngrams(ref, n);
      for (const auto& [g, c] : h) {
        hyp_total[n - 1] += c;
        auto it = r.find(g);
        if (it != r.end()) matches[n - 1] += std::min(c, it->second);
      }
      for (const auto& [g, c] : r) ref_total[n - 1] += c;
    }
  }

  double score() const {
    if (hyp_len == 0) return ref_len == 0 ? 1.0 : 0.0;
    double log_sum = 0.0;
    for (int n = 0; n < 4; ++n) {
      double p;
      if (matches[n] > 0) p = static_cast<double>(matches[n]) / static_cast<double>(hyp_total[n]);
      else if (hyp_total[n] == 0 && ref_total[n] == 0) p = 1.0;
      else p = kBleuEpsilon / static_cast<double>(std::max<std::size_t>(hyp_total[n], 1));
      log_sum += 0.25 * std::log(p);
    }
    const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    return bp * std::exp(log_sum);
  }
};

bool contains_token(const TokenSeq& seq, const std::string& token) {
  return std::find(seq.begin(), seq.end(), token) != seq.end();
}

}  // namespace

double joint_goal_accuracy(const std::vector<BeliefState>& preds, const std::vector<BeliefState>& golds) {
  require_aligned(preds.size(), golds.size(), "joint_goal_accuracy");
  if (golds.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) correct += preds[i] == golds[i];
  return static_cast<double>(correct) / static_cast<double>(golds.size());
}

double slot_accuracy(const std::vector<BeliefState>& preds, const std::vector<BeliefState>& golds) {
  require_aligned(preds.size(), golds.size(), "slot_accuracy");
  if (golds.empty()) return 0.0;
  std::set<SlotKey> keys;
  for (const auto* list : {&preds, &golds}) {
    for (const auto& b : *list) {
      for (const auto& [k, v] : b.slots()) keys.insert(k);
    }
  }
  if (keys.empty()) return 1.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    for (const auto& k : keys) correct += preds[i].get(k.domain, k.slot) == golds[i].get(k.domain, k.slot);
  }
  return static_cast<double>(correct) / static_cast<double>(keys.size() * golds.size());
}

double slot_f1(const std::vector<BeliefState>& preds, const std::vector<BeliefState>& golds) {
  require_aligned(preds.size(), golds.size(), "slot_f1");
  std::size_t tp = 0, n_pred = 0, n_gold = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    n_pred += preds[i].size();
    n_gold += golds[i].size();
    for (const auto& [k, v] : preds[i].slots()) {
      const auto g = golds[i].get(k.domain, k.slot);
      tp += g && *g == v;
    }
  }
  if (n_pred == 0 && n_gold == 0) return 1.0;
  // 2PR/(P+R) reduced to counts: one rounding instead of four.
  return 2.0 * static_cast<double>(tp) / static_cast<double>(n_pred + n_gold);
}

double corpus_bleu(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs) {
  if (hyps.empty()) throw ContractError("corpus_bleu: empty hypothesis list");
  require_aligned(hyps.size(), refs.size(), "corpus_bleu");
  BleuStats stats;
  for (std::size_t i = 0; i < hyps.size(); ++i) stats.add(hyps[i], refs[i]);
  return stats.score();
}

double sentence_bleu(const TokenSeq& hyp, const TokenSeq& ref) {
  BleuStats stats;
  stats.add(hyp, ref);
  return stats.score();
}

double mean_sentence_bleu(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs) {
  if (hyps.empty()) throw ContractError("mean_sentence_bleu: empty hypothesis list");
  require_aligned(hyps.size(), refs.size(), "mean_sentence_bleu");
  double total = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) total += sentence_bleu(hyps[i], refs[i]);
  return total / static_cast<double>(hyps.size());
}

SessionOutcome session_inform_success(const DialogueSession& session, const SessionPredictions& preds,
                                      const Database& db) {
  require_aligned(preds.size(), session.turns.size(), "inform_success (session " + session.session_id + ")");
  // Responses grouped by the domain active at their turn.
  std::map<std::string, std::vector<const TokenSeq*>> by_domain;
  BeliefState previous;
  std::string active;
  for (const auto& p : preds) {
    active = active_domain(p.predicted_belief, previous, active);
    if (!active.empty()) by_domain[active].push_back(&p.predicted_response_delex);
    previous = p.predicted_belief;
  }
  const BeliefState& final_state = preds.empty() ? previous : preds.back().predicted_belief;

  SessionOutcome out{true, true};
  if (session.goal.empty()) return out;
  const std::string name_token = placeholder_token("name");
  for (const auto& [domain, goal] : session.goal) {
    const auto& responses = by_domain[domain];
    bool offered = false;
    for (const auto* r : responses) offered = offered || contains_token(*r, name_token);
    bool grounded = false;
    if (offered) {
      auto table = db.find(domain);
      if (table != db.end()) {
        const DBResult hit = db_lookup(final_state, table->second);
        grounded = hit.matched_entity && entity_satisfies(*hit.matched_entity, goal.inform);
      }
    }
    const bool inform = offered && grounded;
    bool answered = true;
    for (const auto& slot : goal.request) {
      const std::string tok = placeholder_token(slot);
      bool found = false;
      for (const auto* r : responses) found = found || contains_token(*r, tok);
      answered = answered && found;
    }
    out.inform = out.inform && inform;
    out.success = out.success && inform && answered;
  }
  return out;
}

InformSuccess inform_success(const std::vector<DialogueSession>& sessions, const std::vector<SessionPredictions>& preds,
                             const Database& db) {
  require_aligned(preds.size(), sessions.size(), "inform_success");
  if (sessions.empty()) return {};
  std::size_t inform = 0, success = 0;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const SessionOutcome o = session_inform_success(sessions[i], preds[i], db);
    inform += o.inform;
    success += o.success;
  }
  const auto n = static_cast<double>(sessions.size());
  return {static_cast<double>(inform) / n, static_cast<double>(success) / n};
}

double combined_score(double inform_pct, double success_pct, double bleu_pct) {
  return bleu_pct + 0.5 * (inform_pct + success_pct);
}

double intent_accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& golds) {
  require_aligned(preds.size(), golds.size(), "intent_accuracy");
  if (golds.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) correct += preds[i] == golds[i];
  return static_cast<double>(correct) / static_cast<double>(golds.size());
}

std::vector<SessionPredictions> gold_predictions(const std::vector<DialogueSession>& sessions) {
  std::vector<SessionPredictions> out;
  for (const auto& s : sessions) {
    SessionPredictions sp;
    for (const auto& t : s.turns) sp.push_back({t.gold_belief, t.gold_response_delex, t.intent_label});
    out.push_back(std::move(sp));
  }
  return out;
}

EvalReport evaluate(const std::vector<DialogueSession>& sessions, const std::vector<SessionPredictions>& preds,
                    const Database& db) {
  require_aligned(preds.size(), sessions.size(), "evaluate");
  EvalReport r;
  r.n_sessions = sessions.size();
  std::vector<BeliefState> pb, gb;
  std::vector<TokenSeq> hyps, refs;
  std::vector<std::string> pi, gi;
  bool any_intent = false;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const auto& s = sessions[i];
    require_aligned(preds[i].size(), s.turns.size(), "evaluate");
    std::vector<BeliefState> spb, sgb;
    for (std::size_t t = 0; t < s.turns.size(); ++t) {
      const auto& turn = s.turns[t];
      const auto& p = preds[i][t];
      spb.push_back(p.predicted_belief);
      sgb.push_back(turn.gold_belief);
      hyps.push_back(p.predicted_response_delex);
      refs.push_back(turn.gold_response_delex);
      if (turn.intent_label) {
        gi.push_back(*turn.intent_label);
        if (p.predicted_intent) any_intent = true;
        pi.push_back(p.predicted_intent.value_or(std::string()));
      }
    }
    const SessionOutcome o = session_inform_success(s, preds[i], db);
    r.per_session.push_back({s.session_id, joint_goal_accuracy(spb, sgb), o.inform, o.success});
    pb.insert(pb.end(), spb.begin(), spb.end());
    gb.insert(gb.end(), sgb.begin(), sgb.end());
  }
  r.n_turns = gb.size();
  r.jga = joint_goal_accuracy(pb, gb);
  r.slot_f1 = slot_f1(pb, gb);
  r.bleu = hyps.empty() ? 0.0 : corpus_bleu(hyps, refs);
  const InformSuccess is = inform_success(sessions, preds, db);
  r.inform = is.inform;
  r.success = is.success;
  r.combined = combined_score(100.0 * r.inform, 100.0 * r.success, 100.0 * r.bleu);
  if (any_intent) r.intent_acc = intent_accuracy(pi, gi);
  return r;
}

nlohmann::json EvalReport::to_flat_json() const {
  nlohmann::json j = {{"jga", jga},       {"slot_f1", slot_f1},       {"bleu", bleu},
                      {"inform", inform}, {"success", success},       {"combined", combined},
                      {"n_sessions", n_sessions}, {"n_turns", n_turns}};
  if (intent_acc) j["intent_acc"] = *intent_acc;
  for (const auto& s : per_session) {
    const std::string p = "session." + s.session_id + ".";
    j[p + "jga"] = s.jga;
    j[p + "inform"] = s.inform ? 1 : 0;
    j[p + "success"] = s.success ? 1 : 0;
  }
  return j;
}

EvalReport EvalReport::from_flat_json(const nlohmann::json& j) {
  EvalReport r;
  r.jga = j.at("jga").get<double>();
  r.slot_f1 = j.at("slot_f1").get<double>();
  r.bleu = j.at("bleu").get<double>();
  r.inform = j.at("inform").get<double>();
  r.success = j.at("success").get<double>();
  r.combined = j.at("combined").get<double>();
  r.n_sessions = j.value("n_sessions", std::size_t{0});
  r.n_turns = j.value("n_turns", std::size_t{0});
  if (j.contains("intent_acc")) r.intent_acc = j.at("intent_acc").get<double>();
  std::map<std::string, SessionDiagnostics> sessions;
  for (const auto& [key, value] : j.items()) {
    if (key.rfind("session.", 0) != 0) continue;
    const auto dot = key.rfind('.');
    const std::string id = key.substr(8, dot - 8), field = key.substr(dot + 1);
    auto& s = sessions[id];
    s.session_id = id;
    if (field == "jga") s.jga = value.get<double>();
    else if (field == "inform") s.inform = value.get<int>() != 0;
    else if (field == "success") s.success = value.get<int>() != 0;
  }
  for (auto& [id, s] : sessions) r.per_session.push_back(s);
  return r;
}

}  // namespace toatod
