#include "toatod/task_io.hpp"

#include "toatod/error.hpp"

namespace toatod {

TokenSeq dialogue_context(const std::vector<TokenSeq>& users, const std::vector<TokenSeq>& systems) {
  if (users.size() != systems.size() + 1) throw ContractError("dialogue_context: need one more user turn than system turns");
  TokenSeq out;
  for (std::size_t i = 0; i < users.size(); ++i) {
    out.push_back("<user>");
    out.insert(out.end(), users[i].begin(), users[i].end());
    if (i < systems.size()) {
      out.push_back("<sys>");
      out.insert(out.end(), systems[i].begin(), systems[i].end());
    }
  }
  return out;
}

TokenSeq nlu_input(const TokenSeq& user) {
  TokenSeq out = {"<user>"};
  out.insert(out.end(), user.begin(), user.end());
  return out;
}

TokenSeq dst_input(const TokenSeq& context) { return context; }

TokenSeq nlg_input(const TokenSeq& context, const BeliefState& belief, MatchBucket bucket) {
  TokenSeq out = context;
  out.push_back("<belief>");
  const TokenSeq b = serialize_belief(belief);
  out.insert(out.end(), b.begin(), b.end());
  out.push_back("<db>");
  out.push_back(bucket_token(bucket));
  return out;
}

TokenIds encode_with_eos(const Vocabulary& vocab, const TokenSeq& tokens) {
  TokenIds ids = vocab.encode(tokens);
  ids.push_back(Vocabulary::kEos);
  return ids;
}

std::vector<Example> build_examples(const std::vector<DialogueSession>& sessions, TaskId task, const Vocabulary& vocab) {
  std::vector<Example> out;
  for (std::size_t si = 0; si < sessions.size(); ++si) {
    const auto& s = sessions[si];
    std::vector<TokenSeq> users, systems;
    for (std::size_t ti = 0; ti < s.turns.size(); ++ti) {
      const Turn& turn = s.turns[ti];
      users.push_back(turn.user_utterance);
      Example e{si, ti, {}, {}};
      switch (task) {
        case TaskId::NLU:
          if (!turn.intent_label) break;
          e.input = encode_with_eos(vocab, nlu_input(turn.user_utterance));
          e.target = encode_with_eos(vocab, {*turn.intent_label});
          break;
        case TaskId::DST:
          e.input = encode_with_eos(vocab, dst_input(dialogue_context(users, systems)));
          e.target = encode_with_eos(vocab, serialize_belief(turn.gold_belief));
          break;
        case TaskId::NLG:
          e.input = encode_with_eos(
              vocab, nlg_input(dialogue_context(users, systems), turn.gold_belief, turn.db_result.bucket));
          e.target = encode_with_eos(vocab, turn.gold_response_delex);
          break;
      }
      if (!e.input.empty()) out.push_back(std::move(e));
      systems.push_back(turn.gold_response_delex);
    }
  }
  return out;
}

Vocabulary build_vocabulary(const Corpus& corpus) { return Vocabulary(corpus_tokens(corpus)); }

}  // namespace toatod
