#pragma once

#include <cstddef>
#include <vector>

#include "toatod/belief.hpp"
#include "toatod/corpus.hpp"
#include "toatod/database.hpp"
#include "toatod/model.hpp"
#include "toatod/text.hpp"

namespace toatod {

// "<user> u1 <sys> r1 ... <user> ut". `systems` holds the responses of the
// turns before the current one, so users.size() == systems.size() + 1.
TokenSeq dialogue_context(const std::vector<TokenSeq>& users, const std::vector<TokenSeq>& systems);

TokenSeq nlu_input(const TokenSeq& user);
TokenSeq dst_input(const TokenSeq& context);
// context <belief> serialized-belief <db> [db_<bucket>]
TokenSeq nlg_input(const TokenSeq& context, const BeliefState& belief, MatchBucket bucket);

// Token ids with the end token appended.
TokenIds encode_with_eos(const Vocabulary& vocab, const TokenSeq& tokens);

struct Example {
  std::size_t session = 0;
  std::size_t turn = 0;
  TokenIds input;
  TokenIds target;  // ends with the end token
};

// Teacher-forced examples built from gold annotations. NLU skips turns
// without an intent label.
std::vector<Example> build_examples(const std::vector<DialogueSession>& sessions, TaskId task, const Vocabulary& vocab);

// Vocabulary covering the corpus, its ontology and its intent labels.
Vocabulary build_vocabulary(const Corpus& corpus);

}  // namespace toatod
