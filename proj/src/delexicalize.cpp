#include "toatod/delexicalize.hpp"

#include <algorithm>

namespace toatod {

namespace {

struct Candidate {
  TokenSeq tokens;
  std::string slot;
};

}  // namespace

TokenSeq delexicalize(const TokenSeq& response, const BeliefState& belief, const DBResult& db,
                      const Ontology& ontology) {
  std::vector<Candidate> candidates;
  auto add = [&](const std::string& slot, const std::string& value) {
    if (!ontology.placeholder_slots().count(slot)) return;
    TokenSeq toks = tokenize(normalize_value(value));
    if (!toks.empty()) candidates.push_back({std::move(toks), slot});
  };
  for (const auto& t : belief.triples()) add(t.slot, t.value);
  if (db.matched_entity) {
    for (const auto& [slot, value] : *db.matched_entity) add(slot, value);
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.tokens.size() != b.tokens.size()) return a.tokens.size() > b.tokens.size();
    return a.slot < b.slot;
  });

  TokenSeq normalized;
  normalized.reserve(response.size());
  for (const auto& tok : response) normalized.push_back(normalize_value(tok));

  TokenSeq out;
  std::size_t i = 0;
  while (i < response.size()) {
    const Candidate* hit = nullptr;
    for (const auto& c : candidates) {
      if (i + c.tokens.size() > response.size()) continue;
      if (std::equal(c.tokens.begin(), c.tokens.end(), normalized.begin() + static_cast<long>(i))) {
        hit = &c;
        break;
      }
    }
    if (hit) {
      out.push_back(placeholder_token(hit->slot));
      i += hit->tokens.size();
    } else {
      out.push_back(response[i]);
      ++i;
    }
  }
  return out;
}

}  // namespace toatod
