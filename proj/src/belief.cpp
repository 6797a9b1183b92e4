#include "toatod/belief.hpp"

#include "toatod/error.hpp"

namespace toatod {

void BeliefState::insert(const std::string& domain, const std::string& slot, const std::string& value) {
  auto [it, inserted] = slots_.emplace(SlotKey{domain, slot}, normalize_value(value));
  if (!inserted) {
    throw OntologyError("duplicate slot " + domain + "/" + slot + " in belief state");
  }
}

void BeliefState::set(const std::string& domain, const std::string& slot, const std::string& value) {
  slots_[SlotKey{domain, slot}] = normalize_value(value);
}

void BeliefState::erase(const std::string& domain, const std::string& slot) {
  slots_.erase(SlotKey{domain, slot});
}

std::optional<std::string> BeliefState::get(const std::string& domain, const std::string& slot) const {
  auto it = slots_.find(SlotKey{domain, slot});
  if (it == slots_.end()) return std::nullopt;
  return it->second;
}

std::vector<BeliefTriple> BeliefState::triples() const {
  std::vector<BeliefTriple> out;
  out.reserve(slots_.size());
  for (const auto& [key, value] : slots_) out.push_back({key.domain, key.slot, value});
  return out;
}

std::set<std::string> BeliefState::domains() const {
  std::set<std::string> out;
  for (const auto& [key, value] : slots_) out.insert(key.domain);
  return out;
}

BeliefState BeliefState::restricted_to(const std::string& domain) const {
  BeliefState out;
  for (const auto& [key, value] : slots_) {
    if (key.domain == domain) out.slots_.emplace(key, value);
  }
  return out;
}

TokenSeq serialize_belief(const BeliefState& belief) {
  TokenSeq out;
  std::string current_domain;
  bool first_slot = true;
  // std::map iteration already gives (domain, slot) lexicographic order.
  for (const auto& [key, value] : belief.slots()) {
    if (out.empty() || key.domain != current_domain) {
      current_domain = key.domain;
      out.push_back(domain_token(key.domain));
      first_slot = true;
    }
    if (!first_slot) out.push_back(",");
    first_slot = false;
    out.push_back(key.slot);
    for (auto& t : tokenize(value)) out.push_back(std::move(t));
  }
  return out;
}

namespace {

bool is_bracketed(const std::string& tok) {
  return tok.size() >= 3 && tok.front() == '[' && tok.back() == ']';
}

}  // namespace

ParsedBelief parse_belief(const TokenSeq& tokens, const Ontology& ontology) {
  ParsedBelief result;
  const std::size_t n = tokens.size();
  std::size_t i = 0;

  auto is_domain = [&](std::size_t k) {
    return is_bracketed(tokens[k]) && ontology.has_domain(tokens[k].substr(1, tokens[k].size() - 2));
  };

  while (i < n) {
    if (!is_domain(i)) {
      result.malformed = true;
      ++i;
      continue;
    }
    const std::string domain = tokens[i].substr(1, tokens[i].size() - 2);
    ++i;
    bool any_slot = false;
    // One "slot value" segment per iteration, separated by ",".
    while (i < n && !is_domain(i)) {
      const std::string& slot = tokens[i];
      std::size_t j = i + 1;
      std::string raw_value;
      while (j < n && tokens[j] != "," && !is_bracketed(tokens[j])) {
        if (!raw_value.empty()) raw_value.push_back(' ');
        raw_value += tokens[j];
        ++j;
      }
      const std::string value = normalize_value(raw_value);
      if (!ontology.is_informable(domain, slot) || value.empty() ||
          result.state.contains(SlotKey{domain, slot})) {
        result.malformed = true;
      } else {
        result.state.insert(domain, slot, value);
        any_slot = true;
      }
      i = j;
      if (i < n && tokens[i] == ",") {
        ++i;
        if (i >= n || is_domain(i)) result.malformed = true;  // dangling separator
      } else if (i < n && !is_domain(i)) {
        // Stray bracketed token that is not a known domain.
        result.malformed = true;
        ++i;
      }
    }
    if (!any_slot) result.malformed = true;
  }
  return result;
}

}  // namespace toatod
