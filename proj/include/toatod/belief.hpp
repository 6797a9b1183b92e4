#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "toatod/ontology.hpp"
#include "toatod/text.hpp"

namespace toatod {

struct SlotKey {
  std::string domain;
  std::string slot;
  auto operator<=>(const SlotKey&) const = default;
};

struct BeliefTriple {
  std::string domain;
  std::string slot;
  std::string value;
  auto operator<=>(const BeliefTriple&) const = default;
};

// Set of (domain, slot, value) triples with at most one value per slot.
// Values are stored in normalized form.
class BeliefState {
 public:
  BeliefState() = default;

  // Adds a triple; throws OntologyError if (domain, slot) already holds a value.
  void insert(const std::string& domain, const std::string& slot, const std::string& value);
  // Adds or overwrites.
  void set(const std::string& domain, const std::string& slot, const std::string& value);
  void erase(const std::string& domain, const std::string& slot);

  std::optional<std::string> get(const std::string& domain, const std::string& slot) const;
  bool contains(const SlotKey& key) const { return slots_.count(key) > 0; }

  const std::map<SlotKey, std::string>& slots() const { return slots_; }
  std::vector<BeliefTriple> triples() const;
  std::set<std::string> domains() const;
  BeliefState restricted_to(const std::string& domain) const;

  std::size_t size() const { return slots_.size(); }
  bool empty() const { return slots_.empty(); }

  bool operator==(const BeliefState&) const = default;

 private:
  std::map<SlotKey, std::string> slots_;
};

// "[domain] slot value , slot value [domain2] slot value", domains and slots
// in lexicographic order.
TokenSeq serialize_belief(const BeliefState& belief);

struct ParsedBelief {
  BeliefState state;
  bool malformed = false;
};

// Lenient inverse of serialize_belief: well-formed segments are kept, anything
// else sets `malformed` and is dropped. Never throws on bad input.
ParsedBelief parse_belief(const TokenSeq& tokens, const Ontology& ontology);

}  // namespace toatod
