#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace toatod {

struct DomainSchema {
  // Informable slot -> allowed (normalized) values.
  std::map<std::string, std::vector<std::string>> informable;
  // Slots the user may ask for; responses surface them as [value_<slot>].
  std::vector<std::string> requestable;

  bool operator==(const DomainSchema&) const = default;
};

class Ontology {
 public:
  Ontology() = default;
  explicit Ontology(std::map<std::string, DomainSchema> domains);

  const std::map<std::string, DomainSchema>& domains() const { return domains_; }
  bool has_domain(const std::string& domain) const;
  bool is_informable(const std::string& domain, const std::string& slot) const;
  bool is_requestable(const std::string& domain, const std::string& slot) const;
  bool knows_value(const std::string& domain, const std::string& slot, const std::string& value) const;

  // Union of informable and requestable slots across domains; the legal
  // placeholder inventory for delexicalized responses.
  const std::set<std::string>& placeholder_slots() const { return placeholder_slots_; }

  // Every token the ontology can contribute to model inputs/outputs.
  std::vector<std::string> tokens() const;

  bool operator==(const Ontology& other) const { return domains_ == other.domains_; }

 private:
  std::map<std::string, DomainSchema> domains_;
  std::set<std::string> placeholder_slots_;
};

std::string domain_token(const std::string& domain);       // "[hotel]"
std::string placeholder_token(const std::string& slot);    // "[value_phone]"

}  // namespace toatod
