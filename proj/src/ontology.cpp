#include "toatod/ontology.hpp"

#include <algorithm>

#include "toatod/text.hpp"

namespace toatod {

Ontology::Ontology(std::map<std::string, DomainSchema> domains) : domains_(std::move(domains)) {
  for (auto& [name, schema] : domains_) {
    for (auto& [slot, values] : schema.informable) {
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      placeholder_slots_.insert(slot);
    }
    std::sort(schema.requestable.begin(), schema.requestable.end());
    schema.requestable.erase(std::unique(schema.requestable.begin(), schema.requestable.end()),
                             schema.requestable.end());
    placeholder_slots_.insert(schema.requestable.begin(), schema.requestable.end());
  }
}

bool Ontology::has_domain(const std::string& domain) const { return domains_.count(domain) > 0; }

bool Ontology::is_informable(const std::string& domain, const std::string& slot) const {
  auto it = domains_.find(domain);
  return it != domains_.end() && it->second.informable.count(slot) > 0;
}

bool Ontology::is_requestable(const std::string& domain, const std::string& slot) const {
  auto it = domains_.find(domain);
  if (it == domains_.end()) return false;
  const auto& req = it->second.requestable;
  return std::binary_search(req.begin(), req.end(), slot);
}

bool Ontology::knows_value(const std::string& domain, const std::string& slot,
                           const std::string& value) const {
  auto it = domains_.find(domain);
  if (it == domains_.end()) return false;
  auto slot_it = it->second.informable.find(slot);
  if (slot_it == it->second.informable.end()) return false;
  return std::binary_search(slot_it->second.begin(), slot_it->second.end(), value);
}

std::vector<std::string> Ontology::tokens() const {
  std::vector<std::string> out;
  for (const auto& [name, schema] : domains_) {
    out.push_back(domain_token(name));
    for (const auto& [slot, values] : schema.informable) {
      out.push_back(slot);
      for (const auto& v : values) {
        for (auto& t : tokenize(v)) out.push_back(std::move(t));
      }
    }
    for (const auto& slot : schema.requestable) out.push_back(slot);
  }
  for (const auto& slot : placeholder_slots_) out.push_back(placeholder_token(slot));
  out.push_back(",");
  return out;
}

std::string domain_token(const std::string& domain) { return "[" + domain + "]"; }

std::string placeholder_token(const std::string& slot) { return "[value_" + slot + "]"; }

}  // namespace toatod
