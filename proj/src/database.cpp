#include "toatod/database.hpp"

#include "toatod/error.hpp"

namespace toatod {

MatchBucket bucket_for_count(std::size_t matches) {
  if (matches == 0) return MatchBucket::none;
  if (matches == 1) return MatchBucket::one;
  if (matches <= 3) return MatchBucket::few;
  return MatchBucket::many;
}

std::string to_string(MatchBucket bucket) {
  switch (bucket) {
    case MatchBucket::none: return "none";
    case MatchBucket::one: return "one";
    case MatchBucket::few: return "few";
    case MatchBucket::many: return "many";
  }
  return "none";
}

MatchBucket bucket_from_string(const std::string& name) {
  if (name == "none") return MatchBucket::none;
  if (name == "one") return MatchBucket::one;
  if (name == "few") return MatchBucket::few;
  if (name == "many") return MatchBucket::many;
  throw ParseError("unknown DB match bucket '" + name + "'");
}

std::string bucket_token(MatchBucket bucket) { return "[db_" + to_string(bucket) + "]"; }

bool entity_satisfies(const Entity& entity, const BeliefState& constraints) {
  for (const auto& [key, value] : constraints.slots()) {
    auto it = entity.find(key.slot);
    if (it == entity.end() || it->second != value) return false;
  }
  return true;
}

DBResult db_lookup(const BeliefState& belief, const DomainTable& table) {
  const BeliefState constraints = belief.restricted_to(table.domain);
  DBResult result;
  result.domain = table.domain;
  std::size_t matches = 0;
  for (const auto& row : table.rows) {
    if (!entity_satisfies(row, constraints)) continue;
    if (matches == 0) result.matched_entity = row;
    ++matches;
  }
  result.bucket = bucket_for_count(matches);
  return result;
}

DBResult db_lookup(const BeliefState& belief, const Database& db,
                   const std::optional<std::string>& domain) {
  std::string active;
  if (domain && !domain->empty()) {
    active = *domain;
  } else {
    const auto domains = belief.domains();
    if (domains.size() == 1) active = *domains.begin();
  }
  if (active.empty()) return DBResult{};
  auto it = db.find(active);
  if (it == db.end()) {
    DBResult none;
    none.domain = active;
    return none;
  }
  return db_lookup(belief, it->second);
}

std::string active_domain(const BeliefState& current, const BeliefState& previous,
                          const std::string& previous_active) {
  for (const auto& domain : current.domains()) {
    if (current.restricted_to(domain) != previous.restricted_to(domain)) return domain;
  }
  if (!previous_active.empty()) return previous_active;
  const auto domains = current.domains();
  return domains.size() == 1 ? *domains.begin() : std::string{};
}

}  // namespace toatod
