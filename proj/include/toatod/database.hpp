#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "toatod/belief.hpp"

namespace toatod {

// Slot -> normalized value. Every entity carries at least "name".
using Entity = std::map<std::string, std::string>;

struct DomainTable {
  std::string domain;
  std::vector<Entity> rows;
};

using Database = std::map<std::string, DomainTable>;

enum class MatchBucket { none, one, few, many };

MatchBucket bucket_for_count(std::size_t matches);
std::string to_string(MatchBucket bucket);
MatchBucket bucket_from_string(const std::string& name);
std::string bucket_token(MatchBucket bucket);  // "[db_one]"

struct DBResult {
  std::string domain;  // empty when no domain was active
  MatchBucket bucket = MatchBucket::none;
  std::optional<Entity> matched_entity;  // first matching row; present iff bucket != none

  bool operator==(const DBResult&) const = default;
};

bool entity_satisfies(const Entity& entity, const BeliefState& constraints);

// Constrains the table's rows by the belief's triples for table.domain.
// An empty constraint set matches every row.
DBResult db_lookup(const BeliefState& belief, const DomainTable& table);

// Looks up the active domain. Without an explicit domain the belief must name
// exactly one domain; otherwise there is no active domain and the result is none.
DBResult db_lookup(const BeliefState& belief, const Database& db,
                   const std::optional<std::string>& domain = std::nullopt);

// Domain the dialogue is currently about: the (lexicographically first) domain
// whose constraints changed since `previous`, else `previous_active`, else the
// belief's only domain. Empty string when undetermined.
std::string active_domain(const BeliefState& current, const BeliefState& previous,
                          const std::string& previous_active);

}  // namespace toatod
