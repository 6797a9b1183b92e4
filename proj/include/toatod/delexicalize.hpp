#pragma once

#include "toatod/belief.hpp"
#include "toatod/database.hpp"
#include "toatod/ontology.hpp"
#include "toatod/text.hpp"

namespace toatod {

// Replaces every occurrence of a belief value or DB-entity value with
// [value_<slot>]. Scans left to right and takes the longest value matching at
// each position; among equally long values the smaller slot name wins.
// Tokens are compared after normalize_value, so trailing punctuation on a
// surface token does not prevent a match.
TokenSeq delexicalize(const TokenSeq& response, const BeliefState& belief, const DBResult& db,
                      const Ontology& ontology);

}  // namespace toatod
