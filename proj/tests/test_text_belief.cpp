#include <random>

#include "doctest.h"
#include "toatod/belief.hpp"
#include "toatod/error.hpp"
#include "toatod/synthetic.hpp"

using namespace toatod;

namespace {

Ontology small_ontology() {
  std::map<std::string, DomainSchema> d;
  d["hotel"].informable["area"] = {"north", "south"};
  d["hotel"].informable["name"] = {"cheap restaurant", "acorn house"};
  d["hotel"].requestable = {"phone"};
  d["train"].informable["day"] = {"monday", "friday"};
  d["train"].informable["departure"] = {"cambridge", "london"};
  d["restaurant"].informable["food"] = {"italian", "thai"};
  return Ontology(d);
}

}  // namespace

TEST_CASE("normalize_value lowercases, strips punctuation and collapses whitespace") {
  CHECK(normalize_value("  The  Acorn-House, ") == "the acornhouse");
  CHECK(normalize_value("01223 356354") == "01223 356354");
  CHECK(normalize_value("") == "");
  CHECK(normalize_value("...") == "");
}

TEST_CASE("vocabulary ids are stable and reserved tokens come first") {
  Vocabulary v({"zebra", "apple", "<eos>", "apple"});
  CHECK(v.id("<pad>") == Vocabulary::kPad);
  CHECK(v.id("<eos>") == Vocabulary::kEos);
  CHECK(v.size() == Vocabulary::reserved_tokens().size() + 2);
  CHECK(v.id("apple") < v.id("zebra"));
  CHECK(v.id("missing") == Vocabulary::kUnk);
  CHECK(v.decode(v.encode({"apple", "<eos>", "zebra"})) == TokenSeq{"apple"});
}

TEST_CASE("belief state rejects duplicate slots and normalizes values") {
  BeliefState b;
  b.insert("hotel", "area", " North ");
  CHECK(b.get("hotel", "area") == "north");
  CHECK_THROWS_AS(b.insert("hotel", "area", "south"), OntologyError);
  b.set("hotel", "area", "south");
  CHECK(b.size() == 1);
}

TEST_CASE("serialize_belief uses the fixed linearization") {
  BeliefState b;
  b.insert("hotel", "area", "north");
  CHECK(join(serialize_belief(b)) == "[hotel] area north");

  b.insert("train", "day", "monday");
  b.insert("hotel", "name", "cheap restaurant");
  CHECK(join(serialize_belief(b)) == "[hotel] area north , name cheap restaurant [train] day monday");
  CHECK(serialize_belief(BeliefState{}).empty());
}

TEST_CASE("parse_belief inverts serialization on a three-domain state") {
  const Ontology o = small_ontology();
  BeliefState b;
  b.insert("hotel", "area", "north");
  b.insert("hotel", "name", "cheap restaurant");
  b.insert("train", "day", "friday");
  b.insert("train", "departure", "london");
  b.insert("restaurant", "food", "thai");
  const ParsedBelief p = parse_belief(serialize_belief(b), o);
  CHECK_FALSE(p.malformed);
  CHECK(p.state == b);
}

TEST_CASE("parse_belief is lenient on malformed sequences") {
  const Ontology o = small_ontology();
  SUBCASE("missing value") {
    const ParsedBelief p = parse_belief(tokenize("[hotel] area"), o);
    CHECK(p.malformed);
    CHECK(p.state.empty());
  }
  SUBCASE("garbage keeps well-formed segments") {
    const ParsedBelief p = parse_belief(tokenize("north [hotel] area north , bogus x [zoo] a b [train] day monday ,"), o);
    CHECK(p.malformed);
    CHECK(p.state.size() == 2);
    CHECK(p.state.get("hotel", "area") == "north");
    CHECK(p.state.get("train", "day") == "monday");
  }
  SUBCASE("duplicate slot keeps the first value") {
    const ParsedBelief p = parse_belief(tokenize("[hotel] area north , area south"), o);
    CHECK(p.malformed);
    CHECK(p.state.get("hotel", "area") == "north");
  }
  SUBCASE("empty input") {
    const ParsedBelief p = parse_belief({}, o);
    CHECK_FALSE(p.malformed);
    CHECK(p.state.empty());
  }
  SUBCASE("random token soup never throws") {
    std::mt19937 rng(7);
    const TokenSeq pool = {"[hotel]", "[train]", "area", "day", ",", "north", "monday", "[value_phone]", "x"};
    for (int i = 0; i < 500; ++i) {
      TokenSeq seq;
      const int n = static_cast<int>(rng() % 12);
      for (int k = 0; k < n; ++k) seq.push_back(pool[rng() % pool.size()]);
      CHECK_NOTHROW(parse_belief(seq, o));
    }
  }
}

TEST_CASE("property: parse(serialize(b)) == b over random ontology-conformant states") {
  const Corpus c = generate_synthetic_corpus(3, 0, OntologySize{3, 4, 10, 4});
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    BeliefState b;
    for (const auto& [domain, schema] : c.ontology.domains()) {
      for (const auto& [slot, values] : schema.informable) {
        if (rng() % 2) b.insert(domain, slot, values[rng() % values.size()]);
      }
    }
    const ParsedBelief p = parse_belief(serialize_belief(b), c.ontology);
    REQUIRE_FALSE(p.malformed);
    REQUIRE(p.state == b);
  }
}
