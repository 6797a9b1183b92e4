#include "toatod/synthetic.hpp"

#include <algorithm>
#include <random>

#include "toatod/delexicalize.hpp"
#include "toatod/error.hpp"

namespace toatod {

namespace {

struct SlotPool {
  const char* slot;
  std::vector<const char*> values;
};

struct DomainPool {
  const char* domain;
  std::vector<SlotPool> informable;
  std::vector<const char*> requestable;  // besides "name"
};

// Value words are disjoint from each other and from the template words below.
const std::vector<DomainPool>& domain_pools() {
  static const std::vector<DomainPool> pools = {
      {"hotel",
       {{"area", {"north", "south", "east", "west", "centre", "riverside", "uptown", "harbour", "airport", "oldtown"}},
        {"pricerange",
         {"cheap", "moderate", "expensive", "budget", "luxury", "midrange", "premium", "economy", "discount", "elite"}},
        {"type", {"guesthouse", "lodge", "inn", "hostel", "motel", "resort", "cottage", "chalet", "villa", "cabin"}},
        {"stars", {"zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"}}},
       {"address", "phone", "postcode"}},
      {"restaurant",
       {{"food", {"italian", "chinese", "indian", "french", "thai", "korean", "greek", "mexican", "spanish", "turkish"}},
        {"pricerange",
         {"cheap", "moderate", "expensive", "budget", "luxury", "midrange", "premium", "economy", "discount", "elite"}},
        {"area", {"north", "south", "east", "west", "centre", "riverside", "uptown", "harbour", "airport", "oldtown"}},
        {"seating",
         {"indoor", "outdoor", "terrace", "rooftop", "garden", "bar", "patio", "lounge", "balcony", "courtyard"}}},
       {"address", "phone", "postcode"}},
      {"train",
       {{"departure", {"cambridge", "london", "ely", "norwich", "oxford", "bristol", "leeds", "york", "bath", "derby"}},
        {"destination",
         {"cambridge", "london", "ely", "norwich", "oxford", "bristol", "leeds", "york", "bath", "derby"}},
        {"day", {"monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday", "today", "tomorrow",
                 "tonight"}},
        {"leaveat", {"morning", "noon", "afternoon", "evening", "night", "dawn", "midnight", "early", "late", "midday"}}},
       {"duration", "price"}},
  };
  return pools;
}

const std::vector<const char*> kNameWords = {"acorn", "birch", "cedar", "dove", "ember", "fern", "grove", "hazel",
                                             "iris", "juniper", "kestrel", "linden", "maple", "nettle", "oak",
                                             "poplar", "quill", "rowan", "sorrel", "thistle", "umber", "willow"};

class Generator {
 public:
  Generator(std::uint64_t seed, const OntologySize& size) : rng_(seed), size_(size) {}

  Corpus run(int n_sessions) {
    Corpus corpus;
    build_ontology(corpus);
    build_db(corpus);
    for (int i = 0; i < n_sessions; ++i) corpus.sessions.push_back(make_session(corpus, i));
    return corpus;
  }

 private:
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

  const DomainPool& pool(const std::string& domain) const {
    for (const auto& p : domain_pools()) {
      if (domain == p.domain) return p;
    }
    throw ContractError("unknown synthetic domain " + domain);
  }

  void build_ontology(Corpus& corpus) {
    std::map<std::string, DomainSchema> domains;
    for (int d = 0; d < size_.n_domains; ++d) {
      const DomainPool& p = domain_pools()[static_cast<std::size_t>(d)];
      DomainSchema schema;
      for (int s = 0; s < size_.n_slots; ++s) {
        const SlotPool& sp = p.informable[static_cast<std::size_t>(s)];
        auto& values = schema.informable[sp.slot];
        for (int v = 0; v < size_.n_values; ++v) values.emplace_back(sp.values[static_cast<std::size_t>(v)]);
      }
      schema.requestable.emplace_back("name");
      for (const char* r : p.requestable) schema.requestable.emplace_back(r);
      domains.emplace(p.domain, std::move(schema));
    }
    corpus.ontology = Ontology(std::move(domains));
  }

  std::string digits(int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s.push_back(static_cast<char>('0' + uniform(0, 9)));
    return s;
  }

  void build_db(Corpus& corpus) {
    int name_cursor = 0;
    for (const auto& [domain, schema] : corpus.ontology.domains()) {
      DomainTable table{domain, {}};
      for (int e = 0; e < size_.n_entities; ++e) {
        Entity row;
        for (const auto& [slot, values] : schema.informable) {
          row[slot] = values[static_cast<std::size_t>(uniform(0, static_cast<int>(values.size()) - 1))];
        }
        if (domain == "train" && row.count("departure") && row.count("destination")) {
          const auto& values = schema.informable.at("destination");
          while (row["destination"] == row["departure"]) {
            row["destination"] = values[static_cast<std::size_t>(uniform(0, static_cast<int>(values.size()) - 1))];
          }
        }
        if (domain == "train") {
          row["name"] = "tr" + digits(4);
          row["duration"] = std::to_string(uniform(20, 180)) + " minutes";
          row["price"] = std::to_string(uniform(5, 60)) + " pounds";
        } else {
          const char* word = kNameWords[static_cast<std::size_t>(name_cursor++) % kNameWords.size()];
          row["name"] = std::string(word) + " " + (domain == "hotel" ? "house" : "kitchen") +
                        (name_cursor > static_cast<int>(kNameWords.size()) ? " " + digits(2) : "");
          row["address"] = std::to_string(uniform(1, 99)) + " " + kNameWords[static_cast<std::size_t>(uniform(0, 21))] +
                           " road";
          row["phone"] = "01223 " + digits(6);
          row["postcode"] = "cb" + std::to_string(uniform(1, 9)) + " " + digits(1) + "ab";
        }
        table.rows.push_back(std::move(row));
      }
      corpus.db.emplace(domain, std::move(table));
    }
  }

  static std::string phrase(const BeliefState& part, const std::string& domain) {
    std::string out;
    const BeliefState scoped = part.restricted_to(domain);
    for (const auto& [key, value] : scoped.slots()) {
      if (!out.empty()) out += " and ";
      out += key.slot + " " + value;
    }
    return out;
  }

  Turn make_turn(const Corpus& corpus, const std::string& user, const BeliefState& belief,
                 const std::string& domain, const std::string& raw_response, std::optional<std::string> intent) {
    Turn t;
    t.user_utterance = tokenize(user);
    t.gold_belief = belief;
    t.db_result = db_lookup(belief, corpus.db, domain);
    t.gold_response_delex = delexicalize(tokenize(raw_response), belief, t.db_result, corpus.ontology);
    t.intent_label = std::move(intent);
    return t;
  }

  DialogueSession make_session(const Corpus& corpus, int index) {
    DialogueSession s;
    char id[16];
    std::snprintf(id, sizeof id, "s%04d", index);
    s.session_id = id;

    std::vector<std::string> domains;
    for (const auto& [d, schema] : corpus.ontology.domains()) domains.push_back(d);
    std::shuffle(domains.begin(), domains.end(), rng_);
    const int n_session_domains = (domains.size() >= 2 && coin(0.3)) ? 2 : 1;
    domains.resize(static_cast<std::size_t>(n_session_domains));

    BeliefState belief;
    for (std::size_t di = 0; di < domains.size(); ++di) {
      const std::string& domain = domains[di];
      const DomainSchema& schema = corpus.ontology.domains().at(domain);
      const DomainTable& table = corpus.db.at(domain);
      const Entity& target = table.rows[static_cast<std::size_t>(uniform(0, static_cast<int>(table.rows.size()) - 1))];

      std::vector<std::string> slots;
      for (const auto& [slot, values] : schema.informable) slots.push_back(slot);
      std::shuffle(slots.begin(), slots.end(), rng_);
      const int k = uniform(1, std::min(3, static_cast<int>(slots.size())));
      slots.resize(static_cast<std::size_t>(k));

      std::vector<std::string> requestable;
      for (const auto& r : schema.requestable) {
        if (r != "name") requestable.push_back(r);
      }
      std::shuffle(requestable.begin(), requestable.end(), rng_);
      requestable.resize(static_cast<std::size_t>(uniform(1, std::min(2, static_cast<int>(requestable.size())))));
      std::sort(requestable.begin(), requestable.end());

      DomainGoal goal;
      for (const auto& slot : slots) goal.inform.insert(domain, slot, target.at(slot));
      goal.request = requestable;
      s.goal.emplace(domain, goal);

      const std::string opener = di == 0 ? "i am looking for a " : "i also need a ";
      const std::string find_intent = "find_" + domain;
      const bool split = k >= 2 && coin(0.5);
      if (split) {
        BeliefState first;
        first.insert(domain, slots[0], target.at(slots[0]));
        belief.set(domain, slots[0], target.at(slots[0]));
        s.turns.push_back(make_turn(corpus, opener + domain + " with " + phrase(first, domain), belief, domain,
                                    "which " + slots[1] + " would you like", find_intent));
        BeliefState rest;
        for (std::size_t i = 1; i < slots.size(); ++i) {
          rest.insert(domain, slots[i], target.at(slots[i]));
          belief.set(domain, slots[i], target.at(slots[i]));
        }
        const DBResult db = db_lookup(belief, corpus.db, domain);
        s.turns.push_back(make_turn(corpus, "i would like " + phrase(rest, domain), belief, domain,
                                    offer(*db.matched_entity, slots.back(), belief, domain), find_intent));
      } else {
        for (const auto& slot : slots) belief.set(domain, slot, target.at(slot));
        const DBResult db = db_lookup(belief, corpus.db, domain);
        s.turns.push_back(make_turn(corpus, opener + domain + " with " + phrase(belief, domain), belief, domain,
                                    offer(*db.matched_entity, slots.back(), belief, domain), find_intent));
      }

      const DBResult db = db_lookup(belief, corpus.db, domain);
      std::string ask = "what is the ";
      std::string answer;
      for (std::size_t i = 0; i < requestable.size(); ++i) {
        if (i) {
          ask += " and the ";
          answer += " and ";
        }
        ask += requestable[i];
        answer += "the " + requestable[i] + " is " + db.matched_entity->at(requestable[i]);
      }
      s.turns.push_back(make_turn(corpus, ask, belief, domain, answer, std::string("request_info")));
    }
    s.turns.push_back(make_turn(corpus, "thank you goodbye", belief, domains.back(), "you are welcome , goodbye",
                                std::string("goodbye")));
    return s;
  }

  static std::string offer(const Entity& entity, const std::string& slot, const BeliefState& belief,
                           const std::string& domain) {
    return "i recommend " + entity.at("name") + " , it has " + slot + " " + *belief.get(domain, slot);
  }

  std::mt19937_64 rng_;
  OntologySize size_;
};

}  // namespace

Corpus generate_synthetic_corpus(std::uint64_t seed, int n_sessions, const OntologySize& size) {
  if (size.n_domains < 1 || size.n_domains > 3 || size.n_slots < 1 || size.n_slots > 4 || size.n_values < 2 ||
      size.n_values > 10 || size.n_entities < 1 || n_sessions < 0) {
    throw ContractError("synthetic ontology size out of bounds (<=3 domains, <=4 slots, 2..10 values)");
  }
  Corpus corpus = Generator(seed, size).run(n_sessions);
  for (const auto& s : corpus.sessions) validate_session(s, corpus.ontology);
  return corpus;
}

}  // namespace toatod
