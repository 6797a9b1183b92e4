#include "toatod/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "toatod/error.hpp"

namespace toatod {

using nlohmann::json;

namespace {

// SAX pass that rejects duplicate object keys (nlohmann silently keeps the
// last one). Tracks the path so errors can name the offending turn.
class DuplicateKeyCheck : public nlohmann::json_sax<json> {
 public:
  bool null() override { return element(); }
  bool boolean(bool) override { return element(); }
  bool number_integer(number_integer_t) override { return element(); }
  bool number_unsigned(number_unsigned_t) override { return element(); }
  bool number_float(number_float_t, const string_t&) override { return element(); }
  bool string(string_t&) override { return element(); }
  bool binary(binary_t&) override { return element(); }
  bool start_object(std::size_t) override {
    element();
    frames_.push_back(Frame{false, -1, {}, {}});
    return true;
  }
  bool key(string_t& k) override {
    auto& f = frames_.back();
    if (!f.keys.insert(k).second) {
      const std::string where = path_string();
      if (where.find(".belief") != std::string::npos) {
        throw OntologyError(where + ": duplicate (domain, slot) key '" + k + "'");
      }
      throw ParseError(where + ": duplicate key '" + k + "'");
    }
    f.current_key = k;
    return true;
  }
  bool end_object() override {
    frames_.pop_back();
    return true;
  }
  bool start_array(std::size_t) override {
    element();
    frames_.push_back(Frame{true, -1, {}, {}});
    return true;
  }
  bool end_array() override {
    frames_.pop_back();
    return true;
  }
  bool parse_error(std::size_t position, const std::string&, const nlohmann::detail::exception& ex) override {
    throw ParseError("corpus is not valid JSON at byte " + std::to_string(position) + ": " + ex.what());
  }

 private:
  struct Frame {
    bool is_array;
    long index;
    std::set<std::string> keys;
    std::string current_key;
  };

  bool element() {
    if (!frames_.empty() && frames_.back().is_array) ++frames_.back().index;
    return true;
  }

  std::string path_string() const {
    std::string out;
    for (const auto& f : frames_) {
      if (f.is_array) {
        out += "[" + std::to_string(f.index) + "]";
      } else if (!f.current_key.empty()) {
        if (!out.empty()) out += ".";
        out += f.current_key;
      }
    }
    return out;
  }

  std::vector<Frame> frames_;
};

json parse_document(const std::string& text) {
  DuplicateKeyCheck check;
  json::sax_parse(text, &check);
  return json::parse(text);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open corpus file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw ParseError(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

Ontology ontology_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("ontology: expected an object of domains");
  std::map<std::string, DomainSchema> domains;
  for (const auto& [domain, schema_json] : j.items()) {
    const std::string where = "ontology." + domain;
    DomainSchema schema;
    for (const auto& [slot, values] : require(schema_json, "informable", where).items()) {
      if (!values.is_array()) throw ParseError(where + "." + slot + ": values must be a list");
      auto& out = schema.informable[slot];
      for (const auto& v : values) out.push_back(normalize_value(v.get<std::string>()));
    }
    for (const auto& s : require(schema_json, "requestable", where)) {
      schema.requestable.push_back(s.get<std::string>());
    }
    domains.emplace(domain, std::move(schema));
  }
  return Ontology(std::move(domains));
}

json ontology_to_json(const Ontology& ontology) {
  json j = json::object();
  for (const auto& [domain, schema] : ontology.domains()) {
    json informable = json::object();
    for (const auto& [slot, values] : schema.informable) informable[slot] = values;
    j[domain] = {{"informable", informable}, {"requestable", schema.requestable}};
  }
  return j;
}

Entity entity_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": entity must be an object");
  Entity e;
  for (const auto& [slot, value] : j.items()) {
    if (!value.is_string()) throw ParseError(where + ": entity field '" + slot + "' must be a string");
    e[slot] = normalize_value(value.get<std::string>());
  }
  return e;
}

Database database_from_json(const json& j, const Ontology& ontology) {
  Database db;
  if (!j.is_object()) throw ParseError("db: expected an object of domain tables");
  for (const auto& [domain, rows] : j.items()) {
    if (!ontology.has_domain(domain)) throw OntologyError("db: unknown domain '" + domain + "'");
    DomainTable table{domain, {}};
    std::size_t k = 0;
    for (const auto& row : rows) {
      const std::string where = "db." + domain + "[" + std::to_string(k++) + "]";
      Entity e = entity_from_json(row, where);
      if (!e.count("name")) throw ParseError(where + ": entity has no 'name'");
      table.rows.push_back(std::move(e));
    }
    db.emplace(domain, std::move(table));
  }
  return db;
}

json db_result_to_json(const DBResult& r) {
  json j;
  j["domain"] = r.domain.empty() ? json(nullptr) : json(r.domain);
  j["bucket"] = to_string(r.bucket);
  j["entity"] = r.matched_entity ? json(*r.matched_entity) : json(nullptr);
  return j;
}

DBResult db_result_from_json(const json& j, const std::string& where) {
  DBResult r;
  const json& domain = require(j, "domain", where);
  if (!domain.is_null()) r.domain = domain.get<std::string>();
  try {
    r.bucket = bucket_from_string(require_string(j, "bucket", where));
  } catch (const ParseError& e) {
    throw ParseError(where + ": " + e.what());
  }
  const json& entity = require(j, "entity", where);
  if (!entity.is_null()) r.matched_entity = entity_from_json(entity, where);
  return r;
}

DialogueSession session_from_json(const json& j, std::size_t index) {
  DialogueSession s;
  std::string where = "session #" + std::to_string(index);
  s.session_id = require_string(j, "session_id", where);
  where = "session " + s.session_id;

  const json& goal = require(j, "goal", where);
  if (!goal.is_object()) throw ParseError(where + ": goal must be an object");
  for (const auto& [domain, g] : goal.items()) {
    DomainGoal dg;
    for (const auto& [slot, value] : require(g, "inform", where + " goal").items()) {
      dg.inform.insert(domain, slot, value.get<std::string>());
    }
    for (const auto& r : require(g, "request", where + " goal")) dg.request.push_back(r.get<std::string>());
    s.goal.emplace(domain, std::move(dg));
  }

  const json& turns = require(j, "turns", where);
  if (!turns.is_array()) throw ParseError(where + ": turns must be a list");
  std::size_t t = 0;
  for (const auto& tj : turns) {
    const std::string twhere = where + " turn " + std::to_string(t++);
    Turn turn;
    turn.user_utterance = tokenize(require_string(tj, "user", twhere));
    try {
      turn.gold_belief = belief_from_json(require(tj, "belief", twhere));
    } catch (const OntologyError& e) {
      throw OntologyError(twhere + ": " + e.what());
    }
    turn.db_result = db_result_from_json(require(tj, "db", twhere), twhere + " db");
    turn.gold_response_delex = tokenize(require_string(tj, "response", twhere));
    auto intent = tj.find("intent");
    if (intent != tj.end() && !intent->is_null()) turn.intent_label = intent->get<std::string>();
    s.turns.push_back(std::move(turn));
  }
  return s;
}

json session_to_json(const DialogueSession& s) {
  json goal = json::object();
  for (const auto& [domain, g] : s.goal) {
    json inform = json::object();
    for (const auto& [key, value] : g.inform.slots()) inform[key.slot] = value;
    goal[domain] = {{"inform", inform}, {"request", g.request}};
  }
  json turns = json::array();
  for (const auto& t : s.turns) {
    json tj;
    tj["user"] = join(t.user_utterance);
    tj["belief"] = belief_to_json(t.gold_belief);
    tj["db"] = db_result_to_json(t.db_result);
    tj["response"] = join(t.gold_response_delex);
    tj["intent"] = t.intent_label ? json(*t.intent_label) : json(nullptr);
    turns.push_back(std::move(tj));
  }
  return {{"session_id", s.session_id}, {"goal", goal}, {"turns", turns}};
}

std::vector<DialogueSession> sessions_from_json(const json& doc, const Ontology& ontology) {
  const json& sessions = require(doc, "sessions", "corpus");
  if (!sessions.is_array()) throw ParseError("corpus: sessions must be a list");
  std::vector<DialogueSession> out;
  std::size_t k = 0;
  for (const auto& sj : sessions) {
    DialogueSession s = session_from_json(sj, k++);
    validate_session(s, ontology);
    out.push_back(std::move(s));
  }
  return out;
}

void check_header(const json& doc) {
  if (!doc.is_object()) throw ParseError("corpus: top level must be an object");
  auto version = doc.find("version");
  if (version != doc.end() && (!version->is_number_integer() || version->get<int>() != kCorpusFormatVersion)) {
    throw ParseError("corpus: unsupported format version");
  }
}

}  // namespace

json belief_to_json(const BeliefState& belief) {
  json j = json::object();
  for (const auto& [key, value] : belief.slots()) j[key.domain][key.slot] = value;
  return j;
}

BeliefState belief_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("belief state must be an object {domain: {slot: value}}");
  BeliefState b;
  for (const auto& [domain, slots] : j.items()) {
    if (!slots.is_object()) throw ParseError("belief." + domain + " must be an object");
    for (const auto& [slot, value] : slots.items()) {
      if (!value.is_string()) throw ParseError("belief." + domain + "." + slot + " must be a string");
      b.insert(domain, slot, value.get<std::string>());
    }
  }
  return b;
}

void validate_session(const DialogueSession& s, const Ontology& ontology) {
  const std::string where = "session " + s.session_id;
  if (s.turns.empty()) throw ParseError(where + ": session has no turns");

  for (const auto& [domain, g] : s.goal) {
    if (!ontology.has_domain(domain)) throw OntologyError(where + " goal: unknown domain '" + domain + "'");
    for (const auto& t : g.inform.triples()) {
      if (!ontology.knows_value(t.domain, t.slot, t.value)) {
        throw OntologyError(where + " goal: unknown informable " + t.domain + "/" + t.slot + "=" + t.value);
      }
    }
    for (const auto& r : g.request) {
      if (!ontology.is_requestable(domain, r)) {
        throw OntologyError(where + " goal: unknown requestable " + domain + "/" + r);
      }
    }
  }

  const BeliefState* previous = nullptr;
  for (std::size_t i = 0; i < s.turns.size(); ++i) {
    const Turn& turn = s.turns[i];
    const std::string twhere = where + " turn " + std::to_string(i);
    for (const auto& t : turn.gold_belief.triples()) {
      if (!ontology.has_domain(t.domain)) throw OntologyError(twhere + ": unknown domain '" + t.domain + "'");
      if (!ontology.is_informable(t.domain, t.slot)) {
        throw OntologyError(twhere + ": unknown slot " + t.domain + "/" + t.slot);
      }
      if (!ontology.knows_value(t.domain, t.slot, t.value)) {
        throw OntologyError(twhere + ": value '" + t.value + "' not in ontology for " + t.domain + "/" + t.slot);
      }
    }
    if (previous) {
      for (const auto& [key, value] : previous->slots()) {
        if (!turn.gold_belief.contains(key)) {
          throw ParseError(twhere + ": belief state drops " + key.domain + "/" + key.slot +
                           " (states must be cumulative)");
        }
      }
    }
    previous = &turn.gold_belief;

    const DBResult& db = turn.db_result;
    if ((db.bucket == MatchBucket::none) == db.matched_entity.has_value()) {
      throw ParseError(twhere + ": DB bucket '" + to_string(db.bucket) + "' inconsistent with matched entity");
    }
    if (!db.domain.empty() && !ontology.has_domain(db.domain)) {
      throw OntologyError(twhere + ": DB result for unknown domain '" + db.domain + "'");
    }

    for (const auto& tok : turn.gold_response_delex) {
      if (tok.size() < 2 || tok.front() != '[' || tok.back() != ']') continue;
      const std::string inner = tok.substr(1, tok.size() - 2);
      if (inner.rfind("value_", 0) != 0 || !ontology.placeholder_slots().count(inner.substr(6))) {
        throw OntologyError(twhere + ": unknown placeholder " + tok);
      }
    }
  }
}

std::vector<DialogueSession> parse_corpus(const std::filesystem::path& path, const Ontology& ontology) {
  const json doc = parse_document(read_file(path));
  check_header(doc);
  return sessions_from_json(doc, ontology);
}

Corpus corpus_from_json(const std::string& text) {
  const json doc = parse_document(text);
  check_header(doc);
  Corpus c;
  c.ontology = ontology_from_json(require(doc, "ontology", "corpus"));
  c.db = database_from_json(require(doc, "db", "corpus"), c.ontology);
  c.sessions = sessions_from_json(doc, c.ontology);
  return c;
}

Corpus load_corpus(const std::filesystem::path& path) { return corpus_from_json(read_file(path)); }

json corpus_to_json(const Corpus& corpus) {
  json db = json::object();
  for (const auto& [domain, table] : corpus.db) db[domain] = table.rows;
  json sessions = json::array();
  for (const auto& s : corpus.sessions) sessions.push_back(session_to_json(s));
  return {{"format", "toatod-corpus"},
          {"version", kCorpusFormatVersion},
          {"ontology", ontology_to_json(corpus.ontology)},
          {"db", db},
          {"sessions", sessions}};
}

std::string corpus_to_string(const Corpus& corpus) { return corpus_to_json(corpus).dump(1); }

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write corpus file " + path.string());
  out << corpus_to_string(corpus) << "\n";
}

std::vector<std::string> corpus_tokens(const Corpus& corpus) {
  std::set<std::string> tokens;
  for (auto& t : corpus.ontology.tokens()) tokens.insert(std::move(t));
  for (const auto& s : corpus.sessions) {
    for (const auto& turn : s.turns) {
      tokens.insert(turn.user_utterance.begin(), turn.user_utterance.end());
      tokens.insert(turn.gold_response_delex.begin(), turn.gold_response_delex.end());
      if (turn.intent_label) tokens.insert(*turn.intent_label);
    }
  }
  return {tokens.begin(), tokens.end()};
}

std::vector<std::string> intent_labels(const std::vector<DialogueSession>& sessions) {
  std::set<std::string> labels;
  for (const auto& s : sessions) {
    for (const auto& t : s.turns) {
      if (t.intent_label) labels.insert(*t.intent_label);
    }
  }
  return {labels.begin(), labels.end()};
}

}  // namespace toatod
