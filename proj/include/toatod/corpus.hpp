#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "toatod/belief.hpp"
#include "toatod/database.hpp"
#include "toatod/ontology.hpp"
#include "toatod/text.hpp"

namespace toatod {

struct Turn {
  TokenSeq user_utterance;
  BeliefState gold_belief;  // cumulative over the session
  DBResult db_result;
  TokenSeq gold_response_delex;
  std::optional<std::string> intent_label;
};

struct DomainGoal {
  BeliefState inform;  // constraints, all in one domain
  std::vector<std::string> request;
};

using Goal = std::map<std::string, DomainGoal>;

struct DialogueSession {
  std::string session_id;
  Goal goal;
  std::vector<Turn> turns;
};

struct Corpus {
  Ontology ontology;
  Database db;
  std::vector<DialogueSession> sessions;
};

inline constexpr int kCorpusFormatVersion = 1;

// Reads the corpus document at `path`, validating its sessions against the
// given ontology (not the one embedded in the file).
std::vector<DialogueSession> parse_corpus(const std::filesystem::path& path, const Ontology& ontology);

// Reads the whole document and validates sessions against its own ontology.
Corpus load_corpus(const std::filesystem::path& path);
Corpus corpus_from_json(const std::string& text);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
nlohmann::json corpus_to_json(const Corpus& corpus);
std::string corpus_to_string(const Corpus& corpus);

// Shared by the corpus and predictions schemas: {domain: {slot: value}}.
nlohmann::json belief_to_json(const BeliefState& belief);
BeliefState belief_from_json(const nlohmann::json& j);

// Throws OntologyError/ParseError on any invariant violation; `where` prefixes
// messages (e.g. "session s0003").
void validate_session(const DialogueSession& session, const Ontology& ontology);

// All tokens a model needs to read or write this corpus.
std::vector<std::string> corpus_tokens(const Corpus& corpus);

// Sorted unique intent labels present in the corpus.
std::vector<std::string> intent_labels(const std::vector<DialogueSession>& sessions);

}  // namespace toatod
