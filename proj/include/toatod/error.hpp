#pragma once

#include <stdexcept>
#include <string>

namespace toatod {

// Corpus / predictions / checkpoint document does not follow its schema.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A belief triple, slot or placeholder that the ontology does not know.
class OntologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a precondition (shape mismatch, unequal list lengths, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Request for a task adapter that does not exist or is not allowed here.
class RoutingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Experiment config, checkpoint or adapter file incompatible with the model.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace toatod
