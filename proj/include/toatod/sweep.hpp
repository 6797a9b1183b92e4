#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "toatod/corpus.hpp"
#include "toatod/metrics.hpp"
#include "toatod/model.hpp"
#include "toatod/trainer.hpp"

namespace toatod {

struct SweepGrid {
  std::vector<double> alphas;
  std::vector<double> betas;
};

struct SweepRow {
  double alpha = 0.0;
  double beta = 0.0;
  EvalReport report;
  RewardSummary reward;  // on the training corpus after RL
};

struct SweepTable {
  TaskId task = TaskId::NLG;
  std::vector<SweepRow> rows;

  std::size_t best() const;  // highest combined score, first on ties
  nlohmann::json to_json() const;
  // Rows (alpha, beta) with the best cell marked by '*'.
  std::string to_markdown() const;
};

// One RL run + evaluation per (alpha, beta), each starting from a copy of
// `base`. NLG cells evaluate with oracle beliefs, DST cells end to end.
SweepTable hyperparameter_sweep(const SweepGrid& grid, TaskId task, const Corpus& train, const Corpus& eval,
                                const Seq2SeqModel& base, const Vocabulary& vocab,
                                const std::vector<std::string>& intent_labels, const RLConfig& cfg);

}  // namespace toatod
