#include "toatod/sweep.hpp"

#include <cstdio>

#include "toatod/error.hpp"
#include "toatod/pipeline.hpp"

namespace toatod {

std::size_t SweepTable::best() const {
  if (rows.empty()) throw ContractError("empty sweep table");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].report.combined > rows[best].report.combined) best = i;
  }
  return best;
}

nlohmann::json SweepTable::to_json() const {
  nlohmann::json out = {{"task", to_string(task)}, {"rows", nlohmann::json::array()}};
  for (const auto& r : rows) {
    out["rows"].push_back({{"alpha", r.alpha},
                           {"beta", r.beta},
                           {"report", r.report.to_flat_json()},
                           {"train_reward", r.reward.mean_reward},
                           {"train_bleu", r.reward.bleu},
                           {"train_success", r.reward.success},
                           {"train_jga", r.reward.jga}});
  }
  if (!rows.empty()) out["best"] = best();
  return out;
}

std::string SweepTable::to_markdown() const {
  std::string out = "| alpha | beta | JGA | BLEU | Inform | Success | Combined |\n|---|---|---|---|---|---|---|\n";
  const std::size_t b = rows.empty() ? 0 : best();
  char buf[256];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::snprintf(buf, sizeof buf, "| %.2f | %.2f | %.2f | %.2f | %.2f | %.2f | %.2f%s |\n", r.alpha, r.beta,
                  100 * r.report.jga, 100 * r.report.bleu, 100 * r.report.inform, 100 * r.report.success,
                  r.report.combined, i == b ? " *" : "");
    out += buf;
  }
  return out;
}

SweepTable hyperparameter_sweep(const SweepGrid& grid, TaskId task, const Corpus& train, const Corpus& eval,
                                const Seq2SeqModel& base, const Vocabulary& vocab,
                                const std::vector<std::string>& intent_labels, const RLConfig& cfg) {
  if (grid.alphas.empty() || grid.betas.empty()) throw ConfigError("sweep grid needs at least one alpha and one beta");
  SweepTable table{task, {}};
  for (double alpha : grid.alphas) {
    for (double beta : grid.betas) {
      RLConfig cell = cfg;
      cell.alpha = alpha;
      cell.beta = beta;
      Seq2SeqModel model = base;
      train_reinforce(model, train, vocab, task, cell);
      const PipelineContext ctx{model, vocab, eval.ontology, eval.db, intent_labels, cell.max_decode_len};
      const PipelineMode mode = task == TaskId::NLG ? PipelineMode::oracle_belief : PipelineMode::end_to_end;
      table.rows.push_back({alpha, beta, run_corpus(eval, ctx, mode).report, evaluate_reward(model, train, vocab, task, cell)});
    }
  }
  return table;
}

}  // namespace toatod
