#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "toatod/checkpoint.hpp"
#include "toatod/config.hpp"
#include "toatod/corpus.hpp"
#include "toatod/error.hpp"
#include "toatod/metrics.hpp"
#include "toatod/pipeline.hpp"
#include "toatod/sweep.hpp"
#include "toatod/synthetic.hpp"
#include "toatod/task_io.hpp"
#include "toatod/trainer.hpp"

using namespace toatod;
namespace fs = std::filesystem;

namespace {

// Options shared by the commands that read an experiment config.
struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;
  std::optional<double> alpha, beta, lr;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::string train, eval, output_dir;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", file, "experiment config file (JSON)");
    app->add_option("--set", sets, "override a config key, e.g. --set rl.beta=0.4")->take_all();
    app->add_option("--alpha", alpha, "rl.alpha");
    app->add_option("--beta", beta, "rl.beta");
    app->add_option("--lr", lr, "learning rate of the selected stage");
    app->add_option("--epochs", epochs, "epochs of the selected stage");
    app->add_option("--seed", seed, "rl.seed");
    app->add_option("--train", train, "data.train");
    app->add_option("--eval", eval, "data.eval");
    app->add_option("-o,--output-dir", output_dir, "output_dir");
  }

  // Stage-dependent keys for --lr / --epochs.
  ExperimentConfig load(const std::string& lr_key = "rl.lr_sl", const std::string& epochs_key = "rl.epochs_sl") const {
    std::vector<std::string> o = sets;
    const auto num = [](double v) {
      std::ostringstream s;
      s.precision(17);
      s << v;
      return s.str();
    };
    if (alpha) o.push_back("rl.alpha=" + num(*alpha));
    if (beta) o.push_back("rl.beta=" + num(*beta));
    if (lr) o.push_back(lr_key + "=" + num(*lr));
    if (epochs) o.push_back(epochs_key + "=" + std::to_string(*epochs));
    if (seed) o.push_back("rl.seed=" + std::to_string(*seed));
    if (!train.empty()) o.push_back("data.train=" + nlohmann::json(train).dump());
    if (!eval.empty()) o.push_back("data.eval=" + nlohmann::json(eval).dump());
    if (!output_dir.empty()) o.push_back("output_dir=" + nlohmann::json(output_dir).dump());
    return load_config(file.empty() ? std::nullopt : std::optional<fs::path>(file), o);
  }
};

fs::path make_run_dir(const ExperimentConfig& cfg, const std::string& cmd, const std::string& task,
                      const std::string& stage, const nlohmann::json& extra) {
  nlohmann::json key = {{"config", config_to_json(cfg)}, {"extra", extra}};
  fs::path dir = fs::path(cfg.output_dir) / run_stamp(cmd, task, stage, key);
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << config_to_json(cfg).dump(2) << "\n";
  return dir;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("not a number in list: '" + item + "'");
    }
  }
  return out;
}

struct Loaded {
  Corpus train;
  Corpus eval;
  std::optional<LoadedCheckpoint> ck;
};

Seq2SeqModel fresh_model(const ExperimentConfig& cfg, const Vocabulary& vocab) {
  return Seq2SeqModel(cfg.resolved_backbone(vocab.size()), cfg.resolved_adapter(), cfg.model_seed);
}

int cmd_gen_data(std::uint64_t seed, int sessions, const OntologySize& size, const std::string& out) {
  const Corpus c = generate_synthetic_corpus(seed, sessions, size);
  save_corpus(c, out);
  std::cout << "wrote " << c.sessions.size() << " sessions to " << out << "\n";
  return 0;
}

int cmd_train(const ConfigArgs& args, const std::string& task_name, const std::string& stage,
              const std::string& checkpoint) {
  const bool rl = stage == "rl";
  if (!rl && stage != "sl") throw ConfigError("stage must be sl or rl");
  std::vector<TaskId> tasks;
  ExperimentConfig probe = args.load();
  if (task_name == "all") tasks = probe.tasks;
  else tasks = {task_from_string(task_name)};
  if (rl) {
    for (TaskId t : tasks) {
      if (t == TaskId::NLU) throw ConfigError("rl stage is defined for dst and nlg, not nlu");
    }
  }
  // --lr/--epochs bind to the stage (and, for rl, the task) being trained.
  std::string lr_key = "rl.lr_sl", ep_key = "rl.epochs_sl";
  if (rl && tasks.size() == 1) {
    lr_key = tasks[0] == TaskId::DST ? "rl.lr_rl_dst" : "rl.lr_rl_nlg";
    ep_key = tasks[0] == TaskId::DST ? "rl.epochs_rl_dst" : "rl.epochs_rl_nlg";
  }
  const ExperimentConfig cfg = args.load(lr_key, ep_key);
  validate_config(cfg, true);
  const Corpus corpus = load_corpus(cfg.train_corpus);

  std::optional<Seq2SeqModel> model;
  CheckpointMeta meta;
  if (!checkpoint.empty()) {
    LoadedCheckpoint ck = load_checkpoint(checkpoint);
    model.emplace(std::move(ck.model));
    meta = std::move(ck.meta);
  } else {
    meta.vocab = build_vocabulary(corpus);
    meta.intent_labels = intent_labels(corpus.sessions);
    model.emplace(fresh_model(cfg, meta.vocab));
  }
  const fs::path dir =
      make_run_dir(cfg, "train", task_name, stage, {{"checkpoint", checkpoint}, {"start_step", meta.step}});
  const fs::path log_path = dir / "train_log.jsonl";
  fs::remove(log_path);  // a rerun of the same stamp starts its log over
  for (TaskId t : tasks) {
    const TrainingLog log = rl ? train_reinforce(*model, corpus, meta.vocab, t, cfg.rl, meta.step)
                               : train_supervised(*model, corpus, meta.vocab, t, cfg.rl, meta.step);
    log.append_to(log_path);
    meta.step = log.end_step;
    if (!log.epochs.empty()) {
      const auto& e = log.epochs.back();
      std::cout << to_string(t) << " " << stage << ": " << log.epochs.size() << " epochs, last loss_ce " << e.loss_ce;
      if (rl) std::cout << ", reward " << e.reward_mean;
      std::cout << "\n";
    }
  }
  meta.config = config_to_json(cfg);
  save_checkpoint(dir / "checkpoint.bin", *model, meta);
  std::cout << "checkpoint " << (dir / "checkpoint.bin").string() << " (step " << meta.step << ")\n";
  return 0;
}

int cmd_eval(const ConfigArgs& args, const std::string& checkpoint, const std::string& mode_name) {
  const ExperimentConfig cfg = args.load();
  validate_config(cfg, true);
  const PipelineMode mode = mode_name.empty() ? cfg.eval_mode : pipeline_mode_from_string(mode_name);
  const Corpus corpus = load_corpus(cfg.eval_corpus.empty() ? cfg.train_corpus : cfg.eval_corpus);
  const LoadedCheckpoint ck = load_checkpoint(checkpoint);
  std::vector<std::string> labels = ck.model.has_adapter(TaskId::NLU) ? ck.meta.intent_labels : std::vector<std::string>{};
  const PipelineContext ctx{ck.model, ck.meta.vocab, corpus.ontology, corpus.db, labels, cfg.rl.max_decode_len};
  const CorpusRun run = run_corpus(corpus, ctx, mode);
  const fs::path dir = make_run_dir(cfg, "eval", "all", to_string(mode), {{"checkpoint", checkpoint}});
  write_json(dir / "report.json", run.report.to_flat_json());
  save_predictions(dir / "predictions.json", run.sessions, mode);
  std::cout << run.report.to_flat_json().dump(2) << "\nreport " << (dir / "report.json").string() << "\n";
  return 0;
}

int cmd_sweep(const ConfigArgs& args, const std::string& checkpoint, const std::string& task_name,
              const std::string& alphas, const std::string& betas) {
  const TaskId task = task_from_string(task_name);
  if (task == TaskId::NLU) throw ConfigError("sweep is defined for dst and nlg");
  const bool dst = task == TaskId::DST;
  const ExperimentConfig cfg = args.load(dst ? "rl.lr_rl_dst" : "rl.lr_rl_nlg", dst ? "rl.epochs_rl_dst" : "rl.epochs_rl_nlg");
  validate_config(cfg, true);
  const Corpus train = load_corpus(cfg.train_corpus);
  const Corpus eval = cfg.eval_corpus.empty() ? train : load_corpus(cfg.eval_corpus);
  const LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const SweepGrid grid{parse_list(alphas), parse_list(betas)};
  const SweepTable table = hyperparameter_sweep(grid, task, train, eval, ck.model, ck.meta.vocab, {}, cfg.rl);
  const fs::path dir =
      make_run_dir(cfg, "sweep", task_name, "rl", {{"checkpoint", checkpoint}, {"alphas", alphas}, {"betas", betas}});
  write_json(dir / "sweep.json", table.to_json());
  std::ofstream(dir / "sweep.md") << table.to_markdown();
  std::cout << table.to_markdown() << "table " << (dir / "sweep.json").string() << "\n";
  return 0;
}

int cmd_adapter_export(const std::string& checkpoint, const std::string& task, const std::string& file) {
  const LoadedCheckpoint ck = load_checkpoint(checkpoint);
  export_adapter(file, ck.model, task_from_string(task));
  std::cout << "exported " << task << " adapter to " << file << "\n";
  return 0;
}

int cmd_adapter_import(const std::string& checkpoint, const std::string& task, const std::string& file,
                       const std::string& out) {
  if (fs::exists(out) && fs::equivalent(out, checkpoint)) throw ConfigError("--out must differ from the input checkpoint");
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const TaskId used = import_adapter(file, ck.model, task.empty() ? std::nullopt : std::optional(task_from_string(task)));
  save_checkpoint(out, ck.model, ck.meta);
  std::cout << "installed " << to_string(used) << " adapter from " << file << " into " << out << "\n";
  return 0;
}

int cmd_metrics(const std::string& corpus_path, const std::string& predictions, const std::string& out) {
  const Corpus corpus = load_corpus(corpus_path);
  const EvalReport r = evaluate(corpus.sessions, load_predictions(predictions, corpus.sessions), corpus.db);
  const std::string text = r.to_flat_json().dump(2);
  if (!out.empty()) std::ofstream(out) << text << "\n";
  std::cout << text << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toatod: adapter-tuned task-oriented dialogue experiments"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  std::uint64_t gen_seed = 42;
  int gen_sessions = 32;
  OntologySize size;
  std::string gen_out;
  gen->add_option("--seed", gen_seed);
  gen->add_option("-n,--sessions", gen_sessions);
  gen->add_option("--domains", size.n_domains);
  gen->add_option("--slots", size.n_slots);
  gen->add_option("--values", size.n_values);
  gen->add_option("--entities", size.n_entities);
  gen->add_option("-o,--out", gen_out)->required();

  std::string task, stage = "sl", checkpoint, mode, alphas = "1.0", betas = "0.4,0.7", file, out;

  ConfigArgs train_args;
  auto* train = app.add_subcommand("train", "supervised or reinforcement training");
  train_args.attach(train);
  train->add_option("-t,--task", task, "nlu, dst, nlg or all")->required();
  train->add_option("-s,--stage", stage, "sl or rl");
  train->add_option("--checkpoint", checkpoint, "start from (and continue the step counter of) a checkpoint");

  ConfigArgs eval_args;
  auto* eval = app.add_subcommand("eval", "run the pipeline over a corpus and report metrics");
  eval_args.attach(eval);
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("-m,--mode", mode, "end_to_end or oracle_belief");

  ConfigArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "alpha/beta grid of RL runs");
  sweep_args.attach(sweep);
  sweep->add_option("--checkpoint", checkpoint, "supervised starting point")->required();
  std::string sweep_task = "nlg";
  sweep->add_option("-t,--task", sweep_task, "dst or nlg");
  sweep->add_option("--alphas", alphas, "comma-separated");
  sweep->add_option("--betas", betas, "comma-separated");

  auto* adapter = app.add_subcommand("adapter", "standalone adapter weight files");
  adapter->require_subcommand(1);
  auto* exp = adapter->add_subcommand("export", "write one task's adapter");
  exp->add_option("--checkpoint", checkpoint)->required();
  exp->add_option("-t,--task", task)->required();
  exp->add_option("-f,--file", file)->required();
  auto* imp = adapter->add_subcommand("import", "install an adapter file into a copy of a checkpoint");
  imp->add_option("--checkpoint", checkpoint)->required();
  std::string import_task;
  imp->add_option("-t,--task", import_task, "defaults to the task stored in the file");
  imp->add_option("-f,--file", file)->required();
  imp->add_option("--out", out, "checkpoint to write")->required();

  auto* metrics = app.add_subcommand("metrics", "score a predictions file against a corpus");
  std::string corpus_path, predictions;
  metrics->add_option("--corpus", corpus_path)->required();
  metrics->add_option("--predictions", predictions)->required();
  metrics->add_option("--out", out);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen_data(gen_seed, gen_sessions, size, gen_out);
    if (*train) return cmd_train(train_args, task, stage, checkpoint);
    if (*eval) return cmd_eval(eval_args, checkpoint, mode);
    if (*sweep) return cmd_sweep(sweep_args, checkpoint, sweep_task, alphas, betas);
    if (*exp) return cmd_adapter_export(checkpoint, task, file);
    if (*imp) return cmd_adapter_import(checkpoint, import_task, file, out);
    if (*metrics) return cmd_metrics(corpus_path, predictions, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
