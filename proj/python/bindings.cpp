#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <random>

#include "toatod/adapter.hpp"
#include "toatod/belief.hpp"
#include "toatod/checkpoint.hpp"
#include "toatod/config.hpp"
#include "toatod/corpus.hpp"
#include "toatod/error.hpp"
#include "toatod/metrics.hpp"
#include "toatod/pipeline.hpp"
#include "toatod/synthetic.hpp"
#include "toatod/task_io.hpp"
#include "toatod/trainer.hpp"

namespace py = pybind11;
using namespace toatod;

namespace {

// Beliefs cross the boundary as {domain: {slot: value}}.
using BeliefDict = std::map<std::string, std::map<std::string, std::string>>;

BeliefState to_belief(const BeliefDict& d) {
  BeliefState b;
  for (const auto& [domain, slots] : d) {
    for (const auto& [slot, value] : slots) b.insert(domain, slot, value);
  }
  return b;
}

BeliefDict from_belief(const BeliefState& b) {
  BeliefDict d;
  for (const auto& t : b.triples()) d[t.domain][t.slot] = t.value;
  return d;
}

std::vector<BeliefState> to_beliefs(const std::vector<BeliefDict>& v) {
  std::vector<BeliefState> out;
  for (const auto& d : v) out.push_back(to_belief(d));
  return out;
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json py_to_json(const py::object& o) {
  if (o.is_none()) return nlohmann::json::object();
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

// RLConfig from a partial dict over the "rl" section of the experiment config.
RLConfig rl_config(const py::object& overrides) {
  nlohmann::json doc = config_to_json(default_config());
  doc["rl"].merge_patch(py_to_json(overrides));
  return config_from_json(doc).rl;
}

// Model plus the vocabulary and labels it was built for.
struct PyModel {
  Seq2SeqModel model;
  CheckpointMeta meta;
};

PyModel make_model(const Corpus& corpus, const py::object& config) {
  nlohmann::json doc = config_to_json(default_config());
  doc.merge_patch(py_to_json(config));
  const ExperimentConfig cfg = config_from_json(doc);
  CheckpointMeta meta;
  meta.vocab = build_vocabulary(corpus);
  meta.intent_labels = intent_labels(corpus.sessions);
  meta.config = config_to_json(cfg);
  Seq2SeqModel m(cfg.resolved_backbone(meta.vocab.size()), cfg.resolved_adapter(), cfg.model_seed);
  return {std::move(m), std::move(meta)};
}

py::object log_to_py(const TrainingLog& log) {
  py::list epochs;
  for (const auto& e : log.epochs) {
    py::dict d;
    d["epoch"] = e.epoch;
    d["loss_ce"] = e.loss_ce;
    d["loss_policy"] = e.loss_policy;
    d["reward_mean"] = e.reward_mean;
    epochs.append(d);
  }
  py::dict out;
  out["task"] = to_string(log.task);
  out["stage"] = log.stage;
  out["start_step"] = log.start_step;
  out["end_step"] = log.end_step;
  out["epochs"] = epochs;
  return out;
}

}  // namespace

PYBIND11_MODULE(_toatod, m) {
  m.doc() = "Adapter-tuned task-oriented dialogue: data, metrics, training and inference";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<OntologyError>(m, "OntologyError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<RoutingError>(m, "RoutingError", PyExc_KeyError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<Corpus>(m, "Corpus")
      .def_property_readonly("n_sessions", [](const Corpus& c) { return c.sessions.size(); })
      .def_property_readonly("n_turns",
                             [](const Corpus& c) {
                               std::size_t n = 0;
                               for (const auto& s : c.sessions) n += s.turns.size();
                               return n;
                             })
      .def_property_readonly("session_ids",
                             [](const Corpus& c) {
                               std::vector<std::string> ids;
                               for (const auto& s : c.sessions) ids.push_back(s.session_id);
                               return ids;
                             })
      .def("gold_beliefs",
           [](const Corpus& c) {
             std::vector<BeliefDict> out;
             for (const auto& s : c.sessions) {
               for (const auto& t : s.turns) out.push_back(from_belief(t.gold_belief));
             }
             return out;
           })
      .def("gold_responses",
           [](const Corpus& c) {
             std::vector<TokenSeq> out;
             for (const auto& s : c.sessions) {
               for (const auto& t : s.turns) out.push_back(t.gold_response_delex);
             }
             return out;
           })
      .def("to_json", [](const Corpus& c) { return corpus_to_string(c); })
      .def("save", [](const Corpus& c, const std::filesystem::path& p) { save_corpus(c, p); });

  m.def(
      "generate_corpus",
      [](std::uint64_t seed, int n_sessions, int n_domains, int n_slots, int n_values, int n_entities) {
        return generate_synthetic_corpus(seed, n_sessions, {n_domains, n_slots, n_values, n_entities});
      },
      py::arg("seed"), py::arg("n_sessions"), py::arg("n_domains") = 2, py::arg("n_slots") = 3,
      py::arg("n_values") = 5, py::arg("n_entities") = 8);
  m.def("load_corpus", [](const std::filesystem::path& p) { return load_corpus(p); });
  m.def("corpus_from_json", &corpus_from_json);

  m.def("serialize_belief", [](const BeliefDict& b) { return serialize_belief(to_belief(b)); });
  m.def(
      "parse_belief",
      [](const TokenSeq& tokens, const Corpus& corpus) {
        const ParsedBelief p = parse_belief(tokens, corpus.ontology);
        return py::make_tuple(from_belief(p.state), p.malformed);
      },
      py::arg("tokens"), py::arg("corpus"), "Returns (belief, malformed) under the corpus ontology.");

  m.def("joint_goal_accuracy", [](const std::vector<BeliefDict>& p, const std::vector<BeliefDict>& g) {
    return joint_goal_accuracy(to_beliefs(p), to_beliefs(g));
  });
  m.def("slot_f1", [](const std::vector<BeliefDict>& p, const std::vector<BeliefDict>& g) {
    return slot_f1(to_beliefs(p), to_beliefs(g));
  });
  m.def("slot_accuracy", [](const std::vector<BeliefDict>& p, const std::vector<BeliefDict>& g) {
    return slot_accuracy(to_beliefs(p), to_beliefs(g));
  });
  m.def("corpus_bleu", &corpus_bleu, py::arg("hyps"), py::arg("refs"));
  m.def("sentence_bleu", &sentence_bleu, py::arg("hyp"), py::arg("ref"));
  m.def("combined_score", &combined_score, py::arg("inform"), py::arg("success"), py::arg("bleu"),
        "BLEU + 0.5 * (Inform + Success), all in percent.");
  m.def("reward_dst", [](const std::vector<BeliefDict>& p, const std::vector<BeliefDict>& g) {
    return reward_dst(to_beliefs(p), to_beliefs(g));
  });
  m.def("reward_nlg_terms", &reward_nlg_terms, py::arg("mean_bleu"), py::arg("success"), py::arg("beta"));
  m.def("count_adapter_params", &count_adapter_params, py::arg("d"), py::arg("h"), py::arg("include_ln") = true);
  m.def(
      "evaluate_gold", [](const Corpus& c) { return json_to_py(evaluate(c.sessions, gold_predictions(c.sessions), c.db).to_flat_json()); },
      "Scores the corpus' own gold beliefs and responses.");
  m.def(
      "evaluate_predictions",
      [](const Corpus& c, const std::filesystem::path& predictions) {
        return json_to_py(evaluate(c.sessions, load_predictions(predictions, c.sessions), c.db).to_flat_json());
      },
      py::arg("corpus"), py::arg("predictions"));

  m.def(
      "adapter_forward",
      [](const ag::Mat& H, const ag::Mat& down_w, const ag::Mat& down_b, const ag::Mat& up_w, const ag::Mat& up_b,
         const ag::Mat& gamma, const ag::Mat& beta) {
        AdapterLayer layer{{"down_w", down_w}, {"down_b", down_b}, {"up_w", up_w},
                           {"up_b", up_b},     {"ln_gamma", gamma}, {"ln_beta", beta}};
        return adapter_forward(H, layer);
      },
      py::arg("H"), py::arg("down_w"), py::arg("down_b"), py::arg("up_w"), py::arg("up_b"), py::arg("gamma"),
      py::arg("beta"));

  m.def("default_config", [] { return json_to_py(config_to_json(default_config())); });

  py::class_<PyModel>(m, "Model")
      .def(py::init(&make_model), py::arg("corpus"), py::arg("config") = py::none(),
           "Fresh model sized for the corpus vocabulary; `config` patches the default experiment config.")
      .def_static(
          "load",
          [](const std::filesystem::path& p) {
            LoadedCheckpoint ck = load_checkpoint(p);
            return PyModel{std::move(ck.model), std::move(ck.meta)};
          })
      .def("save", [](const PyModel& pm, const std::filesystem::path& p) { save_checkpoint(p, pm.model, pm.meta); })
      .def("copy", [](const PyModel& pm) { return pm; })
      .def_property_readonly("step", [](const PyModel& pm) { return pm.meta.step; })
      .def_property_readonly("vocab_size", [](const PyModel& pm) { return pm.meta.vocab.size(); })
      .def("backbone_parameter_count", [](const PyModel& pm) { return pm.model.backbone_parameter_count(); })
      .def(
          "trainable_parameter_count",
          [](const PyModel& pm, const std::string& task) { return pm.model.trainable_parameter_count(task_from_string(task)); })
      .def(
          "train_supervised",
          [](PyModel& pm, const Corpus& c, const std::string& task, const py::object& rl) {
            const TrainingLog log = train_supervised(pm.model, c, pm.meta.vocab, task_from_string(task), rl_config(rl), pm.meta.step);
            pm.meta.step = log.end_step;
            return log_to_py(log);
          },
          py::arg("corpus"), py::arg("task"), py::arg("rl") = py::none())
      .def(
          "train_reinforce",
          [](PyModel& pm, const Corpus& c, const std::string& task, const py::object& rl) {
            const TrainingLog log = train_reinforce(pm.model, c, pm.meta.vocab, task_from_string(task), rl_config(rl), pm.meta.step);
            pm.meta.step = log.end_step;
            return log_to_py(log);
          },
          py::arg("corpus"), py::arg("task"), py::arg("rl") = py::none())
      .def(
          "evaluate_reward",
          [](const PyModel& pm, const Corpus& c, const std::string& task, const py::object& rl) {
            const RewardSummary r = evaluate_reward(pm.model, c, pm.meta.vocab, task_from_string(task), rl_config(rl));
            py::dict d;
            d["mean_reward"] = r.mean_reward;
            d["jga"] = r.jga;
            d["bleu"] = r.bleu;
            d["success"] = r.success;
            return d;
          },
          py::arg("corpus"), py::arg("task"), py::arg("rl") = py::none())
      .def(
          "evaluate",
          [](const PyModel& pm, const Corpus& c, const std::string& mode, int max_len) {
            std::vector<std::string> labels = pm.model.has_adapter(TaskId::NLU) ? pm.meta.intent_labels : std::vector<std::string>{};
            const PipelineContext ctx{pm.model, pm.meta.vocab, c.ontology, c.db, labels, max_len};
            return json_to_py(run_corpus(c, ctx, pipeline_mode_from_string(mode)).report.to_flat_json());
          },
          py::arg("corpus"), py::arg("mode") = "end_to_end", py::arg("max_len") = 48)
      .def(
          "generate",
          [](const PyModel& pm, const std::string& text, const std::string& task, int max_len) {
            const Generation g = pm.model.generate(encode_with_eos(pm.meta.vocab, tokenize(text)), task_from_string(task),
                                                   {DecodeMode::greedy, max_len, 0});
            TokenSeq out;
            for (int id : g.tokens) {
              if (id != Vocabulary::kEos) out.push_back(pm.meta.vocab.token(id));
            }
            return out;
          },
          py::arg("text"), py::arg("task"), py::arg("max_len") = 48, "Greedy decode of a whitespace-tokenized input.")
      .def("export_adapter", [](const PyModel& pm, const std::filesystem::path& p,
                                const std::string& task) { export_adapter(p, pm.model, task_from_string(task)); })
      .def(
          "import_adapter",
          [](PyModel& pm, const std::filesystem::path& p, const std::optional<std::string>& task) {
            const std::optional<TaskId> t = task ? std::optional(task_from_string(*task)) : std::nullopt;
            return to_string(import_adapter(p, pm.model, t));
          },
          py::arg("path"), py::arg("task") = py::none());
}
