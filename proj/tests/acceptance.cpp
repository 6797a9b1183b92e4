// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "oracles.hpp"
#include "test_helpers.hpp"
#include "toatod/adapter.hpp"
#include "toatod/checkpoint.hpp"
#include "toatod/metrics.hpp"
#include "toatod/optimizer.hpp"
#include "toatod/pipeline.hpp"
#include "toatod/synthetic.hpp"
#include "toatod/task_io.hpp"
#include "toatod/trainer.hpp"
#include "toy.hpp"

using namespace toatod;
using ag::Graph;
using ag::Mat;
using ag::Parameter;
using ag::Var;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Mat rand_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

toatod::BackboneConfig toy_backbone(std::size_t vocab) {
  BackboneConfig b;
  b.vocab_size = static_cast<int>(vocab);
  b.d_model = 64;
  b.n_layers_enc = 2;
  b.n_layers_dec = 2;
  b.n_heads = 4;
  b.ff_dim = 128;
  return b;
}

double snapshot_distance(const toy::Snapshot& a, const toy::Snapshot& b) {
  double s = 0;
  for (const auto& [k, v] : a) s += (v - b.at(k)).squaredNorm();
  return std::sqrt(s);
}

double grad_norm(const AdapterSet& set) {
  double s = 0;
  for (const auto* p : set.parameters()) s += p->grad.squaredNorm();
  return std::sqrt(s);
}

Outcome criterion1() {
  std::mt19937_64 rng(1);
  double worst = 0;
  bool shapes = true;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    const int d = 2 + static_cast<int>(rng() % 63);
    const int h = 1 + static_cast<int>(rng() % d);
    AdapterLayer layer = AdapterLayer::init(d, h, rng, "a");
    layer.down_w.value = rand_mat(d, h, rng);
    layer.down_b.value = rand_mat(1, h, rng);
    layer.ln_gamma.value = rand_mat(1, d, rng);
    layer.ln_beta.value = rand_mat(1, d, rng);
    const Mat H = rand_mat(n, d, rng, 4.0);
    const Mat collapsed = adapter_forward(H, layer);
    shapes &= collapsed.rows() == n && collapsed.cols() == d;
    worst = std::max(worst, (collapsed - ag::layer_norm_rows(H, layer.ln_gamma.value, layer.ln_beta.value)).cwiseAbs().maxCoeff());
    // A live up-projection must keep the shape too.
    layer.up_w.value = rand_mat(h, d, rng);
    layer.up_b.value = rand_mat(1, d, rng);
    const Mat live = adapter_forward(H, layer);
    shapes &= live.rows() == n && live.cols() == d;
  }
  return {worst == 0.0 && shapes, fmt("max |A - LN(H)| = %g over 50 shapes, shapes preserved: %s", worst, shapes ? "yes" : "no")};
}

Outcome criterion2() {
  std::mt19937_64 rng(2);
  AdapterLayer layer = AdapterLayer::init(8, 4, rng, "g");
  for (auto* p : layer.parameters()) p->value = rand_mat(p->value.rows(), p->value.cols(), rng);
  const Mat H = rand_mat(5, 8, rng);
  const Mat w = rand_mat(8, 3, rng);
  auto build = [&](Graph& g) {
    Var a = adapter_forward(g, g.constant(H), layer, true);
    return g.sum(g.matmul(g.constant(Mat::Ones(1, 5)), g.matmul(a, g.constant(w))));
  };
  for (auto* p : layer.parameters()) p->zero_grad();
  {
    Graph g(true);
    g.backward(build(g));
  }
  const double eps = 1e-5;
  std::string detail;
  bool ok = true;
  for (auto* p : layer.parameters()) {
    double worst = 0;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double orig = p->value.data()[i];
      p->value.data()[i] = orig + eps;
      Graph gu(false);
      const double up = gu.value(build(gu))(0, 0);
      p->value.data()[i] = orig - eps;
      Graph gd(false);
      const double down = gd.value(build(gd))(0, 0);
      p->value.data()[i] = orig;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = p->grad.data()[i];
      worst = std::max(worst, std::abs(numeric - analytic) / std::max(1.0, std::abs(numeric) + std::abs(analytic)));
    }
    ok &= worst < 1e-4;
    const std::string name = p->name.substr(p->name.find('.') + 1);
    detail += fmt("%s %.1e ", name.c_str(), worst);
  }
  return {ok, "max rel err: " + detail};
}

Outcome criterion3() {
  toy::Setup s = toy::make(3, 3, 16, 1);
  RLConfig cfg = toy::fast_config();
  cfg.epochs_sl = cfg.epochs_rl_dst = cfg.epochs_rl_nlg = 1;
  cfg.batch_sl = cfg.batch_dst = 1000;  // one batch, so one optimizer step
  cfg.batch_nlg = 1000;
  bool ok = true;
  std::string detail;
  for (TaskId task : {TaskId::DST, TaskId::NLG}) {
    for (const bool rl : {false, true}) {
      const auto examples = build_examples(s.corpus.sessions, task, s.vocab);
      std::vector<const Example*> batch;
      for (const auto& e : examples) batch.push_back(&e);
      s.model.zero_grad();
      if (rl) {
        RolloutBatch rb = rollout(s.model, batch, task, cfg, 7);
        rb.reward = 1.5;
        accumulate_policy_grad(s.model, rb, task, 1.0, false);
      } else {
        accumulate_ce_grad(s.model, batch, task, 1.0);
      }
      const double norm = grad_norm(s.model.adapter(task));
      double leaked = 0;
      for (const auto* p : s.model.backbone_parameters()) leaked += p->grad.cwiseAbs().sum();

      const auto bb = toy::backbone(s.model);
      std::map<TaskId, toy::Snapshot> before;
      for (TaskId t : kAllTasks) before[t] = toy::adapter(s.model, t);
      const TrainingLog log = rl ? train_reinforce(s.model, s.corpus, s.vocab, task, cfg)
                                 : train_supervised(s.model, s.corpus, s.vocab, task, cfg);
      bool frozen = toy::identical(bb, toy::backbone(s.model));
      for (TaskId t : kAllTasks) {
        if (t != task) frozen &= toy::identical(before[t], toy::adapter(s.model, t));
      }
      const bool moved = !toy::identical(before[task], toy::adapter(s.model, task));
      const bool one_step = log.steps.size() == 1;
      ok &= norm > 0 && leaked == 0 && frozen && moved && one_step;
      detail += fmt("%s/%s |g|=%.2e frozen=%d ", to_string(task).c_str(), rl ? "rl" : "sl", norm, frozen ? 1 : 0);
    }
  }
  return {ok, detail};
}

Outcome criterion4() {
  // Default config: d = 64, h = d/2, 2 + 2 layers, one adapter per block.
  const BackboneConfig b = toy_backbone(79);
  const AdapterSpec spec = AdapterSpec::defaults_for(b.d_model);
  Seq2SeqModel m(b, spec, 42);
  const std::size_t d = 64, h = static_cast<std::size_t>(spec.bottleneck_dim);
  std::size_t expected = 0;
  for (int layer = 0; layer < b.n_layers_enc + b.n_layers_dec; ++layer) expected += 2 * h * d + d + h + 2 * d;
  const std::size_t measured = m.trainable_parameter_count(TaskId::DST);
  bool ok = measured == expected;
  for (TaskId t : kAllTasks) ok &= m.trainable_parameter_count(t) == expected;

  // 2md + d + m with m = 256, d = 512, against a live layer of that size.
  const std::size_t big_d = 512, big_m = 256;
  const std::size_t formula = 2 * big_m * big_d + big_d + big_m;
  std::mt19937_64 rng(4);
  AdapterLayer big = AdapterLayer::init(512, 256, rng, "big");
  std::size_t live = 0;
  for (const auto* p : big.parameters()) live += p->size();
  ok &= formula == 262912 && count_adapter_params(512, 256, false) == formula && live == formula + 2 * big_d &&
        count_adapter_params(512, 256, true) == live;
  const double fraction = static_cast<double>(measured) / static_cast<double>(measured + m.backbone_parameter_count());
  return {ok, fmt("measured %zu == formula %zu; (512,256): 262912 + %zu LN = %zu; trainable share %.1f%%", measured,
                  expected, 2 * big_d, live, 100 * fraction)};
}

Outcome criterion5() {
  std::mt19937_64 rng(5);
  int jga_bad = 0, f1_bad = 0, is_bad = 0, bleu_bad = 0;
  double bleu_err = 0;
  static const std::vector<std::string> pool = {"a", "b", "c", "d", "[value_name]", "the"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<BeliefState> p, g;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < n; ++k) {
      g.push_back(oracle::random_belief(rng));
      p.push_back(rng() % 3 == 0 ? g.back() : oracle::random_belief(rng));
    }
    jga_bad += joint_goal_accuracy(p, g) != oracle::jga(p, g);
    f1_bad += slot_f1(p, g) != oracle::slot_f1(p, g);

    const Database db = oracle::random_db(rng);
    const oracle::InformCase c = oracle::random_inform_case(rng);
    const SessionOutcome got = session_inform_success(c.session, c.preds, db);
    const auto [inform, success] = oracle::session_outcome(c.session, c.preds, db);
    is_bad += got.inform != inform || got.success != success;

    std::vector<TokenSeq> hyps, refs;
    for (int k = 0; k < n; ++k) {
      refs.push_back(oracle::random_tokens(rng, pool, 9));
      hyps.push_back(rng() % 4 == 0 ? refs.back() : oracle::random_tokens(rng, pool, 9));
    }
    const double e = std::abs(corpus_bleu(hyps, refs) - oracle::bleu(hyps, refs));
    bleu_err = std::max(bleu_err, e);
    bleu_bad += e > 1e-9;
  }
  const bool ok = jga_bad + f1_bad + is_bad + bleu_bad == 0;
  return {ok, fmt("mismatches in 100 cases: jga %d, slot_f1 %d, inform/success %d, bleu %d (max err %.1e)", jga_bad,
                  f1_bad, is_bad, bleu_bad, bleu_err)};
}

Outcome criterion6() {
  const double a = combined_score(97.00, 87.40, 17.12);
  const double b = combined_score(85.80, 74.00, 18.00);
  // Exact at the two-decimal precision the scores are reported with.
  const bool ok = std::round(a * 100) == 10932 && std::round(b * 100) == 9790 && std::abs(a - 109.32) < 1e-9 &&
                  std::abs(b - 97.90) < 1e-9;
  return {ok, fmt("combined(97.00, 87.40, 17.12) = %.2f, combined(85.80, 74.00, 18.00) = %.2f", a, b)};
}

Outcome criterion7() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  static const std::vector<std::string> pool = {"[value_name]", "[value_phone]", "[value_area]", "the", "is", "ok"};
  double lo = 2, hi = 1;
  for (int i = 0; i < 10000; ++i) {
    std::vector<BeliefState> p, g;
    for (int k = 0; k < 1 + static_cast<int>(rng() % 6); ++k) {
      g.push_back(oracle::random_belief(rng));
      p.push_back(rng() % 2 ? g.back() : oracle::random_belief(rng));
    }
    const double rd = reward_dst(p, g);

    const Database db = oracle::random_db(rng);
    std::vector<DialogueSession> sessions;
    std::vector<SessionPredictions> preds;
    for (int k = 0; k < 1 + static_cast<int>(rng() % 3); ++k) {
      oracle::InformCase c = oracle::random_inform_case(rng);
      for (auto& t : c.session.turns) t.gold_response_delex = oracle::random_tokens(rng, pool, 6);
      sessions.push_back(std::move(c.session));
      preds.push_back(std::move(c.preds));
    }
    const double rn = reward_nlg(sessions, preds, db, u(rng));
    lo = std::min({lo, rd, rn});
    hi = std::max({hi, rd, rn});
  }
  bool bounds = lo >= 1.0 && hi <= 2.0;

  toy::Setup s = toy::make();
  RLConfig cfg = toy::fast_config();
  cfg.alpha = 0.0;
  cfg.epochs_sl = cfg.epochs_rl_dst = 2;
  cfg.batch_sl = cfg.batch_dst = 5;
  cfg.lr_sl = cfg.lr_rl_dst = 3e-3;
  Seq2SeqModel twin = s.model;
  train_supervised(s.model, s.corpus, s.vocab, TaskId::DST, cfg);
  train_reinforce(twin, s.corpus, s.vocab, TaskId::DST, cfg);
  const bool same = toy::identical(toy::adapter(s.model, TaskId::DST), toy::adapter(twin, TaskId::DST));
  return {bounds && same, fmt("reward range over 10000 batches [%.4f, %.4f]; alpha=0 RL == SL bitwise: %s", lo, hi,
                              same ? "yes" : "no")};
}

// Supervised toy model shared by criteria 8 and 9.
struct ToyRun {
  Corpus corpus;
  Vocabulary vocab;
  Seq2SeqModel model;
  RLConfig cfg;
};

ToyRun supervised_toy() {
  Corpus c = generate_synthetic_corpus(42, 16, {});
  Vocabulary v = build_vocabulary(c);
  Seq2SeqModel m(toy_backbone(v.size()), AdapterSpec::defaults_for(64), 42);
  RLConfig cfg;  // RL settings stay at their defaults
  cfg.lr_sl = 3e-3;
  cfg.epochs_sl = 50;
  train_supervised(m, c, v, TaskId::DST, cfg);
  train_supervised(m, c, v, TaskId::NLG, cfg);
  return {std::move(c), std::move(v), std::move(m), cfg};
}

Outcome criterion8(const ToyRun& base) {
  Seq2SeqModel m = base.model;
  bool ok = true;
  std::string detail;
  for (TaskId t : {TaskId::DST, TaskId::NLG}) {
    const RewardSummary before = evaluate_reward(m, base.corpus, base.vocab, t, base.cfg);
    const toy::Snapshot w0 = toy::adapter(m, t);
    train_reinforce(m, base.corpus, base.vocab, t, base.cfg);
    const RewardSummary after = evaluate_reward(m, base.corpus, base.vocab, t, base.cfg);
    ok &= after.mean_reward >= before.mean_reward;
    if (t == TaskId::DST) {
      detail += fmt("dst reward %.4f -> %.4f (jga %.3f -> %.3f, |dW| %.2e); ", before.mean_reward, after.mean_reward,
                    before.jga, after.jga, snapshot_distance(w0, toy::adapter(m, t)));
    } else {
      detail += fmt("nlg reward %.4f -> %.4f (bleu %.4f -> %.4f, success %.3f -> %.3f, |dW| %.2e)", before.mean_reward,
                    after.mean_reward, before.bleu, after.bleu, before.success, after.success,
                    snapshot_distance(w0, toy::adapter(m, t)));
    }
  }
  return {ok, detail};
}

Outcome criterion9(const ToyRun& base) {
  std::map<double, double> share;
  std::string detail;
  for (double beta : {0.4, 0.7}) {
    Seq2SeqModel m = base.model;
    RLConfig cfg = base.cfg;
    cfg.alpha = 1.0;
    cfg.beta = beta;
    train_reinforce(m, base.corpus, base.vocab, TaskId::NLG, cfg);
    const RewardSummary r = evaluate_reward(m, base.corpus, base.vocab, TaskId::NLG, cfg);
    const double s_term = beta * r.success, b_term = (1 - beta) * r.bleu;
    share[beta] = s_term + b_term > 0 ? s_term / (s_term + b_term) : 0.0;
    detail += fmt("beta %.1f: success %.3f bleu %.3f success share %.3f; ", beta, r.success, r.bleu, share[beta]);
  }
  return {share[0.7] > share[0.4], detail};
}

Outcome criterion10() {
  Corpus c = generate_synthetic_corpus(10, 1, {});
  Vocabulary v = build_vocabulary(c);
  Seq2SeqModel m(toy::small_backbone(v.size(), 32), AdapterSpec::defaults_for(32), 3);
  RLConfig cfg;
  cfg.lr_sl = 3e-3;
  cfg.epochs_sl = 25;
  cfg.batch_sl = 4;
  const PipelineContext ctx{m, v, c.ontology, c.db, {}, 48};
  EvalReport oracle_rep, e2e_rep;
  int epochs = 0;
  for (int round = 0; round < 16; ++round) {
    train_supervised(m, c, v, TaskId::DST, cfg, epochs);
    train_supervised(m, c, v, TaskId::NLG, cfg, epochs);
    epochs += cfg.epochs_sl;
    oracle_rep = run_corpus(c, ctx, PipelineMode::oracle_belief).report;
    e2e_rep = run_corpus(c, ctx, PipelineMode::end_to_end).report;
    if (oracle_rep.bleu == 1.0 && e2e_rep.jga == 1.0) break;
  }
  const bool overfit = oracle_rep.bleu == 1.0 && e2e_rep.jga == 1.0;

  // Adapters moved into a model whose own adapters are untrained.
  TempDir dir;
  export_adapter(dir / "dst.ad", m, TaskId::DST);
  export_adapter(dir / "nlg.ad", m, TaskId::NLG);
  Seq2SeqModel fresh(toy::small_backbone(v.size(), 32), AdapterSpec::defaults_for(32), 3);
  import_adapter(dir / "dst.ad", fresh);
  import_adapter(dir / "nlg.ad", fresh);
  const PipelineContext ctx2{fresh, v, c.ontology, c.db, {}, 48};
  bool same = true;
  for (PipelineMode mode : {PipelineMode::oracle_belief, PipelineMode::end_to_end}) {
    const auto a = run_corpus(c, ctx, mode).report.to_flat_json();
    const auto b = run_corpus(c, ctx2, mode).report.to_flat_json();
    same &= a == b;
  }
  return {overfit && same, fmt("after %d epochs: oracle BLEU %.3f, end-to-end JGA %.3f; export/import reports identical: %s",
                               epochs, oracle_rep.bleu, e2e_rep.jga, same ? "yes" : "no")};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("criterion %2d: %s  %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  };
  report(1, criterion1);
  report(2, criterion2);
  report(3, criterion3);
  report(4, criterion4);
  report(5, criterion5);
  report(6, criterion6);
  report(7, criterion7);
  const auto t0 = std::chrono::steady_clock::now();
  const ToyRun base = supervised_toy();
  std::printf("(supervised toy model for 8 and 9 trained in %.1fs)\n",
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  report(8, [&] { return criterion8(base); });
  report(9, [&] { return criterion9(base); });
  report(10, criterion10);
  std::printf("%d of 10 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
