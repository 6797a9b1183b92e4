#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "toatod/error.hpp"
#include "toatod/metrics.hpp"
#include "toatod/synthetic.hpp"

using namespace toatod;

namespace {

BeliefState bs(std::initializer_list<std::tuple<const char*, const char*, const char*>> triples) {
  BeliefState b;
  for (auto [d, s, v] : triples) b.insert(d, s, v);
  return b;
}

}  // namespace

TEST_CASE("joint goal accuracy") {
  const auto a = bs({{"hotel", "area", "north"}});
  const auto b = bs({{"hotel", "area", "south"}});
  CHECK(joint_goal_accuracy({a, b}, {a, b}) == 1.0);
  CHECK(joint_goal_accuracy({a, a}, {a, b}) == 0.5);
  CHECK_THROWS_AS(joint_goal_accuracy({a}, {a, b}), ContractError);

  std::mt19937_64 rng(20);
  std::vector<BeliefState> p, g;
  for (int i = 0; i < 20; ++i) {
    g.push_back(oracle::random_belief(rng));
    p.push_back(rng() % 2 ? g.back() : oracle::random_belief(rng));
  }
  CHECK(joint_goal_accuracy(p, g) == oracle::jga(p, g));
}

TEST_CASE("slot f1") {
  const auto gold = bs({{"hotel", "area", "north"}, {"hotel", "day", "monday"}});
  const auto half = bs({{"hotel", "area", "north"}});
  CHECK(slot_f1({gold}, {gold}) == 1.0);
  CHECK(slot_f1({BeliefState{}}, {gold}) == 0.0);
  CHECK(slot_f1({half}, {gold}) == doctest::Approx(2.0 * 0.5 * 1.0 / 1.5).epsilon(1e-12));
}

TEST_CASE("joint accuracy never exceeds slot accuracy") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<BeliefState> p, g;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      g.push_back(oracle::random_belief(rng));
      p.push_back(rng() % 3 == 0 ? g.back() : oracle::random_belief(rng));
    }
    CHECK(joint_goal_accuracy(p, g) <= slot_accuracy(p, g) + 1e-15);
  }
}

TEST_CASE("bleu") {
  const TokenSeq a = tokenize("the hotel is in the north of town");
  const TokenSeq b = tokenize("i recommend [value_name] , it is cheap");
  CHECK(corpus_bleu({a, b}, {a, b}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(corpus_bleu({tokenize("x y z w v")}, {tokenize("a b c d e")}) < 1e-8);
  CHECK_THROWS_AS(corpus_bleu({}, {}), ContractError);

  SUBCASE("hand-computed three pairs") {
    // hyp lengths 6,4,5 (c=15); ref lengths 6,5,4 (r=15) -> BP = exp(0) = 1.
    const std::vector<TokenSeq> hyps = {tokenize("the cat sat on the mat"), tokenize("a b c d"),
                                        tokenize("one two three four five")};
    const std::vector<TokenSeq> refs = {tokenize("the cat is on the mat"), tokenize("a b c e f"),
                                        tokenize("one two three six")};
    // unigram: 5/6 + 3/4 + 3/5 -> 11/15; bigram: 3/5 + 2/3 + 2/4 -> 7/12
    // trigram: 1/4 + 1/2 + 1/3 -> 3/9; 4-gram: 0/3 + 0/1 + 0/2 -> 0 of 6, smoothed 1e-9/6
    const double expected = std::exp((std::log(11.0 / 15) + std::log(7.0 / 12) + std::log(3.0 / 9) +
                                      std::log(1e-9 / 6)) / 4);
    CHECK(std::abs(corpus_bleu(hyps, refs) - expected) < 1e-9);
    CHECK(std::abs(corpus_bleu(hyps, refs) - oracle::bleu(hyps, refs)) < 1e-12);
  }
  SUBCASE("brevity penalty") {
    const std::vector<TokenSeq> hyps = {tokenize("a b c d")};
    const std::vector<TokenSeq> refs = {tokenize("a b c d e f")};
    CHECK(corpus_bleu(hyps, refs) == doctest::Approx(std::exp(1.0 - 6.0 / 4.0)).epsilon(1e-12));
  }
  SUBCASE("identity holds for short sequences") {
    std::mt19937_64 rng(3);
    const std::vector<std::string> pool = {"a", "b", "c"};
    for (int i = 0; i < 100; ++i) {
      std::vector<TokenSeq> h;
      for (int k = 0; k < 3; ++k) h.push_back(oracle::random_tokens(rng, pool, 3));
      h[0].push_back("a");
      CHECK(corpus_bleu(h, h) == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
  SUBCASE("random agreement with the oracle") {
    std::mt19937_64 rng(4);
    const std::vector<std::string> pool = {"a", "b", "c", "d"};
    for (int i = 0; i < 200; ++i) {
      std::vector<TokenSeq> h, r;
      for (int k = 0; k < 3; ++k) {
        h.push_back(oracle::random_tokens(rng, pool, 7));
        r.push_back(oracle::random_tokens(rng, pool, 7));
      }
      CHECK(std::abs(corpus_bleu(h, r) - oracle::bleu(h, r)) < 1e-9);
      const double m = mean_sentence_bleu(h, r);
      CHECK(m >= 0.0);
      CHECK(m <= 1.0);
    }
  }
}

TEST_CASE("combined score") {
  CHECK(combined_score(97.00, 87.40, 17.12) == doctest::Approx(109.32).epsilon(1e-12));
  CHECK(combined_score(85.80, 74.00, 18.00) == doctest::Approx(97.90).epsilon(1e-12));
  CHECK(combined_score(0, 0, 0) == 0.0);
}

TEST_CASE("intent accuracy") {
  CHECK(intent_accuracy({"a", "b"}, {"a", "b"}) == 1.0);
  CHECK(intent_accuracy({"b", "a"}, {"a", "b"}) == 0.0);
  CHECK(intent_accuracy({"a", "a"}, {"a", "b"}) == 0.5);
}

TEST_CASE("gold replay on the synthetic corpus is metric-perfect") {
  const Corpus c = generate_synthetic_corpus(42, 60, {});
  const auto preds = gold_predictions(c.sessions);
  const EvalReport r = evaluate(c.sessions, preds, c.db);
  CHECK(r.inform == 1.0);
  CHECK(r.success == 1.0);
  CHECK(r.jga == 1.0);
  CHECK(r.slot_f1 == 1.0);
  CHECK(r.bleu == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.intent_acc.value() == 1.0);
  CHECK(r.combined == doctest::Approx(200.0));
}

TEST_CASE("missing request placeholders fail success but not inform") {
  const Corpus c = generate_synthetic_corpus(7, 20, {});
  auto preds = gold_predictions(c.sessions);
  for (auto& sp : preds) {
    for (auto& tp : sp) {
      TokenSeq kept;
      for (const auto& tok : tp.predicted_response_delex) {
        if (tok.rfind("[value_", 0) != 0 || tok == "[value_name]") kept.push_back(tok);
      }
      tp.predicted_response_delex = kept;
    }
  }
  const InformSuccess is = inform_success(c.sessions, preds, c.db);
  CHECK(is.inform == 1.0);
  CHECK(is.success == 0.0);
}

TEST_CASE("inform/success agree with the straight-line checker") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const Database db = oracle::random_db(rng);
    const oracle::InformCase c = oracle::random_inform_case(rng);
    const SessionOutcome got = session_inform_success(c.session, c.preds, db);
    const auto [inform, success] = oracle::session_outcome(c.session, c.preds, db);
    CHECK(got.inform == inform);
    CHECK(got.success == success);
    CHECK((!got.success || got.inform));
  }
  // And on a synthetic batch with perturbed predictions.
  const Corpus corpus = generate_synthetic_corpus(5, 10, {});
  auto preds = gold_predictions(corpus.sessions);
  for (auto& sp : preds) {
    for (auto& tp : sp) {
      if (rng() % 3 == 0) tp.predicted_response_delex.clear();
      if (rng() % 5 == 0) tp.predicted_belief = BeliefState{};
    }
  }
  double inform = 0, success = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto [a, b] = oracle::session_outcome(corpus.sessions[i], preds[i], corpus.db);
    inform += a;
    success += b;
  }
  const InformSuccess is = inform_success(corpus.sessions, preds, corpus.db);
  CHECK(is.inform == inform / 10);
  CHECK(is.success == success / 10);
}

TEST_CASE("metrics are invariant to session order") {
  Corpus c = generate_synthetic_corpus(8, 12, {});
  auto preds = gold_predictions(c.sessions);
  std::mt19937_64 rng(1);
  for (auto& sp : preds) {
    for (auto& tp : sp) {
      if (rng() % 4 == 0) tp.predicted_response_delex = {"ok"};
      if (rng() % 4 == 0) tp.predicted_belief = oracle::random_belief(rng);
    }
  }
  const EvalReport before = evaluate(c.sessions, preds, c.db);
  std::vector<std::size_t> order(c.sessions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<DialogueSession> s2;
  std::vector<SessionPredictions> p2;
  for (auto i : order) {
    s2.push_back(c.sessions[i]);
    p2.push_back(preds[i]);
  }
  const EvalReport after = evaluate(s2, p2, c.db);
  CHECK(after.jga == before.jga);
  CHECK(after.slot_f1 == doctest::Approx(before.slot_f1).epsilon(1e-15));
  CHECK(after.inform == before.inform);
  CHECK(after.success == before.success);
  CHECK(after.bleu == doctest::Approx(before.bleu).epsilon(1e-14));
}

TEST_CASE("report flat json round trip") {
  const Corpus c = generate_synthetic_corpus(2, 3, {});
  const EvalReport r = evaluate(c.sessions, gold_predictions(c.sessions), c.db);
  const nlohmann::json j = r.to_flat_json();
  for (const auto& [k, v] : j.items()) CHECK(v.is_primitive());
  const EvalReport back = EvalReport::from_flat_json(j);
  CHECK(back.combined == r.combined);
  CHECK(back.per_session.size() == 3);
  CHECK(r.combined == combined_score(100 * r.inform, 100 * r.success, 100 * r.bleu));
}
