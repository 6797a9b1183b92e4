#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "json.hpp"
#include "test_helpers.hpp"
#include "toatod/checkpoint.hpp"
#include "toatod/corpus.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(TOATOD_CLI) + " " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Run directory created under `root` whose name starts with `prefix`.
fs::path find_run(const fs::path& root, const std::string& prefix) {
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.path().filename().string().rfind(prefix, 0) == 0) return e.path();
  }
  return {};
}

}  // namespace

TEST_CASE("cli end to end") {
  TempDir d;
  const auto log = d / "out.txt";
  const std::string corpus = (d / "c.json").string();
  const std::string runs = (d / "runs").string();
  const std::string small = "--set backbone.d_model=16 --set backbone.n_layers_enc=1 --set backbone.n_layers_dec=1 "
                            "--set backbone.n_heads=2 --set backbone.ff_dim=32 --set rl.lr_sl=0.01 --set rl.batch_sl=8 "
                            "--set rl.max_decode_len=10";

  SUBCASE("gen-data is deterministic and schema-valid") {
    REQUIRE(run("gen-data --seed 5 -n 3 -o " + corpus, log) == 0);
    REQUIRE(run("gen-data --seed 5 -n 3 -o " + (d / "c2.json").string(), log) == 0);
    CHECK(read_text(corpus) == read_text(d / "c2.json"));
    CHECK(toatod::load_corpus(corpus).sessions.size() == 3);
    REQUIRE(run("gen-data --seed 5 -n 0 -o " + (d / "empty.json").string(), log) == 0);
    CHECK(toatod::load_corpus(d / "empty.json").sessions.empty());
  }

  SUBCASE("train, resume, eval, sweep, adapters, metrics") {
    REQUIRE(run("gen-data --seed 5 -n 3 -o " + corpus, log) == 0);
    const std::string corpus_before = read_text(corpus);
    const std::string base = "--train " + corpus + " -o " + runs + " " + small;

    REQUIRE(run("train -t all --epochs 2 " + base, log) == 0);
    const fs::path sl = find_run(runs, "train-all-sl-");
    REQUIRE(!sl.empty());
    const std::string ck = (sl / "checkpoint.bin").string();
    const auto step_sl = toatod::load_checkpoint(ck).meta.step;
    CHECK(step_sl > 0);
    CHECK(fs::exists(sl / "train_log.jsonl"));

    // Same config again: same run stamp, same checkpoint bytes.
    const std::string first = read_text(ck);
    REQUIRE(run("train -t all --epochs 2 " + base, log) == 0);
    CHECK(read_text(ck) == first);

    REQUIRE(run("train -t dst -s sl --epochs 1 --checkpoint " + ck + " " + base, log) == 0);
    const fs::path resumed = find_run(runs, "train-dst-sl-");
    CHECK(toatod::load_checkpoint(resumed / "checkpoint.bin").meta.step > step_sl);

    CHECK(run("train -t nlu -s rl --checkpoint " + ck + " " + base, log) == 2);
    REQUIRE(run("train -t nlg -s rl --epochs 1 --checkpoint " + ck + " " + base, log) == 0);

    REQUIRE(run("eval -m oracle_belief --checkpoint " + ck + " " + base, log) == 0);
    const fs::path ev = find_run(runs, "eval-all-oracle_belief-");
    const auto report = nlohmann::json::parse(read_text(ev / "report.json"));
    for (const char* k : {"jga", "slot_f1", "bleu", "inform", "success", "combined", "intent_acc"}) CHECK(report.contains(k));
    CHECK(report["jga"] == 1.0);
    CHECK(report["combined"].get<double>() ==
          doctest::Approx(100 * report["bleu"].get<double>() +
                          50 * (report["inform"].get<double>() + report["success"].get<double>())));

    // metrics on the saved predictions matches the eval report.
    REQUIRE(run("metrics --corpus " + corpus + " --predictions " + (ev / "predictions.json").string() + " --out " +
                    (d / "m.json").string(),
                log) == 0);
    const auto rescored = nlohmann::json::parse(read_text(d / "m.json"));
    for (const char* k : {"jga", "slot_f1", "bleu", "inform", "success", "combined"}) CHECK(rescored[k] == report[k]);

    REQUIRE(run("sweep -t nlg --alphas 1.0,0.5 --betas 0.4,0.7 --epochs 1 --checkpoint " + ck + " " + base, log) == 0);
    const auto table = nlohmann::json::parse(read_text(find_run(runs, "sweep-nlg-") / "sweep.json"));
    CHECK(table["rows"].size() == 4);
    CHECK(table.contains("best"));

    const std::string ad = (d / "dst.ad").string();
    REQUIRE(run("adapter export --checkpoint " + ck + " -t dst -f " + ad, log) == 0);
    REQUIRE(run("adapter import --checkpoint " + ck + " -f " + ad + " --out " + (d / "ck2.bin").string(), log) == 0);
    CHECK(read_text(d / "ck2.bin") == read_text(ck));

    REQUIRE(run("eval -m end_to_end --checkpoint " + (d / "ck2.bin").string() + " " + base, log) == 0);

    // An adapter from a wider model does not fit.
    REQUIRE(run("train -t dst --epochs 1 --set backbone.d_model=32 --train " + corpus + " -o " + (d / "wide").string() +
                    " --set backbone.n_layers_enc=1 --set backbone.n_layers_dec=1",
                log) == 0);
    const std::string wide_ck = (find_run(d / "wide", "train-dst-sl-") / "checkpoint.bin").string();
    REQUIRE(run("adapter export --checkpoint " + wide_ck + " -t dst -f " + (d / "wide.ad").string(), log) == 0);
    CHECK(run("adapter import --checkpoint " + ck + " -f " + (d / "wide.ad").string() + " --out " +
                  (d / "ck3.bin").string(),
              log) == 2);
    CHECK(read_text(log).find("config error") != std::string::npos);

    CHECK(read_text(corpus) == corpus_before);
  }

  SUBCASE("bad config is rejected") {
    REQUIRE(run("gen-data --seed 5 -n 1 -o " + corpus, log) == 0);
    CHECK(run("train -t dst --train " + corpus + " --set rl.alpha=2", log) == 2);
    CHECK(run("train -t dst --train " + (d / "nope.json").string(), log) == 2);
    CHECK(run("train -t dst --train " + corpus + " --set rl.unknown=1", log) == 2);
  }
}
