// Acceptance suite: ten end-to-end criteria, one PASS/FAIL line each.
// Exits non-zero if any criterion fails. Library-level criteria run
// in-process; pipeline-level criteria drive the CLI binary.
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hopforge/corpus.hpp"
#include "hopforge/metrics.hpp"
#include "hopforge/policy.hpp"
#include "hopforge/retrieval.hpp"
#include "hopforge/reward.hpp"
#include "hopforge/rng.hpp"
#include "hopforge/sampler.hpp"
#include "hopforge/trainer.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace hopforge;
using nlohmann::json;

namespace {

int g_failures = 0;

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(msg);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

void criterion(int n, const std::string& title, const std::function<std::string()>& body) {
    try {
        const std::string detail = body();
        std::printf("PASS criterion %d: %s (%s)\n", n, title.c_str(), detail.c_str());
    } catch (const std::exception& e) {
        ++g_failures;
        std::printf("FAIL criterion %d: %s -- %s\n", n, title.c_str(), e.what());
    }
    std::fflush(stdout);
}

// ---- CLI plumbing ----

const char* kCli = HOPFORGE_CLI_PATH;

std::string run_cli(const testutil::TempDir& tmp, const std::string& args) {
    static int counter = 0;
    const std::string out_path = tmp.sub("acc-out-" + std::to_string(counter));
    const std::string err_path = tmp.sub("acc-err-" + std::to_string(counter));
    ++counter;
    const std::string cmd = "'" + std::string(kCli) + "' " + args + " >'" + out_path + "' 2>'" +
                            err_path + "'";
    const int raw = std::system(cmd.c_str());
    const int code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    if (code != 0)
        throw std::runtime_error("cli exited " + std::to_string(code) + " for: " + args +
                                 " | stderr: " + testutil::read_file(err_path));
    return testutil::read_file(out_path);
}

// The reference pipeline configuration: a seeded 2-hop corpus with 500 train
// and 200 held-out questions, four proposal prompts, and k=2 retrieval.
std::string write_pipeline_config(const testutil::TempDir& tmp) {
    json cfg = {
        {"corpus",
         {{"synthetic",
           {{"num_entities", 1400},
            {"num_chains", 700},
            {"chain_length", 2},
            {"vocab_size", 200},
            {"distractors_per_doc", 2},
            {"seed", 17}}}}},
        {"retriever", {{"backend", "lexical"}, {"k_per_hop", 2}}},
        {"policy", {{"backend", "loglinear"}, {"feature_dim", 16384}}},
        {"prompts", {{"count", 4}}},
        {"num_hops", 2},
        {"reward", {{"kind", "direct_ap"}}},
        {"trainer",
         {{"learning_rate", 0.1}, {"sft_epochs", 1}, {"ipo_epochs", 2}, {"batch_size", 8}}},
        {"output_dir", tmp.sub("out")},
        {"seed", 5},
        {"num_test_questions", 200},
        {"workers", 4},
    };
    const std::string path = tmp.sub("pipeline.json");
    testutil::write_file(path, cfg.dump(2) + "\n");
    return path;
}

double eval_recall(const testutil::TempDir& tmp, const std::string& cfg,
                   const std::string& extra_args) {
    static int counter = 0;
    const std::string report = tmp.sub("report-" + std::to_string(counter++) + ".json");
    run_cli(tmp, "eval --config '" + cfg + "' --split test --answers none --report '" + report +
                     "' " + extra_args);
    return json::parse(testutil::read_file(report)).at("final_recall").get<double>();
}

// ---- fixtures ----

Context make_context(const std::vector<std::string>& ids) {
    Context c;
    c.doc_ids = ids;
    c.source_hops.assign(ids.size(), 1);
    return c;
}

HopRecord make_record(const std::vector<double>& rewards) {
    HopRecord rec;
    rec.question_id = "q";
    rec.hop = 1;
    for (size_t i = 0; i < rewards.size(); ++i) {
        HopSample s;
        s.sample.query = "query-" + std::to_string(i);
        s.sample.prompt_id = "p" + std::to_string(i);
        s.context_after = make_context({"ctx-" + std::to_string(i)});
        s.reward = rewards[i];
        s.direct_ap = rewards[i];
        rec.samples.push_back(std::move(s));
    }
    return rec;
}

TrainingExample hand_example(int num_candidates, int chosen, int rejected) {
    TrainingExample ex;
    for (int i = 0; i < num_candidates; ++i) {
        ex.candidates.push_back("cand-" + std::to_string(i));
        FeatureVector fv;
        fv.add(0, 1.0);
        fv.add(static_cast<uint32_t>(16 + i), 1.0);
        fv.add(static_cast<uint32_t>(16 + num_candidates + (i % 2)), 0.5);
        ex.features.push_back(std::move(fv));
    }
    ex.chosen_index = chosen;
    ex.rejected_index = rejected;
    return ex;
}

PolicyParameters random_params(int dim, uint64_t seed, double scale = 0.5) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    auto p = zero_parameters(dim);
    for (auto& w : p.weights) w = dist(gen);
    return p;
}

// ---- criteria ----

std::string check_metric_oracles() {
    std::mt19937_64 gen(20240917ull);
    double max_err = 0.0;
    auto close = [&](double got, double want, const std::string& what) {
        const double err = std::fabs(got - want);
        max_err = std::max(max_err, err);
        require(err <= 1e-12, what + ": got " + fmt(got) + ", oracle " + fmt(want));
    };

    std::vector<std::string> pool;
    for (int i = 0; i < 15; ++i) pool.push_back("d" + std::to_string(i));

    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::string> ids = pool;
        std::shuffle(ids.begin(), ids.end(), gen);
        ids.resize(1 + gen() % 12);
        std::vector<std::string> gold = pool;
        std::shuffle(gold.begin(), gold.end(), gen);
        gold.resize(1 + gen() % 4);
        const Context ctx = make_context(ids);
        close(average_precision(ctx, gold), oracle::average_precision(ids, gold), "ap");
        close(recall(ctx, gold), oracle::recall(ids, gold), "recall");
    }

    const std::vector<std::string> words = {"the", "a",     "an",    "Blue",  "danube", "CAT",
                                            "cat", "river", "Paris", "42",    "waltz!", "of",
                                            "Ice", "ice,",  "and",   "credo"};
    std::uniform_int_distribution<int> len(0, 6);
    auto random_text = [&] {
        std::string s;
        const int n = len(gen);
        for (int i = 0; i < n; ++i) {
            if (!s.empty()) s += ' ';
            s += words[gen() % words.size()];
        }
        return s;
    };
    for (int trial = 0; trial < 1000; ++trial) {
        const std::string a = random_text();
        const std::string b = random_text();
        require(exact_match(a, b) == oracle::exact_match(a, b),
                "exact_match mismatch on '" + a + "' vs '" + b + "'");
        close(f1_word(a, b), oracle::f1_word(a, b), "f1");
    }

    const std::vector<double> values = {0.0, 0.25, 1.0 / 3.0, 0.5, 2.0 / 3.0, 0.75, 1.0};
    for (int trial = 0; trial < 1000; ++trial) {
        std::map<std::string, std::vector<double>> rewards;
        const int nq = 1 + gen() % 5;
        for (int q = 0; q < nq; ++q) {
            std::vector<double>& rs = rewards["q" + std::to_string(q)];
            const int ns = 1 + gen() % 6;
            for (int s = 0; s < ns; ++s) rs.push_back(values[gen() % values.size()]);
        }
        const DiversityStats got = diversity_stats(rewards);
        const oracle::DiversityOracle want = oracle::diversity(rewards);
        close(got.gold_rate, want.gold_rate, "gold_rate");
        close(got.mean_unique_ap, want.mean_unique, "mean_unique_ap");
        close(got.mean_ap_stddev, want.mean_stddev, "mean_ap_stddev");
        require(got.num_preference_pairs == want.pair_count, "pair count mismatch");
    }
    return "3x1000 randomized instances, max |err| " + fmt(max_err);
}

std::string check_loss_constants() {
    const auto ex = hand_example(4, 0, 2);
    const auto params = random_params(64, 42);

    const double identity = ipo_pair_loss(params, params, ex, 0.05);
    require(identity == 100.0, "identity IPO loss is " + fmt(identity) + ", want exactly 100");

    const std::vector<TrainingExample> batch = {hand_example(2, 0, 1), hand_example(3, 2, 0),
                                                hand_example(5, 1, 4)};
    const double mean = mean_ipo_loss(params, params, batch, 0.05);
    require(mean == 100.0, "identity mean IPO loss is " + fmt(mean) + ", want exactly 100");

    const double ln2 = std::log(2.0);
    double worst_bt = 0.0;
    for (const double beta : {1.0, 7.5}) {
        const double bt = bt_reference_loss(params, params, ex, beta);
        worst_bt = std::max(worst_bt, std::fabs(bt - ln2));
        require(std::fabs(bt - ln2) <= 1e-12,
                "identity BT loss at beta " + fmt(beta) + " is " + fmt(bt));
    }
    return "IPO identity exactly 100; BT identity within " + fmt(worst_bt) + " of ln 2";
}

std::string check_gradients() {
    std::mt19937_64 gen(7);
    double worst = 0.0;
    int probes = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const int dim = 96;
        const int n = 3 + static_cast<int>(gen() % 4);
        const int chosen = static_cast<int>(gen() % n);
        int rejected = static_cast<int>(gen() % n);
        if (rejected == chosen) rejected = (rejected + 1) % n;
        const auto ex = hand_example(n, chosen, rejected);
        const auto params = random_params(dim, 1000 + trial);
        const auto ref = random_params(dim, 2000 + trial);

        std::vector<double> grad(dim, 0.0);
        ipo_pair_gradient(params, ref, ex, 0.05, grad);
        auto ipo = finite_difference_check(
            params, [&](const PolicyParameters& p) { return ipo_pair_loss(p, ref, ex, 0.05); },
            grad, 6, 1e-4, 3000 + trial);
        worst = std::max(worst, ipo.max_relative_error);
        probes += ipo.num_probes;

        grad.assign(dim, 0.0);
        bt_reference_gradient(params, ref, ex, 2.0, grad);
        auto bt = finite_difference_check(
            params, [&](const PolicyParameters& p) { return bt_reference_loss(p, ref, ex, 2.0); },
            grad, 6, 1e-4, 4000 + trial);
        worst = std::max(worst, bt.max_relative_error);
        probes += bt.num_probes;
    }
    require(probes >= 100, "only " + std::to_string(probes) + " probes ran");
    require(worst < 1e-5, "max relative error " + fmt(worst) + " >= 1e-5");
    return std::to_string(probes) + " probes, max relative error " + fmt(worst);
}

std::string check_algorithm_fidelity() {
    // Pair counts: every strictly-unequal sample pair, ties excluded.
    require(build_preference_pairs(make_record({1.0, 0.5, 0.5, 0.0})).size() == 5,
            "[1.0, 0.5, 0.5, 0.0] must yield exactly 5 pairs");
    std::mt19937_64 gen(31);
    const std::vector<double> values = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> rewards;
        const int n = 1 + gen() % 8;
        for (int i = 0; i < n; ++i) rewards.push_back(values[gen() % values.size()]);
        const auto pairs = build_preference_pairs(make_record(rewards));
        const long want = oracle::preference_pair_count(rewards);
        require(static_cast<long>(pairs.size()) == want,
                "pair count " + std::to_string(pairs.size()) + " != oracle " +
                    std::to_string(want));
    }

    // Selection: optimal contexts are filtered, the rest drawn proportionally
    // to reward: [1.0, 0.5, 0.25] -> [2/3, 1/3].
    const HopRecord rec = make_record({1.0, 0.5, 0.25});
    std::map<std::string, int> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const auto ctx = select_next_context(rec, 1.0, derive_seed(99, "selection", i));
        require(ctx.has_value(), "selection returned no context");
        counts[ctx->doc_ids.at(0)]++;
    }
    require(counts.count("ctx-0") == 0, "optimal context was selected");
    const double f_half = counts["ctx-1"] / static_cast<double>(draws);
    const double f_quarter = counts["ctx-2"] / static_cast<double>(draws);
    require(std::fabs(f_half - 2.0 / 3.0) <= 0.02,
            "freq(reward 0.5) = " + fmt(f_half) + ", want 2/3 +/- 0.02");
    require(std::fabs(f_quarter - 1.0 / 3.0) <= 0.02,
            "freq(reward 0.25) = " + fmt(f_quarter) + ", want 1/3 +/- 0.02");
    return "pair counts exact over 300 trials; selection freqs " + fmt(f_half) + "/" +
           fmt(f_quarter) + " vs 2/3, 1/3";
}

std::string check_policy_improvement(const testutil::TempDir& tmp, const std::string& cfg) {
    const std::string pairs = tmp.sub("c5-pairs.jsonl");
    run_cli(tmp, "sample --config '" + cfg + "' --out '" + pairs + "'");
    run_cli(tmp, "train --config '" + cfg + "' --dataset '" + pairs + "' --out '" +
                     tmp.sub("c5-full.ck") + "' --loss-log '" + tmp.sub("c5-loss.csv") + "'");
    run_cli(tmp, "train --config '" + cfg + "' --dataset '" + pairs + "' --skip-ipo --out '" +
                     tmp.sub("c5-sft.ck") + "' --loss-log '" + tmp.sub("c5-sft-loss.csv") + "'");

    const double base = eval_recall(tmp, cfg, "");
    const double sft = eval_recall(tmp, cfg, "--checkpoint '" + tmp.sub("c5-sft.ck") + "'");
    const double full = eval_recall(tmp, cfg, "--checkpoint '" + tmp.sub("c5-full.ck") + "'");
    const std::string detail =
        "test recall base " + fmt(base) + " < distilled " + fmt(sft) + " < preference-trained " +
        fmt(full);
    require(base < sft, detail + ": distillation did not beat the base policy");
    require(sft < full, detail + ": preference training did not beat distillation");
    require(full - base >= 0.10, detail + ": lift " + fmt(full - base) + " < 10 points");
    return detail + ", lift " + fmt(full - base);
}

std::string check_iterative_improvement(const testutil::TempDir& tmp, const std::string& cfg) {
    int improved = 0;
    std::string detail;
    for (const int seed : {5, 6, 7}) {
        const std::string dir = tmp.sub("it-" + std::to_string(seed));
        run_cli(tmp, "iterate --config '" + cfg + "' --seed " + std::to_string(seed) +
                         " --iterations 2 --out '" + dir + "'");
        const json summary = json::parse(testutil::read_file(dir + "/iterate-summary.json"));
        const auto& iters = summary.at("iterations");
        require(iters.size() == 2, "expected 2 iterations in summary");
        const double r1 = iters[0].at("eval_recall").get<double>();
        const double r2 = iters[1].at("eval_recall").get<double>();
        if (!detail.empty()) detail += ", ";
        detail += "seed " + std::to_string(seed) + ": " + fmt(r1) + " -> " + fmt(r2);
        require(r2 >= r1 - 0.01,
                detail + ": iteration 2 regressed by more than 1 point");
        if (r2 > r1) ++improved;
    }
    require(improved >= 2, detail + ": only " + std::to_string(improved) +
                               "/3 seeds strictly improved");
    return detail + " (" + std::to_string(improved) + "/3 strictly improved)";
}

std::string check_greedy_audit(const testutil::TempDir& tmp, const std::string& cfg) {
    const std::string out = run_cli(tmp, "audit-greedy --config '" + cfg + "' --num-questions 200");
    const json j = json::parse(out);
    const double fraction = j.at("fraction").get<double>();
    const long cases = j.at("num_cases").get<long>();
    require(cases >= 1, "audit examined no cases");
    require(fraction < 0.05, "audit fraction " + fmt(fraction) + " >= 5%");
    return "fraction " + fmt(fraction) + " over " + std::to_string(cases) + " cases";
}

std::string check_hop_subset_ablation(const testutil::TempDir& tmp, const std::string& cfg) {
    int wins = 0;
    std::string detail;
    for (const int seed : {5, 6, 7}) {
        const std::string tag = std::to_string(seed);
        const std::string all_data = tmp.sub("hs-all-" + tag + ".jsonl");
        const std::string h1_data = tmp.sub("hs-h1-" + tag + ".jsonl");
        run_cli(tmp, "sample --config '" + cfg + "' --seed " + tag + " --out '" + all_data + "'");
        run_cli(tmp, "sample --config '" + cfg + "' --seed " + tag + " --hop-subset 1 --out '" +
                         h1_data + "'");
        const std::string all_ck = tmp.sub("hs-all-" + tag + ".ck");
        const std::string h1_ck = tmp.sub("hs-h1-" + tag + ".ck");
        run_cli(tmp, "train --config '" + cfg + "' --seed " + tag + " --dataset '" + all_data +
                         "' --out '" + all_ck + "' --loss-log '" + tmp.sub("hs-a" + tag + ".csv") +
                         "'");
        run_cli(tmp, "train --config '" + cfg + "' --seed " + tag + " --dataset '" + h1_data +
                         "' --out '" + h1_ck + "' --loss-log '" + tmp.sub("hs-b" + tag + ".csv") +
                         "'");
        const double all_recall =
            eval_recall(tmp, cfg, "--seed " + tag + " --checkpoint '" + all_ck + "'");
        const double h1_recall =
            eval_recall(tmp, cfg, "--seed " + tag + " --checkpoint '" + h1_ck + "'");
        if (!detail.empty()) detail += ", ";
        detail += "seed " + tag + ": all-hops " + fmt(all_recall) + " vs hop-1 " + fmt(h1_recall);
        if (all_recall >= h1_recall) ++wins;
    }
    require(wins >= 2, detail + ": all-hops training won only " + std::to_string(wins) +
                           "/3 seeds");
    return detail + " (" + std::to_string(wins) + "/3 seeds)";
}

std::string check_determinism(const testutil::TempDir& tmp, const std::string& cfg) {
    const std::string a = tmp.sub("det-a.jsonl");
    const std::string b = tmp.sub("det-b.jsonl");
    const std::string c = tmp.sub("det-c.jsonl");
    run_cli(tmp, "sample --config '" + cfg + "' --workers 1 --out '" + a + "'");
    run_cli(tmp, "sample --config '" + cfg + "' --workers 4 --out '" + b + "'");
    run_cli(tmp, "sample --config '" + cfg + "' --workers 4 --out '" + c + "'");
    require(testutil::read_file(a) == testutil::read_file(b),
            "datasets differ between --workers 1 and --workers 4");
    require(testutil::read_file(b) == testutil::read_file(c),
            "datasets differ between identical reruns");
    require(testutil::read_file(a + ".manifest.json") == testutil::read_file(b + ".manifest.json"),
            "manifests differ between --workers 1 and --workers 4");

    const std::string ck_a = tmp.sub("det-a.ck");
    const std::string ck_b = tmp.sub("det-b.ck");
    run_cli(tmp, "train --config '" + cfg + "' --workers 1 --dataset '" + a + "' --out '" + ck_a +
                     "' --loss-log '" + tmp.sub("det-a.csv") + "'");
    run_cli(tmp, "train --config '" + cfg + "' --workers 4 --dataset '" + b + "' --out '" + ck_b +
                     "' --loss-log '" + tmp.sub("det-b.csv") + "'");
    require(testutil::read_file(ck_a) == testutil::read_file(ck_b),
            "checkpoints differ between --workers 1 and --workers 4");
    require(testutil::read_file(tmp.sub("det-a.csv")) == testutil::read_file(tmp.sub("det-b.csv")),
            "loss logs differ between --workers 1 and --workers 4");
    const json ck = json::parse(testutil::read_file(ck_a));
    return "dataset, manifest, and checkpoint byte-identical; dataset hash " +
           ck.at("dataset_hash").get<std::string>();
}

std::string check_disagreement_mechanics() {
    auto group = [](const std::string& id, int hop,
                    const std::vector<std::pair<double, double>>& samples) {
        DualRewardGroup g;
        g.question_id = id;
        g.hop = hop;
        for (const auto& [ap, f1] : samples) g.samples.push_back({ap, f1});
        return g;
    };

    // AP ranking strictly reversed by F1: every rankable pair hard-disagrees.
    auto hard = disagreement_analysis({group("q1", 1, {{1.0, 0.0}, {0.0, 1.0}})});
    require(hard.num_pairs == 1 && hard.hard_disagree_fraction == 1.0 &&
                hard.soft_disagree_fraction == 0.0,
            "pure hard fixture: want fractions 1.0 / 0.0, got " +
                fmt(hard.hard_disagree_fraction) + " / " + fmt(hard.soft_disagree_fraction));

    // AP ties where F1 splits: every rankable pair soft-disagrees.
    auto soft = disagreement_analysis({group("q1", 1, {{0.5, 1.0}, {0.5, 0.0}})});
    require(soft.num_pairs == 1 && soft.hard_disagree_fraction == 0.0 &&
                soft.soft_disagree_fraction == 1.0,
            "pure soft fixture: want fractions 0.0 / 1.0, got " +
                fmt(soft.hard_disagree_fraction) + " / " + fmt(soft.soft_disagree_fraction));

    // Rankings agree: no disagreement of either kind.
    auto agree = disagreement_analysis({group("q1", 1, {{0.0, 0.0}, {1.0, 1.0}})});
    require(agree.num_pairs == 1 && agree.hard_disagree_fraction == 0.0 &&
                agree.soft_disagree_fraction == 0.0,
            "agreement fixture: want fractions 0.0 / 0.0");

    // Mixed: one hard pair, one soft pair, one agreement -> 1/3 each, with the
    // per-hop buckets splitting the same way.
    auto mixed = disagreement_analysis({group("q1", 1, {{1.0, 0.0}, {0.0, 1.0}}),
                                        group("q2", 2, {{0.5, 1.0}, {0.5, 0.0}}),
                                        group("q3", 1, {{0.0, 0.0}, {1.0, 1.0}})});
    require(mixed.num_pairs == 3, "mixed fixture: want 3 rankable pairs");
    require(mixed.hard_disagree_fraction == 1.0 / 3.0 &&
                mixed.soft_disagree_fraction == 1.0 / 3.0,
            "mixed fixture: want fractions 1/3 each, got " + fmt(mixed.hard_disagree_fraction) +
                " / " + fmt(mixed.soft_disagree_fraction));
    require(mixed.per_hop.at(1).num_pairs == 2 && mixed.per_hop.at(1).hard == 1 &&
                mixed.per_hop.at(1).soft == 0 && mixed.per_hop.at(2).num_pairs == 1 &&
                mixed.per_hop.at(2).soft == 1,
            "mixed fixture: per-hop buckets wrong");
    return "pure fixtures 1.0/0.0, 0.0/1.0, 0.0/0.0; mixed fixture 1/3 hard, 1/3 soft";
}

} // namespace

int main() {
    // Pin artifact timestamps so subprocess outputs are comparable.
    setenv("SOURCE_DATE_EPOCH", "1735689600", 1);

    testutil::TempDir tmp;
    const std::string cfg = write_pipeline_config(tmp);

    criterion(1, "retrieval and answer metrics match brute-force oracles", check_metric_oracles);
    criterion(2, "preference losses hit their closed-form identity values", check_loss_constants);
    criterion(3, "analytic gradients match central finite differences", check_gradients);
    criterion(4, "pair construction and context selection match the sampling rules",
              check_algorithm_fidelity);
    criterion(5, "training improves held-out retrieval (base < distilled < preference-trained)",
              [&] { return check_policy_improvement(tmp, cfg); });
    criterion(6, "a second sample-train iteration improves held-out recall",
              [&] { return check_iterative_improvement(tmp, cfg); });
    criterion(7, "greedy hop-1 selection is near-optimal on the synthetic corpus",
              [&] { return check_greedy_audit(tmp, cfg); });
    criterion(8, "training on all hops beats first-hop-only training",
              [&] { return check_hop_subset_ablation(tmp, cfg); });
    criterion(9, "sampling and training artifacts are byte-identical across reruns and workers",
              [&] { return check_determinism(tmp, cfg); });
    criterion(10, "hard and soft reward disagreement match hand-computed fixtures",
              check_disagreement_mechanics);

    if (g_failures > 0) {
        std::printf("%d of 10 criteria failed\n", g_failures);
        return 1;
    }
    std::printf("all 10 criteria passed\n");
    return 0;
}
