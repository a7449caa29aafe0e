#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "hopforge/errors.hpp"
#include "hopforge/metrics.hpp"
#include "oracles.hpp"

using namespace hopforge;

namespace {

Context ctx(std::vector<std::string> ids) {
    Context c;
    c.source_hops.assign(ids.size(), 1);
    c.doc_ids = std::move(ids);
    return c;
}

} // namespace

TEST_CASE("average precision: interleaved relevant docs") {
    // Ranks 1 and 3 relevant out of two gold docs: (1/1 + 2/3) / 2.
    auto c = ctx({"g1", "x1", "g2", "x2"});
    CHECK(average_precision(c, {"g1", "g2"}) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("average precision: all gold first is 1.0") {
    auto c = ctx({"g1", "g2", "x1", "x2"});
    CHECK(average_precision(c, {"g1", "g2"}) == 1.0);
}

TEST_CASE("average precision: nothing relevant is 0.0") {
    auto c = ctx({"x1", "x2", "x3"});
    CHECK(average_precision(c, {"g1", "g2"}) == 0.0);
    CHECK(average_precision(ctx({}), {"g1"}) == 0.0);
}

TEST_CASE("recall counts found gold over total gold") {
    CHECK(recall(ctx({"g1", "x1"}), {"g1", "g2"}) == 0.5);
    CHECK(recall(ctx({"g2", "g1"}), {"g1", "g2"}) == 1.0);
    CHECK(recall(ctx({}), {"g1", "g2"}) == 0.0);
}

TEST_CASE("empty gold set is a domain error") {
    CHECK_THROWS_AS(average_precision(ctx({"a"}), {}), DomainError);
    CHECK_THROWS_AS(recall(ctx({"a"}), {}), DomainError);
    CHECK_THROWS_AS(evaluate_retrieval(ctx({"a"}), {}), DomainError);
}

TEST_CASE("evaluate_retrieval bundles both metrics") {
    auto c = ctx({"g1", "x1", "g2", "x2"});
    auto ev = evaluate_retrieval(c, {"g1", "g2"});
    CHECK(ev.recall == 1.0);
    CHECK(ev.average_precision == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("normalize_answer examples") {
    CHECK(normalize_answer("The Beatles!") == "beatles");
    CHECK(normalize_answer("  a  cat ") == "cat");
    CHECK(normalize_answer("42") == "42");
    CHECK(normalize_answer("") == "");
}

TEST_CASE("exact match tolerates case and punctuation only") {
    CHECK(exact_match("Paris", "paris.") == 1);
    CHECK(exact_match("Paris, France", "Paris") == 0);
    CHECK(exact_match("", "") == 1);
}

TEST_CASE("word-level F1 examples") {
    CHECK(f1_word("the cat sat", "cat sat") == 1.0); // article dropped, then identical
    CHECK(f1_word("dog", "cat") == 0.0);
    CHECK(f1_word("blue fish", "blue fish") == 1.0);
    // One of two prediction words matches one of one gold word:
    // precision 1/2, recall 1/1, F1 = 2/3.
    CHECK(f1_word("blue fish", "fish") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("F1 counts duplicated words as a multiset") {
    // pred {cat, cat}, gold {cat}: overlap 1, precision 1/2, recall 1 -> 2/3.
    CHECK(f1_word("cat cat", "cat") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("diversity stats on the two-question example") {
    std::map<std::string, std::vector<double>> rewards{
        {"q1", {1.0, 0.5}},
        {"q2", {0.5, 0.5}},
    };
    auto s = diversity_stats(rewards);
    CHECK(s.gold_rate == 0.5);
    CHECK(s.mean_unique_ap == 1.5);
    CHECK(s.num_preference_pairs == 1);
    // q1 population stddev 0.25, q2 stddev 0 -> mean 0.125.
    CHECK(s.mean_ap_stddev == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("diversity stats degenerate cases") {
    auto identical = diversity_stats({{"q", {0.5, 0.5, 0.5}}});
    CHECK(identical.mean_unique_ap == 1.0);
    CHECK(identical.mean_ap_stddev == 0.0);
    CHECK(identical.num_preference_pairs == 0);
    CHECK(identical.gold_rate == 0.0);

    auto single = diversity_stats({{"q", {1.0}}});
    CHECK(single.gold_rate == 1.0);
    CHECK(single.num_preference_pairs == 0);

    CHECK_THROWS_AS(diversity_stats({}), DomainError);
    CHECK_THROWS_AS(diversity_stats({{"q", {}}}), DomainError);
}

TEST_CASE("gold rate accepts rewards within 1e-9 of optimal") {
    auto s = diversity_stats({{"q", {1.0 - 1e-10}}});
    CHECK(s.gold_rate == 1.0);
    auto t = diversity_stats({{"q", {1.0 - 1e-6}}});
    CHECK(t.gold_rate == 0.0);
}

TEST_CASE("AP properties on random rankings") {
    std::mt19937_64 gen(12345);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> len(1, 12);
        int n = len(gen);
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) ids.push_back("d" + std::to_string(i));
        std::shuffle(ids.begin(), ids.end(), gen);
        std::uniform_int_distribution<int> ngold(1, n);
        int g = ngold(gen);
        std::vector<std::string> gold(ids.begin(), ids.begin() + g);
        std::shuffle(ids.begin(), ids.end(), gen);

        auto c = ctx(ids);
        double ap = average_precision(c, gold);
        double rec = recall(c, gold);

        // AP never exceeds recall (each relevant rank contributes at most 1/|gold|).
        CHECK(ap <= rec + 1e-12);

        // Appending an irrelevant document after the end changes nothing.
        auto extended = ids;
        extended.push_back("irrelevant-tail");
        CHECK(average_precision(ctx(extended), gold) == doctest::Approx(ap).epsilon(1e-12));

        // Prepending an irrelevant document never increases AP.
        std::vector<std::string> prefixed{"irrelevant-head"};
        prefixed.insert(prefixed.end(), ids.begin(), ids.end());
        CHECK(average_precision(ctx(prefixed), gold) <= ap + 1e-12);
    }
}

TEST_CASE("normalization is idempotent") {
    const std::vector<std::string> samples{
        "The Beatles!", "  a  cat ", "42", "A\tB\nC", "an apple, a day", "don't stop",
    };
    for (const auto& s : samples) {
        auto once = normalize_answer(s);
        CHECK(normalize_answer(once) == once);
        CHECK(exact_match(s, once) == 1);
    }
}

TEST_CASE("F1 is symmetric") {
    std::mt19937_64 gen(777);
    std::vector<std::string> vocab{"red", "blue", "fish", "cat", "sat", "42", "the"};
    std::uniform_int_distribution<size_t> pick(0, vocab.size() - 1);
    std::uniform_int_distribution<int> len(0, 5);
    for (int trial = 0; trial < 300; ++trial) {
        std::string a, b;
        for (int i = len(gen); i > 0; --i) a += vocab[pick(gen)] + " ";
        for (int i = len(gen); i > 0; --i) b += vocab[pick(gen)] + " ";
        CHECK(f1_word(a, b) == doctest::Approx(f1_word(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("metrics agree with brute-force oracles on random instances") {
    std::mt19937_64 gen(9001);
    std::vector<std::string> vocab{"alpha", "beta", "Gamma!", "delta,", "the end", "42", "a bit"};
    std::uniform_int_distribution<size_t> pick(0, vocab.size() - 1);

    for (int trial = 0; trial < 1000; ++trial) {
        // Retrieval instance.
        std::uniform_int_distribution<int> len(1, 15);
        int n = len(gen);
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) ids.push_back("d" + std::to_string(i));
        std::uniform_int_distribution<int> ngold(1, n);
        int g = ngold(gen);
        std::vector<std::string> gold(ids.begin(), ids.begin() + g);
        std::shuffle(ids.begin(), ids.end(), gen);
        std::uniform_int_distribution<int> keep(0, n);
        ids.resize(static_cast<size_t>(keep(gen)));

        auto c = ctx(ids);
        CHECK(average_precision(c, gold) ==
              doctest::Approx(oracle::average_precision(ids, gold)).epsilon(1e-12));
        CHECK(recall(c, gold) == doctest::Approx(oracle::recall(ids, gold)).epsilon(1e-12));

        // Text instance.
        std::uniform_int_distribution<int> words(0, 6);
        std::string pred, goldtext;
        for (int i = words(gen); i > 0; --i) pred += vocab[pick(gen)] + " ";
        for (int i = words(gen); i > 0; --i) goldtext += vocab[pick(gen)] + " ";
        CHECK(normalize_answer(pred) == oracle::normalize(pred));
        CHECK(exact_match(pred, goldtext) == oracle::exact_match(pred, goldtext));
        CHECK(f1_word(pred, goldtext) ==
              doctest::Approx(oracle::f1_word(pred, goldtext)).epsilon(1e-12));
    }
}

TEST_CASE("diversity stats agree with the oracle on random reward tables") {
    std::mt19937_64 gen(4242);
    std::uniform_int_distribution<int> nq(1, 8), ns(1, 6), level(0, 4);
    for (int trial = 0; trial < 500; ++trial) {
        std::map<std::string, std::vector<double>> table;
        int q = nq(gen);
        for (int i = 0; i < q; ++i) {
            std::vector<double> rs;
            for (int s = ns(gen); s > 0; --s) rs.push_back(level(gen) * 0.25);
            table["q" + std::to_string(i)] = rs;
        }
        auto got = diversity_stats(table);
        auto want = oracle::diversity(table);
        CHECK(got.gold_rate == doctest::Approx(want.gold_rate).epsilon(1e-12));
        CHECK(got.mean_unique_ap == doctest::Approx(want.mean_unique).epsilon(1e-12));
        CHECK(got.mean_ap_stddev == doctest::Approx(want.mean_stddev).epsilon(1e-12));
        CHECK(got.num_preference_pairs == want.pair_count);
    }
}
