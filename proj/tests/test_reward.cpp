#include <doctest.h>

#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "hopforge/errors.hpp"
#include "hopforge/metrics.hpp"
#include "hopforge/reward.hpp"
#include "oracles.hpp"

using namespace hopforge;

namespace {

Question gold_question() {
    Question q;
    q.id = "q1";
    q.text = "which river runs through the old town";
    q.gold_doc_ids = {"g1", "g2"};
    q.gold_answer = "blue danube";
    return q;
}

Context ctx(std::vector<std::string> ids) {
    Context c;
    c.source_hops.assign(ids.size(), 1);
    c.doc_ids = std::move(ids);
    return c;
}

std::vector<Document> docs_for(const Context& c) {
    std::vector<Document> out;
    for (const auto& id : c.doc_ids) out.push_back({id, "title " + id, "body of " + id});
    return out;
}

class CountingGenerator : public AnswerGenerator {
public:
    explicit CountingGenerator(std::string answer) : answer_(std::move(answer)) {}
    std::string generate(const Question&, const std::vector<Document>&) const override {
        calls.fetch_add(1);
        return answer_;
    }
    mutable std::atomic<int> calls{0};

private:
    std::string answer_;
};

} // namespace

TEST_CASE("reward kind names round trip") {
    CHECK(std::string(to_string(RewardKind::direct_ap)) == "direct_ap");
    CHECK(std::string(to_string(RewardKind::indirect_f1)) == "indirect_f1");
    CHECK(reward_kind_from_string("direct_ap") == RewardKind::direct_ap);
    CHECK(reward_kind_from_string("indirect_f1") == RewardKind::indirect_f1);
    CHECK_THROWS_AS(reward_kind_from_string("bm25"), ValidationError);
}

TEST_CASE("direct reward is the average precision of the context") {
    auto q = gold_question();

    auto label = reward_direct_ap(ctx({"g1", "x", "g2"}), q);
    CHECK(label.kind == RewardKind::direct_ap);
    CHECK_FALSE(label.generator_answer.has_value());
    CHECK(label.value == doctest::Approx(5.0 / 6.0).epsilon(1e-12));

    CHECK(reward_direct_ap(ctx({"g1", "g2"}), q).value == 1.0);
    CHECK(reward_direct_ap(ctx({"x", "y"}), q).value == 0.0);
    CHECK(reward_direct_ap(ctx({}), q).value == 0.0);

    auto fn = make_direct_reward();
    auto c = ctx({"x", "g1"});
    CHECK(fn(q, c, docs_for(c)).value == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("echo generator returns its configured answer verbatim") {
    EchoGenerator gen("the blue danube");
    auto q = gold_question();
    CHECK(generate_answer(q, {}, gen) == "the blue danube");
    CHECK(generate_answer(q, docs_for(ctx({"a", "b"})), gen) == "the blue danube");
}

TEST_CASE("extractive stub pulls the token after 'answer is'") {
    ExtractiveStubGenerator gen;
    auto q = gold_question();

    std::vector<Document> hit{{"d1", "t", "the chain ends and the answer is danube today."}};
    CHECK(gen.generate(q, hit) == "danube");

    // First document containing the phrase wins.
    std::vector<Document> both{{"d1", "t", "nothing here"},
                               {"d2", "t", "the answer is volga."},
                               {"d3", "t", "the answer is rhine."}};
    CHECK(gen.generate(q, both) == "volga");

    std::vector<Document> miss{{"d1", "t", "no phrase present"}};
    CHECK(gen.generate(q, miss) == "");
    CHECK(gen.generate(q, {}) == "");
}

TEST_CASE("answer prompt includes the context or a placeholder") {
    auto q = gold_question();
    auto with = build_answer_prompt(q, {{"d1", "Danube", "The Danube flows east."}});
    CHECK(with.find("Title: Danube") != std::string::npos);
    CHECK(with.find("Question: " + q.text) != std::string::npos);
    CHECK(with.find("Answer:") != std::string::npos);

    auto without = build_answer_prompt(q, {});
    CHECK(without.find("(none)") != std::string::npos);
}

TEST_CASE("indirect reward scores generated answers by word F1") {
    auto q = gold_question();
    auto c = ctx({"a"});
    auto docs = docs_for(c);

    EchoGenerator exact("the Blue Danube!");
    auto label = reward_indirect_f1(q, c, docs, exact);
    CHECK(label.kind == RewardKind::indirect_f1);
    REQUIRE(label.generator_answer.has_value());
    CHECK(*label.generator_answer == "the Blue Danube!");
    CHECK(label.value == 1.0);

    EchoGenerator wrong("mississippi");
    CHECK(reward_indirect_f1(q, c, docs, wrong).value == 0.0);

    EchoGenerator half("blue nile");
    double want = oracle::f1_word("blue nile", q.gold_answer);
    CHECK(want == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(reward_indirect_f1(q, c, docs, half).value == doctest::Approx(want).epsilon(1e-12));

    EchoGenerator empty("");
    CHECK(reward_indirect_f1(q, c, docs, empty).value == 0.0);

    Question no_answer = q;
    no_answer.gold_answer.clear();
    CHECK_THROWS_AS(reward_indirect_f1(no_answer, c, docs, exact), ValidationError);

    CHECK_THROWS_AS(reward_indirect_f1(q, c, {}, exact), ValidationError);
}

TEST_CASE("indirect reward caches by question and context ids") {
    auto gen = std::make_shared<CountingGenerator>("blue danube");
    auto fn = make_indirect_reward(gen);
    auto q = gold_question();

    auto c1 = ctx({"a", "b"});
    auto d1 = docs_for(c1);
    CHECK(fn(q, c1, d1).value == 1.0);
    CHECK(fn(q, c1, d1).value == 1.0);
    CHECK(gen->calls.load() == 1); // second call served from the cache

    auto c2 = ctx({"b", "a"});
    fn(q, c2, docs_for(c2));
    CHECK(gen->calls.load() == 2); // different doc order is a different key

    Question q2 = q;
    q2.id = "q2";
    fn(q2, c1, d1);
    CHECK(gen->calls.load() == 3);

    CHECK_THROWS_AS(make_indirect_reward(nullptr), ValidationError);
}

TEST_CASE("disagreement analysis separates hard reversals from AP ties") {
    SUBCASE("hard: the F1 winner has strictly lower AP") {
        DualRewardGroup g;
        g.question_id = "q1";
        g.hop = 1;
        g.samples = {{1.0, 0.0}, {0.0, 1.0}}; // {ap, f1}
        auto report = disagreement_analysis({g});
        CHECK(report.num_pairs == 1);
        CHECK(report.hard_disagree_fraction == 1.0);
        CHECK(report.soft_disagree_fraction == 0.0);
        CHECK(report.per_hop.at(1).hard == 1);
    }
    SUBCASE("soft: the two sides tie on AP") {
        DualRewardGroup g;
        g.question_id = "q1";
        g.hop = 2;
        g.samples = {{0.5, 1.0}, {0.5, 0.0}};
        auto report = disagreement_analysis({g});
        CHECK(report.num_pairs == 1);
        CHECK(report.hard_disagree_fraction == 0.0);
        CHECK(report.soft_disagree_fraction == 1.0);
        CHECK(report.per_hop.at(2).soft == 1);
    }
    SUBCASE("agreement counts as neither") {
        DualRewardGroup g;
        g.question_id = "q1";
        g.hop = 1;
        g.samples = {{1.0, 1.0}, {0.0, 0.0}};
        auto report = disagreement_analysis({g});
        CHECK(report.num_pairs == 1);
        CHECK(report.hard_disagree_fraction == 0.0);
        CHECK(report.soft_disagree_fraction == 0.0);
    }
    SUBCASE("F1 ties are not rankable") {
        DualRewardGroup g;
        g.samples = {{1.0, 0.5}, {0.0, 0.5}};
        CHECK_THROWS_AS(disagreement_analysis({g}), DomainError);
        CHECK_THROWS_AS(disagreement_analysis({}), DomainError);
    }
    SUBCASE("fractions aggregate over groups and hops") {
        DualRewardGroup a;
        a.question_id = "q1";
        a.hop = 1;
        a.samples = {{1.0, 0.0}, {0.0, 1.0}}; // hard
        DualRewardGroup b;
        b.question_id = "q2";
        b.hop = 2;
        b.samples = {{0.5, 1.0}, {0.5, 0.0}}; // soft
        DualRewardGroup c;
        c.question_id = "q3";
        c.hop = 2;
        c.samples = {{1.0, 1.0}, {0.0, 0.0}}; // agree
        auto report = disagreement_analysis({a, b, c});
        CHECK(report.num_pairs == 3);
        CHECK(report.hard_disagree_fraction == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(report.soft_disagree_fraction == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(report.per_hop.at(1).num_pairs == 1);
        CHECK(report.per_hop.at(2).num_pairs == 2);
    }
}
