#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hopforge/corpus.hpp"
#include "hopforge/metrics.hpp"
#include "hopforge/policy.hpp"
#include "hopforge/retrieval.hpp"
#include "hopforge/reward.hpp"

namespace hopforge {

struct EvalOptions {
    int num_hops = 2;
    int k_per_hop = 2;
    double temperature = 1.0;
    uint64_t seed = 0;
    int num_workers = 1;
};

struct EvalReport {
    int num_questions = 0; // questions actually evaluated
    int num_skipped = 0;   // dropped on transport failure
    std::map<int, RetrievalEval> per_hop; // mean recall/AP of the context after each hop
    double final_recall = 0.0;
    double final_ap = 0.0;
    std::optional<double> exact_match; // present when a generator is supplied
    std::optional<double> f1;
};

// Rolls the policy out for num_hops per question (one un-prompted query per
// hop) and averages retrieval metrics; answer metrics come from generating
// off the final context when a generator is given.
EvalReport evaluate_policy(const Corpus& corpus, const std::vector<const Question*>& questions,
                           const QueryPolicy& policy, const Retriever& retriever,
                           const AnswerGenerator* generator, const EvalOptions& options);

} // namespace hopforge
