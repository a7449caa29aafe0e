#include "hopforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "hopforge/errors.hpp"
#include "hopforge/text.hpp"

namespace hopforge {

namespace {

constexpr double kOptimalRewardTolerance = 1e-9;

std::unordered_set<std::string> gold_set(const std::vector<std::string>& gold) {
    if (gold.empty()) throw DomainError("gold document set is empty");
    return {gold.begin(), gold.end()};
}

} // namespace

double average_precision(const Context& retrieved, const std::vector<std::string>& gold) {
    auto golds = gold_set(gold);
    double sum = 0.0;
    int relevant_seen = 0;
    for (size_t k = 0; k < retrieved.doc_ids.size(); ++k) {
        if (golds.count(retrieved.doc_ids[k])) {
            ++relevant_seen;
            sum += static_cast<double>(relevant_seen) / static_cast<double>(k + 1);
        }
    }
    return sum / static_cast<double>(golds.size());
}

double recall(const Context& retrieved, const std::vector<std::string>& gold) {
    auto golds = gold_set(gold);
    int hits = 0;
    for (const auto& id : retrieved.doc_ids)
        if (golds.count(id)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(golds.size());
}

RetrievalEval evaluate_retrieval(const Context& retrieved, const std::vector<std::string>& gold) {
    return {recall(retrieved, gold), average_precision(retrieved, gold)};
}

std::string normalize_answer(const std::string& text) {
    auto tokens = tokenize(text); // lowercases and strips punctuation
    std::vector<std::string> kept;
    for (auto& t : tokens) {
        if (t == "a" || t == "an" || t == "the") continue;
        kept.push_back(std::move(t));
    }
    return join_tokens(kept);
}

int exact_match(const std::string& prediction, const std::string& gold) {
    return normalize_answer(prediction) == normalize_answer(gold) ? 1 : 0;
}

double f1_word(const std::string& prediction, const std::string& gold) {
    auto pred_tokens = tokenize(normalize_answer(prediction));
    auto gold_tokens = tokenize(normalize_answer(gold));
    if (pred_tokens.empty() && gold_tokens.empty()) return 1.0;
    if (pred_tokens.empty() || gold_tokens.empty()) return 0.0;

    std::unordered_map<std::string, int> gold_counts;
    for (const auto& t : gold_tokens) ++gold_counts[t];
    int overlap = 0;
    for (const auto& t : pred_tokens) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            ++overlap;
            --it->second;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / static_cast<double>(pred_tokens.size());
    double rec = static_cast<double>(overlap) / static_cast<double>(gold_tokens.size());
    return 2.0 * precision * rec / (precision + rec);
}

DiversityStats diversity_stats(const std::map<std::string, std::vector<double>>& per_question_rewards) {
    if (per_question_rewards.empty()) throw DomainError("no questions to compute stats over");

    DiversityStats stats;
    double gold = 0.0, unique_sum = 0.0, stddev_sum = 0.0;
    for (const auto& [qid, rewards] : per_question_rewards) {
        if (rewards.empty()) throw DomainError("question " + qid + " has no reward samples");

        double max_r = *std::max_element(rewards.begin(), rewards.end());
        if (max_r >= 1.0 - kOptimalRewardTolerance) gold += 1.0;

        std::set<double> unique(rewards.begin(), rewards.end());
        unique_sum += static_cast<double>(unique.size());

        double mean = 0.0;
        for (double r : rewards) mean += r;
        mean /= static_cast<double>(rewards.size());
        double var = 0.0;
        for (double r : rewards) var += (r - mean) * (r - mean);
        var /= static_cast<double>(rewards.size());
        stddev_sum += std::sqrt(var);

        long n = static_cast<long>(rewards.size());
        long ties = 0;
        for (long i = 0; i < n; ++i)
            for (long j = i + 1; j < n; ++j)
                if (rewards[i] == rewards[j]) ++ties;
        stats.num_preference_pairs += n * (n - 1) / 2 - ties;
    }
    const double nq = static_cast<double>(per_question_rewards.size());
    stats.gold_rate = gold / nq;
    stats.mean_unique_ap = unique_sum / nq;
    stats.mean_ap_stddev = stddev_sum / nq;
    return stats;
}

} // namespace hopforge
