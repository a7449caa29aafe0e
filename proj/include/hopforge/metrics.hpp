#pragma once

#include <map>
#include <string>
#include <vector>

#include "hopforge/retrieval.hpp"

namespace hopforge {

struct RetrievalEval {
    double recall = 0.0;
    double average_precision = 0.0;
};

struct DiversityStats {
    double gold_rate = 0.0;      // fraction of questions with a maximal-reward sample
    double mean_unique_ap = 0.0; // mean count of distinct rewards per question
    double mean_ap_stddev = 0.0; // mean population standard deviation
    long num_preference_pairs = 0;
};

// Rank-weighted precision over the ordered context: sum of precision-at-k
// at each relevant position, divided by the number of gold documents.
double average_precision(const Context& retrieved, const std::vector<std::string>& gold);

double recall(const Context& retrieved, const std::vector<std::string>& gold);

RetrievalEval evaluate_retrieval(const Context& retrieved, const std::vector<std::string>& gold);

// Lowercase, strip punctuation, drop the articles a/an/the, collapse spaces.
std::string normalize_answer(const std::string& text);

int exact_match(const std::string& prediction, const std::string& gold);

// Token-multiset F1 over normalized answers.
double f1_word(const std::string& prediction, const std::string& gold);

DiversityStats diversity_stats(const std::map<std::string, std::vector<double>>& per_question_rewards);

} // namespace hopforge
