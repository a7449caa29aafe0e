#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hopforge/corpus.hpp"
#include "hopforge/metrics.hpp"
#include "hopforge/policy.hpp"
#include "hopforge/retrieval.hpp"
#include "hopforge/reward.hpp"

namespace hopforge {

// A context is perfect once its reward is within this tolerance of optimal.
inline constexpr double kOptimalRewardTolerance = 1e-9;

// UTC ISO-8601; honors SOURCE_DATE_EPOCH for reproducible artifacts.
std::string current_timestamp();

// Resolves doc ids to documents: from the corpus when available, else from
// documents absorbed out of remote retrieval results. Thread-safe.
class DocBag {
public:
    explicit DocBag(const Corpus* corpus) : corpus_(corpus) {}

    void absorb(const RankedDocuments& docs);
    std::vector<Document> resolve(const std::vector<std::string>& ids) const;

private:
    const Corpus* corpus_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, Document> extra_;
};

struct HopSample {
    QuerySample sample;
    Context context_after;
    double reward = 0.0; // the training reward (direct or indirect)
    RewardKind reward_kind = RewardKind::direct_ap;
    std::optional<std::string> generator_answer;
    double direct_ap = 0.0; // always recorded; enables disagreement analysis
};

// Everything sampled for one (question, hop): one sample per prompt,
// minus skipped failures.
struct HopRecord {
    std::string question_id;
    int hop = 1;
    Context context_before;
    std::vector<HopSample> samples;
};

struct PreferencePair {
    std::string question_id;
    int hop = 1;
    Context context_before;
    QuerySample chosen;
    QuerySample rejected;
    double chosen_reward = 0.0;
    double rejected_reward = 0.0;
};

struct RunManifest {
    std::string code_version;
    nlohmann::json config = nlohmann::json::object();
    std::string corpus_hash;
    std::string created_at;
    std::string dataset_hash;
    int num_failures = 0;
    int num_pairs = 0;
    int num_questions = 0;
    // hop -> question id -> rewards in prompt order (successful samples only)
    std::map<int, std::map<std::string, std::vector<double>>> per_hop_rewards;
    std::map<int, DiversityStats> per_hop_stats;
    std::map<std::string, double> per_prompt_mean_reward;
    std::vector<std::string> prompt_ids;
    uint64_t seed = 0;
};

nlohmann::json manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);

struct PreferenceDataset {
    std::vector<PreferencePair> pairs;
    std::optional<RunManifest> manifest;
};

// Prompt-set construction for the desk policy: each prompt perturbs the
// proposal pool differently, which is what drives sample diversity.
std::vector<PromptSpec> make_default_prompts(int count);

struct HopInput {
    const Question* question = nullptr;
    Context context_before;
};

std::vector<HopRecord> run_hop(const std::vector<HopInput>& inputs,
                               const std::vector<PromptSpec>& prompts, const QueryPolicy& policy,
                               const Retriever& retriever, int k_per_hop,
                               const RewardFn& reward_fn, DocBag& docs, int hop,
                               double temperature, uint64_t seed, int num_workers,
                               int* num_failures);

// One pair per unordered sample pair whose reward gap exceeds min_reward_gap
// (strictly unequal at the default gap of 0); chosen is the higher side.
std::vector<PreferencePair> build_preference_pairs(const HopRecord& record,
                                                   double min_reward_gap = 0.0);

// Reward-weighted selection of the context to carry into the next hop.
// Absent once every sampled context reached the optimal reward; uniform when
// every remaining reward is zero.
std::optional<Context> select_next_context(const HopRecord& record, double optimal_reward,
                                           uint64_t seed);

struct SamplingConfig {
    int num_hops = 2;
    std::optional<std::pair<int, int>> hop_subset; // inclusive [lo, hi]; absent = all hops
    double temperature = 1.0;
    double optimal_reward = 1.0;
    double min_reward_gap = 0.0;
    int num_workers = 1;
    uint64_t seed = 0;
    nlohmann::json config_snapshot = nlohmann::json::object(); // echoed into the manifest
};

PreferenceDataset run_sampling(const Corpus& corpus, const std::vector<const Question*>& questions,
                               const std::vector<PromptSpec>& prompts, const QueryPolicy& policy,
                               const Retriever& retriever, int k_per_hop, const RewardFn& reward_fn,
                               const SamplingConfig& config);

// Convenience: sample over every question in the corpus.
PreferenceDataset run_sampling(const Corpus& corpus, const std::vector<PromptSpec>& prompts,
                               const QueryPolicy& policy, const Retriever& retriever, int k_per_hop,
                               const RewardFn& reward_fn, const SamplingConfig& config);

// Fraction of reward-distinct hop-1 context pairs where the lower-reward
// context ends up strictly ahead after hop 2 — the greedy-assumption audit.
// num_cases, when given, receives the number of audited pairs.
double greedy_audit(const Corpus& corpus, const QueryPolicy& policy, const Retriever& retriever,
                    int k_per_hop, const RewardFn& reward_fn, int num_questions, uint64_t seed,
                    int num_workers = 1, long* num_cases = nullptr);

// JSONL export surface. The manifest travels in a <dataset>.manifest.json
// sidecar; its dataset hash and pair count are recomputed at write time.
std::string pair_jsonl_line(const PreferencePair& pair);
std::string manifest_path_for(const std::string& dataset_path);
void write_preference_dataset(const PreferenceDataset& dataset, const std::string& path);
PreferenceDataset load_preference_dataset(const std::string& path);

// Dual-reward groups for disagreement analysis, built from records whose
// samples carry an indirect reward alongside the always-recorded direct AP.
std::vector<DualRewardGroup> dual_reward_groups(const std::vector<HopRecord>& records);

} // namespace hopforge
