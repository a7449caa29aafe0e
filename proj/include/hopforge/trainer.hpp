#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hopforge/corpus.hpp"
#include "hopforge/policy.hpp"
#include "hopforge/retrieval.hpp"
#include "hopforge/reward.hpp"
#include "hopforge/sampler.hpp"

namespace hopforge {

struct TrainerConfig {
    // The reference setup uses 1e-7 on billion-parameter models; the desk
    // policy has ~2^16 weights and unit-scale features, so 0.1 is the default
    // here and the rate stays configurable.
    double learning_rate = 0.1;
    double tau = 0.05;
    double beta = 1.0; // reference Bradley–Terry objective only
    int sft_epochs = 1;
    int ipo_epochs = 2;
    int batch_size = 8;
    uint64_t seed = 0;
    int num_iterations = 1;
    int max_candidates = 32; // must match the sampling-time proposal cap
};

void validate_trainer_config(const TrainerConfig& config);

struct TrainedPolicy {
    PolicyParameters params;
    PolicyParameters reference_params; // frozen pi_ref for the next phase
    std::vector<std::pair<long, double>> training_log; // (step, loss)
    // Disclosed desk-scale artifact: dataset queries that did not map into
    // the un-prompted candidate set and were skipped.
    int sft_skipped = 0;
    int ipo_skipped = 0;
};

// A preference pair (or SFT item) re-proposed against the un-prompted
// candidate set, with features precomputed.
struct TrainingExample {
    const Question* question = nullptr;
    std::vector<Document> context_docs;
    std::vector<std::string> candidates;
    std::vector<FeatureVector> features;
    int chosen_index = -1;
    int rejected_index = -1; // -1 for SFT examples
};

struct PreparedExamples {
    std::vector<TrainingExample> examples;
    int num_skipped = 0; // queries not representable in the un-prompted set
    int num_total = 0;
};

// SFT set: deduplicated chosen queries from the best-performing prompt
// (highest mean reward in the manifest).
PreparedExamples prepare_sft_examples(const Corpus& corpus, const PreferenceDataset& dataset,
                                      int feature_dim, int max_candidates);

// IPO set: every pair whose chosen and rejected queries are both representable.
PreparedExamples prepare_ipo_examples(const Corpus& corpus, const PreferenceDataset& dataset,
                                      int feature_dim, int max_candidates);

double sft_example_nll(const PolicyParameters& params, const TrainingExample& ex);
double mean_sft_nll(const PolicyParameters& params, const std::vector<TrainingExample>& examples);

// Squared-margin preference loss on implicit rewards
// r~(y) = log pi_theta(y|x) - log pi_ref(y|x):
//   (r~_w - r~_l - 0.5/tau)^2
double ipo_pair_loss(const PolicyParameters& params, const PolicyParameters& reference_params,
                     const TrainingExample& ex, double tau);
void ipo_pair_gradient(const PolicyParameters& params, const PolicyParameters& reference_params,
                       const TrainingExample& ex, double tau, std::vector<double>& grad);

// Reference pairwise logistic objective: -log sigmoid(beta * (r~_w - r~_l)).
double bt_reference_loss(const PolicyParameters& params, const PolicyParameters& reference_params,
                         const TrainingExample& ex, double beta);
void bt_reference_gradient(const PolicyParameters& params,
                           const PolicyParameters& reference_params, const TrainingExample& ex,
                           double beta, std::vector<double>& grad);

double mean_ipo_loss(const PolicyParameters& params, const PolicyParameters& reference_params,
                     const std::vector<TrainingExample>& examples, double tau);

// Context distillation: gradient steps on the NLL of best-prompt chosen
// queries under the un-prompted policy. The returned reference_params are the
// post-SFT snapshot, frozen for the IPO phase.
TrainedPolicy sft_context_distillation(const Corpus& corpus, const PolicyParameters& init,
                                       const PreferenceDataset& dataset,
                                       const TrainerConfig& config);

// Mini-batch gradient descent on the mean IPO loss, starting from
// policy.params with policy.reference_params frozen.
TrainedPolicy train_ipo(const Corpus& corpus, const TrainedPolicy& policy,
                        const PreferenceDataset& dataset, const TrainerConfig& config);

struct GradientReport {
    double max_relative_error = 0.0;
    int num_probes = 0;
};

// Central finite differences of loss_fn against analytic_grad on randomly
// probed coordinates (biased toward the gradient's support).
GradientReport finite_difference_check(const PolicyParameters& params,
                                       const std::function<double(const PolicyParameters&)>& loss_fn,
                                       const std::vector<double>& analytic_grad, int num_probes,
                                       double epsilon, uint64_t seed);

struct IterationResult {
    TrainedPolicy policy;
    PreferenceDataset dataset; // manifest chains the sampling policy version
    double eval_recall = 0.0;  // final-hop recall on the held-out questions
    int num_pairs = 0;
    int sft_skipped = 0;
    int ipo_skipped = 0;
};

// Partitions the training questions into num_iterations sets and, per
// iteration, samples with the previous policy and trains SFT+IPO continuing
// from it. eval_questions may be empty (eval_recall stays 0).
std::vector<IterationResult> iterative_leret(
    const Corpus& corpus, const std::vector<const Question*>& train_questions,
    const std::vector<const Question*>& eval_questions, const std::vector<PromptSpec>& prompts,
    const Retriever& retriever, int k_per_hop, const RewardFn& reward_fn,
    const SamplingConfig& sampling, const TrainerConfig& trainer,
    const LogLinearConfig& policy_config);

// Checkpoint artifact: the trained weights plus the hashes tying them to the
// dataset and corpus they came from.
struct Checkpoint {
    PolicyParameters params;
    std::string dataset_hash;
    std::string corpus_hash;
    std::string created_at;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

std::string corpus_hash_hex(const Corpus& corpus);

} // namespace hopforge
