#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hopforge/corpus.hpp"
#include "hopforge/retrieval.hpp"

namespace hopforge {

enum class PromptKind { none, fixed_fewshot, diverse_member };

struct PromptSpec {
    std::string id;
    PromptKind kind = PromptKind::none;
    std::string payload; // prompt text for remote; proposal-perturbation seed here
};

struct QuerySample {
    std::string query;
    std::optional<double> logprob; // absent for remote policies
    std::string prompt_id;
    double temperature = 1.0;
};

struct PolicyParameters {
    std::vector<double> weights;
    int feature_dim = 0;
    int version = 0;
};

PolicyParameters zero_parameters(int feature_dim);

// Sparse feature vector, entries sorted by index. Kept sorted so dot
// products and serialized artifacts are order-stable.
struct FeatureVector {
    std::vector<std::pair<uint32_t, double>> entries;

    void add(uint32_t index, double value);
    double dot(const std::vector<double>& weights) const;
};

enum class CandidateSource { full_question, question_ngram, context_harvest, perturbation };

struct Candidate {
    std::string text;
    CandidateSource source = CandidateSource::full_question;
    int source_doc_rank = -1;    // context position of the doc it was harvested from
    double position_frac = 0.0;  // earliest occurrence within that doc, 0 = start
};

// Deterministic candidate queries for one (question, context, prompt):
// the full question, content n-grams, novel tokens harvested from context
// documents, and prompt-seeded dropout/reorder variants. Pure function of
// its arguments; always returns at least two candidates.
std::vector<Candidate> propose_candidates_tagged(const Question& question,
                                                 const std::vector<Document>& context_docs,
                                                 const PromptSpec& prompt, int max_candidates);

std::vector<std::string> propose_candidates(const Question& question,
                                            const std::vector<Document>& context_docs,
                                            const PromptSpec& prompt, int max_candidates);

// Structural features of a candidate query given what the policy can see:
// the question, the documents retrieved so far, and how the candidate was
// constructed. Hashed token-identity features fill the tail of the space.
FeatureVector featurize(const Question& question, const std::vector<Document>& context_docs,
                        const Candidate& candidate, int feature_dim);

// Exact log-softmax machinery over candidate feature vectors.
std::vector<double> candidate_logits(const PolicyParameters& params,
                                     const std::vector<FeatureVector>& features,
                                     double temperature);
std::vector<double> softmax_probs(const PolicyParameters& params,
                                  const std::vector<FeatureVector>& features, double temperature);
double loglinear_logprob(const PolicyParameters& params, const std::vector<std::string>& candidates,
                         const std::vector<FeatureVector>& features, double temperature,
                         int chosen_index);

class QueryPolicy {
public:
    virtual ~QueryPolicy() = default;
    virtual QuerySample sample(const Question& question, const std::vector<Document>& context_docs,
                               const PromptSpec& prompt, double temperature,
                               uint64_t seed) const = 0;
};

struct LogLinearConfig {
    int feature_dim = 1 << 16;
    int max_candidates = 32;
};

// Samples from the softmax over proposed candidates. Parameters are an
// immutable snapshot; training produces new instances.
class LogLinearPolicy : public QueryPolicy {
public:
    LogLinearPolicy(PolicyParameters params, LogLinearConfig config);

    QuerySample sample(const Question& question, const std::vector<Document>& context_docs,
                       const PromptSpec& prompt, double temperature,
                       uint64_t seed) const override;

    const PolicyParameters& parameters() const { return params_; }
    const LogLinearConfig& config() const { return config_; }

private:
    PolicyParameters params_;
    LogLinearConfig config_;
};

struct RemotePolicyConfig {
    std::string endpoint;
    int timeout_ms = 30000;
    int max_retries = 2;
    int max_tokens = 64;
};

// Versioned template used to assemble the generation request.
extern const char* const kQueryPromptTemplateVersion;
std::string build_query_prompt(const PromptSpec& prompt, const Question& question,
                               const std::vector<Document>& context_docs);

class RemotePolicy : public QueryPolicy {
public:
    explicit RemotePolicy(RemotePolicyConfig config);

    QuerySample sample(const Question& question, const std::vector<Document>& context_docs,
                       const PromptSpec& prompt, double temperature,
                       uint64_t seed) const override;

private:
    RemotePolicyConfig config_;
};

} // namespace hopforge
