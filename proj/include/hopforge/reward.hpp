#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hopforge/corpus.hpp"
#include "hopforge/retrieval.hpp"

namespace hopforge {

enum class RewardKind { direct_ap, indirect_f1 };

const char* to_string(RewardKind kind);
RewardKind reward_kind_from_string(const std::string& name);

struct RewardLabel {
    double value = 0.0;
    RewardKind kind = RewardKind::direct_ap;
    std::optional<std::string> generator_answer; // present iff kind == indirect_f1
};

// Direct supervision: average precision of the context against gold docs.
RewardLabel reward_direct_ap(const Context& context, const Question& question);

// Produces a grounded answer from a question plus retrieved documents.
class AnswerGenerator {
public:
    virtual ~AnswerGenerator() = default;
    virtual std::string generate(const Question& question,
                                 const std::vector<Document>& context_docs) const = 0;
};

// Test double: always answers with a configured string.
class EchoGenerator : public AnswerGenerator {
public:
    explicit EchoGenerator(std::string answer) : answer_(std::move(answer)) {}
    std::string generate(const Question&, const std::vector<Document>&) const override {
        return answer_;
    }

private:
    std::string answer_;
};

// Rule-based extractive generator: returns the token following "answer is"
// in the first context document that contains that phrase, else "".
class ExtractiveStubGenerator : public AnswerGenerator {
public:
    std::string generate(const Question& question,
                         const std::vector<Document>& context_docs) const override;
};

struct RemoteGeneratorConfig {
    std::string endpoint;
    int timeout_ms = 30000;
    int max_retries = 2;
    int max_tokens = 64;
    double temperature = 0.0;
};

extern const char* const kAnswerPromptTemplateVersion;
std::string build_answer_prompt(const Question& question,
                                const std::vector<Document>& context_docs);

class RemoteGenerator : public AnswerGenerator {
public:
    explicit RemoteGenerator(RemoteGeneratorConfig config);
    std::string generate(const Question& question,
                         const std::vector<Document>& context_docs) const override;

private:
    RemoteGeneratorConfig config_;
};

std::string generate_answer(const Question& question, const std::vector<Document>& context_docs,
                            const AnswerGenerator& generator);

// Indirect supervision: word-F1 of the generated answer against the gold answer.
RewardLabel reward_indirect_f1(const Question& question, const Context& context,
                               const std::vector<Document>& context_docs,
                               const AnswerGenerator& generator);

// Callable handed to the sampler. Receives the context plus the resolved
// documents (in context order) so remote-retrieved docs stay usable.
using RewardFn = std::function<RewardLabel(const Question&, const Context&,
                                           const std::vector<Document>&)>;

RewardFn make_direct_reward();

// Wraps a generator with a thread-safe cache keyed by
// (question_id, context doc-id sequence); generator outputs are deterministic
// given those inputs, so concurrent recomputation is benign.
RewardFn make_indirect_reward(std::shared_ptr<const AnswerGenerator> generator);

// --- Hard/soft disagreement between the two supervision modes ---

struct DualRewardSample {
    double ap = 0.0;
    double f1 = 0.0;
};

struct DualRewardGroup {
    std::string question_id;
    int hop = 0;
    std::vector<DualRewardSample> samples;
};

struct HopDisagreement {
    int num_pairs = 0;
    int hard = 0;
    int soft = 0;
};

struct DisagreementReport {
    int num_pairs = 0; // pairs with strictly unequal F1
    double hard_disagree_fraction = 0.0;
    double soft_disagree_fraction = 0.0;
    std::map<int, HopDisagreement> per_hop;
};

// Over all F1-rankable pairs within each (question, hop) group: hard means the
// AP ranking strictly reverses the F1 ranking; soft means AP ties.
DisagreementReport disagreement_analysis(const std::vector<DualRewardGroup>& groups);

} // namespace hopforge
