#include "hopforge/reward.hpp"

#include <mutex>
#include <unordered_map>

#include "hopforge/errors.hpp"
#include "hopforge/http.hpp"
#include "hopforge/metrics.hpp"
#include "hopforge/rng.hpp"
#include "hopforge/text.hpp"

namespace hopforge {

const char* to_string(RewardKind kind) {
    return kind == RewardKind::direct_ap ? "direct_ap" : "indirect_f1";
}

RewardKind reward_kind_from_string(const std::string& name) {
    if (name == "direct_ap") return RewardKind::direct_ap;
    if (name == "indirect_f1") return RewardKind::indirect_f1;
    throw ValidationError("unknown reward kind: " + name);
}

RewardLabel reward_direct_ap(const Context& context, const Question& question) {
    RewardLabel label;
    label.kind = RewardKind::direct_ap;
    label.value = average_precision(context, question.gold_doc_ids);
    return label;
}

std::string ExtractiveStubGenerator::generate(const Question&,
                                              const std::vector<Document>& context_docs) const {
    for (const auto& doc : context_docs) {
        const auto tokens = tokenize(doc.text);
        for (size_t i = 0; i + 2 < tokens.size(); ++i) {
            if (tokens[i] == "answer" && tokens[i + 1] == "is") return tokens[i + 2];
        }
    }
    return "";
}

const char* const kAnswerPromptTemplateVersion = "answer-prompt-v1";

std::string build_answer_prompt(const Question& question,
                                const std::vector<Document>& context_docs) {
    std::string out = "Answer the question. Base your answers only on the provided context.\n";
    out += "Context:\n";
    if (context_docs.empty()) {
        out += "(none)\n";
    } else {
        for (const auto& doc : context_docs) {
            out += "Title: " + doc.title + "\n";
            out += doc.text + "\n";
        }
    }
    out += "Question: " + question.text + "\n";
    out += "Answer:\n";
    return out;
}

RemoteGenerator::RemoteGenerator(RemoteGeneratorConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ValidationError("remote generator requires an endpoint");
    parse_endpoint(config_.endpoint);
}

std::string RemoteGenerator::generate(const Question& question,
                                      const std::vector<Document>& context_docs) const {
    Endpoint ep = parse_endpoint(config_.endpoint);
    nlohmann::json body = {
        {"prompt", build_answer_prompt(question, context_docs)},
        {"temperature", config_.temperature},
        {"max_tokens", config_.max_tokens},
        {"seed", static_cast<int64_t>(fnv1a64(question.id) & 0x7fffffffffffffffull)},
    };
    nlohmann::json res =
        http_post_json(ep, "/generate", body, config_.timeout_ms, config_.max_retries);
    if (!res.is_object() || !res.contains("text") || !res["text"].is_string())
        throw ProtocolError("generate response missing 'text'");
    return first_nonempty_line(res["text"].get<std::string>());
}

std::string generate_answer(const Question& question, const std::vector<Document>& context_docs,
                            const AnswerGenerator& generator) {
    return generator.generate(question, context_docs);
}

RewardLabel reward_indirect_f1(const Question& question, const Context& context,
                               const std::vector<Document>& context_docs,
                               const AnswerGenerator& generator) {
    if (question.gold_answer.empty())
        throw ValidationError("question " + question.id + " has no gold answer");
    if (context.doc_ids.size() != context_docs.size())
        throw ValidationError("context docs do not match context ids");
    RewardLabel label;
    label.kind = RewardKind::indirect_f1;
    label.generator_answer = generate_answer(question, context_docs, generator);
    label.value = f1_word(*label.generator_answer, question.gold_answer);
    return label;
}

RewardFn make_direct_reward() {
    return [](const Question& question, const Context& context, const std::vector<Document>&) {
        return reward_direct_ap(context, question);
    };
}

RewardFn make_indirect_reward(std::shared_ptr<const AnswerGenerator> generator) {
    if (!generator) throw ValidationError("indirect reward requires a generator");
    struct Cache {
        std::mutex mu;
        std::unordered_map<std::string, RewardLabel> entries;
    };
    auto cache = std::make_shared<Cache>();
    return [generator, cache](const Question& question, const Context& context,
                              const std::vector<Document>& docs) {
        std::string key = question.id;
        for (const auto& id : context.doc_ids) {
            key += '\x1f';
            key += id;
        }
        {
            std::lock_guard<std::mutex> lock(cache->mu);
            auto it = cache->entries.find(key);
            if (it != cache->entries.end()) return it->second;
        }
        RewardLabel label = reward_indirect_f1(question, context, docs, *generator);
        std::lock_guard<std::mutex> lock(cache->mu);
        cache->entries.emplace(key, label);
        return label;
    };
}

DisagreementReport disagreement_analysis(const std::vector<DualRewardGroup>& groups) {
    DisagreementReport report;
    int hard_total = 0, soft_total = 0;
    for (const auto& group : groups) {
        auto& bucket = report.per_hop[group.hop];
        const auto& s = group.samples;
        for (size_t i = 0; i < s.size(); ++i) {
            for (size_t j = i + 1; j < s.size(); ++j) {
                if (s[i].f1 == s[j].f1) continue; // not rankable by F1
                ++report.num_pairs;
                ++bucket.num_pairs;
                // Orient the pair so "winner" is the F1-preferred query.
                const auto& win = s[i].f1 > s[j].f1 ? s[i] : s[j];
                const auto& lose = s[i].f1 > s[j].f1 ? s[j] : s[i];
                if (win.ap < lose.ap) {
                    ++hard_total;
                    ++bucket.hard;
                } else if (win.ap == lose.ap) {
                    ++soft_total;
                    ++bucket.soft;
                }
            }
        }
    }
    if (report.num_pairs == 0)
        throw DomainError("disagreement analysis found no F1-rankable pairs");
    report.hard_disagree_fraction = static_cast<double>(hard_total) / report.num_pairs;
    report.soft_disagree_fraction = static_cast<double>(soft_total) / report.num_pairs;
    return report;
}

} // namespace hopforge
