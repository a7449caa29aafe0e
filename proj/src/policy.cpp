#include "hopforge/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "hopforge/errors.hpp"
#include "hopforge/http.hpp"
#include "hopforge/rng.hpp"
#include "hopforge/text.hpp"

namespace hopforge {

namespace {

// Structural features live in [0, 16); hashed token identities fill the rest.
enum FeatureIndex : uint32_t {
    kFullQuestion = 0,
    kQuestionNgram = 1,
    kHarvested = 2,
    kPerturbation = 3,
    kLen1 = 4,
    kLen2 = 5,
    kLen3to5 = 6,
    kLen6plus = 7,
    kFracInQuestion = 8,
    kFracInContext = 9,
    kFracNovel = 10,
    kMeanContextDf = 11,
    kEarliness = 12,
    kSourceRank = 13,
    kHashedBase = 16,
};

constexpr int kNumPerturbations = 4;

} // namespace

PolicyParameters zero_parameters(int feature_dim) {
    if (feature_dim <= kHashedBase)
        throw ValidationError("feature_dim must exceed the structural feature range");
    PolicyParameters p;
    p.feature_dim = feature_dim;
    p.weights.assign(static_cast<size_t>(feature_dim), 0.0);
    p.version = 0;
    return p;
}

void FeatureVector::add(uint32_t index, double value) {
    if (value == 0.0) return;
    auto it = std::lower_bound(entries.begin(), entries.end(), index,
                               [](const auto& e, uint32_t i) { return e.first < i; });
    if (it != entries.end() && it->first == index)
        it->second += value;
    else
        entries.insert(it, {index, value});
}

double FeatureVector::dot(const std::vector<double>& weights) const {
    double sum = 0.0;
    for (const auto& [i, v] : entries) sum += weights[i] * v;
    return sum;
}

std::vector<Candidate> propose_candidates_tagged(const Question& question,
                                                 const std::vector<Document>& context_docs,
                                                 const PromptSpec& prompt, int max_candidates) {
    if (max_candidates < 2) throw ValidationError("max_candidates must be >= 2");

    const auto q_tokens = tokenize(question.text);
    const std::unordered_set<std::string> q_set(q_tokens.begin(), q_tokens.end());

    std::vector<Candidate> full;
    if (!q_tokens.empty())
        full.push_back({join_tokens(q_tokens), CandidateSource::full_question, -1, 0.0});

    std::vector<Candidate> ngrams;
    for (size_t i = 0; i < q_tokens.size(); ++i) {
        if (q_tokens[i].size() >= 3)
            ngrams.push_back({q_tokens[i], CandidateSource::question_ngram, -1, 0.0});
    }
    for (size_t i = 0; i + 1 < q_tokens.size(); ++i) {
        ngrams.push_back({q_tokens[i] + " " + q_tokens[i + 1], CandidateSource::question_ngram,
                          -1, 0.0});
    }

    // Novel tokens from retrieved documents, tagged with where they appeared.
    std::vector<Candidate> harvested;
    std::unordered_set<std::string> harvested_seen;
    for (size_t rank = 0; rank < context_docs.size(); ++rank) {
        const auto doc_tokens = tokenize(context_docs[rank].title + " " + context_docs[rank].text);
        const double len = static_cast<double>(std::max<size_t>(doc_tokens.size(), 1));
        for (size_t pos = 0; pos < doc_tokens.size(); ++pos) {
            const auto& tok = doc_tokens[pos];
            if (q_set.count(tok) || harvested_seen.count(tok)) continue;
            harvested_seen.insert(tok);
            harvested.push_back({tok, CandidateSource::context_harvest, static_cast<int>(rank),
                                 static_cast<double>(pos) / len});
        }
    }

    // Prompt-keyed dropout/reorder variants of the question. Conditioning on
    // the prompt payload, not on temperature, is what differentiates the
    // candidate sets the prompts expose.
    std::vector<Candidate> perturbed;
    if (prompt.kind != PromptKind::none && q_tokens.size() >= 2) {
        Rng rng(fnv1a64(prompt.payload.empty() ? prompt.id : prompt.payload));
        for (int i = 0; i < kNumPerturbations; ++i) {
            std::vector<std::string> toks = q_tokens;
            if (rng.next_below(2) == 0) {
                std::vector<std::string> kept;
                for (const auto& t : toks)
                    if (rng.next_below(10) >= 3) kept.push_back(t); // drop w.p. 0.3
                if (kept.empty()) kept.push_back(toks[rng.next_below(toks.size())]);
                toks = std::move(kept);
            } else {
                size_t a = rng.next_below(toks.size());
                size_t b = rng.next_below(toks.size());
                std::swap(toks[a], toks[b]);
            }
            perturbed.push_back({join_tokens(toks), CandidateSource::perturbation, -1, 0.0});
        }
    }

    // Merge: full question first, then round-robin across the groups so a
    // tight cap still keeps every source represented.
    std::vector<Candidate> out;
    std::unordered_set<std::string> seen;
    auto push = [&](const Candidate& c) {
        if (static_cast<int>(out.size()) >= max_candidates) return;
        if (c.text.empty() || !seen.insert(c.text).second) return;
        out.push_back(c);
    };
    for (const auto& c : full) push(c);
    size_t i_ng = 0, i_hv = 0, i_pt = 0;
    while (static_cast<int>(out.size()) < max_candidates &&
           (i_ng < ngrams.size() || i_hv < harvested.size() || i_pt < perturbed.size())) {
        if (i_ng < ngrams.size()) push(ngrams[i_ng++]);
        if (i_hv < harvested.size()) push(harvested[i_hv++]);
        if (i_pt < perturbed.size()) push(perturbed[i_pt++]);
    }

    // Degenerate questions still need two candidates to sample over.
    if (out.size() < 2) {
        std::string raw = trim(question.text);
        if (out.empty() && !raw.empty()) out.push_back({raw, CandidateSource::full_question, -1, 0.0});
        if (!out.empty()) {
            std::string half = out[0].text.substr(0, std::max<size_t>(out[0].text.size() / 2, 1));
            if (!half.empty() && !seen.count(half))
                out.push_back({half, CandidateSource::question_ngram, -1, 0.0});
        }
        while (out.size() < 2) out.push_back({"search", CandidateSource::question_ngram, -1, 0.0});
    }
    return out;
}

std::vector<std::string> propose_candidates(const Question& question,
                                            const std::vector<Document>& context_docs,
                                            const PromptSpec& prompt, int max_candidates) {
    std::vector<std::string> out;
    for (auto& c : propose_candidates_tagged(question, context_docs, prompt, max_candidates))
        out.push_back(std::move(c.text));
    return out;
}

FeatureVector featurize(const Question& question, const std::vector<Document>& context_docs,
                        const Candidate& candidate, int feature_dim) {
    if (feature_dim <= kHashedBase)
        throw ValidationError("feature_dim must exceed the structural feature range");

    FeatureVector fv;
    switch (candidate.source) {
    case CandidateSource::full_question: fv.add(kFullQuestion, 1.0); break;
    case CandidateSource::question_ngram: fv.add(kQuestionNgram, 1.0); break;
    case CandidateSource::context_harvest: fv.add(kHarvested, 1.0); break;
    case CandidateSource::perturbation: fv.add(kPerturbation, 1.0); break;
    }

    const auto tokens = tokenize(candidate.text);
    const size_t n = tokens.size();
    if (n == 1) fv.add(kLen1, 1.0);
    else if (n == 2) fv.add(kLen2, 1.0);
    else if (n <= 5) fv.add(kLen3to5, 1.0);
    else fv.add(kLen6plus, 1.0);

    const auto q_tokens = tokenize(question.text);
    const std::unordered_set<std::string> q_set(q_tokens.begin(), q_tokens.end());

    std::unordered_map<std::string, int> context_df;
    for (const auto& doc : context_docs) {
        std::unordered_set<std::string> doc_set;
        for (auto& t : tokenize(doc.title + " " + doc.text)) doc_set.insert(std::move(t));
        for (const auto& t : doc_set) ++context_df[t];
    }

    if (n > 0) {
        const double inv_n = 1.0 / static_cast<double>(n);
        double in_q = 0, in_ctx = 0, novel = 0, df_sum = 0;
        int df_count = 0;
        for (const auto& t : tokens) {
            const bool q_hit = q_set.count(t) > 0;
            auto it = context_df.find(t);
            const bool ctx_hit = it != context_df.end();
            if (q_hit) in_q += 1;
            if (ctx_hit) {
                in_ctx += 1;
                df_sum += static_cast<double>(it->second);
                ++df_count;
            }
            if (ctx_hit && !q_hit) novel += 1;
            fv.add(kHashedBase + static_cast<uint32_t>(
                                     fnv1a64(t) %
                                     static_cast<uint64_t>(feature_dim - kHashedBase)),
                   inv_n);
        }
        fv.add(kFracInQuestion, in_q * inv_n);
        fv.add(kFracInContext, in_ctx * inv_n);
        fv.add(kFracNovel, novel * inv_n);
        if (df_count > 0 && !context_docs.empty())
            fv.add(kMeanContextDf,
                   df_sum / static_cast<double>(df_count) /
                       static_cast<double>(context_docs.size()));
    }

    if (candidate.source == CandidateSource::context_harvest) {
        fv.add(kEarliness, 1.0 - candidate.position_frac);
        if (candidate.source_doc_rank >= 0)
            fv.add(kSourceRank, 1.0 / (1.0 + static_cast<double>(candidate.source_doc_rank)));
    }
    return fv;
}

std::vector<double> candidate_logits(const PolicyParameters& params,
                                     const std::vector<FeatureVector>& features,
                                     double temperature) {
    if (temperature <= 0.0) throw ValidationError("temperature must be > 0");
    if (features.empty()) throw ValidationError("no candidates to score");
    std::vector<double> logits;
    logits.reserve(features.size());
    for (const auto& fv : features) {
        double z = fv.dot(params.weights) / temperature;
        if (!std::isfinite(z)) throw NumericError("non-finite candidate logit");
        logits.push_back(z);
    }
    return logits;
}

std::vector<double> softmax_probs(const PolicyParameters& params,
                                  const std::vector<FeatureVector>& features, double temperature) {
    auto logits = candidate_logits(params, features, temperature);
    const double m = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z - m);
    std::vector<double> probs;
    probs.reserve(logits.size());
    for (double z : logits) probs.push_back(std::exp(z - m) / denom);
    return probs;
}

double loglinear_logprob(const PolicyParameters& params, const std::vector<std::string>& candidates,
                         const std::vector<FeatureVector>& features, double temperature,
                         int chosen_index) {
    if (candidates.size() != features.size())
        throw ValidationError("candidates and features differ in length");
    if (chosen_index < 0 || static_cast<size_t>(chosen_index) >= features.size())
        throw ValidationError("chosen_index out of range");
    auto logits = candidate_logits(params, features, temperature);
    const double m = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z - m);
    return logits[static_cast<size_t>(chosen_index)] - m - std::log(denom);
}

LogLinearPolicy::LogLinearPolicy(PolicyParameters params, LogLinearConfig config)
    : params_(std::move(params)), config_(config) {
    if (params_.feature_dim != static_cast<int>(params_.weights.size()))
        throw ValidationError("policy weights do not match feature_dim");
    if (params_.feature_dim != config_.feature_dim)
        throw ValidationError("policy feature_dim does not match config");
    for (double w : params_.weights)
        if (!std::isfinite(w)) throw NumericError("non-finite policy weight");
}

QuerySample LogLinearPolicy::sample(const Question& question,
                                    const std::vector<Document>& context_docs,
                                    const PromptSpec& prompt, double temperature,
                                    uint64_t seed) const {
    if (temperature <= 0.0) throw ValidationError("temperature must be > 0");
    auto candidates = propose_candidates_tagged(question, context_docs, prompt,
                                                config_.max_candidates);
    std::vector<FeatureVector> features;
    features.reserve(candidates.size());
    for (const auto& c : candidates)
        features.push_back(featurize(question, context_docs, c, params_.feature_dim));

    auto probs = softmax_probs(params_, features, temperature);
    Rng rng(seed);
    const double r = rng.next_double();
    size_t pick = probs.size() - 1;
    double cum = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (r < cum) {
            pick = i;
            break;
        }
    }

    QuerySample out;
    out.query = candidates[pick].text;
    out.logprob = std::log(probs[pick]);
    out.prompt_id = prompt.id;
    out.temperature = temperature;
    return out;
}

const char* const kQueryPromptTemplateVersion = "query-prompt-v1";

std::string build_query_prompt(const PromptSpec& prompt, const Question& question,
                               const std::vector<Document>& context_docs) {
    std::string out;
    if (!prompt.payload.empty()) {
        out += prompt.payload;
        out += "\n\n";
    }
    out += "Question: " + question.text + "\n";
    out += "Context:\n";
    if (context_docs.empty()) {
        out += "(none)\n";
    } else {
        for (const auto& doc : context_docs) {
            out += "Title: " + doc.title + "\n";
            out += doc.text + "\n";
        }
    }
    out += "Produce one search query to retrieve documents that help answer the question. "
           "Reply with only the query.\n";
    return out;
}

RemotePolicy::RemotePolicy(RemotePolicyConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ValidationError("remote policy requires an endpoint");
    parse_endpoint(config_.endpoint);
}

QuerySample RemotePolicy::sample(const Question& question,
                                 const std::vector<Document>& context_docs,
                                 const PromptSpec& prompt, double temperature,
                                 uint64_t seed) const {
    if (temperature <= 0.0) throw ValidationError("temperature must be > 0");
    Endpoint ep = parse_endpoint(config_.endpoint);
    nlohmann::json body = {
        {"prompt", build_query_prompt(prompt, question, context_docs)},
        {"temperature", temperature},
        {"max_tokens", config_.max_tokens},
        {"seed", static_cast<int64_t>(seed & 0x7fffffffffffffffull)},
    };
    nlohmann::json res = http_post_json(ep, "/generate", body, config_.timeout_ms,
                                        config_.max_retries);
    if (!res.is_object() || !res.contains("text") || !res["text"].is_string())
        throw ProtocolError("generate response missing 'text'");

    QuerySample out;
    out.query = first_nonempty_line(res["text"].get<std::string>());
    out.prompt_id = prompt.id;
    out.temperature = temperature;
    return out;
}

} // namespace hopforge
