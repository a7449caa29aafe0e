#include "hopforge/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "hopforge/errors.hpp"
#include "hopforge/http.hpp"
#include "hopforge/log.hpp"
#include "hopforge/text.hpp"

namespace hopforge {

namespace {

void validate_query(const std::string& query, int k) {
    if (trim(query).empty()) throw ValidationError("query is empty");
    if (k < 1) throw ValidationError("k must be >= 1");
}

std::map<std::string, int> term_counts(const Document& doc) {
    std::map<std::string, int> counts;
    for (auto& t : tokenize(doc.title + " " + doc.text)) ++counts[t];
    return counts;
}

std::vector<std::string> unique_query_terms(const std::string& query) {
    auto terms = tokenize(query);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    return terms;
}

} // namespace

bool Context::contains(const std::string& id) const {
    return std::find(doc_ids.begin(), doc_ids.end(), id) != doc_ids.end();
}

Context union_contexts(const Context& previous, const RankedDocuments& new_docs, int hop) {
    if (hop < 1) throw ValidationError("hop must be >= 1");
    Context out = previous;
    for (const auto& entry : new_docs.entries) {
        if (!out.contains(entry.doc_id)) {
            out.doc_ids.push_back(entry.doc_id);
            out.source_hops.push_back(hop);
        }
    }
    return out;
}

double lexical_score(const std::string& query, const Document& doc) {
    auto counts = term_counts(doc);
    double score = 0.0;
    for (const auto& term : unique_query_terms(query)) {
        auto it = counts.find(term);
        if (it != counts.end()) score += 1.0 + std::log(static_cast<double>(it->second));
    }
    return score;
}

struct LexicalRetriever::Index {
    std::vector<std::string> doc_ids;                    // corpus order
    std::vector<std::string> titles;
    std::vector<std::string> texts;
    std::vector<size_t> docs_by_id;                      // indices sorted by doc id
    std::unordered_map<std::string, std::vector<std::pair<size_t, int>>> postings;
    std::unordered_map<std::string, double> idf;
    std::unordered_map<std::string, size_t> id_to_index;
};

LexicalRetriever::LexicalRetriever(const Corpus& corpus) : index_(std::make_unique<Index>()) {
    auto& ix = *index_;
    const auto& docs = corpus.documents();
    const size_t n = docs.size();
    ix.doc_ids.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        ix.doc_ids.push_back(docs[i].id);
        ix.titles.push_back(docs[i].title);
        ix.texts.push_back(docs[i].text);
        ix.id_to_index[docs[i].id] = i;
        for (const auto& [term, count] : term_counts(docs[i]))
            ix.postings[term].emplace_back(i, count);
    }
    for (const auto& [term, posting] : ix.postings) {
        // strictly positive so every matched term contributes to the score
        ix.idf[term] =
            std::log(1.0 + static_cast<double>(n + 1) / static_cast<double>(posting.size() + 1));
    }
    ix.docs_by_id.resize(n);
    for (size_t i = 0; i < n; ++i) ix.docs_by_id[i] = i;
    std::sort(ix.docs_by_id.begin(), ix.docs_by_id.end(),
              [&](size_t a, size_t b) { return ix.doc_ids[a] < ix.doc_ids[b]; });
}

LexicalRetriever::~LexicalRetriever() = default;

RankedDocuments LexicalRetriever::retrieve(const std::string& query, int k) const {
    validate_query(query, k);
    const auto& ix = *index_;

    // accumulate in sorted term order so float summation is reproducible
    std::unordered_map<size_t, double> scores;
    for (const auto& term : unique_query_terms(query)) {
        auto it = ix.postings.find(term);
        if (it == ix.postings.end()) continue;
        const double idf = ix.idf.at(term);
        for (const auto& [doc, count] : it->second)
            scores[doc] += idf * (1.0 + std::log(static_cast<double>(count)));
    }

    std::vector<std::pair<size_t, double>> matched(scores.begin(), scores.end());
    std::sort(matched.begin(), matched.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return ix.doc_ids[a.first] < ix.doc_ids[b.first];
    });

    RankedDocuments out;
    out.k_requested = k;
    for (const auto& [doc, score] : matched) {
        if (static_cast<int>(out.entries.size()) >= k) break;
        out.entries.push_back({ix.doc_ids[doc], score, ix.titles[doc], ix.texts[doc]});
    }
    // pad with zero-score documents in id order, matching the tie-break rule
    if (static_cast<int>(out.entries.size()) < k) {
        for (size_t doc : ix.docs_by_id) {
            if (static_cast<int>(out.entries.size()) >= k) break;
            if (!scores.count(doc))
                out.entries.push_back({ix.doc_ids[doc], 0.0, ix.titles[doc], ix.texts[doc]});
        }
    }
    return out;
}

double LexicalRetriever::score(const std::string& query, const std::string& doc_id) const {
    const auto& ix = *index_;
    auto it = ix.id_to_index.find(doc_id);
    if (it == ix.id_to_index.end()) throw ValidationError("unknown document id: " + doc_id);
    double score = 0.0;
    for (const auto& term : unique_query_terms(query)) {
        auto pit = ix.postings.find(term);
        if (pit == ix.postings.end()) continue;
        for (const auto& [doc, count] : pit->second) {
            if (doc == it->second)
                score += ix.idf.at(term) * (1.0 + std::log(static_cast<double>(count)));
        }
    }
    return score;
}

RemoteRetriever::RemoteRetriever(RetrieverConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty())
        throw ValidationError("remote retriever requires an endpoint");
    parse_endpoint(config_.endpoint); // fail fast on malformed URLs
}

RankedDocuments RemoteRetriever::retrieve(const std::string& query, int k) const {
    validate_query(query, k);
    Endpoint ep = parse_endpoint(config_.endpoint);
    nlohmann::json body = {{"query", query}, {"k", k}};
    nlohmann::json res = http_post_json(ep, "/search", body, config_.timeout_ms, config_.max_retries);

    if (!res.is_object() || !res.contains("documents") || !res["documents"].is_array())
        throw ProtocolError("search response missing 'documents' array");

    RankedDocuments out;
    out.k_requested = k;
    std::unordered_set<std::string> seen;
    double prev_score = std::numeric_limits<double>::infinity();
    bool warned_dup = false, warned_order = false;
    for (const auto& j : res["documents"]) {
        if (static_cast<int>(out.entries.size()) >= k) break;
        RankedEntry e;
        try {
            e.doc_id = j.at("id").get<std::string>();
            e.title = j.value("title", std::string{});
            e.text = j.value("text", std::string{});
            e.score = j.value("score", 0.0);
        } catch (const nlohmann::json::exception& ex) {
            throw ProtocolError(std::string("malformed search hit: ") + ex.what());
        }
        if (!seen.insert(e.doc_id).second) {
            if (!warned_dup) {
                log_warn("duplicate doc id in search response", {{"doc_id", e.doc_id}});
                warned_dup = true;
            }
            continue;
        }
        if (e.score > prev_score) {
            if (!warned_order) {
                log_warn("non-monotone scores in search response; clamping",
                         {{"doc_id", e.doc_id}});
                warned_order = true;
            }
            e.score = prev_score;
        }
        prev_score = e.score;
        out.entries.push_back(std::move(e));
    }
    return out;
}

std::unique_ptr<Retriever> make_retriever(const RetrieverConfig& config, const Corpus* corpus) {
    switch (config.backend) {
    case RetrieverBackend::lexical:
        if (!corpus) throw ValidationError("lexical retriever requires a corpus");
        return std::make_unique<LexicalRetriever>(*corpus);
    case RetrieverBackend::remote:
        return std::make_unique<RemoteRetriever>(config);
    }
    throw ValidationError("unknown retriever backend");
}

} // namespace hopforge
