#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hopforge/corpus.hpp"

namespace hopforge {

struct RankedEntry {
    std::string doc_id;
    double score = 0.0;
    std::string title; // carried along so remote documents stay resolvable
    std::string text;
};

struct RankedDocuments {
    std::vector<RankedEntry> entries; // scores non-increasing, ids unique
    int k_requested = 0;
};

enum class RetrieverBackend { lexical, remote };

struct RetrieverConfig {
    RetrieverBackend backend = RetrieverBackend::lexical;
    int k_per_hop = 2;
    std::string endpoint; // required iff backend == remote
    int timeout_ms = 5000;
    int max_retries = 2;
};

// Ordered, deduplicated union of everything retrieved so far.
struct Context {
    std::vector<std::string> doc_ids;
    std::vector<int> source_hops; // parallel to doc_ids

    bool contains(const std::string& id) const;
};

Context union_contexts(const Context& previous, const RankedDocuments& new_docs, int hop);

// Term-overlap score with no corpus statistics: sum over distinct query
// terms present in the document of 1 + ln(term frequency). Zero iff no
// query term occurs.
double lexical_score(const std::string& query, const Document& doc);

class Retriever {
public:
    virtual ~Retriever() = default;
    virtual RankedDocuments retrieve(const std::string& query, int k) const = 0;
};

// Deterministic tf-idf retriever over an immutable in-memory index.
// Read-only after construction; safe for concurrent queries.
class LexicalRetriever : public Retriever {
public:
    explicit LexicalRetriever(const Corpus& corpus);
    ~LexicalRetriever() override;

    RankedDocuments retrieve(const std::string& query, int k) const override;
    double score(const std::string& query, const std::string& doc_id) const;

private:
    struct Index;
    std::unique_ptr<Index> index_;
};

// Client for the external search service; stateless per call, so instances
// may be shared across threads.
class RemoteRetriever : public Retriever {
public:
    explicit RemoteRetriever(RetrieverConfig config);
    RankedDocuments retrieve(const std::string& query, int k) const override;

private:
    RetrieverConfig config_;
};

std::unique_ptr<Retriever> make_retriever(const RetrieverConfig& config, const Corpus* corpus);

} // namespace hopforge
