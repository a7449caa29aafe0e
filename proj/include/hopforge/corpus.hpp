#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace hopforge {

struct Document {
    std::string id;
    std::string title;
    std::string text;
};

struct Question {
    std::string id;
    std::string text;
    std::vector<std::string> gold_doc_ids; // kept sorted, unique
    std::string gold_answer;
    int required_hops = 1;
};

// Immutable after construction; safe to share across threads.
class Corpus {
public:
    Corpus() = default;
    Corpus(std::vector<Document> docs, std::vector<Question> questions);

    const std::vector<Document>& documents() const { return documents_; }
    const std::vector<Question>& questions() const { return questions_; }

    const Document* find_document(const std::string& id) const;
    const Question* find_question(const std::string& id) const;

    // Content hash over the canonical JSONL serialization. Stable across
    // runs; artifacts embed it so downstream tools can detect mismatches.
    uint64_t content_hash() const;

private:
    void validate() const;

    std::vector<Document> documents_;
    std::vector<Question> questions_;
    std::unordered_map<std::string, size_t> doc_index_;
    std::unordered_map<std::string, size_t> question_index_;
};

struct ChainSpec {
    int num_entities = 0;
    int num_chains = 0;
    int chain_length = 1; // hops per question
    int vocab_size = 0;   // filler vocabulary
    int distractors_per_doc = 0;
    uint64_t seed = 0;
};

// Builds a corpus of entity chains: the question names the first entity,
// each entity's document names the next one, and the last document carries
// the answer token. Deterministic given the spec.
Corpus generate_synthetic_corpus(const ChainSpec& spec);

enum class DatasetFormat { qa_jsonl };

// `path` is a directory holding docs.jsonl and questions.jsonl.
Corpus load_dataset(const std::string& path, DatasetFormat format = DatasetFormat::qa_jsonl);
Corpus load_dataset_files(const std::string& docs_path, const std::string& questions_path);

void write_dataset(const Corpus& corpus, const std::string& dir);

// Disjoint, exhaustive partition of question ids into near-equal sets
// (sizes differ by at most one). Deterministic given the seed.
std::vector<std::vector<std::string>> partition_questions(const Corpus& corpus,
                                                          int num_partitions,
                                                          uint64_t seed);

// Shuffled train/test split of question ids. Deterministic given the seed.
struct CorpusSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};
CorpusSplit split_questions(const Corpus& corpus, int num_test, uint64_t seed);

} // namespace hopforge
