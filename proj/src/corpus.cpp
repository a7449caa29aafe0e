#include "hopforge/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hopforge/errors.hpp"
#include "hopforge/jsonl.hpp"
#include "hopforge/log.hpp"
#include "hopforge/rng.hpp"

namespace hopforge {

using nlohmann::json;

namespace {

// Disjoint syllable alphabets per token class keep entity names, filler
// words, and answer tokens collision-free by construction.
const char* kEntitySyllables[20] = {"ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du",
                                    "ka", "ke", "ki", "ko", "ku", "ma", "me", "mi", "mo", "mu"};
const char* kFillerSyllables[20] = {"fa", "fe", "fi", "fo", "fu", "ga", "ge", "gi", "go", "gu",
                                    "ha", "he", "hi", "ho", "hu", "ja", "je", "ji", "jo", "ju"};
const char* kAnswerSyllables[20] = {"na", "ne", "ni", "no", "nu", "pa", "pe", "pi", "po", "pu",
                                    "ra", "re", "ri", "ro", "ru", "sa", "se", "si", "so", "su"};

std::string spell(int index, const char* const syllables[20]) {
    // three syllables, base 20: covers 8000 distinct names per class
    std::string s;
    s += syllables[(index / 400) % 20];
    s += syllables[(index / 20) % 20];
    s += syllables[index % 20];
    return s;
}

std::string doc_line(const Document& d) {
    json j;
    j["id"] = d.id;
    j["title"] = d.title;
    j["text"] = d.text;
    return j.dump();
}

std::string question_line(const Question& q) {
    json j;
    j["id"] = q.id;
    j["text"] = q.text;
    j["gold_doc_ids"] = q.gold_doc_ids;
    j["gold_answer"] = q.gold_answer;
    j["required_hops"] = q.required_hops;
    return j.dump();
}

std::string padded_index(int i, int width = 6) {
    std::string s = std::to_string(i);
    if (static_cast<int>(s.size()) < width) s.insert(0, width - s.size(), '0');
    return s;
}

} // namespace

Corpus::Corpus(std::vector<Document> docs, std::vector<Question> questions)
    : documents_(std::move(docs)), questions_(std::move(questions)) {
    doc_index_.reserve(documents_.size());
    for (size_t i = 0; i < documents_.size(); ++i) {
        if (!doc_index_.emplace(documents_[i].id, i).second)
            throw IntegrityError("duplicate document id: " + documents_[i].id);
    }
    question_index_.reserve(questions_.size());
    for (size_t i = 0; i < questions_.size(); ++i) {
        auto& q = questions_[i];
        std::sort(q.gold_doc_ids.begin(), q.gold_doc_ids.end());
        q.gold_doc_ids.erase(std::unique(q.gold_doc_ids.begin(), q.gold_doc_ids.end()),
                             q.gold_doc_ids.end());
        if (!question_index_.emplace(q.id, i).second)
            throw IntegrityError("duplicate question id: " + q.id);
    }
    validate();
}

void Corpus::validate() const {
    for (const auto& d : documents_) {
        if (d.text.empty()) throw IntegrityError("document " + d.id + " has empty text");
    }
    for (const auto& q : questions_) {
        if (q.gold_doc_ids.empty())
            throw IntegrityError("question " + q.id + " has no gold documents");
        if (q.required_hops < 1)
            throw IntegrityError("question " + q.id + " has required_hops < 1");
        for (const auto& gid : q.gold_doc_ids) {
            if (!doc_index_.count(gid))
                throw IntegrityError("question " + q.id + " references unknown document " + gid);
        }
    }
}

const Document* Corpus::find_document(const std::string& id) const {
    auto it = doc_index_.find(id);
    return it == doc_index_.end() ? nullptr : &documents_[it->second];
}

const Question* Corpus::find_question(const std::string& id) const {
    auto it = question_index_.find(id);
    return it == question_index_.end() ? nullptr : &questions_[it->second];
}

uint64_t Corpus::content_hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& d : documents_) h = fnv1a64(doc_line(d) + "\n", h);
    for (const auto& q : questions_) h = fnv1a64(question_line(q) + "\n", h);
    return h;
}

Corpus generate_synthetic_corpus(const ChainSpec& spec) {
    if (spec.chain_length < 1) throw ValidationError("chain_length must be >= 1");
    if (spec.num_chains < 1) throw ValidationError("num_chains must be >= 1");
    if (spec.vocab_size < 1) throw ValidationError("vocab_size must be >= 1");
    if (spec.distractors_per_doc < 0)
        throw ValidationError("distractors_per_doc must be >= 0");
    const long needed = static_cast<long>(spec.num_chains) * spec.chain_length;
    if (spec.num_entities < needed)
        throw ValidationError("num_entities must be >= num_chains * chain_length");
    if (spec.num_entities > 8000) throw ValidationError("num_entities must be <= 8000");
    if (spec.num_chains > 8000) throw ValidationError("num_chains must be <= 8000");
    if (spec.vocab_size > 8000) throw ValidationError("vocab_size must be <= 8000");

    Rng rng(derive_seed(spec.seed, "synthetic-corpus"));

    // seeded assignment of entity names to chain slots
    std::vector<int> entity_ids(spec.num_entities);
    for (int i = 0; i < spec.num_entities; ++i) entity_ids[i] = i;
    for (int i = spec.num_entities - 1; i > 0; --i) {
        int j = static_cast<int>(rng.next_below(static_cast<uint64_t>(i) + 1));
        std::swap(entity_ids[i], entity_ids[j]);
    }

    const int L = spec.chain_length;
    auto entity_name = [&](int chain, int hop) {
        return spell(entity_ids[chain * L + hop], kEntitySyllables);
    };

    std::vector<Document> docs;
    std::vector<Question> questions;
    docs.reserve(static_cast<size_t>(spec.num_chains) * L);
    questions.reserve(spec.num_chains);

    for (int c = 0; c < spec.num_chains; ++c) {
        const std::string answer = spell(c, kAnswerSyllables);
        std::vector<std::string> gold_ids;
        for (int h = 0; h < L; ++h) {
            const std::string ent = entity_name(c, h);
            Document d;
            d.id = "d-" + ent;
            d.title = ent;

            std::ostringstream text;
            // Lead sentence: the forward link sits early in the document so a
            // reader scanning the opening finds the next entity in the chain.
            if (h + 1 < L) {
                text << ent << " points next to " << entity_name(c, h + 1) << ".";
            } else {
                text << ent << " closes the chain here and the answer is " << answer << ".";
            }
            text << " in brief";
            for (int w = 0; w < 10; ++w) {
                text << " " << spell(static_cast<int>(rng.next_below(spec.vocab_size)),
                                     kFillerSyllables);
            }
            text << ".";
            if (spec.distractors_per_doc > 0 && spec.num_chains > 1) {
                text << " " << ent << " also mentions";
                for (int k = 0; k < spec.distractors_per_doc; ++k) {
                    int oc = static_cast<int>(rng.next_below(spec.num_chains - 1));
                    if (oc >= c) ++oc; // any chain but this one
                    int oh = static_cast<int>(rng.next_below(L));
                    text << " " << entity_name(oc, oh);
                }
                text << ".";
            }
            d.text = text.str();
            gold_ids.push_back(d.id);
            docs.push_back(std::move(d));
        }

        Question q;
        q.id = "q-" + padded_index(c);
        q.text = "which answer does the chain starting at " + entity_name(c, 0) +
                 " finally reach";
        q.gold_doc_ids = std::move(gold_ids);
        q.gold_answer = answer;
        q.required_hops = L;
        questions.push_back(std::move(q));
    }

    return Corpus(std::move(docs), std::move(questions));
}

Corpus load_dataset_files(const std::string& docs_path, const std::string& questions_path) {
    std::vector<Document> docs;
    for_each_jsonl_line(docs_path, [&](const json& j) {
        Document d;
        d.id = j.at("id").get<std::string>();
        d.title = j.value("title", std::string{});
        d.text = j.at("text").get<std::string>();
        docs.push_back(std::move(d));
    });
    std::vector<Question> questions;
    for_each_jsonl_line(questions_path, [&](const json& j) {
        Question q;
        q.id = j.at("id").get<std::string>();
        q.text = j.at("text").get<std::string>();
        q.gold_doc_ids = j.at("gold_doc_ids").get<std::vector<std::string>>();
        q.gold_answer = j.value("gold_answer", std::string{});
        q.required_hops = j.value("required_hops", 1);
        questions.push_back(std::move(q));
    });
    if (docs.empty() && questions.empty())
        log_warn("loaded empty corpus", {{"docs", docs_path}, {"questions", questions_path}});
    return Corpus(std::move(docs), std::move(questions));
}

Corpus load_dataset(const std::string& path, DatasetFormat format) {
    if (format != DatasetFormat::qa_jsonl)
        throw ValidationError("unsupported dataset format");
    namespace fs = std::filesystem;
    fs::path dir(path);
    if (!fs::is_directory(dir))
        throw IntegrityError("dataset path is not a directory: " + path);
    return load_dataset_files((dir / "docs.jsonl").string(), (dir / "questions.jsonl").string());
}

void write_dataset(const Corpus& corpus, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "docs.jsonl", std::ios::binary);
        for (const auto& d : corpus.documents()) out << doc_line(d) << "\n";
    }
    {
        std::ofstream out(fs::path(dir) / "questions.jsonl", std::ios::binary);
        for (const auto& q : corpus.questions()) out << question_line(q) << "\n";
    }
}

namespace {

std::vector<std::string> shuffled_question_ids(const Corpus& corpus, uint64_t seed,
                                               const char* label) {
    std::vector<std::string> ids;
    ids.reserve(corpus.questions().size());
    for (const auto& q : corpus.questions()) ids.push_back(q.id);
    Rng rng(derive_seed(seed, label));
    for (size_t i = ids.size(); i > 1; --i) {
        size_t j = rng.next_below(i);
        std::swap(ids[i - 1], ids[j]);
    }
    return ids;
}

} // namespace

std::vector<std::vector<std::string>> partition_questions(const Corpus& corpus,
                                                          int num_partitions, uint64_t seed) {
    if (num_partitions < 1) throw ValidationError("num_partitions must be >= 1");
    const size_t n = corpus.questions().size();
    if (static_cast<size_t>(num_partitions) > n)
        throw ValidationError("num_partitions (" + std::to_string(num_partitions) +
                              ") exceeds question count (" + std::to_string(n) + ")");
    auto ids = shuffled_question_ids(corpus, seed, "partition");
    std::vector<std::vector<std::string>> parts(num_partitions);
    const size_t base = n / num_partitions;
    const size_t rem = n % num_partitions;
    size_t pos = 0;
    for (int p = 0; p < num_partitions; ++p) {
        size_t take = base + (static_cast<size_t>(p) < rem ? 1 : 0);
        parts[p].assign(ids.begin() + pos, ids.begin() + pos + take);
        pos += take;
    }
    return parts;
}

CorpusSplit split_questions(const Corpus& corpus, int num_test, uint64_t seed) {
    const size_t n = corpus.questions().size();
    if (num_test < 0 || static_cast<size_t>(num_test) > n)
        throw ValidationError("num_test out of range");
    auto ids = shuffled_question_ids(corpus, seed, "split");
    CorpusSplit split;
    split.test_ids.assign(ids.begin(), ids.begin() + num_test);
    split.train_ids.assign(ids.begin() + num_test, ids.end());
    return split;
}

} // namespace hopforge
