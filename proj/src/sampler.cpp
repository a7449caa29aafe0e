#include "hopforge/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <numeric>
#include <set>

#include "hopforge/errors.hpp"
#include "hopforge/jsonl.hpp"
#include "hopforge/log.hpp"
#include "hopforge/parallel.hpp"
#include "hopforge/rng.hpp"
#include "hopforge/text.hpp"
#include "hopforge/version.hpp"

namespace hopforge {

using nlohmann::json;

std::string current_timestamp() {
    int64_t t;
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) {
        errno = 0;
        char* end = nullptr;
        const long long v = std::strtoll(env, &end, 10);
        if (errno != 0 || end == env || *end != '\0' || v < 0)
            throw ValidationError("SOURCE_DATE_EPOCH must be a non-negative integer");
        t = v;
    } else {
        t = static_cast<int64_t>(std::time(nullptr));
    }
    std::tm tm{};
    const time_t tt = static_cast<time_t>(t);
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void DocBag::absorb(const RankedDocuments& docs) {
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& entry : docs.entries) {
        if (corpus_ && corpus_->find_document(entry.doc_id)) continue;
        extra_.try_emplace(entry.doc_id, Document{entry.doc_id, entry.title, entry.text});
    }
}

std::vector<Document> DocBag::resolve(const std::vector<std::string>& ids) const {
    std::vector<Document> out;
    out.reserve(ids.size());
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& id : ids) {
        if (corpus_) {
            if (const Document* doc = corpus_->find_document(id)) {
                out.push_back(*doc);
                continue;
            }
        }
        auto it = extra_.find(id);
        if (it == extra_.end()) throw IntegrityError("unknown document id " + id);
        out.push_back(it->second);
    }
    return out;
}

std::vector<PromptSpec> make_default_prompts(int count) {
    if (count < 1) throw ValidationError("prompt count must be >= 1");
    std::vector<PromptSpec> prompts;
    prompts.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        PromptSpec p;
        p.id = "p" + std::to_string(i);
        p.kind = i == 0 ? PromptKind::fixed_fewshot : PromptKind::diverse_member;
        p.payload = "You are query-writer variant " + std::to_string(i) +
                    ". Favor distinctive terms when writing search queries.";
        prompts.push_back(std::move(p));
    }
    return prompts;
}

std::vector<HopRecord> run_hop(const std::vector<HopInput>& inputs,
                               const std::vector<PromptSpec>& prompts, const QueryPolicy& policy,
                               const Retriever& retriever, int k_per_hop,
                               const RewardFn& reward_fn, DocBag& docs, int hop,
                               double temperature, uint64_t seed, int num_workers,
                               int* num_failures) {
    if (prompts.empty()) throw ValidationError("prompts must be non-empty");
    if (hop < 1) throw ValidationError("hop must be >= 1");
    for (const auto& input : inputs)
        if (!input.question) throw ValidationError("null question in hop input");

    std::vector<std::optional<HopRecord>> slots(inputs.size());
    std::atomic<int> failures{0};
    parallel_for(inputs.size(), num_workers, [&](size_t i) {
        const HopInput& input = inputs[i];
        const Question& q = *input.question;
        HopRecord rec;
        rec.question_id = q.id;
        rec.hop = hop;
        rec.context_before = input.context_before;
        const std::vector<Document> ctx_docs = docs.resolve(input.context_before.doc_ids);
        for (const auto& prompt : prompts) {
            const uint64_t s = derive_seed(seed, q.id, static_cast<uint64_t>(hop), prompt.id, 0);
            try {
                QuerySample qs = policy.sample(q, ctx_docs, prompt, temperature, s);
                if (trim(qs.query).empty()) throw ProtocolError("policy produced an empty query");
                const RankedDocuments ranked = retriever.retrieve(qs.query, k_per_hop);
                docs.absorb(ranked);
                Context after = union_contexts(input.context_before, ranked, hop);
                RewardLabel label = reward_fn(q, after, docs.resolve(after.doc_ids));
                HopSample hs;
                hs.sample = std::move(qs);
                hs.context_after = std::move(after);
                hs.reward = label.value;
                hs.reward_kind = label.kind;
                hs.generator_answer = std::move(label.generator_answer);
                hs.direct_ap = label.kind == RewardKind::direct_ap
                                   ? label.value
                                   : average_precision(hs.context_after, q.gold_doc_ids);
                rec.samples.push_back(std::move(hs));
            } catch (const TransportError& e) {
                failures.fetch_add(1, std::memory_order_relaxed);
                log_warn("sample failed", {{"question", q.id},
                                           {"hop", hop},
                                           {"prompt", prompt.id},
                                           {"error", e.what()}});
            }
        }
        if (rec.samples.empty())
            log_warn("question dropped for hop: all prompts failed",
                     {{"question", q.id}, {"hop", hop}});
        else
            slots[i] = std::move(rec);
    });

    if (num_failures) *num_failures += failures.load();
    std::vector<HopRecord> out;
    out.reserve(slots.size());
    for (auto& slot : slots)
        if (slot) out.push_back(std::move(*slot));
    return out;
}

std::vector<PreferencePair> build_preference_pairs(const HopRecord& record,
                                                   double min_reward_gap) {
    if (min_reward_gap < 0.0) throw ValidationError("min_reward_gap must be >= 0");
    std::vector<PreferencePair> out;
    const auto& s = record.samples;
    for (size_t i = 0; i < s.size(); ++i) {
        for (size_t j = i + 1; j < s.size(); ++j) {
            const HopSample& win = s[i].reward > s[j].reward ? s[i] : s[j];
            const HopSample& lose = s[i].reward > s[j].reward ? s[j] : s[i];
            if (!(win.reward - lose.reward > min_reward_gap)) continue;
            PreferencePair p;
            p.question_id = record.question_id;
            p.hop = record.hop;
            p.context_before = record.context_before;
            p.chosen = win.sample;
            p.rejected = lose.sample;
            p.chosen_reward = win.reward;
            p.rejected_reward = lose.reward;
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::optional<Context> select_next_context(const HopRecord& record, double optimal_reward,
                                           uint64_t seed) {
    std::vector<const HopSample*> open;
    for (const auto& s : record.samples)
        if (s.reward < optimal_reward - kOptimalRewardTolerance) open.push_back(&s);
    if (open.empty()) return std::nullopt;

    Rng rng(seed);
    double total = 0.0;
    for (const auto* s : open) total += s->reward;
    size_t pick;
    if (total <= 0.0) {
        pick = static_cast<size_t>(rng.next_below(open.size()));
    } else {
        const double r = rng.next_double() * total;
        double cum = 0.0;
        pick = open.size() - 1;
        for (size_t i = 0; i < open.size(); ++i) {
            cum += open[i]->reward;
            if (r < cum) {
                pick = i;
                break;
            }
        }
    }
    return open[pick]->context_after;
}

PreferenceDataset run_sampling(const Corpus& corpus, const std::vector<const Question*>& questions,
                               const std::vector<PromptSpec>& prompts, const QueryPolicy& policy,
                               const Retriever& retriever, int k_per_hop, const RewardFn& reward_fn,
                               const SamplingConfig& config) {
    if (config.num_hops < 1) throw ValidationError("num_hops must be >= 1");
    if (prompts.empty()) throw ValidationError("prompts must be non-empty");
    if (questions.empty()) throw ValidationError("no questions to sample");
    int lo = 1;
    int hi = config.num_hops;
    if (config.hop_subset) {
        lo = config.hop_subset->first;
        hi = config.hop_subset->second;
        if (lo < 1 || hi < lo || hi > config.num_hops)
            throw ValidationError("hop_subset out of range");
    }
    {
        std::set<std::string> ids;
        for (const auto& p : prompts)
            if (p.id.empty() || !ids.insert(p.id).second)
                throw ValidationError("prompt ids must be non-empty and unique");
    }

    DocBag docs(&corpus);
    std::vector<HopInput> active;
    active.reserve(questions.size());
    for (const Question* q : questions) {
        if (!q) throw ValidationError("null question pointer");
        active.push_back({q, Context{}});
    }

    PreferenceDataset ds;
    RunManifest m;
    m.code_version = std::string(kToolName) + " " + kVersion;
    m.config = config.config_snapshot;
    m.corpus_hash = to_hex64(corpus.content_hash());
    m.created_at = current_timestamp();
    m.num_questions = static_cast<int>(questions.size());
    m.seed = config.seed;
    for (const auto& p : prompts) m.prompt_ids.push_back(p.id);

    std::map<std::string, std::pair<double, long>> prompt_acc;
    int failures = 0;

    for (int hop = 1; hop <= hi && !active.empty(); ++hop) {
        const auto records =
            run_hop(active, prompts, policy, retriever, k_per_hop, reward_fn, docs, hop,
                    config.temperature, config.seed, config.num_workers, &failures);

        std::map<std::string, std::vector<double>> rewards_by_q;
        for (const auto& rec : records) {
            auto& seq = rewards_by_q[rec.question_id];
            for (const auto& s : rec.samples) {
                seq.push_back(s.reward);
                auto& acc = prompt_acc[s.sample.prompt_id];
                acc.first += s.reward;
                acc.second += 1;
            }
        }
        if (!rewards_by_q.empty()) {
            m.per_hop_stats[hop] = diversity_stats(rewards_by_q);
            m.per_hop_rewards[hop] = std::move(rewards_by_q);
        }

        if (hop >= lo) {
            for (const auto& rec : records) {
                auto pairs = build_preference_pairs(rec, config.min_reward_gap);
                ds.pairs.insert(ds.pairs.end(), std::make_move_iterator(pairs.begin()),
                                std::make_move_iterator(pairs.end()));
            }
        }
        if (hop == hi) break;

        std::unordered_map<std::string, const HopRecord*> by_q;
        for (const auto& rec : records) by_q[rec.question_id] = &rec;
        std::vector<HopInput> next;
        next.reserve(active.size());
        for (auto& input : active) {
            auto it = by_q.find(input.question->id);
            if (it == by_q.end()) {
                // All prompts failed this hop; keep the old context and retry
                // the question next hop rather than losing it entirely.
                next.push_back(std::move(input));
                continue;
            }
            auto sel = select_next_context(
                *it->second, config.optimal_reward,
                derive_seed(config.seed, input.question->id, static_cast<uint64_t>(hop),
                            "select", 0));
            if (sel) next.push_back({input.question, std::move(*sel)});
        }
        active = std::move(next);
    }

    std::sort(ds.pairs.begin(), ds.pairs.end(), [](const PreferencePair& a,
                                                   const PreferencePair& b) {
        return std::tie(a.question_id, a.hop, a.chosen.prompt_id, a.rejected.prompt_id) <
               std::tie(b.question_id, b.hop, b.chosen.prompt_id, b.rejected.prompt_id);
    });

    for (const auto& [id, acc] : prompt_acc)
        m.per_prompt_mean_reward[id] = acc.second > 0 ? acc.first / acc.second : 0.0;
    m.num_failures = failures;
    m.num_pairs = static_cast<int>(ds.pairs.size());
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : ds.pairs) {
        h = fnv1a64(pair_jsonl_line(p), h);
        h = fnv1a64("\n", h);
    }
    m.dataset_hash = to_hex64(h);
    ds.manifest = std::move(m);
    return ds;
}

PreferenceDataset run_sampling(const Corpus& corpus, const std::vector<PromptSpec>& prompts,
                               const QueryPolicy& policy, const Retriever& retriever, int k_per_hop,
                               const RewardFn& reward_fn, const SamplingConfig& config) {
    std::vector<const Question*> questions;
    questions.reserve(corpus.questions().size());
    for (const auto& q : corpus.questions()) questions.push_back(&q);
    return run_sampling(corpus, questions, prompts, policy, retriever, k_per_hop, reward_fn,
                        config);
}

double greedy_audit(const Corpus& corpus, const QueryPolicy& policy, const Retriever& retriever,
                    int k_per_hop, const RewardFn& reward_fn, int num_questions, uint64_t seed,
                    int num_workers, long* num_cases) {
    if (num_questions < 1) throw ValidationError("num_questions must be >= 1");
    const auto& all = corpus.questions();
    const bool multihop =
        std::any_of(all.begin(), all.end(), [](const Question& q) { return q.required_hops >= 2; });
    if (!multihop) throw ValidationError("greedy audit needs a corpus with >= 2 hops");

    std::vector<size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(seed, "audit-shuffle"));
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[shuffle.next_below(i)]);
    const size_t n = std::min(order.size(), static_cast<size_t>(num_questions));

    DocBag docs(&corpus);
    const PromptSpec plain{"audit", PromptKind::none, ""};
    constexpr int kAttempts = 4;
    std::atomic<long> cases{0};
    std::atomic<long> violations{0};

    parallel_for(n, num_workers, [&](size_t idx) {
        const Question& q = all[order[idx]];
        struct Arm {
            double reward;
            Context ctx;
        };
        std::vector<Arm> arms;
        for (int t = 0; t < kAttempts; ++t) {
            try {
                const auto qs = policy.sample(q, {}, plain, 1.0,
                                              derive_seed(seed, q.id, 1, "attempt",
                                                          static_cast<uint64_t>(t)));
                if (trim(qs.query).empty()) continue;
                const auto ranked = retriever.retrieve(qs.query, k_per_hop);
                docs.absorb(ranked);
                Context ctx = union_contexts({}, ranked, 1);
                const double r = reward_fn(q, ctx, docs.resolve(ctx.doc_ids)).value;
                arms.push_back({r, std::move(ctx)});
            } catch (const TransportError&) {
                continue;
            }
        }
        if (arms.empty()) return;
        const auto by_reward = [](const Arm& a, const Arm& b) { return a.reward < b.reward; };
        const Arm& high = *std::max_element(arms.begin(), arms.end(), by_reward);
        const Arm& low = *std::min_element(arms.begin(), arms.end(), by_reward);
        if (!(high.reward > low.reward)) return;

        auto rollout = [&](const Arm& arm, std::string_view side) -> std::optional<double> {
            try {
                const auto ctx_docs = docs.resolve(arm.ctx.doc_ids);
                const auto qs =
                    policy.sample(q, ctx_docs, plain, 1.0, derive_seed(seed, q.id, 2, side, 0));
                if (trim(qs.query).empty()) return std::nullopt;
                const auto ranked = retriever.retrieve(qs.query, k_per_hop);
                docs.absorb(ranked);
                const Context after = union_contexts(arm.ctx, ranked, 2);
                return reward_fn(q, after, docs.resolve(after.doc_ids)).value;
            } catch (const TransportError&) {
                return std::nullopt;
            }
        };
        const auto high_total = rollout(high, "high");
        const auto low_total = rollout(low, "low");
        if (!high_total || !low_total) return;
        cases.fetch_add(1, std::memory_order_relaxed);
        if (*low_total > *high_total) violations.fetch_add(1, std::memory_order_relaxed);
    });

    if (num_cases) *num_cases = cases.load();
    if (cases.load() == 0)
        throw DomainError("greedy audit: 0 reward-distinct context pairs among " +
                          std::to_string(n) + " questions");
    return static_cast<double>(violations.load()) / static_cast<double>(cases.load());
}

std::string pair_jsonl_line(const PreferencePair& pair) {
    json j;
    j["chosen_prompt_id"] = pair.chosen.prompt_id;
    j["chosen_query"] = pair.chosen.query;
    j["chosen_reward"] = pair.chosen_reward;
    j["context_doc_ids"] = pair.context_before.doc_ids;
    j["hop"] = pair.hop;
    j["question_id"] = pair.question_id;
    j["rejected_prompt_id"] = pair.rejected.prompt_id;
    j["rejected_query"] = pair.rejected.query;
    j["rejected_reward"] = pair.rejected_reward;
    return j.dump();
}

std::string manifest_path_for(const std::string& dataset_path) {
    return dataset_path + ".manifest.json";
}

namespace {

json stats_to_json(const DiversityStats& s) {
    json j;
    j["gold_rate"] = s.gold_rate;
    j["mean_ap_stddev"] = s.mean_ap_stddev;
    j["mean_unique_ap"] = s.mean_unique_ap;
    j["num_preference_pairs"] = s.num_preference_pairs;
    return j;
}

DiversityStats stats_from_json(const json& j) {
    DiversityStats s;
    s.gold_rate = j.at("gold_rate").get<double>();
    s.mean_ap_stddev = j.at("mean_ap_stddev").get<double>();
    s.mean_unique_ap = j.at("mean_unique_ap").get<double>();
    s.num_preference_pairs = j.at("num_preference_pairs").get<long>();
    return s;
}

} // namespace

json manifest_to_json(const RunManifest& manifest) {
    json j;
    j["code_version"] = manifest.code_version;
    j["config"] = manifest.config;
    j["corpus_hash"] = manifest.corpus_hash;
    j["created_at"] = manifest.created_at;
    j["dataset_hash"] = manifest.dataset_hash;
    j["num_failures"] = manifest.num_failures;
    j["num_pairs"] = manifest.num_pairs;
    j["num_questions"] = manifest.num_questions;
    json rewards = json::object();
    for (const auto& [hop, by_q] : manifest.per_hop_rewards) rewards[std::to_string(hop)] = by_q;
    j["per_hop_rewards"] = std::move(rewards);
    json stats = json::object();
    for (const auto& [hop, s] : manifest.per_hop_stats)
        stats[std::to_string(hop)] = stats_to_json(s);
    j["per_hop_stats"] = std::move(stats);
    j["per_prompt_mean_reward"] = manifest.per_prompt_mean_reward;
    j["prompt_ids"] = manifest.prompt_ids;
    j["seed"] = manifest.seed;
    return j;
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    try {
        m.code_version = j.at("code_version").get<std::string>();
        m.config = j.value("config", json::object());
        m.corpus_hash = j.at("corpus_hash").get<std::string>();
        m.created_at = j.value("created_at", "");
        m.dataset_hash = j.at("dataset_hash").get<std::string>();
        m.num_failures = j.value("num_failures", 0);
        m.num_pairs = j.value("num_pairs", 0);
        m.num_questions = j.value("num_questions", 0);
        const json rewards = j.value("per_hop_rewards", json::object());
        for (const auto& [hop, by_q] : rewards.items())
            m.per_hop_rewards[std::stoi(hop)] =
                by_q.get<std::map<std::string, std::vector<double>>>();
        const json stats = j.value("per_hop_stats", json::object());
        for (const auto& [hop, s] : stats.items())
            m.per_hop_stats[std::stoi(hop)] = stats_from_json(s);
        m.per_prompt_mean_reward =
            j.value("per_prompt_mean_reward", std::map<std::string, double>{});
        m.prompt_ids = j.value("prompt_ids", std::vector<std::string>{});
        m.seed = j.at("seed").get<uint64_t>();
    } catch (const std::exception& e) {
        throw IntegrityError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

void write_preference_dataset(const PreferenceDataset& dataset, const std::string& path) {
    std::string body;
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : dataset.pairs) {
        const std::string line = pair_jsonl_line(p);
        h = fnv1a64(line, h);
        h = fnv1a64("\n", h);
        body += line;
        body += '\n';
    }
    write_text_file(path, body);
    if (dataset.manifest) {
        RunManifest m = *dataset.manifest;
        m.dataset_hash = to_hex64(h);
        m.num_pairs = static_cast<int>(dataset.pairs.size());
        write_text_file(manifest_path_for(path), manifest_to_json(m).dump(2) + "\n");
    }
}

PreferenceDataset load_preference_dataset(const std::string& path) {
    PreferenceDataset ds;
    for_each_jsonl_line(path, [&](const json& j) {
        PreferencePair p;
        p.question_id = j.at("question_id").get<std::string>();
        p.hop = j.at("hop").get<int>();
        for (const auto& id : j.at("context_doc_ids")) {
            p.context_before.doc_ids.push_back(id.get<std::string>());
            p.context_before.source_hops.push_back(0);
        }
        p.chosen.query = j.at("chosen_query").get<std::string>();
        p.chosen.prompt_id = j.at("chosen_prompt_id").get<std::string>();
        p.rejected.query = j.at("rejected_query").get<std::string>();
        p.rejected.prompt_id = j.at("rejected_prompt_id").get<std::string>();
        p.chosen_reward = j.at("chosen_reward").get<double>();
        p.rejected_reward = j.at("rejected_reward").get<double>();
        if (p.hop < 1) throw IntegrityError(path + ": pair with hop < 1 for " + p.question_id);
        if (!(p.chosen_reward > p.rejected_reward))
            throw IntegrityError(path + ": pair violates chosen_reward > rejected_reward for " +
                                 p.question_id);
        ds.pairs.push_back(std::move(p));
    });
    const std::string mpath = manifest_path_for(path);
    if (std::filesystem::exists(mpath)) ds.manifest = manifest_from_json(load_json_file(mpath));
    return ds;
}

std::vector<DualRewardGroup> dual_reward_groups(const std::vector<HopRecord>& records) {
    std::vector<DualRewardGroup> out;
    for (const auto& rec : records) {
        DualRewardGroup g;
        g.question_id = rec.question_id;
        g.hop = rec.hop;
        for (const auto& s : rec.samples)
            if (s.reward_kind == RewardKind::indirect_f1)
                g.samples.push_back({s.direct_ap, s.reward});
        if (g.samples.size() >= 2) out.push_back(std::move(g));
    }
    return out;
}

} // namespace hopforge
