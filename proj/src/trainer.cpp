#include "hopforge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "hopforge/errors.hpp"
#include "hopforge/evalrun.hpp"
#include "hopforge/jsonl.hpp"
#include "hopforge/log.hpp"
#include "hopforge/rng.hpp"

namespace hopforge {

using nlohmann::json;

void validate_trainer_config(const TrainerConfig& config) {
    if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate))
        throw ValidationError("learning_rate must be finite and >= 0");
    if (!(config.tau > 0.0)) throw ValidationError("tau must be > 0");
    if (!(config.beta > 0.0)) throw ValidationError("beta must be > 0");
    if (config.sft_epochs < 0) throw ValidationError("sft_epochs must be >= 0");
    if (config.ipo_epochs < 0) throw ValidationError("ipo_epochs must be >= 0");
    if (config.batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (config.num_iterations < 1) throw ValidationError("num_iterations must be >= 1");
    if (config.max_candidates < 2) throw ValidationError("max_candidates must be >= 2");
}

namespace {

// Candidates and features for one (question, context) group, shared by every
// example in that group.
struct PrepGroup {
    const Question* question = nullptr;
    std::vector<Document> context_docs;
    std::vector<std::string> candidates;
    std::vector<FeatureVector> features;
};

class GroupCache {
public:
    GroupCache(const Corpus& corpus, int feature_dim, int max_candidates)
        : corpus_(corpus), feature_dim_(feature_dim), max_candidates_(max_candidates) {}

    const PrepGroup& get(const std::string& question_id, const std::vector<std::string>& doc_ids) {
        std::string key = question_id;
        for (const auto& id : doc_ids) {
            key += '\x1f';
            key += id;
        }
        auto it = groups_.find(key);
        if (it != groups_.end()) return it->second;

        PrepGroup group;
        group.question = corpus_.find_question(question_id);
        if (!group.question)
            throw IntegrityError("dataset references unknown question " + question_id);
        for (const auto& id : doc_ids) {
            const Document* doc = corpus_.find_document(id);
            if (!doc) throw IntegrityError("dataset references unknown document " + id);
            group.context_docs.push_back(*doc);
        }
        const PromptSpec plain; // kind = none: the un-prompted candidate set
        auto tagged = propose_candidates_tagged(*group.question, group.context_docs, plain,
                                                max_candidates_);
        group.candidates.reserve(tagged.size());
        group.features.reserve(tagged.size());
        for (auto& c : tagged) {
            group.features.push_back(
                featurize(*group.question, group.context_docs, c, feature_dim_));
            group.candidates.push_back(std::move(c.text));
        }
        return groups_.emplace(std::move(key), std::move(group)).first->second;
    }

private:
    const Corpus& corpus_;
    int feature_dim_;
    int max_candidates_;
    std::unordered_map<std::string, PrepGroup> groups_;
};

int find_candidate(const std::vector<std::string>& candidates, const std::string& query) {
    for (size_t i = 0; i < candidates.size(); ++i)
        if (candidates[i] == query) return static_cast<int>(i);
    return -1;
}

TrainingExample example_from_group(const PrepGroup& group) {
    TrainingExample ex;
    ex.question = group.question;
    ex.context_docs = group.context_docs;
    ex.candidates = group.candidates;
    ex.features = group.features;
    return ex;
}

std::string best_prompt_id(const PreferenceDataset& dataset) {
    if (!dataset.manifest || dataset.manifest->per_prompt_mean_reward.empty())
        throw ValidationError(
            "SFT needs the dataset manifest (per-prompt mean rewards); sidecar missing");
    std::string best;
    double best_mean = -1.0;
    for (const auto& [id, mean] : dataset.manifest->per_prompt_mean_reward) {
        if (mean > best_mean) { // map order makes ties resolve to the smallest id
            best_mean = mean;
            best = id;
        }
    }
    return best;
}

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed) {
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);
    return order;
}

void apply_step(PolicyParameters& params, const std::vector<double>& grad, double learning_rate,
                size_t batch_size) {
    const double scale = learning_rate / static_cast<double>(batch_size);
    for (size_t i = 0; i < params.weights.size(); ++i)
        if (grad[i] != 0.0) params.weights[i] -= scale * grad[i];
}

void sft_gradient(const PolicyParameters& params, const TrainingExample& ex,
                  std::vector<double>& grad) {
    const auto probs = softmax_probs(params, ex.features, 1.0);
    for (size_t i = 0; i < ex.features.size(); ++i)
        for (const auto& [idx, v] : ex.features[i].entries) grad[idx] += probs[i] * v;
    for (const auto& [idx, v] : ex.features[static_cast<size_t>(ex.chosen_index)].entries)
        grad[idx] -= v;
}

double pair_margin(const PolicyParameters& params, const PolicyParameters& reference_params,
                   const TrainingExample& ex) {
    if (ex.chosen_index < 0 || ex.rejected_index < 0)
        throw ValidationError("pair example is missing chosen/rejected indices");
    const double lw = loglinear_logprob(params, ex.candidates, ex.features, 1.0, ex.chosen_index);
    const double ll = loglinear_logprob(params, ex.candidates, ex.features, 1.0, ex.rejected_index);
    const double lw_ref =
        loglinear_logprob(reference_params, ex.candidates, ex.features, 1.0, ex.chosen_index);
    const double ll_ref =
        loglinear_logprob(reference_params, ex.candidates, ex.features, 1.0, ex.rejected_index);
    return (lw - lw_ref) - (ll - ll_ref);
}

// d margin / d w: the log-partition terms share one candidate set, so the
// expected-feature parts cancel and only the two feature vectors remain.
void add_margin_gradient(const TrainingExample& ex, double coeff, std::vector<double>& grad) {
    for (const auto& [idx, v] : ex.features[static_cast<size_t>(ex.chosen_index)].entries)
        grad[idx] += coeff * v;
    for (const auto& [idx, v] : ex.features[static_cast<size_t>(ex.rejected_index)].entries)
        grad[idx] -= coeff * v;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_neg(double x) { // log(1 + exp(-x)), stable
    return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

} // namespace

PreparedExamples prepare_sft_examples(const Corpus& corpus, const PreferenceDataset& dataset,
                                      int feature_dim, int max_candidates) {
    const std::string best = best_prompt_id(dataset);
    GroupCache cache(corpus, feature_dim, max_candidates);
    PreparedExamples out;
    std::set<std::string> seen;
    for (const auto& pair : dataset.pairs) {
        if (pair.chosen.prompt_id != best) continue;
        std::string key = pair.question_id + '\x1f' + std::to_string(pair.hop) + '\x1f' +
                          pair.chosen.query;
        for (const auto& id : pair.context_before.doc_ids) {
            key += '\x1f';
            key += id;
        }
        if (!seen.insert(std::move(key)).second) continue;
        ++out.num_total;
        const PrepGroup& group = cache.get(pair.question_id, pair.context_before.doc_ids);
        const int chosen = find_candidate(group.candidates, pair.chosen.query);
        if (chosen < 0) {
            ++out.num_skipped;
            continue;
        }
        TrainingExample ex = example_from_group(group);
        ex.chosen_index = chosen;
        out.examples.push_back(std::move(ex));
    }
    return out;
}

PreparedExamples prepare_ipo_examples(const Corpus& corpus, const PreferenceDataset& dataset,
                                      int feature_dim, int max_candidates) {
    GroupCache cache(corpus, feature_dim, max_candidates);
    PreparedExamples out;
    for (const auto& pair : dataset.pairs) {
        ++out.num_total;
        const PrepGroup& group = cache.get(pair.question_id, pair.context_before.doc_ids);
        const int chosen = find_candidate(group.candidates, pair.chosen.query);
        const int rejected = find_candidate(group.candidates, pair.rejected.query);
        if (chosen < 0 || rejected < 0 || chosen == rejected) {
            ++out.num_skipped;
            continue;
        }
        TrainingExample ex = example_from_group(group);
        ex.chosen_index = chosen;
        ex.rejected_index = rejected;
        out.examples.push_back(std::move(ex));
    }
    return out;
}

double sft_example_nll(const PolicyParameters& params, const TrainingExample& ex) {
    return -loglinear_logprob(params, ex.candidates, ex.features, 1.0, ex.chosen_index);
}

double mean_sft_nll(const PolicyParameters& params,
                    const std::vector<TrainingExample>& examples) {
    if (examples.empty()) throw ValidationError("no examples");
    double sum = 0.0;
    for (const auto& ex : examples) sum += sft_example_nll(params, ex);
    return sum / static_cast<double>(examples.size());
}

double ipo_pair_loss(const PolicyParameters& params, const PolicyParameters& reference_params,
                     const TrainingExample& ex, double tau) {
    if (!(tau > 0.0)) throw ValidationError("tau must be > 0");
    const double g = pair_margin(params, reference_params, ex) - 0.5 / tau;
    return g * g;
}

void ipo_pair_gradient(const PolicyParameters& params, const PolicyParameters& reference_params,
                       const TrainingExample& ex, double tau, std::vector<double>& grad) {
    if (!(tau > 0.0)) throw ValidationError("tau must be > 0");
    const double g = pair_margin(params, reference_params, ex) - 0.5 / tau;
    add_margin_gradient(ex, 2.0 * g, grad);
}

double bt_reference_loss(const PolicyParameters& params, const PolicyParameters& reference_params,
                         const TrainingExample& ex, double beta) {
    if (!(beta > 0.0)) throw ValidationError("beta must be > 0");
    return softplus_neg(beta * pair_margin(params, reference_params, ex));
}

void bt_reference_gradient(const PolicyParameters& params,
                           const PolicyParameters& reference_params, const TrainingExample& ex,
                           double beta, std::vector<double>& grad) {
    if (!(beta > 0.0)) throw ValidationError("beta must be > 0");
    const double x = beta * pair_margin(params, reference_params, ex);
    add_margin_gradient(ex, (stable_sigmoid(x) - 1.0) * beta, grad);
}

double mean_ipo_loss(const PolicyParameters& params, const PolicyParameters& reference_params,
                     const std::vector<TrainingExample>& examples, double tau) {
    if (examples.empty()) throw ValidationError("no examples");
    double sum = 0.0;
    for (const auto& ex : examples) sum += ipo_pair_loss(params, reference_params, ex, tau);
    return sum / static_cast<double>(examples.size());
}

TrainedPolicy sft_context_distillation(const Corpus& corpus, const PolicyParameters& init,
                                       const PreferenceDataset& dataset,
                                       const TrainerConfig& config) {
    validate_trainer_config(config);
    if (dataset.pairs.empty()) throw ValidationError("preference dataset is empty");
    if (init.feature_dim != static_cast<int>(init.weights.size()))
        throw ValidationError("policy weights do not match feature_dim");

    auto prep = prepare_sft_examples(corpus, dataset, init.feature_dim, config.max_candidates);
    if (prep.examples.empty())
        throw DomainError("SFT: none of the " + std::to_string(prep.num_total) +
                          " best-prompt queries are representable without prompting");
    if (prep.num_skipped > 0)
        log_warn("SFT skipped unrepresentable queries",
                 {{"skipped", prep.num_skipped}, {"total", prep.num_total}});

    TrainedPolicy out;
    out.params = init;
    out.sft_skipped = prep.num_skipped;
    long step = 0;
    std::vector<double> grad(init.weights.size(), 0.0);
    for (int epoch = 0; epoch < config.sft_epochs; ++epoch) {
        const auto order =
            shuffled_indices(prep.examples.size(),
                             derive_seed(config.seed, "sft-epoch", static_cast<uint64_t>(epoch)));
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size)) {
            const size_t end =
                std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss = 0.0;
            for (size_t b = start; b < end; ++b) {
                const auto& ex = prep.examples[order[b]];
                loss += sft_example_nll(out.params, ex);
                sft_gradient(out.params, ex, grad);
            }
            const size_t batch = end - start;
            out.training_log.emplace_back(step++, loss / static_cast<double>(batch));
            apply_step(out.params, grad, config.learning_rate, batch);
        }
    }
    if (config.sft_epochs > 0) out.params.version = init.version + 1;
    out.reference_params = out.params;
    return out;
}

TrainedPolicy train_ipo(const Corpus& corpus, const TrainedPolicy& policy,
                        const PreferenceDataset& dataset, const TrainerConfig& config) {
    validate_trainer_config(config);
    if (dataset.pairs.empty()) throw ValidationError("preference dataset is empty");
    const PolicyParameters& ref = policy.reference_params;
    if (ref.feature_dim != policy.params.feature_dim ||
        ref.weights.size() != policy.params.weights.size())
        throw ValidationError("reference params do not match policy params");

    auto prep =
        prepare_ipo_examples(corpus, dataset, policy.params.feature_dim, config.max_candidates);
    if (prep.examples.empty())
        throw DomainError("IPO: none of the " + std::to_string(prep.num_total) +
                          " pairs are representable without prompting");
    if (prep.num_skipped > 0)
        log_warn("IPO skipped unrepresentable pairs",
                 {{"skipped", prep.num_skipped}, {"total", prep.num_total}});

    TrainedPolicy out = policy;
    out.ipo_skipped = prep.num_skipped;
    if (config.ipo_epochs == 0) return out;

    const double initial = mean_ipo_loss(out.params, ref, prep.examples, config.tau);
    const double divergence_threshold = 10.0 * std::max(initial, 1e-6);
    long step = out.training_log.empty() ? 0 : out.training_log.back().first + 1;
    std::vector<double> grad(out.params.weights.size(), 0.0);
    for (int epoch = 0; epoch < config.ipo_epochs; ++epoch) {
        const auto order =
            shuffled_indices(prep.examples.size(),
                             derive_seed(config.seed, "ipo-epoch", static_cast<uint64_t>(epoch)));
        double min_batch_loss = std::numeric_limits<double>::infinity();
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size)) {
            const size_t end =
                std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss = 0.0;
            for (size_t b = start; b < end; ++b) {
                const auto& ex = prep.examples[order[b]];
                loss += ipo_pair_loss(out.params, ref, ex, config.tau);
                ipo_pair_gradient(out.params, ref, ex, config.tau, grad);
            }
            const size_t batch = end - start;
            loss /= static_cast<double>(batch);
            min_batch_loss = std::min(min_batch_loss, loss);
            out.training_log.emplace_back(step++, loss);
            apply_step(out.params, grad, config.learning_rate, batch);
        }
        if (min_batch_loss > divergence_threshold)
            throw NumericError("IPO diverged in epoch " + std::to_string(epoch + 1) +
                               ": every batch loss above " + std::to_string(divergence_threshold) +
                               " (initial " + std::to_string(initial) + ")");
    }
    out.params.version += 1;
    return out;
}

GradientReport finite_difference_check(
    const PolicyParameters& params, const std::function<double(const PolicyParameters&)>& loss_fn,
    const std::vector<double>& analytic_grad, int num_probes, double epsilon, uint64_t seed) {
    if (!(epsilon > 0.0 && epsilon <= 1e-2))
        throw ValidationError("epsilon must be in (0, 1e-2]");
    if (num_probes < 1) throw ValidationError("num_probes must be >= 1");
    if (analytic_grad.size() != params.weights.size())
        throw ValidationError("analytic gradient size does not match params");

    Rng rng(seed);
    std::vector<uint32_t> probes;
    {
        // Half the probes target the gradient's support (where errors would
        // show), the rest land anywhere to catch spurious zero entries.
        std::vector<uint32_t> support;
        for (size_t i = 0; i < analytic_grad.size(); ++i)
            if (analytic_grad[i] != 0.0) support.push_back(static_cast<uint32_t>(i));
        for (size_t i = support.size(); i > 1; --i)
            std::swap(support[i - 1], support[rng.next_below(i)]);
        const size_t from_support =
            std::min(support.size(), static_cast<size_t>((num_probes + 1) / 2));
        probes.assign(support.begin(), support.begin() + static_cast<long>(from_support));
    }
    while (probes.size() < static_cast<size_t>(num_probes))
        probes.push_back(static_cast<uint32_t>(rng.next_below(params.weights.size())));

    GradientReport report;
    report.num_probes = static_cast<int>(probes.size());
    PolicyParameters probe = params;
    for (uint32_t idx : probes) {
        const double orig = probe.weights[idx];
        probe.weights[idx] = orig + epsilon;
        const double up = loss_fn(probe);
        probe.weights[idx] = orig - epsilon;
        const double down = loss_fn(probe);
        probe.weights[idx] = orig;
        const double fd = (up - down) / (2.0 * epsilon);
        const double g = analytic_grad[idx];
        const double denom = std::max(std::abs(fd), std::abs(g));
        const double rel = denom < 1e-12 ? 0.0 : std::abs(fd - g) / denom;
        report.max_relative_error = std::max(report.max_relative_error, rel);
    }
    return report;
}

std::vector<IterationResult> iterative_leret(
    const Corpus& corpus, const std::vector<const Question*>& train_questions,
    const std::vector<const Question*>& eval_questions, const std::vector<PromptSpec>& prompts,
    const Retriever& retriever, int k_per_hop, const RewardFn& reward_fn,
    const SamplingConfig& sampling, const TrainerConfig& trainer,
    const LogLinearConfig& policy_config) {
    validate_trainer_config(trainer);
    if (train_questions.empty()) throw ValidationError("no training questions");
    const int iterations = trainer.num_iterations;
    if (static_cast<size_t>(iterations) > train_questions.size())
        throw ValidationError("empty partition: more iterations than training questions");

    // Seeded shuffle then contiguous chunks, remainder spread over the first
    // partitions — mirrors the corpus partitioner.
    std::vector<const Question*> pool = train_questions;
    Rng rng(derive_seed(sampling.seed, "partition"));
    for (size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.next_below(i)]);
    std::vector<std::vector<const Question*>> parts;
    const size_t base = pool.size() / static_cast<size_t>(iterations);
    const size_t rem = pool.size() % static_cast<size_t>(iterations);
    size_t cursor = 0;
    for (int p = 0; p < iterations; ++p) {
        const size_t take = base + (static_cast<size_t>(p) < rem ? 1 : 0);
        parts.emplace_back(pool.begin() + static_cast<long>(cursor),
                           pool.begin() + static_cast<long>(cursor + take));
        cursor += take;
    }

    PolicyParameters params = zero_parameters(policy_config.feature_dim);
    std::vector<IterationResult> results;
    for (int i = 0; i < iterations; ++i) {
        const LogLinearPolicy sampling_policy(params, policy_config);
        SamplingConfig sc = sampling;
        sc.seed = derive_seed(sampling.seed, "iteration", static_cast<uint64_t>(i));
        sc.config_snapshot["iteration"] = i + 1;
        sc.config_snapshot["sampling_policy_version"] = params.version;
        auto dataset = run_sampling(corpus, parts[static_cast<size_t>(i)], prompts,
                                    sampling_policy, retriever, k_per_hop, reward_fn, sc);

        TrainerConfig tc = trainer;
        tc.seed = derive_seed(trainer.seed, "iteration", static_cast<uint64_t>(i));
        TrainedPolicy sft = sft_context_distillation(corpus, params, dataset, tc);
        TrainedPolicy trained = train_ipo(corpus, sft, dataset, tc);

        IterationResult res;
        res.policy = trained;
        res.num_pairs = static_cast<int>(dataset.pairs.size());
        res.dataset = std::move(dataset);
        res.sft_skipped = sft.sft_skipped;
        res.ipo_skipped = trained.ipo_skipped;
        if (!eval_questions.empty()) {
            EvalOptions eo;
            eo.num_hops = sc.num_hops;
            eo.k_per_hop = k_per_hop;
            eo.temperature = sc.temperature;
            eo.num_workers = sc.num_workers;
            eo.seed = derive_seed(sampling.seed, "iteration-eval", static_cast<uint64_t>(i));
            const LogLinearPolicy trained_policy(trained.params, policy_config);
            res.eval_recall = evaluate_policy(corpus, eval_questions, trained_policy, retriever,
                                              nullptr, eo)
                                  .final_recall;
        }
        params = trained.params;
        results.push_back(std::move(res));
    }
    return results;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
    json j;
    j["corpus_hash"] = checkpoint.corpus_hash;
    j["created_at"] = checkpoint.created_at;
    j["dataset_hash"] = checkpoint.dataset_hash;
    j["feature_dim"] = checkpoint.params.feature_dim;
    j["format"] = "hopforge-checkpoint-v1";
    j["version"] = checkpoint.params.version;
    json weights = json::array();
    for (size_t i = 0; i < checkpoint.params.weights.size(); ++i)
        if (checkpoint.params.weights[i] != 0.0)
            weights.push_back(json::array({i, checkpoint.params.weights[i]}));
    j["weights"] = std::move(weights);
    write_text_file(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
    const json j = load_json_file(path);
    try {
        if (j.at("format").get<std::string>() != "hopforge-checkpoint-v1")
            throw IntegrityError(path + ": unsupported checkpoint format");
        Checkpoint c;
        c.corpus_hash = j.value("corpus_hash", "");
        c.dataset_hash = j.value("dataset_hash", "");
        c.created_at = j.value("created_at", "");
        c.params = zero_parameters(j.at("feature_dim").get<int>());
        c.params.version = j.at("version").get<int>();
        for (const auto& entry : j.at("weights")) {
            const auto idx = entry.at(0).get<size_t>();
            if (idx >= c.params.weights.size())
                throw IntegrityError(path + ": weight index out of range");
            c.params.weights[idx] = entry.at(1).get<double>();
        }
        return c;
    } catch (const json::exception& e) {
        throw IntegrityError(path + ": " + e.what());
    }
}

std::string corpus_hash_hex(const Corpus& corpus) { return to_hex64(corpus.content_hash()); }

} // namespace hopforge
