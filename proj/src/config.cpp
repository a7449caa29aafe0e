#include "hopforge/config.hpp"

#include <cmath>
#include <cstdlib>

#include "hopforge/errors.hpp"
#include "hopforge/jsonl.hpp"

namespace hopforge {

using nlohmann::json;

std::string to_string(PolicyBackend backend) {
    switch (backend) {
    case PolicyBackend::loglinear: return "loglinear";
    case PolicyBackend::remote: return "remote";
    }
    throw ValidationError("unknown policy backend");
}

PolicyBackend policy_backend_from_string(const std::string& name) {
    if (name == "loglinear") return PolicyBackend::loglinear;
    if (name == "remote") return PolicyBackend::remote;
    throw ValidationError("unknown policy backend: " + name);
}

std::string to_string(RetrieverBackend backend) {
    switch (backend) {
    case RetrieverBackend::lexical: return "lexical";
    case RetrieverBackend::remote: return "remote";
    }
    throw ValidationError("unknown retriever backend");
}

RetrieverBackend retriever_backend_from_string(const std::string& name) {
    if (name == "lexical") return RetrieverBackend::lexical;
    if (name == "remote") return RetrieverBackend::remote;
    throw ValidationError("unknown retriever backend: " + name);
}

json pipeline_config_to_json(const PipelineConfig& config) {
    json corpus = json::object();
    if (config.corpus.synthetic) {
        const ChainSpec& s = *config.corpus.synthetic;
        corpus["synthetic"] = {{"num_entities", s.num_entities},
                               {"num_chains", s.num_chains},
                               {"chain_length", s.chain_length},
                               {"vocab_size", s.vocab_size},
                               {"distractors_per_doc", s.distractors_per_doc},
                               {"seed", s.seed}};
    }
    if (!config.corpus.dataset_dir.empty()) corpus["dataset_dir"] = config.corpus.dataset_dir;

    json j;
    j["corpus"] = corpus;
    j["retriever"] = {{"backend", to_string(config.retriever.backend)},
                      {"k_per_hop", config.retriever.k_per_hop},
                      {"endpoint", config.retriever.endpoint},
                      {"timeout_ms", config.retriever.timeout_ms},
                      {"max_retries", config.retriever.max_retries}};
    j["policy"] = {{"backend", to_string(config.policy_backend)},
                   {"feature_dim", config.loglinear.feature_dim},
                   {"max_candidates", config.loglinear.max_candidates},
                   {"endpoint", config.remote_policy.endpoint},
                   {"timeout_ms", config.remote_policy.timeout_ms},
                   {"max_retries", config.remote_policy.max_retries},
                   {"max_tokens", config.remote_policy.max_tokens}};
    j["prompts"] = {{"count", config.num_prompts}};
    j["num_hops"] = config.num_hops;
    j["reward"] = {{"kind", to_string(config.reward_kind)},
                   {"generator_endpoint", config.generator.endpoint},
                   {"timeout_ms", config.generator.timeout_ms},
                   {"max_retries", config.generator.max_retries},
                   {"max_tokens", config.generator.max_tokens},
                   {"temperature", config.generator.temperature}};
    j["trainer"] = {{"learning_rate", config.trainer.learning_rate},
                    {"tau", config.trainer.tau},
                    {"beta", config.trainer.beta},
                    {"sft_epochs", config.trainer.sft_epochs},
                    {"ipo_epochs", config.trainer.ipo_epochs},
                    {"batch_size", config.trainer.batch_size},
                    {"seed", config.trainer.seed},
                    {"num_iterations", config.trainer.num_iterations}};
    j["sampling"] = {{"temperature", config.temperature},
                     {"min_reward_gap", config.min_reward_gap}};
    j["output_dir"] = config.output_dir;
    j["seed"] = config.seed;
    j["num_test_questions"] = config.num_test_questions;
    j["workers"] = config.num_workers;
    return j;
}

PipelineConfig pipeline_config_from_json(const json& j) {
    PipelineConfig c;
    try {
        if (j.contains("corpus")) {
            const json& corpus = j.at("corpus");
            if (corpus.contains("synthetic")) {
                const json& s = corpus.at("synthetic");
                ChainSpec spec;
                spec.num_entities = s.value("num_entities", spec.num_entities);
                spec.num_chains = s.value("num_chains", spec.num_chains);
                spec.chain_length = s.value("chain_length", spec.chain_length);
                spec.vocab_size = s.value("vocab_size", spec.vocab_size);
                spec.distractors_per_doc = s.value("distractors_per_doc", spec.distractors_per_doc);
                spec.seed = s.value("seed", spec.seed);
                c.corpus.synthetic = spec;
            }
            c.corpus.dataset_dir = corpus.value("dataset_dir", std::string());
        }
        if (j.contains("retriever")) {
            const json& r = j.at("retriever");
            c.retriever.backend =
                retriever_backend_from_string(r.value("backend", std::string("lexical")));
            c.retriever.k_per_hop = r.value("k_per_hop", c.retriever.k_per_hop);
            c.retriever.endpoint = r.value("endpoint", c.retriever.endpoint);
            c.retriever.timeout_ms = r.value("timeout_ms", c.retriever.timeout_ms);
            c.retriever.max_retries = r.value("max_retries", c.retriever.max_retries);
        }
        if (j.contains("policy")) {
            const json& p = j.at("policy");
            c.policy_backend = policy_backend_from_string(p.value("backend", std::string("loglinear")));
            c.loglinear.feature_dim = p.value("feature_dim", c.loglinear.feature_dim);
            c.loglinear.max_candidates = p.value("max_candidates", c.loglinear.max_candidates);
            c.remote_policy.endpoint = p.value("endpoint", c.remote_policy.endpoint);
            c.remote_policy.timeout_ms = p.value("timeout_ms", c.remote_policy.timeout_ms);
            c.remote_policy.max_retries = p.value("max_retries", c.remote_policy.max_retries);
            c.remote_policy.max_tokens = p.value("max_tokens", c.remote_policy.max_tokens);
        }
        if (j.contains("prompts")) c.num_prompts = j.at("prompts").value("count", c.num_prompts);
        c.num_hops = j.value("num_hops", c.num_hops);
        if (j.contains("reward")) {
            const json& r = j.at("reward");
            c.reward_kind = reward_kind_from_string(r.value("kind", std::string("direct_ap")));
            c.generator.endpoint = r.value("generator_endpoint", c.generator.endpoint);
            c.generator.timeout_ms = r.value("timeout_ms", c.generator.timeout_ms);
            c.generator.max_retries = r.value("max_retries", c.generator.max_retries);
            c.generator.max_tokens = r.value("max_tokens", c.generator.max_tokens);
            c.generator.temperature = r.value("temperature", c.generator.temperature);
        }
        if (j.contains("trainer")) {
            const json& t = j.at("trainer");
            c.trainer.learning_rate = t.value("learning_rate", c.trainer.learning_rate);
            c.trainer.tau = t.value("tau", c.trainer.tau);
            c.trainer.beta = t.value("beta", c.trainer.beta);
            c.trainer.sft_epochs = t.value("sft_epochs", c.trainer.sft_epochs);
            c.trainer.ipo_epochs = t.value("ipo_epochs", c.trainer.ipo_epochs);
            c.trainer.batch_size = t.value("batch_size", c.trainer.batch_size);
            c.trainer.seed = t.value("seed", c.trainer.seed);
            c.trainer.num_iterations = t.value("num_iterations", c.trainer.num_iterations);
        }
        if (j.contains("sampling")) {
            const json& s = j.at("sampling");
            c.temperature = s.value("temperature", c.temperature);
            c.min_reward_gap = s.value("min_reward_gap", c.min_reward_gap);
        }
        c.output_dir = j.value("output_dir", c.output_dir);
        c.seed = j.value("seed", c.seed);
        c.num_test_questions = j.value("num_test_questions", c.num_test_questions);
        c.num_workers = j.value("workers", c.num_workers);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid config: ") + e.what());
    }
    c.trainer.max_candidates = c.loglinear.max_candidates;
    return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    json j;
    try {
        j = load_json_file(path);
    } catch (const IntegrityError& e) {
        // A broken config file is an operator error, not corrupt pipeline data.
        throw ValidationError(e.what());
    }
    return pipeline_config_from_json(j);
}

void apply_env_endpoint_defaults(PipelineConfig& config) {
    const auto fill = [](std::string& target, const char* var) {
        if (!target.empty()) return;
        if (const char* value = std::getenv(var); value != nullptr && *value != '\0')
            target = value;
    };
    fill(config.retriever.endpoint, "HOPFORGE_RETRIEVER_URL");
    fill(config.remote_policy.endpoint, "HOPFORGE_LLM_URL");
    fill(config.generator.endpoint, "HOPFORGE_GENERATOR_URL");
}

void validate_pipeline_config(const PipelineConfig& config) {
    const bool has_synthetic = config.corpus.synthetic.has_value();
    const bool has_dataset = !config.corpus.dataset_dir.empty();
    if (has_synthetic == has_dataset)
        throw ValidationError("config needs exactly one corpus source: synthetic or dataset_dir");
    if (config.retriever.backend == RetrieverBackend::remote && config.retriever.endpoint.empty())
        throw ValidationError("remote retriever requires an endpoint "
                              "(retriever.endpoint or HOPFORGE_RETRIEVER_URL)");
    if (config.policy_backend == PolicyBackend::remote && config.remote_policy.endpoint.empty())
        throw ValidationError("remote policy requires an endpoint "
                              "(policy.endpoint or HOPFORGE_LLM_URL)");
    if (config.reward_kind == RewardKind::indirect_f1 && config.generator.endpoint.empty())
        throw ValidationError("indirect reward requires a generator endpoint "
                              "(reward.generator_endpoint or HOPFORGE_GENERATOR_URL)");
    if (config.retriever.k_per_hop < 1) throw ValidationError("k_per_hop must be >= 1");
    if (config.retriever.timeout_ms <= 0 || config.remote_policy.timeout_ms <= 0 ||
        config.generator.timeout_ms <= 0)
        throw ValidationError("timeouts must be positive");
    if (config.retriever.max_retries < 0 || config.remote_policy.max_retries < 0 ||
        config.generator.max_retries < 0)
        throw ValidationError("max_retries must be >= 0");
    if (config.num_prompts < 1) throw ValidationError("prompts.count must be >= 1");
    if (config.num_hops < 1) throw ValidationError("num_hops must be >= 1");
    if (!(config.temperature > 0.0) || !std::isfinite(config.temperature))
        throw ValidationError("sampling temperature must be positive and finite");
    if (config.min_reward_gap < 0.0 || !std::isfinite(config.min_reward_gap))
        throw ValidationError("min_reward_gap must be >= 0 and finite");
    if (config.output_dir.empty()) throw ValidationError("output_dir must not be empty");
    if (config.num_test_questions < 0) throw ValidationError("num_test_questions must be >= 0");
    if (config.num_workers < 1) throw ValidationError("workers must be >= 1");
    validate_trainer_config(config.trainer);
}

} // namespace hopforge
