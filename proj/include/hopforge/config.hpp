#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "hopforge/corpus.hpp"
#include "hopforge/policy.hpp"
#include "hopforge/retrieval.hpp"
#include "hopforge/reward.hpp"
#include "hopforge/trainer.hpp"

namespace hopforge {

enum class PolicyBackend { loglinear, remote };

std::string to_string(PolicyBackend backend);
PolicyBackend policy_backend_from_string(const std::string& name);

std::string to_string(RetrieverBackend backend);
RetrieverBackend retriever_backend_from_string(const std::string& name);

// Exactly one of the two sources must be set; validate_pipeline_config
// enforces that.
struct CorpusConfig {
    std::optional<ChainSpec> synthetic;
    std::string dataset_dir;
};

struct PipelineConfig {
    CorpusConfig corpus;
    RetrieverConfig retriever;
    PolicyBackend policy_backend = PolicyBackend::loglinear;
    LogLinearConfig loglinear;
    RemotePolicyConfig remote_policy;
    int num_prompts = 4;
    int num_hops = 2;
    RewardKind reward_kind = RewardKind::direct_ap;
    RemoteGeneratorConfig generator; // indirect reward only
    TrainerConfig trainer;
    double temperature = 1.0;
    double min_reward_gap = 0.0;
    std::string output_dir = "out";
    uint64_t seed = 0;
    int num_test_questions = 0; // 0 = no held-out split
    int num_workers = 1;
};

// Round-trip stable: from_json(to_json(c)) reproduces every field.
nlohmann::json pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

PipelineConfig load_pipeline_config(const std::string& path);

// Fills empty endpoints from HOPFORGE_RETRIEVER_URL, HOPFORGE_LLM_URL, and
// HOPFORGE_GENERATOR_URL. Explicit config always wins.
void apply_env_endpoint_defaults(PipelineConfig& config);

void validate_pipeline_config(const PipelineConfig& config);

} // namespace hopforge
