#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hopforge/config.hpp"
#include "hopforge/corpus.hpp"
#include "hopforge/errors.hpp"
#include "hopforge/evalrun.hpp"
#include "hopforge/jsonl.hpp"
#include "hopforge/metrics.hpp"
#include "hopforge/policy.hpp"
#include "hopforge/retrieval.hpp"
#include "hopforge/reward.hpp"
#include "hopforge/rng.hpp"
#include "hopforge/sampler.hpp"
#include "hopforge/trainer.hpp"
#include "hopforge/version.hpp"

namespace {

namespace fs = std::filesystem;
using namespace hopforge;
using nlohmann::json;

void emit_error(const std::string& category, const std::string& message) {
    json j;
    j["error"] = {{"category", category}, {"message", message}};
    std::cerr << j.dump() << "\n";
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        return static_cast<int>(ExitCode::ok);
    } catch (const ValidationError& e) {
        emit_error("config", e.what());
        return static_cast<int>(ExitCode::config);
    } catch (const ProtocolError& e) {
        emit_error("protocol", e.what());
        return static_cast<int>(ExitCode::transport);
    } catch (const TransportError& e) {
        emit_error("transport", e.what());
        return static_cast<int>(ExitCode::transport);
    } catch (const IntegrityError& e) {
        emit_error("integrity", e.what());
        return static_cast<int>(ExitCode::integrity);
    } catch (const DomainError& e) {
        emit_error("domain", e.what());
        return static_cast<int>(ExitCode::integrity);
    } catch (const NumericError& e) {
        emit_error("numeric", e.what());
        return static_cast<int>(ExitCode::integrity);
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
        return static_cast<int>(ExitCode::failure);
    }
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

std::optional<std::pair<int, int>> parse_hop_subset(const std::string& text) {
    if (text.empty()) return std::nullopt;
    try {
        size_t pos = 0;
        const int lo = std::stoi(text, &pos);
        if (pos == text.size()) return std::make_pair(lo, lo);
        if (text[pos] != '-') throw ValidationError("");
        size_t pos2 = 0;
        const std::string rest = text.substr(pos + 1);
        const int hi = std::stoi(rest, &pos2);
        if (pos2 != rest.size()) throw ValidationError("");
        return std::make_pair(lo, hi);
    } catch (const std::exception&) {
        throw ValidationError("--hop-subset expects HOP or LO-HI, got '" + text + "'");
    }
}

// Flags shared by the config-driven subcommands; a flag wins over the file
// value only when actually passed.
struct Overrides {
    std::string config_path;
    uint64_t seed = 0;
    int workers = 0;
    std::string output_dir;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* workers_opt = nullptr;
    CLI::Option* output_dir_opt = nullptr;

    void register_on(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Pipeline config JSON file")
            ->required()
            ->check(CLI::ExistingFile);
        seed_opt = cmd->add_option("--seed", seed, "Root seed (overrides config)");
        workers_opt =
            cmd->add_option("--workers", workers, "Worker threads (overrides config)");
        output_dir_opt =
            cmd->add_option("--output-dir", output_dir, "Artifact directory (overrides config)");
    }

    PipelineConfig load() const {
        PipelineConfig cfg = load_pipeline_config(config_path);
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (workers_opt->count() > 0) cfg.num_workers = workers;
        if (output_dir_opt->count() > 0) cfg.output_dir = output_dir;
        apply_env_endpoint_defaults(cfg);
        validate_pipeline_config(cfg);
        return cfg;
    }
};

Corpus build_corpus(const PipelineConfig& cfg) {
    if (cfg.corpus.synthetic) return generate_synthetic_corpus(*cfg.corpus.synthetic);
    return load_dataset(cfg.corpus.dataset_dir);
}

struct PolicyBundle {
    std::unique_ptr<QueryPolicy> policy;
    PolicyParameters params;    // loglinear backends only
    LogLinearConfig loglinear;  // effective config (checkpoint dimension wins)
    std::optional<Checkpoint> checkpoint;
};

PolicyBundle build_policy(const PipelineConfig& cfg, const std::string& checkpoint_path,
                          const Corpus& corpus) {
    PolicyBundle bundle;
    if (cfg.policy_backend == PolicyBackend::remote) {
        if (!checkpoint_path.empty())
            throw ValidationError("checkpoints apply only to the loglinear policy backend");
        bundle.policy = std::make_unique<RemotePolicy>(cfg.remote_policy);
        return bundle;
    }
    bundle.loglinear = cfg.loglinear;
    if (checkpoint_path.empty()) {
        bundle.params = zero_parameters(cfg.loglinear.feature_dim);
    } else {
        Checkpoint ck = load_checkpoint(checkpoint_path);
        const std::string expected = corpus_hash_hex(corpus);
        if (ck.corpus_hash != expected)
            throw IntegrityError("checkpoint " + checkpoint_path + " was trained on corpus " +
                                 ck.corpus_hash + " but the configured corpus hashes to " +
                                 expected);
        bundle.loglinear.feature_dim = ck.params.feature_dim;
        bundle.params = ck.params;
        bundle.checkpoint = std::move(ck);
    }
    bundle.policy = std::make_unique<LogLinearPolicy>(bundle.params, bundle.loglinear);
    return bundle;
}

RewardFn build_reward(const PipelineConfig& cfg) {
    if (cfg.reward_kind == RewardKind::direct_ap) return make_direct_reward();
    return make_indirect_reward(std::make_shared<RemoteGenerator>(cfg.generator));
}

struct SplitSets {
    std::vector<const Question*> train;
    std::vector<const Question*> test;
    std::vector<const Question*> all;
};

SplitSets build_split(const PipelineConfig& cfg, const Corpus& corpus) {
    SplitSets sets;
    sets.all.reserve(corpus.questions().size());
    for (const Question& q : corpus.questions()) sets.all.push_back(&q);
    if (cfg.num_test_questions <= 0) {
        sets.train = sets.all;
        return sets;
    }
    const CorpusSplit split =
        split_questions(corpus, cfg.num_test_questions, derive_seed(cfg.seed, "split"));
    for (const std::string& id : split.train_ids) sets.train.push_back(corpus.find_question(id));
    for (const std::string& id : split.test_ids) sets.test.push_back(corpus.find_question(id));
    return sets;
}

std::string dataset_hash_hex(const PreferenceDataset& dataset) {
    if (dataset.manifest && !dataset.manifest->dataset_hash.empty())
        return dataset.manifest->dataset_hash;
    uint64_t h = 0xcbf29ce484222325ull;
    for (const PreferencePair& p : dataset.pairs) {
        h = fnv1a64(pair_jsonl_line(p), h);
        h = fnv1a64("\n", h);
    }
    return to_hex64(h);
}

json stats_json(const DiversityStats& s) {
    json j;
    j["gold_rate"] = s.gold_rate;
    j["mean_ap_stddev"] = s.mean_ap_stddev;
    j["mean_unique_ap"] = s.mean_unique_ap;
    j["num_preference_pairs"] = s.num_preference_pairs;
    return j;
}

void write_loss_csv(const std::string& path, const std::vector<std::pair<long, double>>& log) {
    std::string csv = "step,loss\n";
    char buf[64];
    for (const auto& [step, loss] : log) {
        std::snprintf(buf, sizeof buf, "%ld,%.17g\n", step, loss);
        csv += buf;
    }
    ensure_parent_dir(path);
    write_text_file(path, csv);
}

SamplingConfig sampling_config_for(const PipelineConfig& cfg) {
    SamplingConfig sc;
    sc.num_hops = cfg.num_hops;
    sc.temperature = cfg.temperature;
    sc.min_reward_gap = cfg.min_reward_gap;
    sc.num_workers = cfg.num_workers;
    sc.seed = cfg.seed;
    sc.config_snapshot = pipeline_config_to_json(cfg);
    // The worker count shapes execution, not data; keeping it out of the
    // manifest lets reruns with different parallelism produce identical bytes.
    sc.config_snapshot.erase("workers");
    return sc;
}

// ---- subcommand bodies ----

void cmd_sample(const PipelineConfig& cfg, const std::string& out,
                const std::string& checkpoint_path, const std::string& hop_subset) {
    const Corpus corpus = build_corpus(cfg);
    const auto retriever = make_retriever(cfg.retriever, &corpus);
    const PolicyBundle pb = build_policy(cfg, checkpoint_path, corpus);
    const RewardFn reward = build_reward(cfg);
    const std::vector<PromptSpec> prompts = make_default_prompts(cfg.num_prompts);
    const SplitSets split = build_split(cfg, corpus);

    SamplingConfig sc = sampling_config_for(cfg);
    sc.hop_subset = parse_hop_subset(hop_subset);

    const PreferenceDataset dataset = run_sampling(corpus, split.train, prompts, *pb.policy,
                                                   *retriever, cfg.retriever.k_per_hop, reward, sc);
    const std::string path = out.empty() ? join_path(cfg.output_dir, "pairs.jsonl") : out;
    ensure_parent_dir(path);
    write_preference_dataset(dataset, path);

    const RunManifest& m = *dataset.manifest;
    std::printf("wrote %s (%d pairs from %d questions, %d failures)\n", path.c_str(), m.num_pairs,
                m.num_questions, m.num_failures);
    for (const auto& [hop, s] : m.per_hop_stats)
        std::printf("hop %d: gold_rate %.3f  mean_unique_ap %.3f  ap_stddev %.3f  pairs %ld\n",
                    hop, s.gold_rate, s.mean_unique_ap, s.mean_ap_stddev, s.num_preference_pairs);
}

void cmd_train(const PipelineConfig& cfg, const std::string& dataset_path, const std::string& out,
               const std::string& loss_log, bool skip_ipo) {
    const Corpus corpus = build_corpus(cfg);
    const PreferenceDataset dataset = load_preference_dataset(dataset_path);
    const std::string corpus_hash = corpus_hash_hex(corpus);
    if (dataset.manifest && dataset.manifest->corpus_hash != corpus_hash)
        throw IntegrityError("dataset " + dataset_path + " was sampled from corpus " +
                             dataset.manifest->corpus_hash +
                             " but the configured corpus hashes to " + corpus_hash);

    const PolicyParameters init = zero_parameters(cfg.loglinear.feature_dim);
    const TrainedPolicy sft = sft_context_distillation(corpus, init, dataset, cfg.trainer);
    const TrainedPolicy trained = skip_ipo ? sft : train_ipo(corpus, sft, dataset, cfg.trainer);

    Checkpoint ck;
    ck.params = trained.params;
    ck.dataset_hash = dataset_hash_hex(dataset);
    ck.corpus_hash = corpus_hash;
    ck.created_at = current_timestamp();
    const std::string ck_path = out.empty() ? join_path(cfg.output_dir, "checkpoint.json") : out;
    ensure_parent_dir(ck_path);
    save_checkpoint(ck_path, ck);

    const std::string csv_path =
        loss_log.empty() ? join_path(cfg.output_dir, "loss.csv") : loss_log;
    write_loss_csv(csv_path, trained.training_log);

    std::printf("wrote %s (policy v%d, %zu steps) and %s\n", ck_path.c_str(),
                trained.params.version, trained.training_log.size(), csv_path.c_str());
    if (!trained.training_log.empty())
        std::printf("final loss %.6f\n", trained.training_log.back().second);
    if (trained.sft_skipped > 0 || trained.ipo_skipped > 0)
        std::printf("skipped examples: sft %d, ipo %d\n", trained.sft_skipped,
                    trained.ipo_skipped);
}

std::unique_ptr<AnswerGenerator> build_generator(const PipelineConfig& cfg,
                                                 const std::string& mode) {
    if (mode == "none") return nullptr;
    if (mode == "stub") return std::make_unique<ExtractiveStubGenerator>();
    if (mode == "remote") {
        if (cfg.generator.endpoint.empty())
            throw ValidationError("--answers remote requires a generator endpoint "
                                  "(reward.generator_endpoint or HOPFORGE_GENERATOR_URL)");
        return std::make_unique<RemoteGenerator>(cfg.generator);
    }
    // auto: use the remote generator when one is configured
    if (!cfg.generator.endpoint.empty()) return std::make_unique<RemoteGenerator>(cfg.generator);
    return nullptr;
}

void cmd_eval(const PipelineConfig& cfg, const std::string& checkpoint_path,
              const std::string& split_name, const std::string& report_path,
              const std::string& answers_mode) {
    const Corpus corpus = build_corpus(cfg);
    const auto retriever = make_retriever(cfg.retriever, &corpus);
    const PolicyBundle pb = build_policy(cfg, checkpoint_path, corpus);
    const SplitSets split = build_split(cfg, corpus);

    const std::vector<const Question*>* questions = nullptr;
    if (split_name == "train") questions = &split.train;
    else if (split_name == "test") questions = &split.test;
    else if (split_name == "all") questions = &split.all;
    else throw ValidationError("--split must be train, test, or all");
    if (questions->empty())
        throw ValidationError("split '" + split_name +
                              "' is empty; set num_test_questions in the config");

    const std::unique_ptr<AnswerGenerator> generator = build_generator(cfg, answers_mode);

    EvalOptions eo;
    eo.num_hops = cfg.num_hops;
    eo.k_per_hop = cfg.retriever.k_per_hop;
    eo.temperature = cfg.temperature;
    eo.seed = derive_seed(cfg.seed, "eval");
    eo.num_workers = cfg.num_workers;
    const EvalReport report =
        evaluate_policy(corpus, *questions, *pb.policy, *retriever, generator.get(), eo);

    std::printf("split %s: %d questions (%d skipped)\n", split_name.c_str(),
                report.num_questions, report.num_skipped);
    std::printf("hop   recall      ap\n");
    for (const auto& [hop, ev] : report.per_hop)
        std::printf("%-4d  %6.3f  %6.3f\n", hop, ev.recall, ev.average_precision);
    std::printf("final recall %.3f  ap %.3f\n", report.final_recall, report.final_ap);
    if (report.exact_match)
        std::printf("answers: em %.3f  f1 %.3f\n", *report.exact_match, *report.f1);

    if (!report_path.empty()) {
        json j;
        j["split"] = split_name;
        j["num_questions"] = report.num_questions;
        j["num_skipped"] = report.num_skipped;
        json per_hop = json::object();
        for (const auto& [hop, ev] : report.per_hop)
            per_hop[std::to_string(hop)] = {{"recall", ev.recall},
                                            {"average_precision", ev.average_precision}};
        j["per_hop"] = std::move(per_hop);
        j["final_recall"] = report.final_recall;
        j["final_ap"] = report.final_ap;
        if (report.exact_match) j["exact_match"] = *report.exact_match;
        if (report.f1) j["f1"] = *report.f1;
        j["corpus_hash"] = corpus_hash_hex(corpus);
        j["checkpoint"] = checkpoint_path.empty() ? json(nullptr) : json(checkpoint_path);
        j["policy_version"] = pb.params.version;
        j["seed"] = cfg.seed;
        ensure_parent_dir(report_path);
        write_text_file(report_path, j.dump(2) + "\n");
        std::printf("wrote %s\n", report_path.c_str());
    }
}

void cmd_stats(const std::string& dataset_path) {
    const PreferenceDataset dataset = load_preference_dataset(dataset_path);
    json out;
    out["dataset"] = dataset_path;
    out["num_pairs"] = dataset.pairs.size();
    json per_hop = json::object();
    if (dataset.manifest) {
        out["source"] = "manifest";
        out["dataset_hash"] = dataset.manifest->dataset_hash;
        for (const auto& [hop, s] : dataset.manifest->per_hop_stats)
            per_hop[std::to_string(hop)] = stats_json(s);
    } else {
        // Ties between equal-reward samples never form pairs, so they cannot
        // be recovered from the pair file alone.
        out["source"] = "reconstructed";
        out["warning"] = "manifest sidecar missing; statistics rebuilt from unique pair rewards";
        std::map<int, std::map<std::string, std::vector<double>>> rewards;
        for (const PreferencePair& p : dataset.pairs) {
            std::vector<double>& vals = rewards[p.hop][p.question_id];
            for (const double r : {p.chosen_reward, p.rejected_reward})
                if (std::find(vals.begin(), vals.end(), r) == vals.end()) vals.push_back(r);
        }
        for (const auto& [hop, by_q] : rewards)
            per_hop[std::to_string(hop)] = stats_json(diversity_stats(by_q));
    }
    out["per_hop"] = std::move(per_hop);
    std::cout << out.dump(2) << "\n";
}

void cmd_audit_greedy(const PipelineConfig& cfg, const std::string& checkpoint_path,
                      int num_questions) {
    const Corpus corpus = build_corpus(cfg);
    const auto retriever = make_retriever(cfg.retriever, &corpus);
    const PolicyBundle pb = build_policy(cfg, checkpoint_path, corpus);
    const RewardFn reward = build_reward(cfg);
    long num_cases = 0;
    const double fraction =
        greedy_audit(corpus, *pb.policy, *retriever, cfg.retriever.k_per_hop, reward,
                     num_questions, cfg.seed, cfg.num_workers, &num_cases);
    json out;
    out["fraction"] = fraction;
    out["num_cases"] = num_cases;
    out["num_questions"] = num_questions;
    std::cout << out.dump() << "\n";
}

void cmd_gen_corpus(const PipelineConfig& cfg, const std::string& out_dir) {
    if (!cfg.corpus.synthetic)
        throw ValidationError("gen-corpus requires corpus.synthetic in the config");
    const Corpus corpus = generate_synthetic_corpus(*cfg.corpus.synthetic);
    const std::string dir = out_dir.empty() ? join_path(cfg.output_dir, "corpus") : out_dir;
    fs::create_directories(dir);
    write_dataset(corpus, dir);
    json out;
    out["dir"] = dir;
    out["documents"] = corpus.documents().size();
    out["questions"] = corpus.questions().size();
    out["corpus_hash"] = corpus_hash_hex(corpus);
    std::cout << out.dump() << "\n";
}

void cmd_iterate(const PipelineConfig& cfg, const std::string& out_dir) {
    const Corpus corpus = build_corpus(cfg);
    const auto retriever = make_retriever(cfg.retriever, &corpus);
    const RewardFn reward = build_reward(cfg);
    const std::vector<PromptSpec> prompts = make_default_prompts(cfg.num_prompts);
    const SplitSets split = build_split(cfg, corpus);
    if (cfg.policy_backend != PolicyBackend::loglinear)
        throw ValidationError("iterate trains the loglinear policy backend only");

    const SamplingConfig sc = sampling_config_for(cfg);
    const std::vector<IterationResult> results =
        iterative_leret(corpus, split.train, split.test, prompts, *retriever,
                        cfg.retriever.k_per_hop, reward, sc, cfg.trainer, cfg.loglinear);

    const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
    const std::string corpus_hash = corpus_hash_hex(corpus);
    json summary;
    summary["corpus_hash"] = corpus_hash;
    summary["iterations"] = json::array();
    std::string last_checkpoint;
    for (size_t i = 0; i < results.size(); ++i) {
        const IterationResult& res = results[i];
        const std::string iter_dir = join_path(dir, "iter-" + std::to_string(i + 1));
        fs::create_directories(iter_dir);
        const std::string pairs_path = join_path(iter_dir, "pairs.jsonl");
        write_preference_dataset(res.dataset, pairs_path);

        Checkpoint ck;
        ck.params = res.policy.params;
        ck.dataset_hash = dataset_hash_hex(res.dataset);
        ck.corpus_hash = corpus_hash;
        ck.created_at = current_timestamp();
        const std::string ck_path = join_path(iter_dir, "checkpoint.json");
        save_checkpoint(ck_path, ck);
        write_loss_csv(join_path(iter_dir, "loss.csv"), res.policy.training_log);
        last_checkpoint = ck_path;

        json entry;
        entry["iteration"] = i + 1;
        entry["num_pairs"] = res.num_pairs;
        entry["checkpoint"] = ck_path;
        entry["dataset"] = pairs_path;
        entry["sft_skipped"] = res.sft_skipped;
        entry["ipo_skipped"] = res.ipo_skipped;
        if (!split.test.empty()) entry["eval_recall"] = res.eval_recall;
        summary["iterations"].push_back(std::move(entry));

        if (split.test.empty())
            std::printf("iteration %zu: %d pairs\n", i + 1, res.num_pairs);
        else
            std::printf("iteration %zu: %d pairs, eval recall %.3f\n", i + 1, res.num_pairs,
                        res.eval_recall);
    }
    summary["final_checkpoint"] = last_checkpoint;
    const std::string summary_path = join_path(dir, "iterate-summary.json");
    ensure_parent_dir(summary_path);
    write_text_file(summary_path, summary.dump(2) + "\n");
    std::printf("wrote %s\n", summary_path.c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kToolName) + ": preference-trained multi-hop retrieval pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolName) + " " + kVersion);
    int rc = 0;

    // sample
    {
        auto* cmd = app.add_subcommand("sample",
                                       "Sample diversified queries and write a preference dataset");
        auto ov = std::make_shared<Overrides>();
        ov->register_on(cmd);
        auto out = std::make_shared<std::string>();
        auto checkpoint = std::make_shared<std::string>();
        auto hop_subset = std::make_shared<std::string>();
        auto temperature = std::make_shared<double>(1.0);
        auto gap = std::make_shared<double>(0.0);
        auto hops = std::make_shared<int>(2);
        cmd->add_option("--out", *out, "Dataset path (default <output_dir>/pairs.jsonl)");
        cmd->add_option("--checkpoint", *checkpoint, "Sample with weights from this checkpoint")
            ->check(CLI::ExistingFile);
        cmd->add_option("--hop-subset", *hop_subset, "Keep pairs only for hops HOP or LO-HI");
        auto* temp_opt =
            cmd->add_option("--temperature", *temperature, "Sampling temperature (overrides config)");
        auto* gap_opt =
            cmd->add_option("--min-reward-gap", *gap, "Minimum reward gap (overrides config)");
        auto* hops_opt = cmd->add_option("--num-hops", *hops, "Hops per question (overrides config)");
        cmd->callback([=, &rc] {
            rc = guarded([&] {
                PipelineConfig cfg = ov->load();
                if (temp_opt->count() > 0) cfg.temperature = *temperature;
                if (gap_opt->count() > 0) cfg.min_reward_gap = *gap;
                if (hops_opt->count() > 0) cfg.num_hops = *hops;
                validate_pipeline_config(cfg);
                cmd_sample(cfg, *out, *checkpoint, *hop_subset);
            });
        });
    }

    // train
    {
        auto* cmd = app.add_subcommand("train", "Fit the policy on a preference dataset");
        auto ov = std::make_shared<Overrides>();
        ov->register_on(cmd);
        auto dataset = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto loss_log = std::make_shared<std::string>();
        auto skip_ipo = std::make_shared<bool>(false);
        auto lr = std::make_shared<double>(0.0);
        auto sft_epochs = std::make_shared<int>(0);
        auto ipo_epochs = std::make_shared<int>(0);
        auto batch = std::make_shared<int>(0);
        cmd->add_option("--dataset", *dataset, "Preference dataset JSONL")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--out", *out, "Checkpoint path (default <output_dir>/checkpoint.json)");
        cmd->add_option("--loss-log", *loss_log, "Loss CSV path (default <output_dir>/loss.csv)");
        cmd->add_flag("--skip-ipo", *skip_ipo, "Stop after the distillation stage");
        auto* lr_opt = cmd->add_option("--learning-rate", *lr, "Overrides config");
        auto* sft_opt = cmd->add_option("--sft-epochs", *sft_epochs, "Overrides config");
        auto* ipo_opt = cmd->add_option("--ipo-epochs", *ipo_epochs, "Overrides config");
        auto* batch_opt = cmd->add_option("--batch-size", *batch, "Overrides config");
        cmd->callback([=, &rc] {
            rc = guarded([&] {
                PipelineConfig cfg = ov->load();
                if (lr_opt->count() > 0) cfg.trainer.learning_rate = *lr;
                if (sft_opt->count() > 0) cfg.trainer.sft_epochs = *sft_epochs;
                if (ipo_opt->count() > 0) cfg.trainer.ipo_epochs = *ipo_epochs;
                if (batch_opt->count() > 0) cfg.trainer.batch_size = *batch;
                if (ov->seed_opt->count() > 0) cfg.trainer.seed = ov->seed;
                validate_trainer_config(cfg.trainer);
                cmd_train(cfg, *dataset, *out, *loss_log, *skip_ipo);
            });
        });
    }

    // eval
    {
        auto* cmd = app.add_subcommand("eval", "Evaluate a policy on a question split");
        auto ov = std::make_shared<Overrides>();
        ov->register_on(cmd);
        auto checkpoint = std::make_shared<std::string>();
        auto split = std::make_shared<std::string>("all");
        auto report = std::make_shared<std::string>();
        auto answers = std::make_shared<std::string>("auto");
        auto temperature = std::make_shared<double>(1.0);
        cmd->add_option("--checkpoint", *checkpoint,
                        "Checkpoint to evaluate (default: untrained policy)")
            ->check(CLI::ExistingFile);
        cmd->add_option("--split", *split, "train, test, or all")
            ->check(CLI::IsMember({"train", "test", "all"}));
        cmd->add_option("--report", *report, "Write the report JSON here");
        cmd->add_option("--answers", *answers, "Answer generation: auto, none, stub, or remote")
            ->check(CLI::IsMember({"auto", "none", "stub", "remote"}));
        auto* temp_opt =
            cmd->add_option("--temperature", *temperature, "Rollout temperature (overrides config)");
        cmd->callback([=, &rc] {
            rc = guarded([&] {
                PipelineConfig cfg = ov->load();
                if (temp_opt->count() > 0) cfg.temperature = *temperature;
                validate_pipeline_config(cfg);
                cmd_eval(cfg, *checkpoint, *split, *report, *answers);
            });
        });
    }

    // stats
    {
        auto* cmd = app.add_subcommand("stats", "Print diversity statistics for a dataset");
        auto dataset = std::make_shared<std::string>();
        cmd->add_option("dataset", *dataset, "Preference dataset JSONL")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->callback([=, &rc] { rc = guarded([&] { cmd_stats(*dataset); }); });
    }

    // audit-greedy
    {
        auto* cmd = app.add_subcommand(
            "audit-greedy", "Measure how often a worse hop-1 context wins after hop 2");
        auto ov = std::make_shared<Overrides>();
        ov->register_on(cmd);
        auto checkpoint = std::make_shared<std::string>();
        auto num_questions = std::make_shared<int>(200);
        cmd->add_option("--checkpoint", *checkpoint, "Audit with weights from this checkpoint")
            ->check(CLI::ExistingFile);
        cmd->add_option("--num-questions", *num_questions, "Questions to audit (default 200)");
        cmd->callback([=, &rc] {
            rc = guarded([&] { cmd_audit_greedy(ov->load(), *checkpoint, *num_questions); });
        });
    }

    // gen-corpus
    {
        auto* cmd = app.add_subcommand("gen-corpus", "Write the synthetic corpus as JSONL files");
        auto ov = std::make_shared<Overrides>();
        ov->register_on(cmd);
        auto out = std::make_shared<std::string>();
        cmd->add_option("--out", *out, "Directory (default <output_dir>/corpus)");
        cmd->callback([=, &rc] { rc = guarded([&] { cmd_gen_corpus(ov->load(), *out); }); });
    }

    // iterate
    {
        auto* cmd = app.add_subcommand(
            "iterate", "Run sample+train rounds, re-sampling with each trained policy");
        auto ov = std::make_shared<Overrides>();
        ov->register_on(cmd);
        auto out = std::make_shared<std::string>();
        auto iterations = std::make_shared<int>(0);
        cmd->add_option("--out", *out, "Directory for per-iteration artifacts (default output_dir)");
        auto* iter_opt =
            cmd->add_option("--iterations", *iterations, "Round count (overrides config)");
        cmd->callback([=, &rc] {
            rc = guarded([&] {
                PipelineConfig cfg = ov->load();
                if (iter_opt->count() > 0) cfg.trainer.num_iterations = *iterations;
                validate_trainer_config(cfg.trainer);
                cmd_iterate(cfg, *out);
            });
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help / --version
        emit_error("config", e.what());
        return static_cast<int>(ExitCode::config);
    }
    return rc;
}
