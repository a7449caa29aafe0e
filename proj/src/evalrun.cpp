#include "hopforge/evalrun.hpp"

#include <atomic>

#include "hopforge/errors.hpp"
#include "hopforge/log.hpp"
#include "hopforge/parallel.hpp"
#include "hopforge/rng.hpp"
#include "hopforge/sampler.hpp"
#include "hopforge/text.hpp"

namespace hopforge {

EvalReport evaluate_policy(const Corpus& corpus, const std::vector<const Question*>& questions,
                           const QueryPolicy& policy, const Retriever& retriever,
                           const AnswerGenerator* generator, const EvalOptions& options) {
    if (options.num_hops < 1) throw ValidationError("num_hops must be >= 1");
    if (options.k_per_hop < 1) throw ValidationError("k_per_hop must be >= 1");
    if (options.temperature <= 0.0) throw ValidationError("temperature must be > 0");
    if (questions.empty()) throw ValidationError("no questions to evaluate");
    for (const Question* q : questions)
        if (!q) throw ValidationError("null question pointer");

    struct Row {
        bool ok = false;
        std::vector<RetrievalEval> per_hop;
        int em = 0;
        double f1 = 0.0;
    };
    std::vector<Row> rows(questions.size());
    DocBag docs(&corpus);
    const PromptSpec plain{"eval", PromptKind::none, ""};

    parallel_for(questions.size(), options.num_workers, [&](size_t i) {
        const Question& q = *questions[i];
        Row row;
        Context ctx;
        try {
            for (int hop = 1; hop <= options.num_hops; ++hop) {
                const auto qs =
                    policy.sample(q, docs.resolve(ctx.doc_ids), plain, options.temperature,
                                  derive_seed(options.seed, q.id, static_cast<uint64_t>(hop),
                                              "eval", 0));
                if (trim(qs.query).empty()) throw ProtocolError("policy produced an empty query");
                const auto ranked = retriever.retrieve(qs.query, options.k_per_hop);
                docs.absorb(ranked);
                ctx = union_contexts(ctx, ranked, hop);
                row.per_hop.push_back(evaluate_retrieval(ctx, q.gold_doc_ids));
            }
            if (generator) {
                const std::string answer =
                    generate_answer(q, docs.resolve(ctx.doc_ids), *generator);
                row.em = exact_match(answer, q.gold_answer);
                row.f1 = f1_word(answer, q.gold_answer);
            }
            row.ok = true;
        } catch (const TransportError& e) {
            log_warn("eval question skipped", {{"question", q.id}, {"error", e.what()}});
        }
        rows[i] = std::move(row);
    });

    EvalReport report;
    std::vector<double> recall_sum(static_cast<size_t>(options.num_hops), 0.0);
    std::vector<double> ap_sum(static_cast<size_t>(options.num_hops), 0.0);
    double em_sum = 0.0, f1_sum = 0.0;
    for (const auto& row : rows) {
        if (!row.ok) {
            ++report.num_skipped;
            continue;
        }
        ++report.num_questions;
        for (int h = 0; h < options.num_hops; ++h) {
            recall_sum[h] += row.per_hop[h].recall;
            ap_sum[h] += row.per_hop[h].average_precision;
        }
        em_sum += row.em;
        f1_sum += row.f1;
    }
    if (report.num_questions == 0)
        throw DomainError("every evaluation question failed");

    const double n = report.num_questions;
    for (int h = 0; h < options.num_hops; ++h)
        report.per_hop[h + 1] = RetrievalEval{recall_sum[h] / n, ap_sum[h] / n};
    report.final_recall = report.per_hop[options.num_hops].recall;
    report.final_ap = report.per_hop[options.num_hops].average_precision;
    if (generator) {
        report.exact_match = em_sum / n;
        report.f1 = f1_sum / n;
    }
    return report;
}

} // namespace hopforge
