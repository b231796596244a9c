#include "relgat/analysis.hpp"

#include "relgat/error.hpp"
#include "relgat/eval.hpp"
#include "relgat/kernels.hpp"
#include "relgat/training.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace relgat {

double PagerankResult::mean() const {
    if (scores.empty()) return 0.0;
    return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

PagerankResult pagerank(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges,
                        const AnalysisConfig& cfg, KernelVariant variant) {
    cfg.validate();
    if (n == 0) input_error("pagerank: empty graph");
    std::vector<std::pair<std::size_t, std::size_t>> simple(edges.begin(), edges.end());
    for (const auto& [u, v] : simple)
        if (u >= n || v >= n) input_error("pagerank: edge endpoint out of range");
    std::sort(simple.begin(), simple.end(), [](const auto& a, const auto& b) {
        return std::tie(a.second, a.first) < std::tie(b.second, b.first);
    });
    simple.erase(std::unique(simple.begin(), simple.end()), simple.end());

    kernels::PagerankGraph g;
    g.n = n;
    g.in_offsets.assign(n + 1, 0);
    std::vector<std::size_t> out_degree(n, 0);
    for (const auto& [u, v] : simple) {
        ++g.in_offsets[v + 1];
        ++out_degree[u];
        g.in_sources.push_back(static_cast<std::uint32_t>(u));
    }
    std::partial_sum(g.in_offsets.begin(), g.in_offsets.end(), g.in_offsets.begin());
    g.inv_out_degree.resize(n);
    for (std::size_t u = 0; u < n; ++u)
        g.inv_out_degree[u] = out_degree[u] ? 1.0 / static_cast<double>(out_degree[u]) : 0.0;

    PagerankResult out;
    out.scores.assign(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n);
    for (int it = 1; it <= cfg.pr_max_iters; ++it) {
        const double diff = variant == KernelVariant::serial
                                ? kernels::serial::pagerank_sweep(g, out.scores, next, cfg.damping)
                                : kernels::omp::pagerank_sweep(g, out.scores, next, cfg.damping);
        out.scores.swap(next);
        out.iterations = it;
        out.residual = diff;
        if (diff < cfg.pr_tol) return out;
    }
    throw Error(ErrorKind::convergence, "pagerank did not converge in " + std::to_string(cfg.pr_max_iters) +
                                            " iterations (L1 change " + std::to_string(out.residual) + ")");
}

PagerankResult pagerank(const KnowledgeGraph& kg, const AnalysisConfig& cfg, KernelVariant variant) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    edges.reserve(kg.train().size());
    for (const auto& t : kg.train())
        edges.emplace_back(static_cast<std::size_t>(t.head), static_cast<std::size_t>(t.tail));
    return pagerank(kg.num_entities(), edges, cfg, variant);
}

AttentionSnapshot capture_attention(const EncoderParams& params, const AttentionGraph& graph, const EncoderConfig& cfg,
                                    int epoch, EntityId only_target) {
    EncoderPass pass(params, graph, cfg, {true, false, nullptr, only_target});
    return {epoch, pass.take_result().traces};
}

std::vector<AttentionRow> attention_rows(std::span<const AttentionSnapshot> snapshots, EntityId entity, int layer) {
    std::vector<AttentionRow> rows;
    for (const auto& snap : snapshots) {
        if (snap.traces.empty()) continue;
        const AttentionTrace* trace = nullptr;
        if (layer < 0) {
            trace = &snap.traces.back();
        } else {
            for (const auto& t : snap.traces)
                if (t.layer == layer) trace = &t;
        }
        if (!trace) input_error("no attention trace for layer " + std::to_string(layer));
        int heads = 0;
        for (const auto& e : trace->entries) heads = std::max(heads, e.head + 1);
        const std::size_t per_head = trace->entries.size() / static_cast<std::size_t>(heads);
        for (std::size_t e = 0; e < per_head; ++e) {
            const auto& first = trace->entries[e];
            if (first.target != entity) continue;
            double alpha = 0.0;
            for (int m = 0; m < heads; ++m) alpha += trace->entries[static_cast<std::size_t>(m) * per_head + e].alpha;
            rows.push_back({snap.epoch, first.target, first.source, first.relations, first.hop_count,
                            alpha / static_cast<double>(heads)});
        }
    }
    if (rows.empty()) input_error("entity " + std::to_string(entity) + " does not appear in the attention traces");
    return rows;
}

void export_attention(std::span<const AttentionSnapshot> snapshots, EntityId entity, const KnowledgeGraph& kg,
                      const std::filesystem::path& file, int layer) {
    if (entity < 0 || static_cast<std::size_t>(entity) >= kg.num_entities())
        input_error("export_attention: unknown entity id");
    const auto rows = attention_rows(snapshots, entity, layer);
    std::ofstream out(file);
    if (!out) input_error("cannot write " + file.string());
    auto rel_name = [&](RelationId r) {
        return r == kg.self_relation() ? std::string("self") : kg.relations().name(r);
    };
    out << "epoch,target_entity,source_entity,relation,hop_count,alpha\n" << std::setprecision(17);
    for (const auto& r : rows) {
        std::string rel;
        for (std::size_t i = 0; i < r.relations.size(); ++i) rel += (i ? "+" : "") + rel_name(r.relations[i]);
        out << r.epoch << ',' << kg.entities().name(r.target) << ',' << kg.entities().name(r.source) << ',' << rel
            << ',' << r.hop_count << ',' << r.alpha << '\n';
    }
}

AblationMode parse_ablation(const std::string& name) {
    if (name == "full") return AblationMode::full;
    if (name == "minus_pg" || name == "-PG") return AblationMode::minus_pg;
    if (name == "minus_relations" || name == "-Relations") return AblationMode::minus_relations;
    input_error("unknown ablation mode '" + name + "' (full, minus_pg, minus_relations)");
}

std::string to_string(AblationMode m) {
    switch (m) {
    case AblationMode::full: return "full";
    case AblationMode::minus_pg: return "minus_pg";
    case AblationMode::minus_relations: return "minus_relations";
    }
    return "?";
}

AblationResult run_ablation(const KnowledgeGraph& kg, std::span<const AuxPath> aux, const EmbeddingState& init,
                            AblationMode mode, const RunConfig& cfg, const std::function<void(int, double)>& log) {
    cfg.validate();
    if (kg.test().empty()) input_error("ablation needs a test split");
    NeighborhoodOptions nb;
    nb.include_aux = mode != AblationMode::minus_pg;
    const auto graph = build_attention_graph(kg, aux, nb);
    EncoderConfig enc = cfg.enc;
    enc.use_relations = mode != AblationMode::minus_relations;
    TrainConfig train = cfg.enc_train;
    train.eval_every = 0;  // fixed-length curves

    AblationResult out;
    out.mode = mode;
    const int every = cfg.analysis.ablation_every;
    EncoderTrainOptions opts;
    opts.observe = [&](int epoch, const EncoderParams& params) {
        if (epoch == 0 || (epoch % every != 0 && epoch != train.epochs)) return;
        EncoderPass pass(params, graph, enc);
        const auto& r = pass.result();
        TranslationalScorer scorer(r.h_residual, r.g_out, enc.use_relations);
        const double mr = evaluate(kg.test(), scorer, kg).metrics.mr;
        out.curve.emplace_back(epoch, mr);
        if (log) log(epoch, mr);
    };
    train_encoder(kg, graph, init, enc, train, opts);
    return out;
}

void write_ablation_csv(const std::filesystem::path& file, std::span<const AblationResult> results) {
    std::ofstream out(file);
    if (!out) input_error("cannot write " + file.string());
    out << "mode,epoch,test_mr\n" << std::setprecision(10);
    for (const auto& r : results)
        for (const auto& [epoch, mr] : r.curve) out << to_string(r.mode) << ',' << epoch << ',' << mr << '\n';
}

} // namespace relgat
