// Serial reference vs OpenMP kernels on Kinship-sized inputs.

#include "relgat/attention_graph.hpp"
#include "relgat/kernels.hpp"
#include "relgat/kg.hpp"
#include "relgat/nhop.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace relgat;

namespace {

// Dense random multigraph standing in for Kinship: 104 entities, 25
// relations, ~8.5k training edges.
const KnowledgeGraph& bench_graph() {
    static const KnowledgeGraph kg = [] {
        std::mt19937_64 rng(7);
        Vocabulary ents, rels;
        for (int i = 0; i < 104; ++i) ents.add("e" + std::to_string(i));
        for (int i = 0; i < 25; ++i) rels.add("r" + std::to_string(i));
        std::uniform_int_distribution<int> e(0, 103), r(0, 24);
        std::vector<Triple> train;
        for (int i = 0; i < 8544; ++i) train.push_back({e(rng), r(rng), e(rng)});
        std::sort(train.begin(), train.end());
        train.erase(std::unique(train.begin(), train.end()), train.end());
        return KnowledgeGraph(ents, rels, train, {}, {});
    }();
    return kg;
}

const AttentionGraph& bench_attention_graph() {
    static const AttentionGraph g = [] {
        AuxConfig aux;
        aux.per_node_cap = 200;
        const auto paths = enumerate_nhop_paths(bench_graph(), aux);
        return build_attention_graph(bench_graph(), paths);
    }();
    return g;
}

struct HeadInputs {
    Matrix a, b, c;
    std::vector<double> pa, pb, pc, w2;
};

HeadInputs head_inputs(std::size_t dim) {
    const auto& g = bench_attention_graph();
    std::mt19937_64 rng(11);
    HeadInputs h{uniform_init(g.num_entities, dim, rng), uniform_init(g.num_entities, dim, rng),
                 uniform_init(g.num_relation_rows, dim, rng), {}, {}, {}, {}};
    std::uniform_real_distribution<double> u(-1, 1);
    for (std::size_t i = 0; i < g.num_entities; ++i) h.pa.push_back(u(rng)), h.pb.push_back(u(rng));
    for (std::size_t r = 0; r < g.num_relation_rows; ++r) h.pc.push_back(u(rng));
    for (std::size_t d = 0; d < dim; ++d) h.w2.push_back(u(rng));
    return h;
}

template <bool Parallel>
void BM_attention_forward(benchmark::State& state) {
    const auto& g = bench_attention_graph();
    const auto in = head_inputs(static_cast<std::size_t>(state.range(0)));
    kernels::HeadProjections p{&in.a, &in.b, &in.c, in.pa, in.pb, in.pc};
    for (auto _ : state) {
        auto out = Parallel ? kernels::omp::attention_forward(g, p, 0.2, {})
                            : kernels::serial::attention_forward(g, p, 0.2, {});
        benchmark::DoNotOptimize(out.agg.data());
    }
    state.counters["edges"] = static_cast<double>(g.edges.size());
}

template <bool Parallel>
void BM_attention_backward(benchmark::State& state) {
    const auto& g = bench_attention_graph();
    const auto in = head_inputs(static_cast<std::size_t>(state.range(0)));
    kernels::HeadProjections p{&in.a, &in.b, &in.c, in.pa, in.pb, in.pc};
    const auto fwd = kernels::serial::attention_forward(g, p, 0.2, {});
    const Matrix grad = fwd.agg;
    const kernels::AttentionBackwardIn bin{&fwd, &grad, in.w2, {}, 0.2};
    for (auto _ : state) {
        auto out = Parallel ? kernels::omp::attention_backward(g, p, bin) : kernels::serial::attention_backward(g, p, bin);
        benchmark::DoNotOptimize(out.grad_a.data());
    }
}

template <bool Parallel>
void BM_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(3);
    const Matrix a = uniform_init(n, n, rng), b = uniform_init(n, n, rng);
    for (auto _ : state) {
        auto c = Parallel ? kernels::omp::matmul(a, b) : kernels::serial::matmul(a, b);
        benchmark::DoNotOptimize(c.data());
    }
}

template <bool Parallel>
void BM_convkb_scores(benchmark::State& state) {
    const auto& kg = bench_graph();
    const std::size_t k = 200, omega = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(5);
    const Matrix ent = uniform_init(kg.num_entities(), k, rng), rel = uniform_init(kg.num_relation_rows(), k, rng);
    const Matrix filters = uniform_init(omega, 3, rng), w = uniform_init(omega * k, 1, rng);
    const kernels::ConvKBView view{&ent, &rel, &filters, w.flat()};
    std::vector<double> out(kg.train().size());
    for (auto _ : state) {
        if (Parallel)
            kernels::omp::convkb_scores(view, kg.train(), out);
        else
            kernels::serial::convkb_scores(view, kg.train(), out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * out.size()));
}

template <bool Parallel>
void BM_pagerank_sweep(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    kernels::PagerankGraph g;
    g.n = n;
    g.in_offsets.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) {
        for (int k = 0; k < 8; ++k) g.in_sources.push_back(static_cast<std::uint32_t>(pick(rng)));
        g.in_offsets[v + 1] = g.in_sources.size();
    }
    g.inv_out_degree.assign(n, 1.0 / 8.0);
    std::vector<double> rank(n, 1.0 / static_cast<double>(n)), next(n);
    for (auto _ : state) {
        const double d = Parallel ? kernels::omp::pagerank_sweep(g, rank, next, 0.85)
                                  : kernels::serial::pagerank_sweep(g, rank, next, 0.85);
        benchmark::DoNotOptimize(d);
    }
}

} // namespace

BENCHMARK(BM_attention_forward<false>)->Name("attention_forward/serial")->Arg(100)->Arg(200);
BENCHMARK(BM_attention_forward<true>)->Name("attention_forward/omp")->Arg(100)->Arg(200);
BENCHMARK(BM_attention_backward<false>)->Name("attention_backward/serial")->Arg(100)->Arg(200);
BENCHMARK(BM_attention_backward<true>)->Name("attention_backward/omp")->Arg(100)->Arg(200);
BENCHMARK(BM_matmul<false>)->Name("matmul/serial")->Arg(128)->Arg(256);
BENCHMARK(BM_matmul<true>)->Name("matmul/omp")->Arg(128)->Arg(256);
BENCHMARK(BM_convkb_scores<false>)->Name("convkb_scores/serial")->Arg(50);
BENCHMARK(BM_convkb_scores<true>)->Name("convkb_scores/omp")->Arg(50);
BENCHMARK(BM_pagerank_sweep<false>)->Name("pagerank_sweep/serial")->Arg(100000);
BENCHMARK(BM_pagerank_sweep<true>)->Name("pagerank_sweep/omp")->Arg(100000);

BENCHMARK_MAIN();
