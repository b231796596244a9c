#include "relgat/error.hpp"
#include "relgat/kernels.hpp"

#include <algorithm>
#include <cmath>

// OpenMP variants. Loops are split over output rows only; the per-element
// summation order matches kernels::serial exactly.

namespace relgat::kernels::omp {

namespace {

using Index = std::ptrdiff_t;

inline void axpy(double w, std::span<const double> x, std::span<double> y) {
    for (std::size_t d = 0; d < y.size(); ++d) y[d] += w * x[d];
}

} // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) input_error("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < static_cast<Index>(a.rows()); ++i) {
        auto crow = c.row(static_cast<std::size_t>(i));
        const auto arow = a.row(static_cast<std::size_t>(i));
        for (std::size_t k = 0; k < a.cols(); ++k) axpy(arow[k], b.row(k), crow);
    }
    return c;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) input_error("matmul_bt: inner dimensions differ");
    Matrix c(a.rows(), b.rows());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < static_cast<Index>(a.rows()); ++i) {
        const auto arow = a.row(static_cast<std::size_t>(i));
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto brow = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < arow.size(); ++k) s += arow[k] * brow[k];
            c(static_cast<std::size_t>(i), j) = s;
        }
    }
    return c;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) input_error("matmul_at: inner dimensions differ");
    Matrix c(a.cols(), b.cols());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < static_cast<Index>(a.cols()); ++i) {
        auto crow = c.row(static_cast<std::size_t>(i));
        for (std::size_t r = 0; r < a.rows(); ++r) axpy(a(r, static_cast<std::size_t>(i)), b.row(r), crow);
    }
    return c;
}

AttentionForwardOut attention_forward(const AttentionGraph& g, const HeadProjections& p, double slope,
                                      std::span<const double> edge_scale) {
    const std::size_t dim = p.a->cols();
    AttentionForwardOut out;
    out.pre.resize(g.edges.size());
    out.alpha.resize(g.edges.size());
    out.agg = Matrix(g.num_entities, dim);
#pragma omp parallel for schedule(dynamic, 8)
    for (Index ii = 0; ii < static_cast<Index>(g.num_entities); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const auto lo = g.target_offsets[i], hi = g.target_offsets[i + 1];
        double mx = -INFINITY;
        for (auto e = lo; e < hi; ++e) {
            const auto& edge = g.edges[e];
            double s = p.pa[i] + p.pb[static_cast<std::size_t>(edge.source)];
            if (p.c)
                for (const auto r : g.edge_relations(edge)) s += p.pc[static_cast<std::size_t>(r)];
            out.pre[e] = s;
            mx = std::max(mx, leaky_relu(s, slope));
        }
        double sum = 0.0;
        for (auto e = lo; e < hi; ++e) sum += (out.alpha[e] = std::exp(leaky_relu(out.pre[e], slope) - mx));
        for (auto e = lo; e < hi; ++e) out.alpha[e] /= sum;

        auto agg = out.agg.row(i);
        double total = 0.0;
        for (auto e = lo; e < hi; ++e) {
            const auto& edge = g.edges[e];
            const double w = out.alpha[e] * (edge_scale.empty() ? 1.0 : edge_scale[e]);
            total += w;
            axpy(w, p.b->row(static_cast<std::size_t>(edge.source)), agg);
            if (p.c)
                for (const auto r : g.edge_relations(edge)) axpy(w, p.c->row(static_cast<std::size_t>(r)), agg);
        }
        axpy(total, p.a->row(i), agg);
    }
    return out;
}

AttentionBackwardOut attention_backward(const AttentionGraph& g, const HeadProjections& p,
                                        const AttentionBackwardIn& in) {
    const std::size_t dim = p.a->cols();
    const auto& fwd = *in.fwd;
    const Matrix& dagg = *in.grad_agg;
    const std::size_t ne = g.edges.size();
    std::vector<double> weight(ne), dpre(ne);

    auto dot = [](std::span<const double> x, std::span<const double> y, double s) {
        for (std::size_t d = 0; d < x.size(); ++d) s += x[d] * y[d];
        return s;
    };

#pragma omp parallel for schedule(dynamic, 8)
    for (Index ii = 0; ii < static_cast<Index>(g.num_entities); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const auto lo = g.target_offsets[i], hi = g.target_offsets[i + 1];
        const auto di = dagg.row(i);
        const double da = dot(di, p.a->row(i), 0.0);
        double acc = 0.0;
        for (auto e = lo; e < hi; ++e) {
            const auto& edge = g.edges[e];
            const double scale = in.edge_scale.empty() ? 1.0 : in.edge_scale[e];
            weight[e] = fwd.alpha[e] * scale;
            double dc = dot(di, p.b->row(static_cast<std::size_t>(edge.source)), da);
            if (p.c)
                for (const auto r : g.edge_relations(edge)) dc = dot(di, p.c->row(static_cast<std::size_t>(r)), dc);
            dpre[e] = dc * scale;
            acc += fwd.alpha[e] * dpre[e];
        }
        for (auto e = lo; e < hi; ++e)
            dpre[e] = fwd.alpha[e] * (dpre[e] - acc) * leaky_relu_grad(fwd.pre[e], in.slope);
    }

    AttentionBackwardOut out;
    out.grad_a = Matrix(g.num_entities, dim);
    out.grad_b = Matrix(g.num_entities, dim);
    out.grad_c = Matrix(p.c ? p.c->rows() : 0, dim);
    out.grad_w2.assign(dim, 0.0);
    std::vector<double> sum_a(g.num_entities, 0.0), sum_b(g.num_entities, 0.0), sum_c(out.grad_c.rows(), 0.0);

#pragma omp parallel for schedule(static)
    for (Index ii = 0; ii < static_cast<Index>(g.num_entities); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double wsum = 0.0, ssum = 0.0;
        for (auto e = g.target_offsets[i]; e < g.target_offsets[i + 1]; ++e) {
            wsum += weight[e];
            ssum += dpre[e];
        }
        sum_a[i] = ssum;
        auto ga = out.grad_a.row(i);
        const auto di = dagg.row(i);
        for (std::size_t d = 0; d < dim; ++d) ga[d] = wsum * di[d] + ssum * in.w2[d];
    }

    auto gather = [&](const std::vector<std::size_t>& offsets, const std::vector<std::uint32_t>& index, Matrix& grad,
                      std::vector<double>& sums) {
#pragma omp parallel for schedule(dynamic, 8)
        for (Index jj = 0; jj < static_cast<Index>(grad.rows()); ++jj) {
            const auto j = static_cast<std::size_t>(jj);
            auto gj = grad.row(j);
            double ssum = 0.0;
            for (auto k = offsets[j]; k < offsets[j + 1]; ++k) {
                const auto e = index[k];
                axpy(weight[e], dagg.row(static_cast<std::size_t>(g.edges[e].target)), gj);
                ssum += dpre[e];
            }
            sums[j] = ssum;
            axpy(ssum, in.w2, gj);
        }
    };
    gather(g.source_offsets, g.by_source, out.grad_b, sum_b);
    gather(g.relation_offsets, g.by_relation, out.grad_c, sum_c);

#pragma omp parallel for schedule(static)
    for (Index dd = 0; dd < static_cast<Index>(dim); ++dd) {
        const auto d = static_cast<std::size_t>(dd);
        double s = 0.0;
        for (std::size_t i = 0; i < g.num_entities; ++i) s += sum_a[i] * (*p.a)(i, d) + sum_b[i] * (*p.b)(i, d);
        for (std::size_t r = 0; r < out.grad_c.rows(); ++r) s += sum_c[r] * (*p.c)(r, d);
        out.grad_w2[d] = s;
    }
    return out;
}

void convkb_scores(const ConvKBView& v, std::span<const Triple> triples, std::span<double> out) {
#pragma omp parallel for schedule(static)
    for (Index nn = 0; nn < static_cast<Index>(triples.size()); ++nn) {
        const auto n = static_cast<std::size_t>(nn);
        const auto& t = triples[n];
        out[n] = convkb_score_one(v, v.entities->row(static_cast<std::size_t>(t.head)),
                                  v.relations->row(static_cast<std::size_t>(t.relation)),
                                  v.entities->row(static_cast<std::size_t>(t.tail)));
    }
}

double pagerank_sweep(const PagerankGraph& g, std::span<const double> rank, std::span<double> next, double damping) {
    const double n = static_cast<double>(g.n);
    double dangling = 0.0;
    for (std::size_t u = 0; u < g.n; ++u)
        if (g.inv_out_degree[u] == 0.0) dangling += rank[u];
    const double base = (1.0 - damping) / n + damping * dangling / n;
#pragma omp parallel for schedule(static)
    for (Index vv = 0; vv < static_cast<Index>(g.n); ++vv) {
        const auto v = static_cast<std::size_t>(vv);
        double s = 0.0;
        for (auto k = g.in_offsets[v]; k < g.in_offsets[v + 1]; ++k) {
            const auto u = g.in_sources[k];
            s += rank[u] * g.inv_out_degree[u];
        }
        next[v] = base + damping * s;
    }
    double diff = 0.0;
    for (std::size_t v = 0; v < g.n; ++v) diff += std::abs(next[v] - rank[v]);
    return diff;
}

} // namespace relgat::kernels::omp
