#include "relgat/error.hpp"
#include "relgat/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace relgat::kernels {

double convkb_score_one(const ConvKBView& v, std::span<const double> h, std::span<const double> g,
                        std::span<const double> t) {
    const std::size_t k = h.size();
    const std::size_t body = k - k % kConvLanes;
    const Matrix& w = *v.filters;
    double score = 0.0;
    for (std::size_t m = 0; m < w.rows(); ++m) {
        const double f0 = w(m, 0), f1 = w(m, 1), f2 = w(m, 2);
        const double* wm = v.weights.data() + m * k;
        double lane[kConvLanes] = {};
        for (std::size_t d = 0; d < body; d += kConvLanes)
            for (std::size_t j = 0; j < kConvLanes; ++j) {
                const double x = f0 * h[d + j] + f1 * g[d + j] + f2 * t[d + j];
                lane[j] += wm[d + j] * std::max(x, 0.0);
            }
        double acc = ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
        for (std::size_t d = body; d < k; ++d) {
            const double x = f0 * h[d] + f1 * g[d] + f2 * t[d];
            acc += wm[d] * std::max(x, 0.0);
        }
        score += acc;
    }
    return score;
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) input_error("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) input_error("matmul_bt: inner dimensions differ");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
            c(i, j) = s;
        }
    return c;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) input_error("matmul_at: inner dimensions differ");
    Matrix c(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.cols(); ++i)
        for (std::size_t r = 0; r < a.rows(); ++r) {
            const double ari = a(r, i);
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += ari * b(r, j);
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
    for (std::size_t i = 0; i < g.num_entities; ++i) {
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
            const auto brow = p.b->row(static_cast<std::size_t>(edge.source));
            for (std::size_t d = 0; d < dim; ++d) agg[d] += w * brow[d];
            if (p.c)
                for (const auto r : g.edge_relations(edge)) {
                    const auto crow = p.c->row(static_cast<std::size_t>(r));
                    for (std::size_t d = 0; d < dim; ++d) agg[d] += w * crow[d];
                }
        }
        const auto arow = p.a->row(i);
        for (std::size_t d = 0; d < dim; ++d) agg[d] += total * arow[d];
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

    for (std::size_t i = 0; i < g.num_entities; ++i) {
        const auto lo = g.target_offsets[i], hi = g.target_offsets[i + 1];
        const auto di = dagg.row(i);
        double da = 0.0;
        const auto arow = p.a->row(i);
        for (std::size_t d = 0; d < dim; ++d) da += di[d] * arow[d];
        double dot = 0.0;
        for (auto e = lo; e < hi; ++e) {
            const auto& edge = g.edges[e];
            const double scale = in.edge_scale.empty() ? 1.0 : in.edge_scale[e];
            weight[e] = fwd.alpha[e] * scale;
            double dc = da;
            const auto brow = p.b->row(static_cast<std::size_t>(edge.source));
            for (std::size_t d = 0; d < dim; ++d) dc += di[d] * brow[d];
            if (p.c)
                for (const auto r : g.edge_relations(edge)) {
                    const auto crow = p.c->row(static_cast<std::size_t>(r));
                    for (std::size_t d = 0; d < dim; ++d) dc += di[d] * crow[d];
                }
            dpre[e] = dc * scale;  // d loss / d alpha_e, parked here
            dot += fwd.alpha[e] * dpre[e];
        }
        for (auto e = lo; e < hi; ++e)
            dpre[e] = fwd.alpha[e] * (dpre[e] - dot) * leaky_relu_grad(fwd.pre[e], in.slope);
    }

    AttentionBackwardOut out;
    out.grad_a = Matrix(g.num_entities, dim);
    out.grad_b = Matrix(g.num_entities, dim);
    out.grad_c = Matrix(p.c ? p.c->rows() : 0, dim);
    out.grad_w2.assign(dim, 0.0);
    std::vector<double> sum_a(g.num_entities, 0.0), sum_b(g.num_entities, 0.0), sum_c(out.grad_c.rows(), 0.0);

    for (std::size_t i = 0; i < g.num_entities; ++i) {
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
    for (std::size_t j = 0; j < g.num_entities; ++j) {
        auto gb = out.grad_b.row(j);
        double ssum = 0.0;
        for (auto k = g.source_offsets[j]; k < g.source_offsets[j + 1]; ++k) {
            const auto e = g.by_source[k];
            const auto di = dagg.row(static_cast<std::size_t>(g.edges[e].target));
            for (std::size_t d = 0; d < dim; ++d) gb[d] += weight[e] * di[d];
            ssum += dpre[e];
        }
        sum_b[j] = ssum;
        for (std::size_t d = 0; d < dim; ++d) gb[d] += ssum * in.w2[d];
    }
    for (std::size_t r = 0; r < out.grad_c.rows(); ++r) {
        auto gc = out.grad_c.row(r);
        double ssum = 0.0;
        for (auto k = g.relation_offsets[r]; k < g.relation_offsets[r + 1]; ++k) {
            const auto e = g.by_relation[k];
            const auto di = dagg.row(static_cast<std::size_t>(g.edges[e].target));
            for (std::size_t d = 0; d < dim; ++d) gc[d] += weight[e] * di[d];
            ssum += dpre[e];
        }
        sum_c[r] = ssum;
        for (std::size_t d = 0; d < dim; ++d) gc[d] += ssum * in.w2[d];
    }

    for (std::size_t i = 0; i < g.num_entities; ++i) {
        const auto arow = p.a->row(i);
        const auto brow = p.b->row(i);
        for (std::size_t d = 0; d < dim; ++d) out.grad_w2[d] += sum_a[i] * arow[d] + sum_b[i] * brow[d];
    }
    for (std::size_t r = 0; r < out.grad_c.rows(); ++r) {
        const auto crow = p.c->row(r);
        for (std::size_t d = 0; d < dim; ++d) out.grad_w2[d] += sum_c[r] * crow[d];
    }
    return out;
}

void convkb_scores(const ConvKBView& v, std::span<const Triple> triples, std::span<double> out) {
    for (std::size_t n = 0; n < triples.size(); ++n) {
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
    for (std::size_t v = 0; v < g.n; ++v) {
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

} // namespace serial
} // namespace relgat::kernels
