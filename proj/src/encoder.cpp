#include "relgat/encoder.hpp"

#include "relgat/error.hpp"

#include <algorithm>
#include <cmath>

namespace relgat {

namespace {

namespace kx = kernels::omp;

Matrix column_block(const Matrix& m, std::size_t begin, std::size_t count) {
    Matrix out(m.rows(), count);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, begin + c);
    return out;
}

void put_column_block(Matrix& m, std::size_t begin, const Matrix& block) {
    for (std::size_t r = 0; r < block.rows(); ++r)
        for (std::size_t c = 0; c < block.cols(); ++c) m(r, begin + c) = block(r, c);
}

void add_into(Matrix& acc, const Matrix& x) {
    auto a = acc.flat();
    auto b = x.flat();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

std::vector<double> as_vector(const Matrix& column) { return {column.flat().begin(), column.flat().end()}; }

void run_layer(const AttentionGraph& graph, const EncoderLayerParams& lp, const EncoderConfig& cfg, int l,
               bool is_final, const Matrix& h, const Matrix& g, std::mt19937_64* rng,
               std::vector<AttentionTrace>* traces, EntityId trace_target, detail::LayerCache& cache, Matrix& h_out,
               Matrix& g_out) {
    const std::size_t t = h.cols(), p = g.cols();
    const std::size_t heads = lp.heads.size();
    if (heads == 0) input_error("layer has no attention heads");
    const std::size_t tc = lp.heads.front().w1.rows();
    const std::size_t n = graph.num_entities;

    cache.h_in = h;
    cache.g_in = g;
    cache.heads.resize(heads);
    cache.pre_act = Matrix(n, is_final ? tc : tc * heads);

    std::bernoulli_distribution keep(1.0 - cfg.dropout);
    for (std::size_t m = 0; m < heads; ++m) {
        const auto& hp = lp.heads[m];
        if (hp.w1.rows() != tc || hp.w1.cols() != 2 * t + p || hp.w2.rows() != 1 || hp.w2.cols() != tc)
            input_error("layer " + std::to_string(l) + " head " + std::to_string(m) + " has mismatched shapes");
        auto& hc = cache.heads[m];
        hc.a = kx::matmul_bt(h, column_block(hp.w1, 0, t));
        hc.b = kx::matmul_bt(h, column_block(hp.w1, t, t));
        hc.pa = as_vector(kx::matmul_bt(hc.a, hp.w2));
        hc.pb = as_vector(kx::matmul_bt(hc.b, hp.w2));
        if (cfg.use_relations) {
            hc.c = kx::matmul_bt(g, column_block(hp.w1, 2 * t, p));
            hc.pc = as_vector(kx::matmul_bt(hc.c, hp.w2));
        }
        if (rng && cfg.dropout > 0.0) {
            hc.scale.resize(graph.edges.size());
            const double inv = 1.0 / (1.0 - cfg.dropout);
            for (auto& s : hc.scale) s = keep(*rng) ? inv : 0.0;
        }
        kernels::HeadProjections proj{&hc.a, &hc.b, cfg.use_relations ? &hc.c : nullptr, hc.pa, hc.pb, hc.pc};
        hc.fwd = kx::attention_forward(graph, proj, cfg.slope, hc.scale);

        for (std::size_t i = 0; i < n; ++i) {
            const auto src = hc.fwd.agg.row(i);
            auto dst = cache.pre_act.row(i);
            if (is_final)
                for (std::size_t d = 0; d < tc; ++d) dst[d] += src[d] / static_cast<double>(heads);
            else
                for (std::size_t d = 0; d < tc; ++d) dst[m * tc + d] = src[d];
        }

        if (traces) {
            if (traces->empty() || traces->back().layer != l) traces->push_back(AttentionTrace{l, {}});
            auto& trace = traces->back();
            trace.layer = l;
            for (std::size_t e = 0; e < graph.edges.size(); ++e) {
                const auto& edge = graph.edges[e];
                if (trace_target >= 0 && edge.target != trace_target) continue;
                TraceEntry entry{edge.target, edge.source, {}, edge.hop_count, static_cast<int>(m), {}, 0.0, 0.0};
                const auto rels = graph.edge_relations(edge);
                entry.relations.assign(rels.begin(), rels.end());
                entry.c.assign(tc, 0.0);
                for (std::size_t d = 0; d < tc; ++d) {
                    double v = hc.a(static_cast<std::size_t>(edge.target), d) + hc.b(static_cast<std::size_t>(edge.source), d);
                    if (cfg.use_relations)
                        for (const auto r : rels) v += hc.c(static_cast<std::size_t>(r), d);
                    entry.c[d] = v;
                }
                entry.b = leaky_relu(hc.fwd.pre[e], cfg.slope);
                entry.alpha = hc.fwd.alpha[e];
                trace.entries.push_back(std::move(entry));
            }
        }
    }

    cache.activated = cache.pre_act;
    for (auto& x : cache.activated.flat()) x = activate(cfg.activation, x);
    h_out = cfg.normalize ? normalize_rows(cache.activated) : cache.activated;
    if (lp.w_r.rows() != p) input_error("W_R shape does not match the relation width");
    g_out = kx::matmul(g, lp.w_r);
    if (!h_out.all_finite()) numeric_error("non-finite activation in layer " + std::to_string(l));
}

} // namespace

void EncoderConfig::validate() const {
    if (n_layers < 0) input_error("enc.layers must be >= 0");
    if (heads < 1) input_error("enc.heads must be >= 1");
    if (input_dim == 0 || hidden_dim == 0 || final_dim == 0) input_error("encoder dimensions must be positive");
    if (n_layers == 0 && final_dim != input_dim)
        input_error("with zero layers the final dimension must equal the input dimension");
    if (!(slope > 0.0 && slope < 1.0)) input_error("enc.slope must lie in (0,1)");
    if (!(dropout >= 0.0 && dropout < 1.0)) input_error("enc.dropout must lie in [0,1)");
}

std::size_t EncoderConfig::entity_dim(int layer) const {
    if (layer == 0) return input_dim;
    if (layer == n_layers) return final_dim;
    return static_cast<std::size_t>(heads) * hidden_dim;
}

std::size_t EncoderConfig::head_dim(int layer) const { return layer == n_layers - 1 ? final_dim : hidden_dim; }

void EncoderParams::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
    fn("H", entity);
    fn("G", relation);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto prefix = "layer" + std::to_string(l) + ".";
        for (std::size_t m = 0; m < layers[l].heads.size(); ++m) {
            fn(prefix + "head" + std::to_string(m) + ".W1", layers[l].heads[m].w1);
            fn(prefix + "head" + std::to_string(m) + ".W2", layers[l].heads[m].w2);
        }
        fn(prefix + "W_R", layers[l].w_r);
    }
    fn("W_E", w_e);
}

void EncoderParams::for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const {
    const_cast<EncoderParams*>(this)->for_each([&](const std::string& name, Matrix& m) { fn(name, m); });
}

EncoderParams EncoderParams::zeros_like() const {
    EncoderParams z = *this;
    z.for_each([](const std::string&, Matrix& m) { m.fill(0.0); });
    return z;
}

EncoderParams init_encoder_params(const EncoderConfig& cfg, std::size_t n_entities, std::size_t n_relation_rows,
                                  std::mt19937_64& rng) {
    cfg.validate();
    EncoderParams p;
    p.entity = uniform_init(n_entities, cfg.input_dim, rng);
    p.relation = uniform_init(n_relation_rows, cfg.input_dim, rng);
    std::size_t rel_dim = cfg.input_dim;
    for (int l = 0; l < cfg.n_layers; ++l) {
        const auto t = cfg.entity_dim(l);
        const auto tc = cfg.head_dim(l);
        EncoderLayerParams layer;
        for (int m = 0; m < cfg.heads; ++m) {
            AttentionHeadParams head;
            head.w1 = uniform_init(tc, 2 * t + rel_dim, rng);
            head.w2 = uniform_init(1, tc, rng);
            layer.heads.push_back(std::move(head));
        }
        layer.w_r = uniform_init(rel_dim, cfg.entity_dim(l + 1), rng);
        rel_dim = cfg.entity_dim(l + 1);
        p.layers.push_back(std::move(layer));
    }
    p.w_e = uniform_init(cfg.input_dim, cfg.entity_dim(cfg.n_layers), rng);
    return p;
}

std::vector<double> triple_representation(std::span<const double> h_i, std::span<const double> h_j,
                                          std::span<const double> g_k, const Matrix& w1) {
    const auto width = h_i.size() + h_j.size() + g_k.size();
    if (h_i.size() != h_j.size() || w1.cols() != width) input_error("triple_representation: dimension mismatch");
    std::vector<double> concat;
    concat.reserve(width);
    concat.insert(concat.end(), h_i.begin(), h_i.end());
    concat.insert(concat.end(), h_j.begin(), h_j.end());
    concat.insert(concat.end(), g_k.begin(), g_k.end());
    std::vector<double> c(w1.rows(), 0.0);
    for (std::size_t r = 0; r < w1.rows(); ++r)
        for (std::size_t k = 0; k < width; ++k) c[r] += w1(r, k) * concat[k];
    return c;
}

AttentionCoefficients attention_coefficients(const Matrix& c, const Matrix& w2, double slope) {
    if (c.rows() == 0) input_error("attention_coefficients: empty neighborhood");
    if (w2.rows() != 1 || w2.cols() != c.cols()) input_error("attention_coefficients: W2 shape mismatch");
    AttentionCoefficients out;
    out.b.resize(c.rows());
    for (std::size_t e = 0; e < c.rows(); ++e) {
        double s = 0.0;
        for (std::size_t d = 0; d < c.cols(); ++d) s += w2(0, d) * c(e, d);
        out.b[e] = leaky_relu(s, slope);
    }
    out.alpha = grouped_softmax(out.b, GroupIndex{{0, c.rows()}});
    return out;
}

EncoderPass::EncoderPass(const EncoderParams& params, const AttentionGraph& graph, const EncoderConfig& cfg,
                         const ForwardOptions& opts)
    : params_(params), graph_(graph), cfg_(cfg) {
    cfg_.validate();
    if (params.layers.size() != static_cast<std::size_t>(cfg.n_layers))
        input_error("encoder params have the wrong number of layers");
    if (params.entity.rows() != graph.num_entities || params.relation.rows() != graph.num_relation_rows)
        input_error("embedding rows do not match the graph");
    h_input_ = cfg_.normalize ? normalize_rows(params.entity) : params.entity;

    Matrix h = h_input_;
    Matrix g = params.relation;
    layers_.resize(static_cast<std::size_t>(cfg_.n_layers));
    for (int l = 0; l < cfg_.n_layers; ++l) {
        Matrix h_next, g_next;
        run_layer(graph_, params.layers[static_cast<std::size_t>(l)], cfg_, l, l == cfg_.n_layers - 1, h, g,
                  opts.dropout_rng, opts.collect_traces ? &result_.traces : nullptr, opts.trace_target,
                  layers_[static_cast<std::size_t>(l)], h_next, g_next);
        h = std::move(h_next);
        g = std::move(g_next);
    }
    if (params.w_e.rows() != h_input_.cols() || params.w_e.cols() != h.cols())
        input_error("W_E shape does not match the input/final entity widths");
    result_.h_residual = kx::matmul(h_input_, params.w_e);
    add_into(result_.h_residual, h);
    result_.h_final = std::move(h);
    result_.g_out = std::move(g);
    if (!result_.h_residual.all_finite() || !result_.g_out.all_finite())
        numeric_error("encoder forward produced non-finite values");
    if (!opts.keep_cache) layers_.clear();
}

EncoderParams EncoderPass::backward(const Matrix& grad_h_residual, const Matrix& grad_g_out) const {
    if (layers_.size() != static_cast<std::size_t>(cfg_.n_layers))
        input_error("EncoderPass::backward needs keep_cache");
    EncoderParams grads = params_.zeros_like();

    grads.w_e = kx::matmul_at(h_input_, grad_h_residual);
    Matrix grad_input = kx::matmul_bt(grad_h_residual, params_.w_e);
    Matrix dh = grad_h_residual;
    Matrix dg = grad_g_out;

    for (int l = cfg_.n_layers - 1; l >= 0; --l) {
        const auto& cache = layers_[static_cast<std::size_t>(l)];
        const auto& lp = params_.layers[static_cast<std::size_t>(l)];
        auto& lg = grads.layers[static_cast<std::size_t>(l)];
        const bool is_final = l == cfg_.n_layers - 1;
        const std::size_t t = cache.h_in.cols(), p = cache.g_in.cols();
        const std::size_t heads = lp.heads.size();
        const std::size_t tc = lp.heads.front().w1.rows();
        const std::size_t n = graph_.num_entities;

        lg.w_r = kx::matmul_at(cache.g_in, dg);
        Matrix dg_in = kx::matmul_bt(dg, lp.w_r);

        Matrix dact = cfg_.normalize ? normalize_rows_backward(cache.activated, normalize_rows(cache.activated), dh) : dh;
        Matrix dpre = cache.pre_act;
        for (std::size_t k = 0; k < dpre.size(); ++k)
            dpre.flat()[k] = dact.flat()[k] * activate_grad(cfg_.activation, cache.pre_act.flat()[k]);

        Matrix dh_in(n, t);
        for (std::size_t m = 0; m < heads; ++m) {
            const auto& hp = lp.heads[m];
            const auto& hc = cache.heads[m];
            Matrix dagg(n, tc);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t d = 0; d < tc; ++d)
                    dagg(i, d) = is_final ? dpre(i, d) / static_cast<double>(heads) : dpre(i, m * tc + d);

            kernels::HeadProjections proj{&hc.a, &hc.b, cfg_.use_relations ? &hc.c : nullptr, hc.pa, hc.pb, hc.pc};
            kernels::AttentionBackwardIn in{&hc.fwd, &dagg, hp.w2.flat(), hc.scale, cfg_.slope};
            const auto bwd = kx::attention_backward(graph_, proj, in);

            const Matrix wa = column_block(hp.w1, 0, t);
            const Matrix wb = column_block(hp.w1, t, t);
            auto& gw1 = lg.heads[m].w1;
            put_column_block(gw1, 0, kx::matmul_at(bwd.grad_a, cache.h_in));
            put_column_block(gw1, t, kx::matmul_at(bwd.grad_b, cache.h_in));
            add_into(dh_in, kx::matmul(bwd.grad_a, wa));
            add_into(dh_in, kx::matmul(bwd.grad_b, wb));
            if (cfg_.use_relations) {
                put_column_block(gw1, 2 * t, kx::matmul_at(bwd.grad_c, cache.g_in));
                add_into(dg_in, kx::matmul(bwd.grad_c, column_block(hp.w1, 2 * t, p)));
            }
            lg.heads[m].w2 = Matrix(1, tc, bwd.grad_w2);
        }
        dh = std::move(dh_in);
        dg = std::move(dg_in);
    }

    add_into(grad_input, dh);
    grads.entity = cfg_.normalize ? normalize_rows_backward(params_.entity, h_input_, grad_input) : grad_input;
    grads.relation = std::move(dg);
    return grads;
}

LayerOutput layer_forward(const EmbeddingState& state, const AttentionGraph& graph, const EncoderLayerParams& params,
                          const EncoderConfig& cfg, bool is_final, int layer, bool collect_traces) {
    if (state.entity.rows() != graph.num_entities || state.relation.rows() != graph.num_relation_rows)
        input_error("layer_forward: embedding rows do not match the graph");
    LayerOutput out;
    detail::LayerCache cache;
    run_layer(graph, params, cfg, layer, is_final, state.entity, state.relation, nullptr,
              collect_traces ? &out.traces : nullptr, -1, cache, out.state.entity, out.state.relation);
    return out;
}

double translational_distance(std::span<const double> h, std::span<const double> g, std::span<const double> t) {
    if (h.size() != g.size() || h.size() != t.size()) input_error("translational_distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t d = 0; d < h.size(); ++d) s += std::abs(h[d] + g[d] - t[d]);
    return s;
}

HingeResult hinge_loss(std::span<const Triple> positives, std::span<const Triple> negatives, const Matrix& entity,
                       const Matrix& relation, double margin, bool use_relations, bool literal, bool want_grad) {
    if (positives.empty() || negatives.size() % positives.size() != 0)
        input_error("hinge_loss: negatives are not aligned to positives");
    if (use_relations && relation.cols() != entity.cols()) input_error("hinge_loss: entity/relation widths differ");
    const std::size_t ratio = negatives.size() / positives.size();
    const std::size_t dim = entity.cols();

    HingeResult out;
    if (want_grad) {
        out.grad_entity = Matrix(entity.rows(), entity.cols());
        out.grad_relation = Matrix(relation.rows(), relation.cols());
    }
    std::vector<double> diff_pos(dim), diff_neg(dim);
    auto residual = [&](const Triple& t, std::vector<double>& diff) {
        const auto h = entity.row(static_cast<std::size_t>(t.head));
        const auto tl = entity.row(static_cast<std::size_t>(t.tail));
        double d = 0.0;
        if (use_relations) {
            const auto g = relation.row(static_cast<std::size_t>(t.relation));
            for (std::size_t k = 0; k < dim; ++k) d += std::abs(diff[k] = h[k] + g[k] - tl[k]);
        } else {
            for (std::size_t k = 0; k < dim; ++k) d += std::abs(diff[k] = h[k] - tl[k]);
        }
        return d;
    };
    auto push_grad = [&](const Triple& t, const std::vector<double>& diff, double coeff) {
        auto gh = out.grad_entity.row(static_cast<std::size_t>(t.head));
        auto gt = out.grad_entity.row(static_cast<std::size_t>(t.tail));
        for (std::size_t k = 0; k < dim; ++k) {
            const double s = coeff * l1_sign(diff[k]);
            gh[k] += s;
            gt[k] -= s;
        }
        if (use_relations) {
            auto gg = out.grad_relation.row(static_cast<std::size_t>(t.relation));
            for (std::size_t k = 0; k < dim; ++k) gg[k] += coeff * l1_sign(diff[k]);
        }
    };

    for (std::size_t p = 0; p < positives.size(); ++p) {
        const double d_pos = residual(positives[p], diff_pos);
        for (std::size_t q = 0; q < ratio; ++q) {
            const auto& neg = negatives[p * ratio + q];
            const double d_neg = residual(neg, diff_neg);
            const double term = literal ? margin + d_neg - d_pos : margin + d_pos - d_neg;
            if (term <= 0.0) continue;
            out.loss += term;
            ++out.active_pairs;
            if (!want_grad) continue;
            const double sign = literal ? -1.0 : 1.0;
            push_grad(positives[p], diff_pos, sign);
            push_grad(neg, diff_neg, -sign);
        }
    }
    return out;
}

EncoderLoss encoder_loss(const EncoderParams& params, const AttentionGraph& graph, const EncoderConfig& cfg,
                         std::span<const Triple> positives, std::span<const Triple> negatives, double margin,
                         std::mt19937_64* dropout_rng) {
    EncoderPass pass(params, graph, cfg, {false, true, dropout_rng});
    const auto& r = pass.result();
    const std::size_t rows = r.g_out.rows();
    const auto has_aux = [&](const Triple& t) { return static_cast<std::size_t>(t.relation) >= rows; };
    if (std::none_of(positives.begin(), positives.end(), has_aux)) {
        auto hinge = hinge_loss(positives, negatives, r.h_residual, r.g_out, margin, cfg.use_relations,
                                cfg.literal_hinge);
        EncoderLoss out;
        out.loss = hinge.loss;
        out.grads = pass.backward(hinge.grad_entity, hinge.grad_relation);
        return out;
    }

    std::vector<const AttentionGraph::Edge*> aux;
    for (const auto& e : graph.edges)
        if (e.hop_count >= 2) aux.push_back(&e);
    const std::size_t p = r.g_out.cols();
    Matrix g_ext(rows + aux.size(), p);
    for (std::size_t i = 0; i < rows; ++i) std::copy(r.g_out.row(i).begin(), r.g_out.row(i).end(), g_ext.row(i).begin());
    for (std::size_t k = 0; k < aux.size(); ++k) {
        auto dst = g_ext.row(rows + k);
        for (const auto rel : graph.edge_relations(*aux[k]))
            for (std::size_t d = 0; d < p; ++d) dst[d] += r.g_out(static_cast<std::size_t>(rel), d);
    }
    for (const auto& t : positives)
        if (static_cast<std::size_t>(t.relation) >= g_ext.rows()) input_error("auxiliary positive out of range");
    auto hinge = hinge_loss(positives, negatives, r.h_residual, g_ext, margin, cfg.use_relations, cfg.literal_hinge);
    Matrix grad_g(rows, p);
    for (std::size_t i = 0; i < rows; ++i)
        std::copy(hinge.grad_relation.row(i).begin(), hinge.grad_relation.row(i).end(), grad_g.row(i).begin());
    for (std::size_t k = 0; k < aux.size(); ++k)
        for (const auto rel : graph.edge_relations(*aux[k]))
            for (std::size_t d = 0; d < p; ++d)
                grad_g(static_cast<std::size_t>(rel), d) += hinge.grad_relation(rows + k, d);
    EncoderLoss out;
    out.loss = hinge.loss;
    out.grads = pass.backward(hinge.grad_entity, grad_g);
    return out;
}

std::vector<Triple> aux_positive_triples(const AttentionGraph& graph) {
    std::vector<Triple> out;
    for (const auto& e : graph.edges)
        if (e.hop_count >= 2)
            out.push_back({e.source, static_cast<RelationId>(graph.num_relation_rows + out.size()), e.target});
    return out;
}

} // namespace relgat
