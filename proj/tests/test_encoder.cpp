#include "helpers.hpp"

#include "relgat/encoder.hpp"
#include "relgat/error.hpp"
#include "relgat/nhop.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace relgat;
using namespace testutil;

namespace {

// Edges as (target, source, relation sequence), built straight from the
// graph rather than through AttentionGraph.
struct OracleEdge {
    EntityId target, source;
    std::vector<RelationId> rels;
};

std::vector<OracleEdge> oracle_edges(const KnowledgeGraph& kg, const std::vector<AuxPath>& aux, bool with_aux) {
    std::vector<OracleEdge> out;
    for (const auto& t : kg.train()) out.push_back({t.tail, t.head, {t.relation}});
    if (with_aux)
        for (const auto& p : aux) out.push_back({p.target, p.source, p.relation_seq});
    for (EntityId e = 0; e < static_cast<EntityId>(kg.num_entities()); ++e) out.push_back({e, e, {kg.self_relation()}});
    return out;
}

Matrix dense_mul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j)
            for (std::size_t k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
    return c;
}

Matrix oracle_normalize(Matrix m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double s = 0;
        for (double v : m.row(r)) s += v * v;
        s = std::sqrt(s);
        if (s > 0)
            for (auto& v : m.row(r)) v /= s;
    }
    return m;
}

// Layer-by-layer composition written without any of the library's kernels.
Matrix oracle_forward(const EncoderParams& p, const std::vector<OracleEdge>& edges, const EncoderConfig& cfg,
                      Matrix* g_final = nullptr) {
    const Matrix h_in = cfg.normalize ? oracle_normalize(p.entity) : p.entity;
    Matrix h = h_in, g = p.relation;
    const std::size_t n = h.rows();
    for (int l = 0; l < cfg.n_layers; ++l) {
        const auto& lp = p.layers[static_cast<std::size_t>(l)];
        const bool final_layer = l == cfg.n_layers - 1;
        const std::size_t tc = lp.heads[0].w1.rows();
        const std::size_t heads = lp.heads.size();
        Matrix pre(n, final_layer ? tc : tc * heads);
        for (std::size_t m = 0; m < heads; ++m) {
            const auto& hp = lp.heads[m];
            std::map<EntityId, std::vector<std::pair<double, std::vector<double>>>> groups;
            for (const auto& e : edges) {
                std::vector<double> x(h.row(e.target).begin(), h.row(e.target).end());
                x.insert(x.end(), h.row(e.source).begin(), h.row(e.source).end());
                std::vector<double> gk(g.cols(), 0.0);
                if (cfg.use_relations)
                    for (auto r : e.rels)
                        for (std::size_t d = 0; d < g.cols(); ++d) gk[d] += g(r, d);
                x.insert(x.end(), gk.begin(), gk.end());
                std::vector<double> c(tc, 0.0);
                for (std::size_t r = 0; r < tc; ++r)
                    for (std::size_t k = 0; k < x.size(); ++k) c[r] += hp.w1(r, k) * x[k];
                double b = 0;
                for (std::size_t r = 0; r < tc; ++r) b += hp.w2(0, r) * c[r];
                b = b > 0 ? b : cfg.slope * b;
                groups[e.target].push_back({b, c});
            }
            for (auto& [i, list] : groups) {
                double z = 0;
                for (auto& [b, c] : list) z += std::exp(b);
                for (auto& [b, c] : list)
                    for (std::size_t r = 0; r < tc; ++r) {
                        const double v = std::exp(b) / z * c[r];
                        if (final_layer) pre(i, r) += v / static_cast<double>(heads);
                        else pre(i, m * tc + r) += v;
                    }
            }
        }
        for (auto& v : pre.flat()) v = activate(cfg.activation, v);
        h = cfg.normalize ? oracle_normalize(pre) : pre;
        g = dense_mul(g, lp.w_r);
    }
    if (g_final) *g_final = g;
    Matrix out = dense_mul(h_in, p.w_e);
    for (std::size_t k = 0; k < out.size(); ++k) out.flat()[k] += h.flat()[k];
    return out;
}

void check_close(const Matrix& a, const Matrix& b, double tol) {
    REQUIRE(a.same_shape(b));
    double worst = 0;
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a.flat()[k] - b.flat()[k]));
    CHECK(worst < tol);
}

EncoderConfig small_config() {
    EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.heads = 2;
    cfg.input_dim = 4;
    cfg.hidden_dim = 3;
    cfg.final_dim = 5;
    cfg.dropout = 0.0;
    return cfg;
}

}

TEST_SUITE("encoder") {

TEST_CASE("triple representation") {
    const std::vector<double> hi{1, 2}, hj{3, 4}, gk{5};
    const auto c = triple_representation(hi, hj, gk, identity(5));
    CHECK(c == std::vector<double>{1, 2, 3, 4, 5});
    CHECK(triple_representation(std::vector<double>(2, 0.0), std::vector<double>(2, 0.0), std::vector<double>(1, 0.0),
                                identity(5)) == std::vector<double>(5, 0.0));
    CHECK_THROWS_AS(triple_representation(hi, hj, gk, identity(4)), Error);

    std::mt19937_64 rng(1);
    const auto w1 = random_matrix(4, 8, rng);
    const auto x = random_matrix(1, 8, rng);
    const auto s = x.flat();
    const auto got = triple_representation(s.subspan(0, 3), s.subspan(3, 3), s.subspan(6, 2), w1);
    for (std::size_t r = 0; r < 4; ++r) {
        double e = 0;
        for (std::size_t k = 0; k < 8; ++k) e += w1(r, k) * s[k];
        CHECK(got[r] == doctest::Approx(e).epsilon(1e-13));
    }
}

TEST_CASE("attention coefficients") {
    Matrix one(1, 2, std::vector<double>{0.3, -1});
    CHECK(attention_coefficients(one, Matrix(1, 2, 1.0), 0.2).alpha == std::vector<double>{1.0});

    Matrix same(2, 2, std::vector<double>{1, 2, 1, 2});
    const auto eq = attention_coefficients(same, Matrix(1, 2, 0.5), 0.2);
    CHECK(eq.alpha[0] == doctest::Approx(0.5));
    CHECK(eq.alpha[1] == doctest::Approx(0.5));

    Matrix c(3, 1, std::vector<double>{0.0, std::log(2.0), std::log(2.0)});
    const auto r = attention_coefficients(c, Matrix(1, 1, 1.0), 0.2);
    CHECK(r.b[1] == doctest::Approx(std::log(2.0)));
    CHECK(r.alpha[0] == doctest::Approx(0.2));
    CHECK(r.alpha[1] == doctest::Approx(0.4));
    CHECK(r.alpha[2] == doctest::Approx(0.4));

    // Shifting every b of the group leaves alpha unchanged; b here is the
    // positive branch so scaling c by the constant shifts b linearly.
    Matrix c2(3, 1, std::vector<double>{5.0, 5.0 + std::log(2.0), 5.0 + std::log(2.0)});
    const auto r2 = attention_coefficients(c2, Matrix(1, 1, 1.0), 0.2);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(r2.alpha[k] - r.alpha[k]) < 1e-10);
}

TEST_CASE("layer output dimensions") {
    std::mt19937_64 rng(2);
    const auto kg = random_graph(rng, 5, 2, 8);
    const auto graph = build_attention_graph(kg, enumerate_nhop_paths(kg, {}));
    EncoderConfig cfg;
    cfg.heads = 2;
    cfg.input_dim = 4;
    cfg.hidden_dim = 3;
    cfg.final_dim = 3;
    EncoderLayerParams lp;
    for (int m = 0; m < 2; ++m) lp.heads.push_back({random_matrix(3, 12, rng), random_matrix(1, 3, rng)});
    lp.w_r = random_matrix(4, 6, rng);
    const EmbeddingState st{random_matrix(5, 4, rng), random_matrix(kg.num_relation_rows(), 4, rng)};
    const auto mid = layer_forward(st, graph, lp, cfg, false);
    CHECK(mid.state.entity.rows() == 5);
    CHECK(mid.state.entity.cols() == 6);
    CHECK(mid.state.relation.cols() == 6);
    lp.w_r = random_matrix(4, 3, rng);
    const auto fin = layer_forward(st, graph, lp, cfg, true);
    CHECK(fin.state.entity.rows() == 5);
    CHECK(fin.state.entity.cols() == 3);
}

TEST_CASE("2-entity graph matches a scalar unroll") {
    const auto kg = make_graph({{"a", "r", "b"}});
    const auto graph = build_attention_graph(kg, {});
    EncoderConfig cfg;
    cfg.n_layers = 1;
    cfg.heads = 1;
    cfg.input_dim = 1;
    cfg.hidden_dim = 1;
    cfg.final_dim = 1;
    cfg.normalize = false;
    cfg.dropout = 0.0;
    const double ha = 0.7, hb = -0.4, gr = 0.3, gs = -0.9, u = 0.5, v = -1.2, w = 0.8, s = 1.5, wr = 2.0, we = -0.6;
    EncoderParams p;
    p.entity = Matrix(2, 1, std::vector<double>{ha, hb});
    p.relation = Matrix(2, 1, std::vector<double>{gr, gs});
    p.layers.resize(1);
    p.layers[0].heads.push_back({Matrix(1, 3, std::vector<double>{u, v, w}), Matrix(1, 1, s)});
    p.layers[0].w_r = Matrix(1, 1, wr);
    p.w_e = Matrix(1, 1, we);

    auto lrelu = [](double x) { return x > 0 ? x : 0.2 * x; };
    auto elu = [](double x) { return x > 0 ? x : std::exp(x) - 1; };
    const double c1 = u * hb + v * ha + w * gr;
    const double c2 = u * hb + v * hb + w * gs;
    const double e1 = std::exp(lrelu(s * c1)), e2 = std::exp(lrelu(s * c2));
    const double hb_new = elu((e1 * c1 + e2 * c2) / (e1 + e2));
    const double ha_new = elu(u * ha + v * ha + w * gs);

    const EncoderPass pass(p, graph, cfg);
    const auto& r = pass.result();
    CHECK(r.h_final(0, 0) == doctest::Approx(ha_new).epsilon(1e-12));
    CHECK(r.h_final(1, 0) == doctest::Approx(hb_new).epsilon(1e-12));
    CHECK(r.h_residual(0, 0) == doctest::Approx(we * ha + ha_new).epsilon(1e-12));
    CHECK(r.h_residual(1, 0) == doctest::Approx(we * hb + hb_new).epsilon(1e-12));
    CHECK(r.g_out(0, 0) == doctest::Approx(gr * wr).epsilon(1e-12));
    CHECK(r.g_out(1, 0) == doctest::Approx(gs * wr).epsilon(1e-12));
}

TEST_CASE("random instances match the layer-by-layer oracle") {
    std::mt19937_64 rng(3);
    for (bool relations : {true, false}) {
        const auto kg = random_graph(rng, 9, 3, 25);
        const auto aux = enumerate_nhop_paths(kg, {});
        const auto graph = build_attention_graph(kg, aux);
        auto cfg = small_config();
        cfg.use_relations = relations;
        auto params = init_encoder_params(cfg, kg.num_entities(), kg.num_relation_rows(), rng);
        const EncoderPass pass(params, graph, cfg);
        Matrix g;
        check_close(pass.result().h_residual, oracle_forward(params, oracle_edges(kg, aux, true), cfg, &g), 1e-10);
        check_close(pass.result().g_out, g, 1e-10);
    }
}

TEST_CASE("zero layers give the identity path") {
    const auto kg = make_graph({{"a", "r", "b"}, {"b", "r", "c"}});
    const auto graph = build_attention_graph(kg, {});
    EncoderConfig cfg;
    cfg.n_layers = 0;
    cfg.input_dim = 3;
    cfg.final_dim = 3;
    std::mt19937_64 rng(4);
    auto p = init_encoder_params(cfg, kg.num_entities(), kg.num_relation_rows(), rng);
    const EncoderPass pass(p, graph, cfg);
    const auto hi = normalize_rows(p.entity);
    Matrix expect = dense_mul(hi, p.w_e);
    for (std::size_t k = 0; k < expect.size(); ++k) expect.flat()[k] += hi.flat()[k];
    check_close(pass.result().h_residual, expect, 1e-12);
    CHECK(pass.result().g_out == p.relation);
}

TEST_CASE("attention sums to one and rows stay normalized") {
    std::mt19937_64 rng(5);
    const auto kg = random_graph(rng, 12, 3, 40);
    const auto graph = build_attention_graph(kg, enumerate_nhop_paths(kg, {}));
    const auto cfg = small_config();
    const auto params = init_encoder_params(cfg, kg.num_entities(), kg.num_relation_rows(), rng);
    ForwardOptions opts;
    opts.collect_traces = true;
    const EncoderPass pass(params, graph, cfg, opts);
    REQUIRE(pass.result().traces.size() == 2);
    for (const auto& tr : pass.result().traces) {
        std::map<std::pair<int, EntityId>, double> sums;
        for (const auto& e : tr.entries) sums[{e.head, e.target}] += e.alpha;
        CHECK(sums.size() == 2 * kg.num_entities());
        for (const auto& [k, s] : sums) CHECK(std::abs(s - 1.0) < 1e-9);
    }
    for (std::size_t r = 0; r < kg.num_entities(); ++r)
        CHECK(std::abs(l2_norm(pass.result().h_final.row(r)) - 1.0) < 1e-9);

    const EmbeddingState st{normalize_rows(params.entity), params.relation};
    const auto first = layer_forward(st, graph, params.layers[0], cfg, false);
    for (std::size_t r = 0; r < kg.num_entities(); ++r)
        CHECK(std::abs(l2_norm(first.state.entity.row(r)) - 1.0) < 1e-9);
}

TEST_CASE("without relations the output ignores G") {
    std::mt19937_64 rng(6);
    const auto kg = random_graph(rng, 10, 3, 30);
    const auto graph = build_attention_graph(kg, enumerate_nhop_paths(kg, {}));
    auto cfg = small_config();
    cfg.use_relations = false;
    auto params = init_encoder_params(cfg, kg.num_entities(), kg.num_relation_rows(), rng);
    const auto before = EncoderPass(params, graph, cfg).result().h_residual;
    params.relation = random_matrix(params.relation.rows(), params.relation.cols(), rng, 5.0);
    CHECK(EncoderPass(params, graph, cfg).result().h_residual == before);
}

TEST_CASE("2-hop auxiliary edge shows up in the trace") {
    const auto kg = make_graph({{"a", "r1", "b"}, {"b", "r2", "c"}});
    const auto graph = build_attention_graph(kg, enumerate_nhop_paths(kg, {}));
    auto cfg = small_config();
    cfg.input_dim = 3;
    std::mt19937_64 rng(7);
    const auto params = init_encoder_params(cfg, kg.num_entities(), kg.num_relation_rows(), rng);
    ForwardOptions opts;
    opts.collect_traces = true;
    opts.trace_target = kg.entities().id("c");
    const EncoderPass pass(params, graph, cfg, opts);
    bool found = false;
    for (const auto& e : pass.result().traces.front().entries) {
        CHECK(e.target == kg.entities().id("c"));
        if (e.hop_count == 2) {
            found = true;
            CHECK(e.source == kg.entities().id("a"));
            CHECK(e.relations == std::vector<RelationId>{0, 1});
        }
    }
    CHECK(found);
}

TEST_CASE("translational distance") {
    CHECK(translational_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}, std::vector<double>{0, 0}) == 2.0);
    CHECK(translational_distance(std::vector<double>{1, 2}, std::vector<double>{3, -1}, std::vector<double>{4, 1}) == 0.0);
    std::mt19937_64 rng(8);
    const auto m = random_matrix(3, 7, rng);
    double e = 0;
    for (std::size_t d = 0; d < 7; ++d) e += std::abs(m(0, d) + m(1, d) - m(2, d));
    CHECK(translational_distance(m.row(0), m.row(1), m.row(2)) == doctest::Approx(e).epsilon(1e-14));
}

TEST_CASE("hinge loss examples") {
    // Entities on a line: 0 at 0, 1 at 2, 2 at 0.5; one zero relation.
    const Matrix ent(3, 1, std::vector<double>{0.0, 2.0, 0.5});
    const Matrix rel(1, 1, 0.0);
    const std::vector<Triple> far{{0, 0, 1}}, near{{0, 0, 2}};
    CHECK(hinge_loss(near, far, ent, rel, 1.0).loss == doctest::Approx(0.0));
    CHECK(hinge_loss(far, near, ent, rel, 1.0).loss == doctest::Approx(2.5));
    // Literal sign swaps the roles.
    CHECK(hinge_loss(near, far, ent, rel, 1.0, true, true).loss == doctest::Approx(2.5));

    const std::vector<Triple> pos{{0, 0, 1}, {0, 0, 2}, {1, 0, 2}};
    const std::vector<Triple> neg{{0, 0, 2}, {0, 0, 1}, {2, 0, 0}};
    const double per[3] = {std::max(1.0 + 2.0 - 0.5, 0.0), std::max(1.0 + 0.5 - 2.0, 0.0), std::max(1.0 + 1.5 - 0.5, 0.0)};
    const auto r = hinge_loss(pos, neg, ent, rel, 1.0);
    CHECK(r.loss == doctest::Approx(per[0] + per[1] + per[2]));
    CHECK(r.active_pairs == 2);
    CHECK_THROWS_AS(hinge_loss(pos, std::vector<Triple>(neg.begin(), neg.begin() + 2), ent, rel, 1.0), Error);
}

TEST_CASE("encoder hinge loss passes grad check") {
    const auto kg = make_graph({{"a", "r", "b"}, {"b", "s", "c"}, {"c", "r", "d"}, {"d", "s", "a"}, {"a", "s", "c"}});
    const auto graph = build_attention_graph(kg, enumerate_nhop_paths(kg, {}));
    EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.heads = 2;
    cfg.input_dim = 4;
    cfg.hidden_dim = 3;
    cfg.final_dim = 4;
    cfg.dropout = 0.0;
    std::mt19937_64 rng(9);
    auto params = init_encoder_params(cfg, kg.num_entities(), kg.num_relation_rows(), rng);
    // A large G_out would fix every L1 sign and zero the relation gradients.
    for (auto& layer : params.layers)
        for (auto& w : layer.w_r.flat()) w *= 0.1;
    const std::vector<Triple> pos = kg.train();
    std::vector<Triple> neg;
    for (const auto& t : pos) {
        neg.push_back({t.head, t.relation, (t.tail + 1) % 4});
        neg.push_back({t.head, t.relation, (t.tail + 2) % 4});
        neg.push_back({(t.head + 1) % 4, t.relation, t.tail});
    }

    std::vector<Matrix*> ptrs;
    params.for_each([&](const std::string&, Matrix& m) { ptrs.push_back(&m); });
    LossAndGrad f = [&](std::vector<Matrix*>&, std::vector<Matrix>* grads) {
        // Large margin keeps every pair active so the loss is smooth here.
        auto r = encoder_loss(params, graph, cfg, pos, neg, 10.0);
        if (grads) {
            grads->clear();
            r.grads.for_each([&](const std::string&, Matrix& m) { grads->push_back(m); });
        }
        return r.loss;
    };
    const auto res = grad_check(f, ptrs, 1e-5, 1e-3);
    CAPTURE(res.worst_param);
    CAPTURE(res.worst_index);
    CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("auxiliary positives pass grad check") {
    const auto kg = make_graph({{"a", "r", "b"}, {"b", "s", "c"}, {"c", "r", "d"}, {"d", "s", "a"}, {"a", "s", "c"}});
    const auto graph = build_attention_graph(kg, enumerate_nhop_paths(kg, {}));
    EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.heads = 2;
    cfg.input_dim = 4;
    cfg.hidden_dim = 3;
    cfg.final_dim = 4;
    cfg.dropout = 0.0;
    std::mt19937_64 rng(9);
    auto params = init_encoder_params(cfg, kg.num_entities(), kg.num_relation_rows(), rng);
    // A large G_out would fix every L1 sign and zero the relation gradients.
    for (auto& layer : params.layers)
        for (auto& w : layer.w_r.flat()) w *= 0.1;
    std::vector<Triple> pos = kg.train();
    const auto aux = aux_positive_triples(graph);
    REQUIRE(!aux.empty());
    CHECK(aux.front().relation == static_cast<RelationId>(kg.num_relation_rows()));
    pos.insert(pos.end(), aux.begin(), aux.end());
    std::vector<Triple> neg;
    for (const auto& t : pos) {
        neg.push_back({t.head, t.relation, (t.tail + 1) % 4});
        neg.push_back({t.head, t.relation, (t.tail + 2) % 4});
        neg.push_back({(t.head + 1) % 4, t.relation, t.tail});
    }

    std::vector<Matrix*> ptrs;
    params.for_each([&](const std::string&, Matrix& m) { ptrs.push_back(&m); });
    LossAndGrad f = [&](std::vector<Matrix*>&, std::vector<Matrix>* grads) {
        // Large margin keeps every pair active so the loss is smooth here.
        auto r = encoder_loss(params, graph, cfg, pos, neg, 10.0);
        if (grads) {
            grads->clear();
            r.grads.for_each([&](const std::string&, Matrix& m) { grads->push_back(m); });
        }
        return r.loss;
    };
    const auto res = grad_check(f, ptrs, 1e-5, 1e-3);
    CAPTURE(res.worst_param);
    CAPTURE(res.worst_index);
    CHECK(res.max_rel_error < 1e-4);
}

}
