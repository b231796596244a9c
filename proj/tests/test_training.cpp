#include "helpers.hpp"

#include "relgat/error.hpp"
#include "relgat/nhop.hpp"
#include "relgat/training.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace relgat;
using namespace testutil;

namespace {

// a + r = b, c + r = d, a + s = c, b + s = d.
KnowledgeGraph rectangle() {
    return make_graph({{"a", "r", "b"}, {"c", "r", "d"}, {"a", "s", "c"}, {"b", "s", "d"}});
}

}

TEST_SUITE("training") {

TEST_CASE("negatives replace exactly one side with a different entity") {
    const auto kg = make_graph({{"a", "r", "b"}}, {}, {}, {"c"});
    std::mt19937_64 rng(1);
    const auto batch = sample_negatives(kg.num_entities(), kg.train(), 200, rng);
    std::set<Triple> seen(batch.negatives.begin(), batch.negatives.end());
    const std::set<Triple> expected{{1, 0, 1}, {2, 0, 1}, {0, 0, 0}, {0, 0, 2}};
    CHECK(seen == expected);

    std::mt19937_64 rng2(2);
    const auto big = random_graph(rng2, 20, 3, 100);
    for (int ratio : {1, 2, 5}) {
        const auto b = sample_negatives(big.num_entities(), big.train(), ratio, rng2);
        REQUIRE(b.negatives.size() == big.train().size() * static_cast<std::size_t>(ratio));
        CHECK(b.ratio == static_cast<std::size_t>(ratio));
        CHECK(b.labels.size() == b.positives.size() + b.negatives.size());
        CHECK(b.all().size() == b.labels.size());
        for (std::size_t p = 0; p < b.positives.size(); ++p)
            for (int q = 0; q < ratio; ++q) {
                const auto& pos = b.positives[p];
                const auto& neg = b.negatives[p * static_cast<std::size_t>(ratio) + static_cast<std::size_t>(q)];
                CHECK(neg.relation == pos.relation);
                const bool head = neg.head != pos.head;
                const bool tail = neg.tail != pos.tail;
                CHECK(head != tail);
            }
        CHECK(b.labels.front() == 1);
        CHECK(b.labels.back() == -1);
    }
    CHECK_THROWS_AS(sample_negatives(big.num_entities(), big.train(), 0, rng2), Error);
    CHECK_THROWS_AS(sample_negatives(1, big.train(), 1, rng2), Error);

    const auto s1 = sample_negatives(big, big.train(), 3, 77);
    const auto s2 = sample_negatives(big, big.train(), 3, 77);
    CHECK(s1.negatives == s2.negatives);
}

TEST_CASE("replacement entities are uniform (chi-square)") {
    // A self-loop positive on entity 0: both sides draw from entities 1..9.
    const std::vector<Triple> pos{{0, 0, 0}};
    std::mt19937_64 rng(12345);
    const auto b = sample_negatives(10, pos, 100000, rng);
    std::vector<double> counts(10, 0.0);
    std::size_t heads = 0;
    for (const auto& n : b.negatives) {
        if (n.head != 0) {
            ++heads;
            counts[static_cast<std::size_t>(n.head)] += 1;
        } else {
            counts[static_cast<std::size_t>(n.tail)] += 1;
        }
    }
    CHECK(counts[0] == 0.0);
    const double expect = 100000.0 / 9.0;
    double chi2 = 0;
    for (std::size_t e = 1; e < 10; ++e) chi2 += (counts[e] - expect) * (counts[e] - expect) / expect;
    // 8 degrees of freedom: p = 0.01 at 20.09.
    CHECK(chi2 < 20.09);
    // Side split: 4 standard deviations of Binomial(1e5, 0.5).
    CHECK(std::abs(static_cast<double>(heads) - 50000.0) < 4 * std::sqrt(25000.0));
}

TEST_CASE("TransE separates a translatable graph") {
    // The hinge reaches zero without exact translations, so the check is on
    // the ranking: every positive beats all of its corruptions.
    const auto kg = rectangle();
    TrainConfig cfg;
    cfg.lr = 0.01;
    cfg.epochs = 1000;
    cfg.negative_ratio = 4;
    cfg.seed = 3;
    const auto r = train_transe(kg, 10, cfg);
    CHECK(r.losses.size() == 1000);
    CHECK(r.losses.back() == 0.0);
    CHECK(r.losses.back() < r.losses.front());
    for (const auto& t : kg.train()) {
        const double pos = translational_distance(r.state.entity.row(t.head), r.state.relation.row(t.relation),
                                                  r.state.entity.row(t.tail));
        for (EntityId e = 0; e < 4; ++e) {
            if (e != t.tail)
                CHECK(pos < translational_distance(r.state.entity.row(t.head), r.state.relation.row(t.relation),
                                                   r.state.entity.row(e)));
            if (e != t.head)
                CHECK(pos < translational_distance(r.state.entity.row(e), r.state.relation.row(t.relation),
                                                   r.state.entity.row(t.tail)));
        }
    }
}

TEST_CASE("TransE with zero epochs returns the seeded initialization") {
    const auto kg = rectangle();
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 11;
    const auto r = train_transe(kg, 6, cfg);
    std::mt19937_64 rng(11);
    CHECK(r.state.entity == uniform_init(kg.num_entities(), 6, rng));
    CHECK(r.state.relation == uniform_init(kg.num_relation_rows(), 6, rng));
}

TEST_CASE("TransE is deterministic under a seed") {
    std::mt19937_64 g(4);
    const auto kg = random_graph(g, 15, 3, 60);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.seed = 8;
    const auto a = train_transe(kg, 8, cfg);
    const auto b = train_transe(kg, 8, cfg);
    CHECK(a.state.entity == b.state.entity);
    CHECK(a.state.relation == b.state.relation);
    CHECK(a.losses == b.losses);
}

TEST_CASE("encoder training lowers the loss and keeps it non-negative") {
    const auto kg = rectangle();
    const auto graph = build_attention_graph(kg, enumerate_nhop_paths(kg, {}));
    EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.heads = 2;
    cfg.input_dim = 6;
    cfg.hidden_dim = 4;
    cfg.final_dim = 6;
    std::mt19937_64 rng(5);
    const EmbeddingState init{random_matrix(4, 6, rng), random_matrix(2, 6, rng)};
    TrainConfig train;
    train.epochs = 200;
    train.lr = 1e-3;
    train.seed = 6;
    const auto r = train_encoder(kg, graph, init, cfg, train);
    REQUIRE(r.losses.size() == 200);
    CHECK(r.losses.back() < r.losses.front());
    CHECK(r.epochs_run == 200);
    CHECK(r.h_out.rows() == 4);
    CHECK(r.h_out.cols() == 6);

    train.margin = 0.0;
    train.epochs = 40;
    const auto z = train_encoder(kg, graph, init, cfg, train);
    for (double l : z.losses) CHECK(l >= 0.0);

    const auto again = train_encoder(kg, graph, init, cfg, train);
    CHECK(again.h_out == z.h_out);
}

TEST_CASE("decoder fits separable data") {
    // Entities on a line, e_i = i * u, with g_k = (k + 1) * u: positives have
    // h + g - t = 0 exactly and every corruption does not.
    Vocabulary ents, rels;
    for (int i = 0; i < 12; ++i) ents.add("e" + std::to_string(i));
    rels.add("r1");
    rels.add("r2");
    std::vector<Triple> train;
    for (int h = 0; h < 12; ++h)
        for (int r = 0; r < 2; ++r)
            if (h + r + 1 < 12) train.push_back({h, r, h + r + 1});
    const KnowledgeGraph kg(ents, rels, train, {}, {});
    std::mt19937_64 rng(7);
    const auto u = random_matrix(1, 8, rng, 0.3);
    Matrix ent(12, 8), rel(3, 8);
    for (std::size_t d = 0; d < 8; ++d) {
        for (std::size_t i = 0; i < 12; ++i) ent(i, d) = static_cast<double>(i) * u(0, d);
        for (std::size_t k = 0; k < 3; ++k) rel(k, d) = static_cast<double>(k + 1) * u(0, d);
    }
    DecoderConfig cfg;
    cfg.filters = 10;
    cfg.lr = 0.01;
    cfg.epochs = 100;
    cfg.batch_size = 32;
    cfg.negative_ratio = 2;
    cfg.freeze_embeddings = true;
    cfg.eval_every = 0;
    const auto r = train_decoder(kg, ent, rel, cfg, 13);
    REQUIRE(r.losses.size() == 100);
    CHECK(r.losses.back() <= 0.5 * r.losses.front());
    CHECK(r.entity == ent);

    const auto again = train_decoder(kg, ent, rel, cfg, 13);
    CHECK(again.losses == r.losses);
    CHECK(again.params.weights == r.params.weights);
}

TEST_CASE("heavy regularization shrinks W every epoch") {
    std::mt19937_64 rng(8);
    const auto kg = random_graph(rng, 12, 2, 30);
    const auto ent = random_matrix(12, 6, rng);
    const auto rel = random_matrix(3, 6, rng);
    DecoderConfig cfg;
    cfg.filters = 4;
    cfg.lambda = 1e3;
    cfg.lr = 1e-3;
    cfg.batch_size = 1000;  // one step per epoch
    cfg.eval_every = 0;
    double prev = -1;
    for (int e = 0; e <= 6; ++e) {
        cfg.epochs = e;
        const auto r = train_decoder(kg, ent, rel, cfg, 21);
        const double norm = l2_norm(r.params.weights.flat());
        if (prev >= 0) CHECK(norm < prev);
        prev = norm;
    }
}

TEST_CASE("smoothed losses") {
    const std::vector<double> l{10, 0, 0};
    const auto s = smooth_losses(l, 0.9);
    CHECK(s[0] == 10.0);
    CHECK(s[1] == doctest::Approx(9.0));
    CHECK(s[2] == doctest::Approx(8.1));
}

}
