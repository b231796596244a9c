#include "relgat/training.hpp"

#include "relgat/error.hpp"
#include "relgat/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace relgat {

std::vector<Triple> NegativeSampleBatch::all() const {
    std::vector<Triple> out = positives;
    out.insert(out.end(), negatives.begin(), negatives.end());
    return out;
}

NegativeSampleBatch sample_negatives(std::size_t n_entities, std::span<const Triple> positives, int ratio,
                                     std::mt19937_64& rng) {
    if (ratio < 1) input_error("negative ratio must be >= 1");
    if (n_entities < 2) input_error("negative sampling needs at least 2 entities");
    NegativeSampleBatch batch;
    batch.ratio = static_cast<std::size_t>(ratio);
    batch.positives.assign(positives.begin(), positives.end());
    batch.negatives.reserve(positives.size() * batch.ratio);
    std::bernoulli_distribution head_side(0.5);
    std::uniform_int_distribution<EntityId> other(0, static_cast<EntityId>(n_entities) - 2);
    for (const auto& p : positives) {
        for (std::size_t q = 0; q < batch.ratio; ++q) {
            Triple n = p;
            EntityId& slot = head_side(rng) ? n.head : n.tail;
            const EntityId draw = other(rng);
            slot = draw >= slot ? draw + 1 : draw;
            batch.negatives.push_back(n);
        }
    }
    batch.labels.assign(batch.positives.size(), 1);
    batch.labels.resize(batch.positives.size() + batch.negatives.size(), -1);
    return batch;
}

NegativeSampleBatch sample_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives, int ratio,
                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_negatives(kg.num_entities(), positives, ratio, rng);
}

std::vector<double> smooth_losses(std::span<const double> losses, double weight) {
    std::vector<double> out;
    out.reserve(losses.size());
    double s = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        s = i == 0 ? losses[i] : weight * s + (1.0 - weight) * losses[i];
        out.push_back(s);
    }
    return out;
}

namespace {

void check_loss(double loss, const std::string& stage, int epoch) {
    if (!std::isfinite(loss)) numeric_error(stage + ": non-finite loss at epoch " + std::to_string(epoch));
}

std::vector<std::string> loss_warnings(const std::vector<double>& losses, const std::string& stage) {
    std::vector<std::string> out;
    if (losses.size() < 10) return out;
    const auto s = smooth_losses(losses);
    const std::size_t window = losses.size() / 10;
    for (std::size_t i = window; i < s.size(); ++i)
        if (s[i] > s[i - window] * (1.0 + 1e-6)) {
            out.push_back(stage + ": smoothed loss rose between epochs " + std::to_string(i - window + 1) + " and " +
                          std::to_string(i + 1));
            break;
        }
    return out;
}

} // namespace

TranseResult train_transe(const KnowledgeGraph& kg, std::size_t dim, const TrainConfig& cfg, const EpochCallback& log) {
    cfg.validate("transe.");
    if (dim == 0) input_error("transe.dim must be > 0");
    std::mt19937_64 rng(cfg.seed);
    TranseResult out;
    out.state.entity = uniform_init(kg.num_entities(), dim, rng);
    out.state.relation = uniform_init(kg.num_relation_rows(), dim, rng);
    AdamState adam_h(kg.num_entities(), dim, cfg.lr);
    AdamState adam_g(kg.num_relation_rows(), dim, cfg.lr);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.normalize_every_iter) out.state.entity = normalize_rows(out.state.entity);
        const auto batch = sample_negatives(kg.num_entities(), kg.train(), cfg.negative_ratio, rng);
        auto hinge = hinge_loss(batch.positives, batch.negatives, out.state.entity, out.state.relation, cfg.margin);
        check_loss(hinge.loss, "transe", epoch);
        adam_update(out.state.entity, hinge.grad_entity, adam_h);
        adam_update(out.state.relation, hinge.grad_relation, adam_g);
        out.losses.push_back(hinge.loss);
        if (log) log({"transe", epoch, hinge.loss});
    }
    return out;
}

EncoderTrainResult train_encoder(const KnowledgeGraph& kg, const AttentionGraph& graph, const EmbeddingState& init,
                                 const EncoderConfig& cfg, const TrainConfig& train,
                                 const EncoderTrainOptions& opts) {
    cfg.validate();
    train.validate("enc.");
    if (init.entity.rows() != kg.num_entities() || init.entity.cols() != cfg.input_dim)
        input_error("initial entity embeddings do not match the encoder input dimension");
    if (init.relation.cols() != cfg.input_dim ||
        (init.relation.rows() != kg.num_relation_rows() && init.relation.rows() != kg.num_relations()))
        input_error("initial relation embeddings do not match the encoder input dimension");

    std::mt19937_64 rng(train.seed);
    EncoderTrainResult out;
    out.params = init_encoder_params(cfg, kg.num_entities(), kg.num_relation_rows(), rng);
    out.params.entity = init.entity;
    for (std::size_t r = 0; r < init.relation.rows(); ++r)
        std::copy(init.relation.row(r).begin(), init.relation.row(r).end(), out.params.relation.row(r).begin());

    std::vector<AdamState> adam;
    out.params.for_each([&](const std::string&, const Matrix& m) { adam.emplace_back(m.rows(), m.cols(), train.lr); });

    EncoderParams best = out.params;
    double best_mrr = -1.0;
    int since_best = 0;
    auto validate_now = [&](const EncoderParams& p) {
        EncoderPass pass(p, graph, cfg);
        const auto& r = pass.result();
        TranslationalScorer scorer(r.h_residual, r.g_out, cfg.use_relations);
        return evaluate(kg.valid(), scorer, kg).metrics.mrr;
    };

    std::vector<Triple> positives(kg.train().begin(), kg.train().end());
    if (cfg.aux_positives) {
        const auto extra = aux_positive_triples(graph);
        positives.insert(positives.end(), extra.begin(), extra.end());
    }

    if (opts.observe) opts.observe(0, out.params);
    for (int epoch = 1; epoch <= train.epochs; ++epoch) {
        if (train.normalize_every_iter) out.params.entity = normalize_rows(out.params.entity);
        const auto batch = sample_negatives(kg.num_entities(), positives, train.negative_ratio, rng);
        auto loss = encoder_loss(out.params, graph, cfg, batch.positives, batch.negatives, train.margin,
                                 cfg.dropout > 0.0 ? &rng : nullptr);
        check_loss(loss.loss, "encoder", epoch);
        std::size_t idx = 0;
        std::vector<Matrix*> grads;
        loss.grads.for_each([&](const std::string&, Matrix& g) { grads.push_back(&g); });
        out.params.for_each([&](const std::string&, Matrix& p) {
            if (train.weight_decay > 0.0) {
                auto g = grads[idx]->flat();
                const auto v = p.flat();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += train.weight_decay * v[i];
            }
            adam_update(p, *grads[idx], adam[idx]);
            ++idx;
        });
        out.losses.push_back(loss.loss);
        out.epochs_run = epoch;
        if (train.lr_decay_every > 0 && epoch % train.lr_decay_every == 0)
            for (auto& a : adam) a.lr *= train.lr_decay;

        EpochLog entry{"encoder", epoch, loss.loss};
        bool stop = false;
        if (train.eval_every > 0 && !kg.valid().empty() && epoch % train.eval_every == 0) {
            entry.valid_mrr = validate_now(out.params);
            if (entry.valid_mrr > best_mrr) {
                best_mrr = entry.valid_mrr;
                best = out.params;
                out.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= train.patience) {
                stop = true;
            }
        }
        if (opts.log) opts.log(entry);
        if (opts.observe) opts.observe(epoch, out.params);
        if (stop) break;
    }
    if (train.eval_every > 0 && best_mrr >= 0.0) {
        // The last partial stretch since the previous check is judged too.
        if (out.epochs_run != out.best_epoch && out.epochs_run % train.eval_every != 0) {
            const double mrr = validate_now(out.params);
            if (mrr > best_mrr) {
                best = out.params;
                out.best_epoch = out.epochs_run;
            }
        }
        out.params = std::move(best);
    } else {
        out.best_epoch = out.epochs_run;
    }

    EncoderPass final_pass(out.params, graph, cfg);
    auto result = final_pass.take_result();
    out.h_out = std::move(result.h_residual);
    out.g_out = std::move(result.g_out);
    out.warnings = loss_warnings(out.losses, "encoder");
    return out;
}

DecoderTrainResult train_decoder(const KnowledgeGraph& kg, const Matrix& entity, const Matrix& relation,
                                 const DecoderConfig& cfg, std::uint64_t seed, const EpochCallback& log) {
    cfg.validate();
    if (entity.rows() != kg.num_entities() || relation.rows() < kg.num_relations() || entity.cols() != relation.cols())
        input_error("decoder embeddings do not match the graph");
    std::mt19937_64 rng(seed);
    DecoderTrainResult out;
    out.entity = entity;
    out.relation = relation;
    out.params = init_decoder_params(cfg.filters, entity.cols(), cfg.filter_noise, rng);

    AdamState adam_f(out.params.filters.rows(), 3, cfg.lr);
    AdamState adam_w(out.params.weights.rows(), 1, cfg.lr);
    AdamState adam_h(entity.rows(), entity.cols(), cfg.lr);
    AdamState adam_g(relation.rows(), relation.cols(), cfg.lr);

    struct Snapshot {
        DecoderParams params;
        Matrix entity, relation;
    } best{out.params, out.entity, out.relation};
    double best_mrr = -1.0;
    int since_best = 0;
    auto validate_now = [&] {
        ConvKBScorer scorer(out.entity, out.relation, out.params);
        return evaluate(kg.valid(), scorer, kg).metrics.mrr;
    };
    auto consider = [&](int epoch, double mrr) {
        if (mrr > best_mrr) {
            best_mrr = mrr;
            best = {out.params, out.entity, out.relation};
            out.best_epoch = epoch;
            since_best = 0;
            return false;
        }
        return ++since_best >= cfg.patience;
    };

    std::vector<std::size_t> order(kg.train().size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Triple> positives;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            positives.clear();
            for (std::size_t i = start; i < end; ++i) positives.push_back(kg.train()[order[i]]);
            const auto batch = sample_negatives(kg.num_entities(), positives, cfg.negative_ratio, rng);
            const auto triples = batch.all();
            auto g = convkb_loss(out.entity, out.relation, triples, batch.labels, out.params, cfg.lambda,
                                 !cfg.freeze_embeddings, cfg.dropout, &rng);
            check_loss(g.loss, "decoder", epoch);
            epoch_loss += g.loss;
            adam_update(out.params.filters, g.filters, adam_f);
            adam_update(out.params.weights, g.weights, adam_w);
            if (!cfg.freeze_embeddings) {
                adam_update(out.entity, g.entity, adam_h);
                adam_update(out.relation, g.relation, adam_g);
            }
        }
        out.losses.push_back(epoch_loss);
        out.epochs_run = epoch;
        if (cfg.lr_decay_every > 0 && epoch % cfg.lr_decay_every == 0)
            for (auto* a : {&adam_f, &adam_w, &adam_h, &adam_g}) a->lr *= cfg.lr_decay;
        EpochLog entry{"decoder", epoch, epoch_loss};
        bool stop = false;
        if (cfg.eval_every > 0 && !kg.valid().empty() && epoch % cfg.eval_every == 0) {
            entry.valid_mrr = validate_now();
            stop = consider(epoch, entry.valid_mrr);
        }
        if (log) log(entry);
        if (stop) break;
    }
    if (cfg.eval_every > 0 && !kg.valid().empty() && out.epochs_run > 0) {
        if (out.epochs_run % cfg.eval_every != 0) consider(out.epochs_run, validate_now());
        out.best_valid_mrr = best_mrr;
        out.params = std::move(best.params);
        out.entity = std::move(best.entity);
        out.relation = std::move(best.relation);
    } else {
        out.best_epoch = out.epochs_run;
    }
    return out;
}

} // namespace relgat
