#include "relgat/decoder.hpp"

#include "relgat/error.hpp"
#include "relgat/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace relgat {

void DecoderConfig::validate() const {
    if (filters < 1) input_error("dec.filters must be >= 1");
    if (lambda < 0.0) input_error("dec.lambda must be >= 0");
    if (negative_ratio < 1) input_error("dec.neg_ratio must be >= 1");
    if (!(lr > 0.0)) input_error("dec.lr must be > 0");
    if (epochs < 0) input_error("dec.epochs must be >= 0");
    if (batch_size < 1) input_error("dec.batch_size must be >= 1");
    if (lr_decay_every < 0) input_error("dec.lr_decay_every must be >= 0");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) input_error("dec.lr_decay must be in (0, 1]");
    if (!(dropout >= 0.0 && dropout < 1.0)) input_error("dec.dropout must be in [0, 1)");
}

DecoderParams init_decoder_params(std::size_t num_filters, std::size_t dim, double filter_noise,
                                  std::mt19937_64& rng) {
    DecoderParams p;
    p.filters = Matrix(num_filters, 3);
    std::uniform_real_distribution<double> noise(-filter_noise, filter_noise);
    for (std::size_t m = 0; m < num_filters; ++m) {
        p.filters(m, 0) = 0.1 + (filter_noise > 0.0 ? noise(rng) : 0.0);
        p.filters(m, 1) = 0.1 + (filter_noise > 0.0 ? noise(rng) : 0.0);
        p.filters(m, 2) = -0.1 + (filter_noise > 0.0 ? noise(rng) : 0.0);
    }
    p.weights = uniform_init(num_filters * dim, 1, rng);
    return p;
}

double convkb_score(std::span<const double> h, std::span<const double> g, std::span<const double> t,
                    const DecoderParams& params) {
    if (h.size() != g.size() || h.size() != t.size() || h.size() != params.dim() || params.filters.cols() != 3)
        input_error("convkb_score: dimension mismatch");
    kernels::ConvKBView view{nullptr, nullptr, &params.filters, params.weights.flat()};
    return kernels::convkb_score_one(view, h, g, t);
}

double soft_margin_loss(std::span<const double> scores, std::span<const int> labels, const DecoderParams& params,
                        double lambda) {
    if (scores.size() != labels.size()) input_error("soft_margin_loss: scores and labels differ in length");
    double loss = 0.0;
    for (std::size_t n = 0; n < scores.size(); ++n) {
        if (!std::isfinite(scores[n])) numeric_error("soft_margin_loss: non-finite score");
        if (labels[n] != 1 && labels[n] != -1) input_error("soft_margin_loss: labels must be +1 or -1");
        loss += softplus(labels[n] * scores[n]);
    }
    double sq = 0.0;
    for (double w : params.weights.flat()) sq += w * w;
    return loss + 0.5 * lambda * sq;
}

DecoderGrads convkb_loss(const Matrix& entity, const Matrix& relation, std::span<const Triple> triples,
                         std::span<const int> labels, const DecoderParams& params, double lambda,
                         bool embedding_grads, double dropout, std::mt19937_64* rng) {
    if (triples.size() != labels.size()) input_error("convkb_loss: triples and labels differ in length");
    const std::size_t k = params.dim();
    const std::size_t omega = params.num_filters();
    if (entity.cols() != k || relation.cols() != k) input_error("convkb_loss: embedding width does not match W");

    DecoderGrads out;
    out.filters = Matrix(omega, 3);
    out.weights = Matrix(omega * k, 1);
    if (embedding_grads) {
        out.entity = Matrix(entity.rows(), k);
        out.relation = Matrix(relation.rows(), k);
    }
    const double* w = params.weights.data();
    double* gw = out.weights.data();
    std::vector<double> dh(k), dg(k), dt(k), relu(k), up(k);
    const bool drop = rng && dropout > 0.0;
    std::vector<double> keep(drop ? omega * k : 0);
    // Four 16-bit uniforms per draw; drop probability is quantized to 1/65536.
    const auto cut = static_cast<std::uint64_t>(std::llround(dropout * 65536.0));
    const double scale = drop ? 1.0 / (1.0 - dropout) : 1.0;

    kernels::ConvKBView view{&entity, &relation, &params.filters, params.weights.flat()};
    for (std::size_t n = 0; n < triples.size(); ++n) {
        const auto& tr = triples[n];
        const auto h = entity.row(static_cast<std::size_t>(tr.head));
        const auto g = relation.row(static_cast<std::size_t>(tr.relation));
        const auto t = entity.row(static_cast<std::size_t>(tr.tail));
        double f = 0.0;
        if (drop) {
            for (std::size_t j = 0; j < keep.size(); j += 4) {
                const std::uint64_t bits = (*rng)();
                for (std::size_t q = 0; q < 4 && j + q < keep.size(); ++q)
                    keep[j + q] = ((bits >> (16 * q)) & 0xffff) >= cut ? scale : 0.0;
            }
            for (std::size_t m = 0; m < omega; ++m) {
                const double f0 = params.filters(m, 0), f1 = params.filters(m, 1), f2 = params.filters(m, 2);
                const double* km = keep.data() + m * k;
                const double* wm = w + m * k;
                for (std::size_t i = 0; i < k; ++i)
                    f += wm[i] * km[i] * std::max(f0 * h[i] + f1 * g[i] + f2 * t[i], 0.0);
            }
        } else {
            f = kernels::convkb_score_one(view, h, g, t);
        }
        if (!std::isfinite(f)) numeric_error("convkb_loss: non-finite score");
        const double l = labels[n];
        out.loss += softplus(l * f);
        const double df = l * sigmoid(l * f);

        std::fill(dh.begin(), dh.end(), 0.0);
        std::fill(dg.begin(), dg.end(), 0.0);
        std::fill(dt.begin(), dt.end(), 0.0);
        for (std::size_t m = 0; m < omega; ++m) {
            const double f0 = params.filters(m, 0), f1 = params.filters(m, 1), f2 = params.filters(m, 2);
            const double* wm = w + m * k;
            double* gwm = gw + m * k;
            double l0[kernels::kConvLanes] = {}, l1[kernels::kConvLanes] = {}, l2[kernels::kConvLanes] = {};
            const double* hp = h.data();
            const double* gp = g.data();
            const double* tp = t.data();
            for (std::size_t i = 0; i < k; ++i) relu[i] = std::max(f0 * hp[i] + f1 * gp[i] + f2 * tp[i], 0.0);
            if (drop)
                for (std::size_t i = 0; i < k; ++i) relu[i] *= keep[m * k + i];
            for (std::size_t i = 0; i < k; ++i) {
                gwm[i] += df * relu[i];
                const double pass = drop ? keep[m * k + i] : 1.0;
                up[i] = (relu[i] > 0.0 ? pass : 0.0) * (df * wm[i]);
            }
            for (std::size_t i = 0; i < k; ++i) {
                dh[i] += up[i] * f0;
                dg[i] += up[i] * f1;
                dt[i] += up[i] * f2;
            }
            // Lane j owns d = j (mod kConvLanes); the remainder goes to lane 0.
            const std::size_t body = k - k % kernels::kConvLanes;
            for (std::size_t d = 0; d < body; d += kernels::kConvLanes)
                for (std::size_t j = 0; j < kernels::kConvLanes; ++j) {
                    l0[j] += up[d + j] * hp[d + j];
                    l1[j] += up[d + j] * gp[d + j];
                    l2[j] += up[d + j] * tp[d + j];
                }
            for (std::size_t i = body; i < k; ++i) {
                l0[0] += up[i] * hp[i];
                l1[0] += up[i] * gp[i];
                l2[0] += up[i] * tp[i];
            }
            auto fold = [](const double* l) {
                return ((l[0] + l[1]) + (l[2] + l[3])) + ((l[4] + l[5]) + (l[6] + l[7]));
            };
            out.filters(m, 0) += fold(l0);
            out.filters(m, 1) += fold(l1);
            out.filters(m, 2) += fold(l2);
        }
        if (embedding_grads) {
            auto eh = out.entity.row(static_cast<std::size_t>(tr.head));
            auto er = out.relation.row(static_cast<std::size_t>(tr.relation));
            auto et = out.entity.row(static_cast<std::size_t>(tr.tail));
            for (std::size_t d = 0; d < k; ++d) {
                eh[d] += dh[d];
                er[d] += dg[d];
                et[d] += dt[d];
            }
        }
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < omega * k; ++i) {
        sq += w[i] * w[i];
        gw[i] += lambda * w[i];
    }
    out.loss += 0.5 * lambda * sq;
    return out;
}

} // namespace relgat
