#pragma once

#include "relgat/kg.hpp"
#include "relgat/numerics.hpp"

#include <random>
#include <span>
#include <vector>

namespace relgat {

// ConvKB: the triple [h, g, t] is a k x 3 matrix; each 1x3 filter slides
// over its rows giving a k-vector ReLU(row . w_m); the Omega maps are
// concatenated and dotted with W. Lower scores are more plausible.
struct DecoderParams {
    Matrix filters;  // Omega x 3
    Matrix weights;  // (Omega * k) x 1

    std::size_t num_filters() const noexcept { return filters.rows(); }
    std::size_t dim() const noexcept { return filters.rows() ? weights.rows() / filters.rows() : 0; }
};

struct DecoderConfig {
    std::size_t filters = 50;
    double lambda = 1e-5;
    int negative_ratio = 10;
    double lr = 1e-3;
    int lr_decay_every = 0;  // step schedule; 0 keeps lr fixed
    double lr_decay = 0.5;
    double dropout = 0.0;    // on the feature maps before W, training only
    int epochs = 200;
    std::size_t batch_size = 128;
    bool freeze_embeddings = false;
    double filter_noise = 0.01;
    int eval_every = 50;  // validation MRR cadence for early stopping; 0 disables
    int patience = 2;     // evaluations without improvement before stopping

    void validate() const;
};

// Filters start at [0.1, 0.1, -0.1] plus uniform noise; W is uniform.
DecoderParams init_decoder_params(std::size_t num_filters, std::size_t dim, double filter_noise, std::mt19937_64& rng);

double convkb_score(std::span<const double> h, std::span<const double> g, std::span<const double> t,
                    const DecoderParams& params);

// sum_n softplus(l_n * f_n) + lambda/2 ||W||^2.
double soft_margin_loss(std::span<const double> scores, std::span<const int> labels, const DecoderParams& params,
                        double lambda);

struct DecoderGrads {
    double loss = 0.0;
    Matrix filters;
    Matrix weights;
    Matrix entity;    // empty when embeddings are not requested
    Matrix relation;
};

// Soft-margin loss over a labelled batch with gradients for the decoder
// parameters and, optionally, the embeddings. With a generator and
// dropout > 0, feature maps are dropped (inverted scaling) before W.
DecoderGrads convkb_loss(const Matrix& entity, const Matrix& relation, std::span<const Triple> triples,
                         std::span<const int> labels, const DecoderParams& params, double lambda,
                         bool embedding_grads = true, double dropout = 0.0, std::mt19937_64* rng = nullptr);

} // namespace relgat
