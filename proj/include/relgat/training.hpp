#pragma once

#include "relgat/attention_graph.hpp"
#include "relgat/config.hpp"
#include "relgat/decoder.hpp"
#include "relgat/encoder.hpp"
#include "relgat/kg.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace relgat {

// negatives[p * ratio + q] corrupts positives[p]; labels cover positives
// (+1) then negatives (-1), matching all().
struct NegativeSampleBatch {
    std::vector<Triple> positives;
    std::vector<Triple> negatives;
    std::vector<int> labels;
    std::size_t ratio = 0;

    std::vector<Triple> all() const;
};

// Each negative replaces the head or the tail (probability 1/2 each) with an
// entity drawn uniformly from the other N_e - 1.
NegativeSampleBatch sample_negatives(std::size_t n_entities, std::span<const Triple> positives, int ratio,
                                     std::mt19937_64& rng);
NegativeSampleBatch sample_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives, int ratio,
                                     std::uint64_t seed);

struct EpochLog {
    std::string stage;
    int epoch = 0;  // 1-based
    double loss = 0.0;
    double valid_mrr = std::numeric_limits<double>::quiet_NaN();
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct TranseResult {
    EmbeddingState state;
    std::vector<double> losses;
};

// Full-batch TransE with the encoder's hinge loss; entity rows are
// renormalized at the start of every epoch. G has num_relation_rows() rows.
TranseResult train_transe(const KnowledgeGraph& kg, std::size_t dim, const TrainConfig& cfg,
                          const EpochCallback& log = {});

struct EncoderTrainOptions {
    EpochCallback log;
    // Called with the parameters after `epochs_done` epochs, including 0.
    std::function<void(int epochs_done, const EncoderParams&)> observe;
};

struct EncoderTrainResult {
    EncoderParams params;
    Matrix h_out;  // H'' without dropout
    Matrix g_out;
    std::vector<double> losses;
    int epochs_run = 0;
    int best_epoch = 0;  // epoch whose parameters were kept
    std::vector<std::string> warnings;
};

// Full-graph steps with Adam on every encoder matrix. The self-loop relation
// row is freshly initialized when `init` lacks it.
EncoderTrainResult train_encoder(const KnowledgeGraph& kg, const AttentionGraph& graph, const EmbeddingState& init,
                                 const EncoderConfig& cfg, const TrainConfig& train,
                                 const EncoderTrainOptions& opts = {});

struct DecoderTrainResult {
    DecoderParams params;
    Matrix entity;
    Matrix relation;
    std::vector<double> losses;
    int epochs_run = 0;
    int best_epoch = 0;
    double best_valid_mrr = std::numeric_limits<double>::quiet_NaN();
};

// Minibatch ConvKB training on a private copy of the embeddings.
DecoderTrainResult train_decoder(const KnowledgeGraph& kg, const Matrix& entity, const Matrix& relation,
                                 const DecoderConfig& cfg, std::uint64_t seed, const EpochCallback& log = {});

// Exponential smoothing used for the non-increasing loss check.
std::vector<double> smooth_losses(std::span<const double> losses, double weight = 0.9);

} // namespace relgat
