#pragma once

#include "relgat/attention_graph.hpp"
#include "relgat/kernels.hpp"
#include "relgat/kg.hpp"
#include "relgat/numerics.hpp"

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace relgat {

struct EncoderConfig {
    int n_layers = 2;
    int heads = 2;
    std::size_t input_dim = 50;     // entity and relation input width (TransE init)
    std::size_t hidden_dim = 100;   // per-head width of non-final layers
    std::size_t final_dim = 200;    // final entity and relation width
    double slope = 0.2;
    Activation activation = Activation::elu;
    bool normalize = true;
    double dropout = 0.3;           // on attention coefficients, training only
    bool use_relations = true;      // false: the -Relations ablation
    bool literal_hinge = false;     // max{d_neg - d_pos + margin, 0}, the reversed sign
    bool aux_positives = false;     // auxiliary paths join the hinge positive set

    void validate() const;
    // Entity width entering layer l (l == n_layers gives the output width).
    std::size_t entity_dim(int layer) const;
    // Per-head triple-representation width of layer l.
    std::size_t head_dim(int layer) const;
};

struct AttentionHeadParams {
    Matrix w1;  // head_dim x (2T + P), columns [target | source | relation]
    Matrix w2;  // 1 x head_dim
};

struct EncoderLayerParams {
    std::vector<AttentionHeadParams> heads;
    Matrix w_r;  // P x P'
};

struct EncoderParams {
    Matrix entity;    // H, N_e x T
    Matrix relation;  // G, N_r x P (originals, then the self-loop row)
    std::vector<EncoderLayerParams> layers;
    Matrix w_e;       // T^i x T^f

    // Stable names: H, G, layer<l>.head<m>.W1, layer<l>.head<m>.W2, layer<l>.W_R, W_E.
    void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
    void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;
    EncoderParams zeros_like() const;
};

// Seeded uniform initialization; entity/relation rows come from `init` when given.
EncoderParams init_encoder_params(const EncoderConfig& cfg, std::size_t n_entities, std::size_t n_relation_rows,
                                  std::mt19937_64& rng);

struct EmbeddingState {
    Matrix entity;
    Matrix relation;
};

struct TraceEntry {
    EntityId target;
    EntityId source;
    std::vector<RelationId> relations;
    std::size_t hop_count;
    int head;
    std::vector<double> c;
    double b;
    double alpha;
};

struct AttentionTrace {
    int layer = 0;
    std::vector<TraceEntry> entries;
};

struct EncoderForwardResult {
    Matrix h_final;     // H^f
    Matrix h_residual;  // H'' = H^i W_E + H^f
    Matrix g_out;       // G after the last relation transform
    std::vector<AttentionTrace> traces;
};

struct ForwardOptions {
    bool collect_traces = false;
    bool keep_cache = false;
    std::mt19937_64* dropout_rng = nullptr;  // null: no dropout
    EntityId trace_target = -1;              // >= 0: trace only this target's edges
};

// c = W1 [h_i || h_j || g_k].
std::vector<double> triple_representation(std::span<const double> h_i, std::span<const double> h_j,
                                          std::span<const double> g_k, const Matrix& w1);

struct AttentionCoefficients {
    std::vector<double> b;
    std::vector<double> alpha;
};

// Attention over the triples incident to one target: rows of `c` are c_ijk.
AttentionCoefficients attention_coefficients(const Matrix& c, const Matrix& w2, double slope);

struct LayerOutput {
    EmbeddingState state;
    std::vector<AttentionTrace> traces;
};

// One attention layer over the whole graph: heads concatenate unless
// is_final, in which case they are averaged. Dropout is off; rows of the new
// H are normalized when cfg.normalize.
LayerOutput layer_forward(const EmbeddingState& state, const AttentionGraph& graph, const EncoderLayerParams& params,
                          const EncoderConfig& cfg, bool is_final, int layer = 0, bool collect_traces = false);

namespace detail {

struct HeadCache {
    Matrix a, b, c;
    std::vector<double> pa, pb, pc;
    kernels::AttentionForwardOut fwd;
    std::vector<double> scale;  // dropout multipliers, empty when off
};

struct LayerCache {
    Matrix h_in, g_in;
    std::vector<HeadCache> heads;
    Matrix pre_act;    // concatenated (or averaged) aggregates
    Matrix activated;  // sigma(pre_act), before normalization
};

} // namespace detail

// Full encoder pass plus what the backward pass needs.
class EncoderPass {
public:
    EncoderPass(const EncoderParams& params, const AttentionGraph& graph, const EncoderConfig& cfg,
                const ForwardOptions& opts = {});

    const EncoderForwardResult& result() const noexcept { return result_; }
    EncoderForwardResult take_result() { return std::move(result_); }

    // Gradients of a loss with respect to every parameter, given dL/dH'' and
    // dL/dG_out.
    EncoderParams backward(const Matrix& grad_h_residual, const Matrix& grad_g_out) const;

private:
    const EncoderParams& params_;
    const AttentionGraph& graph_;
    EncoderConfig cfg_;
    EncoderForwardResult result_;
    Matrix h_input_;  // H^i after optional normalization
    std::vector<detail::LayerCache> layers_;
};

double translational_distance(std::span<const double> h, std::span<const double> g, std::span<const double> t);

struct HingeResult {
    double loss = 0.0;
    Matrix grad_entity;
    Matrix grad_relation;
    std::size_t active_pairs = 0;
};

// Negatives are grouped per positive: negatives[p * ratio + q] pairs with
// positives[p]. Loss is sum over pairs of max{margin + d_pos - d_neg, 0}.
HingeResult hinge_loss(std::span<const Triple> positives, std::span<const Triple> negatives, const Matrix& entity,
                       const Matrix& relation, double margin, bool use_relations = true, bool literal = false,
                       bool want_grad = true);

// Auxiliary edges of `graph` as triples. Relation id num_relation_rows + k
// stands for the k-th auxiliary edge; its embedding is the sum along the path.
std::vector<Triple> aux_positive_triples(const AttentionGraph& graph);

// Encoder loss for gradient checks and training: forward, hinge on (H'', G_out), backward.
struct EncoderLoss {
    double loss = 0.0;
    EncoderParams grads;
};

EncoderLoss encoder_loss(const EncoderParams& params, const AttentionGraph& graph, const EncoderConfig& cfg,
                         std::span<const Triple> positives, std::span<const Triple> negatives, double margin,
                         std::mt19937_64* dropout_rng = nullptr);

} // namespace relgat
