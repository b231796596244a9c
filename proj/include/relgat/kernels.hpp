#pragma once

// Data-parallel inner loops. Each kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp with the same
// signature. Every output element is produced by exactly one iteration with a
// fixed summation order, so both variants are bit-identical.

#include "relgat/attention_graph.hpp"
#include "relgat/kg.hpp"
#include "relgat/numerics.hpp"

#include <span>
#include <vector>

namespace relgat::kernels {

// Per-head attention inputs. Row i of `a` is W1_target * h_i, row j of `b` is
// W1_source * h_j, row r of `c` is W1_relation * g_r (empty when relations
// are ablated). The scalar projections are those rows dotted with w2.
struct HeadProjections {
    const Matrix* a = nullptr;
    const Matrix* b = nullptr;
    const Matrix* c = nullptr;
    std::span<const double> pa, pb, pc;
};

struct AttentionForwardOut {
    std::vector<double> pre;    // w2 . c_e before LeakyReLU
    std::vector<double> alpha;  // grouped softmax over targets
    Matrix agg;                 // sum_e alpha_e * scale_e * c_e, one row per target
};

// edge_scale multiplies alpha in the aggregation (attention dropout); empty
// means 1.
struct AttentionBackwardIn {
    const AttentionForwardOut* fwd = nullptr;
    const Matrix* grad_agg = nullptr;
    std::span<const double> w2;
    std::span<const double> edge_scale;
    double slope = 0.2;
};

struct AttentionBackwardOut {
    Matrix grad_a, grad_b, grad_c;
    std::vector<double> grad_w2;
};

struct ConvKBView {
    const Matrix* entities = nullptr;
    const Matrix* relations = nullptr;
    const Matrix* filters = nullptr;  // Omega x 3
    std::span<const double> weights;  // Omega * k
};

struct PagerankGraph {
    std::size_t n = 0;
    std::vector<std::size_t> in_offsets;
    std::vector<std::uint32_t> in_sources;
    std::vector<double> inv_out_degree;  // 0 for dangling nodes
};

namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_bt(const Matrix& a, const Matrix& b);
Matrix matmul_at(const Matrix& a, const Matrix& b);
AttentionForwardOut attention_forward(const AttentionGraph& g, const HeadProjections& p, double slope,
                                      std::span<const double> edge_scale);
AttentionBackwardOut attention_backward(const AttentionGraph& g, const HeadProjections& p,
                                        const AttentionBackwardIn& in);
void convkb_scores(const ConvKBView& v, std::span<const Triple> triples, std::span<double> out);
// One damped power-iteration step; returns the L1 change.
double pagerank_sweep(const PagerankGraph& g, std::span<const double> rank, std::span<double> next, double damping);
} // namespace serial

namespace omp {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_bt(const Matrix& a, const Matrix& b);
Matrix matmul_at(const Matrix& a, const Matrix& b);
AttentionForwardOut attention_forward(const AttentionGraph& g, const HeadProjections& p, double slope,
                                      std::span<const double> edge_scale);
AttentionBackwardOut attention_backward(const AttentionGraph& g, const HeadProjections& p,
                                        const AttentionBackwardIn& in);
void convkb_scores(const ConvKBView& v, std::span<const Triple> triples, std::span<double> out);
// One damped power-iteration step; returns the L1 change.
double pagerank_sweep(const PagerankGraph& g, std::span<const double> rank, std::span<double> next, double damping);
} // namespace omp

// Partial sums over d use kConvLanes interleaved accumulators combined in a
// fixed order, which lets the compiler vectorize without changing results.
inline constexpr std::size_t kConvLanes = 8;

// Scores one ConvKB triple; shared by both variants.
double convkb_score_one(const ConvKBView& v, std::span<const double> h, std::span<const double> g,
                        std::span<const double> t);

} // namespace relgat::kernels
