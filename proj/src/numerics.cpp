#include "relgat/numerics.hpp"

#include "relgat/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace relgat {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) input_error("matrix data length does not match its shape");
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (auto& x : m.flat()) x = dist(rng);
    return m;
}

Matrix uniform_init(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double bound = 6.0 / std::sqrt(static_cast<double>(rows + cols));
    return uniform_matrix(rows, cols, -bound, bound, rng);
}

double leaky_relu(double x, double slope) noexcept { return x >= 0.0 ? x : slope * x; }
double leaky_relu_grad(double x, double slope) noexcept { return x >= 0.0 ? 1.0 : slope; }

std::vector<double> leaky_relu(std::span<const double> x, double slope) {
    std::vector<double> out(x.size());
    std::transform(x.begin(), x.end(), out.begin(), [slope](double v) { return leaky_relu(v, slope); });
    return out;
}

Activation parse_activation(const std::string& name) {
    if (name == "elu") return Activation::elu;
    if (name == "relu") return Activation::relu;
    if (name == "identity" || name == "none") return Activation::identity;
    if (name == "tanh") return Activation::tanh;
    input_error("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
    switch (a) {
    case Activation::elu: return "elu";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    }
    return "?";
}

double activate(Activation a, double x) noexcept {
    switch (a) {
    case Activation::elu: return x > 0.0 ? x : std::expm1(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::identity: return x;
    case Activation::tanh: return std::tanh(x);
    }
    return x;
}

double activate_grad(Activation a, double x) noexcept {
    switch (a) {
    case Activation::elu: return x > 0.0 ? 1.0 : std::exp(x);
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::identity: return 1.0;
    case Activation::tanh: {
        const double t = std::tanh(x);
        return 1.0 - t * t;
    }
    }
    return 1.0;
}

GroupIndex GroupIndex::from_group_ids(std::span<const std::size_t> group_of_element) {
    GroupIndex g;
    g.offsets.push_back(0);
    if (group_of_element.empty()) return g;
    if (!std::is_sorted(group_of_element.begin(), group_of_element.end()))
        input_error("group ids must be contiguous (sorted)");
    std::size_t current = group_of_element.front();
    if (current != 0) input_error("empty group 0");
    for (std::size_t i = 1; i < group_of_element.size(); ++i) {
        if (group_of_element[i] == current) continue;
        if (group_of_element[i] != current + 1) input_error("empty group " + std::to_string(current + 1));
        g.offsets.push_back(i);
        current = group_of_element[i];
    }
    g.offsets.push_back(group_of_element.size());
    return g;
}

std::vector<double> grouped_softmax(std::span<const double> values, const GroupIndex& groups) {
    if (groups.elements() != values.size()) input_error("group index does not cover the value vector");
    std::vector<double> out(values.size());
    for (std::size_t g = 0; g < groups.groups(); ++g) {
        const auto lo = groups.offsets[g];
        const auto hi = groups.offsets[g + 1];
        if (lo == hi) input_error("empty softmax group " + std::to_string(g));
        const double mx = *std::max_element(values.begin() + static_cast<std::ptrdiff_t>(lo),
                                            values.begin() + static_cast<std::ptrdiff_t>(hi));
        double sum = 0.0;
        for (auto i = lo; i < hi; ++i) sum += (out[i] = std::exp(values[i] - mx));
        for (auto i = lo; i < hi; ++i) out[i] /= sum;
    }
    return out;
}

std::vector<double> grouped_softmax_backward(std::span<const double> probs, std::span<const double> grad_out,
                                             const GroupIndex& groups) {
    std::vector<double> grad(probs.size());
    for (std::size_t g = 0; g < groups.groups(); ++g) {
        const auto lo = groups.offsets[g];
        const auto hi = groups.offsets[g + 1];
        double dot = 0.0;
        for (auto i = lo; i < hi; ++i) dot += probs[i] * grad_out[i];
        for (auto i = lo; i < hi; ++i) grad[i] = probs[i] * (grad_out[i] - dot);
    }
    return grad;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) input_error("l1_distance: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

double l2_norm(std::span<const double> a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

Matrix normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double n = l2_norm(m.row(r));
        if (n == 0.0) continue;
        for (auto& x : out.row(r)) x /= n;
    }
    return out;
}

Matrix normalize_rows_backward(const Matrix& input, const Matrix& output, const Matrix& grad_out) {
    Matrix grad(input.rows(), input.cols());
    for (std::size_t r = 0; r < input.rows(); ++r) {
        const double n = l2_norm(input.row(r));
        if (n == 0.0) continue;
        const auto y = output.row(r);
        const auto gy = grad_out.row(r);
        double dot = 0.0;
        for (std::size_t c = 0; c < y.size(); ++c) dot += y[c] * gy[c];
        auto gx = grad.row(r);
        for (std::size_t c = 0; c < y.size(); ++c) gx[c] = (gy[c] - y[c] * dot) / n;
    }
    return grad;
}

double softplus(double x) noexcept { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void adam_update(Matrix& params, const Matrix& grads, AdamState& state) {
    if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v))
        input_error("adam_update: shape mismatch");
    if (!grads.all_finite()) numeric_error("adam_update: non-finite gradient");
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    auto p = params.flat();
    auto g = grads.flat();
    auto m = state.m.flat();
    auto v = state.v.flat();
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

GradCheckResult grad_check(const LossAndGrad& f, std::vector<Matrix*> params, double delta, double denom_floor) {
    std::vector<Matrix> analytic;
    const double base = f(params, &analytic);
    if (!std::isfinite(base)) numeric_error("grad_check: non-finite loss");
    if (analytic.size() != params.size()) input_error("grad_check: gradient count does not match parameters");

    GradCheckResult result;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto values = params[p]->flat();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + delta;
            const double up = f(params, nullptr);
            values[i] = saved - delta;
            const double down = f(params, nullptr);
            values[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) numeric_error("grad_check: non-finite evaluation");
            const double numeric = (up - down) / (2.0 * delta);
            const double a = analytic[p].flat()[i];
            const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), std::max(denom_floor, 1e-300));
            if (rel > result.max_rel_error) result = {rel, p, i};
        }
    }
    return result;
}

void write_matrix(std::ostream& out, const Matrix& m) {
    out << m.rows() << ' ' << m.cols() << '\n';
    out << std::setprecision(17);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << row[c];
        out << '\n';
    }
}

Matrix read_matrix(std::istream& in) {
    std::size_t rows = 0, cols = 0;
    if (!(in >> rows >> cols)) input_error("matrix: bad header");
    std::vector<double> data(rows * cols);
    for (auto& x : data) {
        // operator>> rejects "inf"/"nan"; checkpoints only hold finite values.
        if (!(in >> x)) input_error("matrix: truncated data");
    }
    return Matrix(rows, cols, std::move(data));
}

void save_matrix(const std::filesystem::path& file, const Matrix& m) {
    std::ofstream out(file);
    if (!out) input_error("cannot write " + file.string());
    write_matrix(out, m);
}

Matrix load_matrix(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) input_error("cannot read " + file.string());
    return read_matrix(in);
}

} // namespace relgat
