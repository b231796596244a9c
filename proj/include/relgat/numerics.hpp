#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace relgat {

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    void fill(double v);
    bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix identity(std::size_t n);
// Uniform(-6/sqrt(fan), 6/sqrt(fan)) with fan = rows + cols.
Matrix uniform_init(std::size_t rows, std::size_t cols, std::mt19937_64& rng);
Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi, std::mt19937_64& rng);

double leaky_relu(double x, double slope) noexcept;
double leaky_relu_grad(double x, double slope) noexcept;
std::vector<double> leaky_relu(std::span<const double> x, double slope);

enum class Activation { elu, relu, identity, tanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);
double activate(Activation a, double x) noexcept;
// Derivative expressed through the pre-activation input.
double activate_grad(Activation a, double x) noexcept;

// Partition of a flat value vector into softmax groups. Elements of group g
// occupy [offsets[g], offsets[g + 1]).
struct GroupIndex {
    std::vector<std::size_t> offsets;

    std::size_t groups() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::size_t elements() const noexcept { return offsets.empty() ? 0 : offsets.back(); }
    static GroupIndex from_group_ids(std::span<const std::size_t> group_of_element);
};

std::vector<double> grouped_softmax(std::span<const double> values, const GroupIndex& groups);
// Returns d(loss)/d(values) given softmax outputs and d(loss)/d(outputs).
std::vector<double> grouped_softmax_backward(std::span<const double> probs, std::span<const double> grad_out,
                                             const GroupIndex& groups);

double l1_distance(std::span<const double> a, std::span<const double> b);
// Subgradient of sum|x| with sign(0) = 0.
inline double l1_sign(double x) noexcept { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double l2_norm(std::span<const double> a);
// Rows scaled to unit L2 norm; zero rows stay zero.
Matrix normalize_rows(const Matrix& m);
// Gradient through normalize_rows given its input, output and upstream gradient.
Matrix normalize_rows_backward(const Matrix& input, const Matrix& output, const Matrix& grad_out);

double softplus(double x) noexcept;
double sigmoid(double x) noexcept;

struct AdamState {
    Matrix m;
    Matrix v;
    std::int64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 1e-3;

    AdamState() = default;
    AdamState(std::size_t rows, std::size_t cols, double lr_ = 1e-3) : m(rows, cols), v(rows, cols), lr(lr_) {}
};

void adam_update(Matrix& params, const Matrix& grads, AdamState& state);

// Scalar loss plus gradients for a list of parameter matrices.
using LossAndGrad = std::function<double(std::vector<Matrix*>& params, std::vector<Matrix>* grads)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_param = 0;
    std::size_t worst_index = 0;
};

// Compares analytic gradients against central differences of step delta,
// coordinate by coordinate, over every parameter. The error is
// |a - n| / max(|a| + |n|, denom_floor); a positive floor keeps gradients that
// are zero up to rounding from dominating the maximum.
GradCheckResult grad_check(const LossAndGrad& f, std::vector<Matrix*> params, double delta, double denom_floor = 0.0);

// Text checkpoint format: "rows cols" header then row-major values with 17
// significant digits.
void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);
void save_matrix(const std::filesystem::path& file, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& file);

} // namespace relgat
