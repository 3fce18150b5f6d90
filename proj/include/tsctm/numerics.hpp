#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace tsctm {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    void fill(double v);
    bool all_finite() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);

/// y = M x
Vector matvec(const Matrix& m, std::span<const double> x);
/// y = M^T x
Vector matvec_transposed(const Matrix& m, std::span<const double> x);

/// Softmax with max subtraction; output lies on the probability simplex.
Vector softmax(std::span<const double> v);
/// log(softmax(v)) computed via log-sum-exp.
Vector log_softmax(std::span<const double> v);
double log_sum_exp(std::span<const double> v);

double softplus(double x);
Vector softplus(std::span<const double> v);
/// Derivative of softplus, i.e. the logistic sigmoid.
double sigmoid(double x);

/// xoshiro256** seeded through splitmix64. Output is identical on every
/// platform, which std:: distributions do not guarantee.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n), unbiased.
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t s_[4];
};

struct AdamOptions {
    double lr = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    friend bool operator==(const AdamOptions&, const AdamOptions&) = default;
};

/// Moment buffers for a fixed list of parameter tensors.
struct AdamState {
    AdamOptions options;
    std::vector<Vector> m;
    std::vector<Vector> v;
    std::uint64_t t = 0;

    AdamState() = default;
    AdamState(AdamOptions opts, const std::vector<std::size_t>& tensor_sizes);

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update over matching lists of parameter and
/// gradient tensors. Throws std::invalid_argument on any shape mismatch.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads,
               AdamState& state);

/// Central finite differences of loss_fn around x, one coordinate at a time.
Vector fd_gradient(const std::function<double(std::span<const double>)>& loss_fn,
                   std::span<const double> x, double h);

/// Max over coordinates of |a - b| / max(scale_floor, |a|, |b|).
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double scale_floor = 1e-6);

}  // namespace tsctm
