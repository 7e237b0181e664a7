#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace medfuse {

// Dense row-major array of doubles, rank 1..3. Innermost index fastest.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape_in)
        : shape_(std::move(shape_in)) {
        check_shape(shape_);
        data_.assign(size_of(shape_), 0.0);
    }

    Tensor(std::vector<std::size_t> shape_in, std::vector<double> values)
        : shape_(std::move(shape_in)), data_(std::move(values)) {
        check_shape(shape_);
        if (data_.size() != size_of(shape_)) {
            throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                        " does not match shape product " +
                                        std::to_string(size_of(shape_)));
        }
    }

    static Tensor vector_of(std::initializer_list<double> values) {
        return Tensor({values.size()}, std::vector<double>(values));
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor identity(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& flat() { return data_; }
    const std::vector<double>& flat() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i) { return data_[i]; }
    double at(std::size_t i) const { return data_[i]; }
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_str() const;
    bool all_finite() const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double s);

private:
    static std::size_t size_of(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) n *= e;
        return n;
    }
    static void check_shape(const std::vector<std::size_t>& shape);

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// c[i][j] = sum_p a[i][p] b[p][j], accumulated in p order.
Tensor matmul(const Tensor& a, const Tensor& b);

// y = W x for rank-2 W [m x n] and rank-1 x [n].
Tensor matvec(const Tensor& w, const Tensor& x);

// Max-shifted softmax over a rank-1 tensor. Entries where mask is false come
// out exactly zero and do not contribute to the normalizer. An empty mask
// vector means all entries present.
Tensor softmax(const Tensor& z, const std::vector<bool>& mask = {});

Tensor map_tanh(const Tensor& a);
Tensor map_tanh_grad(const Tensor& a);  // elementwise 1 - tanh(a)^2

double dot(const Tensor& a, const Tensor& b);
void axpy(double alpha, const Tensor& x, Tensor& y);  // y += alpha * x

// splitmix64: seedable, identical stream on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // standard normal, Box-Muller on two uniform draws
    double normal();

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace medfuse
