#include "medfuse/tensor.hpp"

#include <cmath>

namespace medfuse {

void Tensor::check_shape(const std::vector<std::size_t>& shape) {
    if (shape.empty() || shape.size() > 3) {
        throw std::invalid_argument("Tensor: rank must be 1..3, got " +
                                    std::to_string(shape.size()));
    }
    for (std::size_t e : shape) {
        if (e == 0) throw std::invalid_argument("Tensor: zero extent in shape");
    }
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (!same_shape(other)) {
        throw std::invalid_argument("Tensor +=: shape mismatch " + shape_str() + " vs " +
                                    other.shape_str());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
        throw std::invalid_argument("matmul: incompatible shapes " + a.shape_str() + " and " +
                                    b.shape_str());
    }
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
            c.at(i, j) = acc;
        }
    }
    return c;
}

Tensor matvec(const Tensor& w, const Tensor& x) {
    if (w.rank() != 2 || x.rank() != 1 || w.extent(1) != x.extent(0)) {
        throw std::invalid_argument("matvec: incompatible shapes " + w.shape_str() + " and " +
                                    x.shape_str());
    }
    const std::size_t m = w.extent(0), n = w.extent(1);
    Tensor y({m});
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += w.at(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

Tensor softmax(const Tensor& z, const std::vector<bool>& mask) {
    if (z.rank() != 1) throw std::invalid_argument("softmax: rank-1 input required");
    const std::size_t k = z.size();
    if (!mask.empty() && mask.size() != k) {
        throw std::invalid_argument("softmax: mask length does not match input");
    }
    auto present = [&](std::size_t i) { return mask.empty() || mask[i]; };

    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i)
        if (present(i) && z[i] > zmax) zmax = z[i];
    if (!std::isfinite(zmax)) throw std::invalid_argument("softmax: empty attention support");

    Tensor out({k});
    double denom = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (present(i)) {
            out[i] = std::exp(z[i] - zmax);
            denom += out[i];
        }
    }
    for (std::size_t i = 0; i < k; ++i)
        if (present(i)) out[i] /= denom;
    return out;
}

Tensor map_tanh(const Tensor& a) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::tanh(a[i]);
    return out;
}

Tensor map_tanh_grad(const Tensor& a) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = std::tanh(a[i]);
        out[i] = 1.0 - t * t;
    }
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("dot: shape mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, const Tensor& x, Tensor& y) {
    if (!x.same_shape(y)) {
        throw std::invalid_argument("axpy: shape mismatch " + x.shape_str() + " vs " +
                                    y.shape_str());
    }
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

}  // namespace medfuse
