#include "medfuse/nn.hpp"

#include <algorithm>
#include <cmath>

namespace medfuse {

Tensor rnn_step(const Tensor& x, const Tensor& h_prev, const RnnCellParams& p) {
    RnnStepCache scratch;
    return rnn_step(x, h_prev, p, scratch);
}

Tensor rnn_step(const Tensor& x, const Tensor& h_prev, const RnnCellParams& p,
                RnnStepCache& cache) {
    if (x.rank() != 1 || x.extent(0) != p.input_size()) {
        throw std::invalid_argument("rnn_step: input shape " + x.shape_str() +
                                    " does not match W_x " + p.W_x.shape_str());
    }
    if (h_prev.rank() != 1 || h_prev.extent(0) != p.hidden_size()) {
        throw std::invalid_argument("rnn_step: hidden shape " + h_prev.shape_str() +
                                    " does not match W_h " + p.W_h.shape_str());
    }
    const std::size_t h = p.hidden_size();
    Tensor pre = matvec(p.W_x, x);
    Tensor rec = matvec(p.W_h, h_prev);
    for (std::size_t i = 0; i < h; ++i) pre[i] = std::tanh(pre[i] + rec[i] + p.b[i]);
    cache.x = x;
    cache.h_prev = h_prev;
    cache.h_new = pre;
    return pre;
}

void rnn_step_backward(const RnnStepCache& cache, const RnnCellParams& p, const Tensor& dh,
                       Tensor& dx, Tensor& dh_prev, RnnCellGrads& grads) {
    if (cache.h_new.size() == 0) throw std::invalid_argument("rnn_step_backward: missing cache");
    const std::size_t h = p.hidden_size();
    const std::size_t f = p.input_size();
    if (dh.rank() != 1 || dh.extent(0) != h) {
        throw std::invalid_argument("rnn_step_backward: dh shape " + dh.shape_str());
    }

    // dpre = dh * (1 - h_new^2)
    Tensor dpre({h});
    for (std::size_t i = 0; i < h; ++i) {
        dpre[i] = dh[i] * (1.0 - cache.h_new[i] * cache.h_new[i]);
    }

    if (dx.size() != f) dx = Tensor({f});
    if (dh_prev.size() != h) dh_prev = Tensor({h});
    for (std::size_t j = 0; j < f; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < h; ++i) acc += p.W_x.at(i, j) * dpre[i];
        dx[j] = acc;
    }
    for (std::size_t j = 0; j < h; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < h; ++i) acc += p.W_h.at(i, j) * dpre[i];
        dh_prev[j] = acc;
    }
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < f; ++j) grads.dW_x.at(i, j) += dpre[i] * cache.x[j];
        for (std::size_t j = 0; j < h; ++j) grads.dW_h.at(i, j) += dpre[i] * cache.h_prev[j];
        grads.db[i] += dpre[i];
    }
}

double ffn_score(const Tensor& e, const FfnParams& p) {
    FfnCache scratch;
    return ffn_score(e, p, scratch);
}

double ffn_score(const Tensor& e, const FfnParams& p, FfnCache& cache) {
    if (e.rank() != 1 || e.extent(0) != p.input_size()) {
        throw std::invalid_argument("ffn_score: input shape " + e.shape_str() +
                                    " does not match W1 " + p.W1.shape_str());
    }
    const std::size_t width = p.hidden_width();
    Tensor hidden = matvec(p.W1, e);
    for (std::size_t i = 0; i < width; ++i) hidden[i] = std::tanh(hidden[i] + p.b1[i]);
    double z = p.b2[0];
    for (std::size_t i = 0; i < width; ++i) z += p.W2.at(0, i) * hidden[i];
    cache.e = e;
    cache.hidden = hidden;
    return z;
}

void ffn_score_backward(const FfnCache& cache, const FfnParams& p, double dz, Tensor& de,
                        FfnGrads& grads) {
    if (cache.hidden.size() == 0) throw std::invalid_argument("ffn_score_backward: missing cache");
    const std::size_t width = p.hidden_width();
    const std::size_t n = p.input_size();
    grads.db2[0] += dz;
    for (std::size_t i = 0; i < width; ++i) grads.dW2.at(0, i) += dz * cache.hidden[i];

    for (std::size_t i = 0; i < width; ++i) {
        const double dhid = dz * p.W2.at(0, i);
        const double dpre = dhid * (1.0 - cache.hidden[i] * cache.hidden[i]);
        for (std::size_t j = 0; j < n; ++j) {
            grads.dW1.at(i, j) += dpre * cache.e[j];
            de[j] += p.W1.at(i, j) * dpre;
        }
        grads.db1[i] += dpre;
    }
}

double grad_check(const std::function<double(const std::vector<double>&)>& loss_fn,
                  const std::function<std::vector<double>(const std::vector<double>&)>& grad_fn,
                  std::vector<double> theta, const GradCheckOptions& opt) {
    if (opt.eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");
    const double base = loss_fn(theta);
    if (!std::isfinite(base)) throw std::runtime_error("grad_check: non-finite loss at theta");

    const std::vector<double> analytic = grad_fn(theta);
    if (analytic.size() != theta.size()) {
        throw std::invalid_argument("grad_check: gradient size does not match parameter size");
    }

    std::vector<std::size_t> coords;
    if (theta.size() <= opt.subsample_threshold) {
        coords.resize(theta.size());
        for (std::size_t i = 0; i < theta.size(); ++i) coords[i] = i;
    } else {
        Rng rng(opt.seed);
        for (std::size_t i = 0; i < opt.subsample_count; ++i) {
            coords.push_back(static_cast<std::size_t>(rng.next_below(theta.size())));
        }
    }

    double max_rel = 0.0;
    for (std::size_t c : coords) {
        const double saved = theta[c];
        theta[c] = saved + opt.eps;
        const double lp = loss_fn(theta);
        theta[c] = saved - opt.eps;
        const double lm = loss_fn(theta);
        theta[c] = saved;
        if (!std::isfinite(lp) || !std::isfinite(lm)) {
            throw std::runtime_error("grad_check: non-finite loss at perturbed theta");
        }
        const double numeric = (lp - lm) / (2.0 * opt.eps);
        const double a = analytic[c];
        const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace medfuse
