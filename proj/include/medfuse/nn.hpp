#pragma once

#include <functional>

#include "medfuse/tensor.hpp"

namespace medfuse {

// Vanilla tanh cell: h = tanh(W_x x + W_h h_prev + b).
struct RnnCellParams {
    Tensor W_x;  // [h x f]
    Tensor W_h;  // [h x h]
    Tensor b;    // [h]

    std::size_t hidden_size() const { return b.extent(0); }
    std::size_t input_size() const { return W_x.extent(1); }
};

struct RnnCellGrads {
    Tensor dW_x;
    Tensor dW_h;
    Tensor db;

    explicit RnnCellGrads(const RnnCellParams& p)
        : dW_x(p.W_x.shape()), dW_h(p.W_h.shape()), db(p.b.shape()) {}
};

// One hidden tanh layer, scalar output: z = W2 tanh(W1 e + b1) + b2.
struct FfnParams {
    Tensor W1;  // [p x h]
    Tensor b1;  // [p]
    Tensor W2;  // [1 x p]
    Tensor b2;  // [1]

    std::size_t hidden_width() const { return b1.extent(0); }
    std::size_t input_size() const { return W1.extent(1); }
};

struct FfnGrads {
    Tensor dW1;
    Tensor db1;
    Tensor dW2;
    Tensor db2;

    explicit FfnGrads(const FfnParams& p)
        : dW1(p.W1.shape()), db1(p.b1.shape()), dW2(p.W2.shape()), db2(p.b2.shape()) {}
};

// Forward values kept for the backward pass of one cell step.
struct RnnStepCache {
    Tensor x;
    Tensor h_prev;
    Tensor h_new;  // post-tanh output; 1 - h^2 is the activation derivative
};

Tensor rnn_step(const Tensor& x, const Tensor& h_prev, const RnnCellParams& p);
Tensor rnn_step(const Tensor& x, const Tensor& h_prev, const RnnCellParams& p,
                RnnStepCache& cache);

// Accumulates (+=) into grads; returns dx and dh_prev through out-parameters.
void rnn_step_backward(const RnnStepCache& cache, const RnnCellParams& p, const Tensor& dh,
                       Tensor& dx, Tensor& dh_prev, RnnCellGrads& grads);

struct FfnCache {
    Tensor e;
    Tensor hidden;  // tanh(W1 e + b1)
};

double ffn_score(const Tensor& e, const FfnParams& p);
double ffn_score(const Tensor& e, const FfnParams& p, FfnCache& cache);

// Accumulates into grads; de accumulates the gradient w.r.t. the input.
void ffn_score_backward(const FfnCache& cache, const FfnParams& p, double dz, Tensor& de,
                        FfnGrads& grads);

// Central finite differences against an analytic gradient.
//
// loss_fn(theta) evaluates the loss at a flat parameter vector; grad_fn(theta)
// returns the analytic gradient at theta. Coordinates are swept exhaustively
// below `subsample_threshold`, otherwise a seeded random subsample of
// `subsample_count` coordinates is checked. Returns the max of
// |a - n| / max(1e-8, |a| + |n|).
struct GradCheckOptions {
    double eps = 1e-5;
    std::size_t subsample_threshold = 5000;
    std::size_t subsample_count = 200;
    std::uint64_t seed = 0;
};

double grad_check(const std::function<double(const std::vector<double>&)>& loss_fn,
                  const std::function<std::vector<double>(const std::vector<double>&)>& grad_fn,
                  std::vector<double> theta, const GradCheckOptions& opt = {});

}  // namespace medfuse
