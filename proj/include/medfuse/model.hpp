#pragma once

#include <optional>
#include <string>
#include <vector>

#include "medfuse/nn.hpp"
#include "medfuse/tensor.hpp"

namespace medfuse {

struct ModelConfig {
    std::size_t encoders = 1;       // E
    std::size_t decoders = 1;       // D
    std::size_t t_enc = 1;          // encoder steps
    std::size_t t_dec = 1;          // decoder steps
    std::size_t f_enc = 1;          // encoder features
    std::size_t f_dec = 1;          // decoder features
    std::size_t hidden = 32;        // dim(e_i) = dim(c_j)
    std::size_t att_hidden = 16;    // attention network width
    bool mean_scale = true;         // apply the 1/E_present prefactor to the weighted sum
    bool share_attention = false;   // one scorer for all decoders vs one per decoder
    bool teacher_forcing = true;    // feed ground truth to decoders during training

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct DecoderParams {
    RnnCellParams cell;
    Tensor W_out;  // [f_dec x hidden]
    Tensor b_out;  // [f_dec]
};

// All trainables, with a deterministic global array ordering:
// enc0.W_x, enc0.W_h, enc0.b, ..., att0.W1, ..., dec0.W_x, ..., dec0.W_out, dec0.b_out.
class ParameterStore {
public:
    ParameterStore() = default;
    ParameterStore(const ModelConfig& cfg);  // zero-initialized, correct shapes

    std::vector<RnnCellParams> enc;
    std::vector<FfnParams> att;  // size 1 when share_attention
    std::vector<DecoderParams> dec;

    std::size_t total_size() const;

    template <typename Fn>
    void for_each_array(Fn&& fn) {
        for (std::size_t i = 0; i < enc.size(); ++i) {
            const std::string p = "enc" + std::to_string(i) + ".";
            fn(p + "W_x", enc[i].W_x);
            fn(p + "W_h", enc[i].W_h);
            fn(p + "b", enc[i].b);
        }
        for (std::size_t j = 0; j < att.size(); ++j) {
            const std::string p = "att" + std::to_string(j) + ".";
            fn(p + "W1", att[j].W1);
            fn(p + "b1", att[j].b1);
            fn(p + "W2", att[j].W2);
            fn(p + "b2", att[j].b2);
        }
        for (std::size_t j = 0; j < dec.size(); ++j) {
            const std::string p = "dec" + std::to_string(j) + ".";
            fn(p + "W_x", dec[j].cell.W_x);
            fn(p + "W_h", dec[j].cell.W_h);
            fn(p + "b", dec[j].cell.b);
            fn(p + "W_out", dec[j].W_out);
            fn(p + "b_out", dec[j].b_out);
        }
    }

    template <typename Fn>
    void for_each_array(Fn&& fn) const {
        const_cast<ParameterStore*>(this)->for_each_array(
            [&](const std::string& name, Tensor& t) { fn(name, static_cast<const Tensor&>(t)); });
    }

    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
};

// Gradients, shape-congruent with a ParameterStore.
using GradBuffer = ParameterStore;

struct EncoderState {
    std::vector<Tensor> e;  // E vectors of size hidden
};

struct AttentionTrace {
    Tensor z;                // [D x E] raw scores (0 where masked out)
    Tensor w;                // [D x E] weights, each row on the simplex
    std::vector<bool> mask;  // present encoders
};

struct Forecast {
    Tensor y_hat;  // [D x t_dec x f_dec]
    AttentionTrace trace;
};

// Xavier-uniform weights, zero biases, deterministic given seed.
ParameterStore init_params(const ModelConfig& cfg, std::uint64_t seed);

std::vector<bool> full_mask(std::size_t e);

struct ForwardCache;  // opaque; defined in model.cpp

EncoderState encode(const Tensor& x, const ParameterStore& params, const ModelConfig& cfg);

// Returns c_j plus the raw-score and weight rows for decoder j.
struct AttendResult {
    Tensor c;      // [hidden]
    Tensor z_row;  // [E]
    Tensor w_row;  // [E]
};
AttendResult attend(const EncoderState& state, std::size_t j, const ParameterStore& params,
                    const ModelConfig& cfg, const std::vector<bool>& mask);

Tensor decode(const Tensor& c, std::size_t j, const ParameterStore& params,
              const ModelConfig& cfg, const Tensor* teacher = nullptr);

// teacher, when given, has shape [D x t_dec x f_dec] and supplies decoder
// inputs for t >= 2 instead of fed-back outputs.
Forecast forward(const Tensor& x, const ParameterStore& params, const ModelConfig& cfg,
                 const std::vector<bool>& mask, const Tensor* teacher = nullptr);

// Mean over all (j, t, f) of squared residual.
double loss(const Tensor& y_hat, const Tensor& y);

struct BackwardResult {
    double loss_value = 0.0;
    Forecast forecast;
};

// Accumulates exact gradients of loss(forward(x), y) into grads, including the
// paths through the softmax and, in free-running mode, the fed-back outputs.
BackwardResult backward(const Tensor& x, const Tensor& y, const ParameterStore& params,
                        const ModelConfig& cfg, const std::vector<bool>& mask, GradBuffer& grads);

}  // namespace medfuse
