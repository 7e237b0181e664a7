#pragma once

#include "medfuse/data.hpp"
#include "medfuse/model.hpp"

namespace medfuse {

// Y_hat[j, t, :] = X[j, T_enc - 1, :] for all t. Requires E = D, F_enc = F_dec.
Tensor last_observed(const Tensor& x, std::size_t t_dec);

// Linear map from flattened encoder window (+ bias 1) to flattened decoder
// window, one weight matrix per target group.
struct RidgeModel {
    std::vector<Tensor> weights;  // per group: [(t_dec*f) x (in_dim + 1)], bias column last
    bool joint = false;
    double lambda = 0.0;
    std::size_t stations = 0;
    std::size_t t_enc = 0;
    std::size_t t_dec = 0;
    std::size_t features = 0;
};

// Normal equations (A^T A + lambda I) W^T = A^T B, solved by Cholesky; the
// bias column carries no penalty. joint mode concatenates all stations'
// features in both input and output; otherwise one independent model per
// station.
RidgeModel ridge_fit(const Dataset& data, bool joint, double lambda);

Tensor ridge_predict(const RidgeModel& model, const Tensor& x);

double ridge_evaluate(const RidgeModel& model, const Dataset& data);  // MSE in percent

void save_ridge(const std::string& path, const RidgeModel& model);
RidgeModel load_ridge(const std::string& path);

// The regular-RNN comparison models are fusion configs with E = D = 1; they
// reuse the network code path verbatim.
struct RegularRnnConfigs {
    std::vector<ModelConfig> per_station;  // one per station, own features only
    ModelConfig joint;                     // station-concatenated feature vector
};

RegularRnnConfigs regular_rnn_configs(const ModelConfig& base);

// Dataset views for the E = D = 1 baselines.
Dataset slice_station(const Dataset& data, std::size_t station);
Dataset concat_stations(const Dataset& data);

// Symmetric positive definite solve, used by ridge_fit. a is [n x n], b is
// [n x m]; returns x with a x = b.
Tensor cholesky_solve(const Tensor& a, const Tensor& b);

}  // namespace medfuse
