#pragma once

#include "medfuse/data.hpp"
#include "medfuse/model.hpp"

namespace medfuse {

struct TrainConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 200;
    double grad_clip_norm = 5.0;
    std::size_t patience = 20;
    std::uint64_t seed = 1;
    double encoder_dropout_prob = 0.0;

    void validate() const;
};

struct TrainReport {
    std::vector<double> train_losses;   // per epoch
    std::vector<double> valid_losses;   // per epoch, free-running
    std::size_t best_epoch = 0;         // index into the loss vectors
    double best_valid_loss = 0.0;
    double wall_seconds = 0.0;
    std::string param_checksum;         // FNV-1a over the final parameter bytes
};

// Mini-batch SGD with momentum and global-norm gradient clipping. Returns the
// parameters of the best validation epoch. Fully deterministic given
// (data, cfg, tcfg).
std::pair<ParameterStore, TrainReport> train(const Dataset& train_data, const Dataset& valid_data,
                                             const ModelConfig& cfg, const TrainConfig& tcfg);

// 100 x mean squared error, free-running decoding with the full mask.
double evaluate(const ParameterStore& params, const ModelConfig& cfg, const Dataset& data);

std::string param_checksum(const ParameterStore& params);

}  // namespace medfuse
