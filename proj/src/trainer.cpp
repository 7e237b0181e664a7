#include "medfuse/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>

namespace medfuse {

void TrainConfig::validate() const {
    if (learning_rate < 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be >= 0");
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (patience == 0) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0) {
        throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
    }
    if (encoder_dropout_prob < 0.0 || encoder_dropout_prob >= 1.0) {
        throw std::invalid_argument("TrainConfig: encoder_dropout_prob must be in [0, 1)");
    }
}

std::string param_checksum(const ParameterStore& params) {
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    params.for_each_array([&](const std::string&, const Tensor& t) {
        for (double v : t.flat()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            for (int i = 0; i < 8; ++i) {
                hash ^= (bits >> (8 * i)) & 0xFF;
                hash *= 0x100000001B3ULL;
            }
        }
    });
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

namespace {

double dataset_loss(const ParameterStore& params, const ModelConfig& cfg, const Dataset& data) {
    const std::vector<bool> mask = full_mask(cfg.encoders);
    double acc = 0.0;
    for (const SamplePair& sp : data.samples) {
        Forecast fc = forward(sp.x, params, cfg, mask, nullptr);
        acc += loss(fc.y_hat, sp.y);
    }
    return acc / static_cast<double>(data.samples.size());
}

double global_norm(const GradBuffer& grads) {
    double sq = 0.0;
    grads.for_each_array([&](const std::string&, const Tensor& t) {
        for (double v : t.flat()) sq += v * v;
    });
    return std::sqrt(sq);
}

}  // namespace

std::pair<ParameterStore, TrainReport> train(const Dataset& train_data, const Dataset& valid_data,
                                             const ModelConfig& cfg, const TrainConfig& tcfg) {
    cfg.validate();
    tcfg.validate();
    if (train_data.samples.empty()) throw std::invalid_argument("train: empty training set");
    if (valid_data.samples.empty()) throw std::invalid_argument("train: empty validation set");

    const auto t_start = std::chrono::steady_clock::now();
    ParameterStore params = init_params(cfg, tcfg.seed);
    GradBuffer velocity(cfg);
    GradBuffer grads(cfg);
    Rng rng(tcfg.seed ^ 0xD1B54A32D192ED03ULL);

    const std::size_t n = train_data.samples.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    TrainReport report;
    ParameterStore best_params = params;
    double best_valid = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
        // Fisher-Yates with the run's seeded generator
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        for (std::size_t batch_start = 0, batch_no = 0; batch_start < n;
             batch_start += tcfg.batch_size, ++batch_no) {
            const std::size_t batch_end = std::min(batch_start + tcfg.batch_size, n);
            const std::size_t batch_n = batch_end - batch_start;

            grads.for_each_array([](const std::string&, Tensor& t) {
                std::fill(t.flat().begin(), t.flat().end(), 0.0);
            });

            double batch_loss = 0.0;
            for (std::size_t s = batch_start; s < batch_end; ++s) {
                const SamplePair& sp = train_data.samples[order[s]];
                std::vector<bool> mask = full_mask(cfg.encoders);
                if (tcfg.encoder_dropout_prob > 0.0) {
                    std::size_t present = cfg.encoders;
                    for (std::size_t i = 0; i < cfg.encoders; ++i) {
                        if (present > 1 && rng.next_double() < tcfg.encoder_dropout_prob) {
                            mask[i] = false;
                            --present;
                        }
                    }
                }
                BackwardResult br = backward(sp.x, sp.y, params, cfg, mask, grads);
                if (!std::isfinite(br.loss_value)) {
                    throw std::runtime_error("train: non-finite loss at epoch " +
                                             std::to_string(epoch) + ", batch " +
                                             std::to_string(batch_no));
                }
                batch_loss += br.loss_value;
            }
            epoch_loss += batch_loss;

            const double inv_n = 1.0 / static_cast<double>(batch_n);
            grads.for_each_array([&](const std::string&, Tensor& t) { t *= inv_n; });
            const double norm = global_norm(grads);
            if (norm > tcfg.grad_clip_norm) {
                const double shrink = tcfg.grad_clip_norm / norm;
                grads.for_each_array([&](const std::string&, Tensor& t) { t *= shrink; });
            }

            // v <- momentum v - lr g ; params <- params + v
            auto v_it = [&](auto&& fn) { velocity.for_each_array(fn); };
            std::vector<Tensor*> gs, ps;
            grads.for_each_array([&](const std::string&, Tensor& t) { gs.push_back(&t); });
            params.for_each_array([&](const std::string&, Tensor& t) { ps.push_back(&t); });
            std::size_t idx = 0;
            v_it([&](const std::string&, Tensor& v) {
                Tensor& g = *gs[idx];
                Tensor& p = *ps[idx];
                for (std::size_t i = 0; i < v.size(); ++i) {
                    v[i] = tcfg.momentum * v[i] - tcfg.learning_rate * g[i];
                    p[i] += v[i];
                }
                ++idx;
            });
        }
        report.train_losses.push_back(epoch_loss / static_cast<double>(n));

        const double valid_loss = dataset_loss(params, cfg, valid_data);
        report.valid_losses.push_back(valid_loss);
        if (valid_loss < best_valid) {
            best_valid = valid_loss;
            best_params = params;
            report.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= tcfg.patience) {
            break;
        }
    }

    report.best_valid_loss = best_valid;
    report.param_checksum = param_checksum(best_params);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(best_params), std::move(report)};
}

double evaluate(const ParameterStore& params, const ModelConfig& cfg, const Dataset& data) {
    if (data.samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
    return 100.0 * dataset_loss(params, cfg, data);
}

}  // namespace medfuse
