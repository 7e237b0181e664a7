#include "medfuse/model.hpp"

#include <cmath>

namespace medfuse {

void ModelConfig::validate() const {
    auto req = [](std::size_t v, const char* name) {
        if (v == 0) throw std::invalid_argument(std::string("ModelConfig: ") + name + " must be >= 1");
    };
    req(encoders, "encoders");
    req(decoders, "decoders");
    req(t_enc, "t_enc");
    req(t_dec, "t_dec");
    req(f_enc, "f_enc");
    req(f_dec, "f_dec");
    req(hidden, "hidden");
    req(att_hidden, "att_hidden");
}

ParameterStore::ParameterStore(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t h = cfg.hidden;
    enc.reserve(cfg.encoders);
    for (std::size_t i = 0; i < cfg.encoders; ++i) {
        enc.push_back({Tensor({h, cfg.f_enc}), Tensor({h, h}), Tensor({h})});
    }
    const std::size_t n_att = cfg.share_attention ? 1 : cfg.decoders;
    att.reserve(n_att);
    for (std::size_t j = 0; j < n_att; ++j) {
        att.push_back({Tensor({cfg.att_hidden, h}), Tensor({cfg.att_hidden}),
                       Tensor({std::size_t{1}, cfg.att_hidden}), Tensor({std::size_t{1}})});
    }
    dec.reserve(cfg.decoders);
    for (std::size_t j = 0; j < cfg.decoders; ++j) {
        dec.push_back({{Tensor({h, cfg.f_dec}), Tensor({h, h}), Tensor({h})},
                       Tensor({cfg.f_dec, h}), Tensor({cfg.f_dec})});
    }
}

std::size_t ParameterStore::total_size() const {
    std::size_t n = 0;
    for_each_array([&](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
}

std::vector<double> ParameterStore::flatten() const {
    std::vector<double> flat;
    flat.reserve(total_size());
    for_each_array([&](const std::string&, const Tensor& t) {
        flat.insert(flat.end(), t.flat().begin(), t.flat().end());
    });
    return flat;
}

void ParameterStore::unflatten(const std::vector<double>& flat) {
    std::size_t pos = 0;
    for_each_array([&](const std::string&, Tensor& t) {
        if (pos + t.size() > flat.size()) {
            throw std::invalid_argument("unflatten: vector too short");
        }
        std::copy(flat.begin() + pos, flat.begin() + pos + t.size(), t.flat().begin());
        pos += t.size();
    });
    if (pos != flat.size()) throw std::invalid_argument("unflatten: vector length mismatch");
}

ParameterStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
    ParameterStore params(cfg);
    Rng rng(seed);
    params.for_each_array([&](const std::string&, Tensor& t) {
        if (t.rank() == 2) {
            const double fan_out = static_cast<double>(t.extent(0));
            const double fan_in = static_cast<double>(t.extent(1));
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
        }
        // rank-1 arrays are biases, left at zero
    });
    return params;
}

std::vector<bool> full_mask(std::size_t e) { return std::vector<bool>(e, true); }

namespace {

void check_input(const Tensor& x, const ModelConfig& cfg) {
    if (x.rank() != 3 || x.extent(0) != cfg.encoders || x.extent(1) != cfg.t_enc ||
        x.extent(2) != cfg.f_enc) {
        throw std::invalid_argument("input tensor " + x.shape_str() + " does not match config [" +
                                    std::to_string(cfg.encoders) + "x" + std::to_string(cfg.t_enc) +
                                    "x" + std::to_string(cfg.f_enc) + "]");
    }
    if (!x.all_finite()) throw std::invalid_argument("input tensor contains non-finite values");
}

Tensor input_row(const Tensor& x, std::size_t station, std::size_t t) {
    const std::size_t f = x.extent(2);
    Tensor row({f});
    for (std::size_t k = 0; k < f; ++k) row[k] = x.at(station, t, k);
    return row;
}

std::size_t att_index(const ModelConfig& cfg, std::size_t j) {
    return cfg.share_attention ? 0 : j;
}

std::size_t count_present(const std::vector<bool>& mask) {
    std::size_t n = 0;
    for (bool m : mask) n += m ? 1 : 0;
    return n;
}

}  // namespace

EncoderState encode(const Tensor& x, const ParameterStore& params, const ModelConfig& cfg) {
    check_input(x, cfg);
    EncoderState state;
    state.e.reserve(cfg.encoders);
    for (std::size_t i = 0; i < cfg.encoders; ++i) {
        Tensor h({cfg.hidden});
        for (std::size_t t = 0; t < cfg.t_enc; ++t) {
            h = rnn_step(input_row(x, i, t), h, params.enc[i]);
        }
        state.e.push_back(std::move(h));
    }
    return state;
}

AttendResult attend(const EncoderState& state, std::size_t j, const ParameterStore& params,
                    const ModelConfig& cfg, const std::vector<bool>& mask) {
    const std::size_t e_count = cfg.encoders;
    if (mask.size() != e_count) throw std::invalid_argument("attend: mask length mismatch");
    const std::size_t present = count_present(mask);
    if (present == 0) throw std::invalid_argument("attend: empty attention support");

    AttendResult res;
    res.z_row = Tensor({e_count});
    const FfnParams& scorer = params.att[att_index(cfg, j)];
    for (std::size_t i = 0; i < e_count; ++i) {
        if (mask[i]) res.z_row[i] = ffn_score(state.e[i], scorer);
    }
    res.w_row = softmax(res.z_row, mask);

    const double scale = cfg.mean_scale ? 1.0 / static_cast<double>(present) : 1.0;
    res.c = Tensor({cfg.hidden});
    for (std::size_t i = 0; i < e_count; ++i) {
        if (mask[i]) axpy(scale * res.w_row[i], state.e[i], res.c);
    }
    return res;
}

Tensor decode(const Tensor& c, std::size_t j, const ParameterStore& params,
              const ModelConfig& cfg, const Tensor* teacher) {
    if (c.rank() != 1 || c.extent(0) != cfg.hidden) {
        throw std::invalid_argument("decode: context shape " + c.shape_str());
    }
    const DecoderParams& dp = params.dec[j];
    Tensor out({cfg.t_dec, cfg.f_dec});
    Tensor h = c;
    Tensor in({cfg.f_dec});  // step 1 input is the zero vector
    for (std::size_t t = 0; t < cfg.t_dec; ++t) {
        if (t > 0) {
            for (std::size_t k = 0; k < cfg.f_dec; ++k) {
                in[k] = teacher ? teacher->at(j, t - 1, k) : out.at(t - 1, k);
            }
        }
        h = rnn_step(in, h, dp.cell);
        Tensor y = matvec(dp.W_out, h);
        for (std::size_t k = 0; k < cfg.f_dec; ++k) out.at(t, k) = y[k] + dp.b_out[k];
    }
    return out;
}

Forecast forward(const Tensor& x, const ParameterStore& params, const ModelConfig& cfg,
                 const std::vector<bool>& mask, const Tensor* teacher) {
    EncoderState state = encode(x, params, cfg);
    Forecast fc;
    fc.y_hat = Tensor({cfg.decoders, cfg.t_dec, cfg.f_dec});
    fc.trace.z = Tensor({cfg.decoders, cfg.encoders});
    fc.trace.w = Tensor({cfg.decoders, cfg.encoders});
    fc.trace.mask = mask;
    for (std::size_t j = 0; j < cfg.decoders; ++j) {
        AttendResult att = attend(state, j, params, cfg, mask);
        Tensor y = decode(att.c, j, params, cfg, teacher);
        for (std::size_t i = 0; i < cfg.encoders; ++i) {
            fc.trace.z.at(j, i) = att.z_row[i];
            fc.trace.w.at(j, i) = att.w_row[i];
        }
        for (std::size_t t = 0; t < cfg.t_dec; ++t) {
            for (std::size_t k = 0; k < cfg.f_dec; ++k) fc.y_hat.at(j, t, k) = y.at(t, k);
        }
    }
    return fc;
}

double loss(const Tensor& y_hat, const Tensor& y) {
    if (!y_hat.same_shape(y)) {
        throw std::invalid_argument("loss: shape mismatch " + y_hat.shape_str() + " vs " +
                                    y.shape_str());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y_hat[i] - y[i];
        acc += r * r;
    }
    return acc / static_cast<double>(y.size());
}

BackwardResult backward(const Tensor& x, const Tensor& y, const ParameterStore& params,
                        const ModelConfig& cfg, const std::vector<bool>& mask, GradBuffer& grads) {
    check_input(x, cfg);
    if (y.rank() != 3 || y.extent(0) != cfg.decoders || y.extent(1) != cfg.t_dec ||
        y.extent(2) != cfg.f_dec) {
        throw std::invalid_argument("backward: target tensor " + y.shape_str() +
                                    " does not match config");
    }
    const std::size_t e_count = cfg.encoders;
    const std::size_t t_enc = cfg.t_enc;
    const std::size_t t_dec = cfg.t_dec;
    const std::size_t f_dec = cfg.f_dec;
    const std::size_t present = count_present(mask);
    if (present == 0) throw std::invalid_argument("backward: empty attention support");
    const bool teacher = cfg.teacher_forcing;
    const double scale = cfg.mean_scale ? 1.0 / static_cast<double>(present) : 1.0;

    // --- forward with caches ---
    std::vector<std::vector<RnnStepCache>> enc_caches(e_count);
    EncoderState state;
    state.e.reserve(e_count);
    for (std::size_t i = 0; i < e_count; ++i) {
        enc_caches[i].resize(t_enc);
        Tensor h({cfg.hidden});
        for (std::size_t t = 0; t < t_enc; ++t) {
            h = rnn_step(input_row(x, i, t), h, params.enc[i], enc_caches[i][t]);
        }
        state.e.push_back(std::move(h));
    }

    BackwardResult res;
    res.forecast.y_hat = Tensor({cfg.decoders, t_dec, f_dec});
    res.forecast.trace.z = Tensor({cfg.decoders, e_count});
    res.forecast.trace.w = Tensor({cfg.decoders, e_count});
    res.forecast.trace.mask = mask;

    std::vector<std::vector<FfnCache>> att_caches(cfg.decoders, std::vector<FfnCache>(e_count));
    std::vector<Tensor> w_rows(cfg.decoders);
    std::vector<std::vector<RnnStepCache>> dec_caches(cfg.decoders);
    std::vector<std::vector<Tensor>> dec_hidden(cfg.decoders);  // h_1..h_T per decoder

    for (std::size_t j = 0; j < cfg.decoders; ++j) {
        const FfnParams& scorer = params.att[att_index(cfg, j)];
        Tensor z_row({e_count});
        for (std::size_t i = 0; i < e_count; ++i) {
            if (mask[i]) z_row[i] = ffn_score(state.e[i], scorer, att_caches[j][i]);
        }
        Tensor w_row = softmax(z_row, mask);
        Tensor c({cfg.hidden});
        for (std::size_t i = 0; i < e_count; ++i) {
            if (mask[i]) axpy(scale * w_row[i], state.e[i], c);
        }
        for (std::size_t i = 0; i < e_count; ++i) {
            res.forecast.trace.z.at(j, i) = z_row[i];
            res.forecast.trace.w.at(j, i) = w_row[i];
        }
        w_rows[j] = std::move(w_row);

        const DecoderParams& dp = params.dec[j];
        dec_caches[j].resize(t_dec);
        dec_hidden[j].reserve(t_dec);
        Tensor h = c;
        Tensor in({f_dec});
        for (std::size_t t = 0; t < t_dec; ++t) {
            if (t > 0) {
                for (std::size_t k = 0; k < f_dec; ++k) {
                    in[k] = teacher ? y.at(j, t - 1, k) : res.forecast.y_hat.at(j, t - 1, k);
                }
            }
            h = rnn_step(in, h, dp.cell, dec_caches[j][t]);
            Tensor out = matvec(dp.W_out, h);
            for (std::size_t k = 0; k < f_dec; ++k) {
                res.forecast.y_hat.at(j, t, k) = out[k] + dp.b_out[k];
            }
            dec_hidden[j].push_back(h);
        }
    }
    res.loss_value = loss(res.forecast.y_hat, y);

    // --- backward ---
    const double dcoef = 2.0 / static_cast<double>(y.size());
    std::vector<Tensor> de(e_count, Tensor({cfg.hidden}));

    for (std::size_t j = 0; j < cfg.decoders; ++j) {
        const DecoderParams& dp = params.dec[j];
        const std::size_t att_j = att_index(cfg, j);

        // loss gradient per output row, grown by fed-back contributions
        std::vector<Tensor> dy(t_dec, Tensor({f_dec}));
        for (std::size_t t = 0; t < t_dec; ++t) {
            for (std::size_t k = 0; k < f_dec; ++k) {
                dy[t][k] = dcoef * (res.forecast.y_hat.at(j, t, k) - y.at(j, t, k));
            }
        }

        RnnCellGrads cell_grads(dp.cell);
        Tensor carry({cfg.hidden});
        Tensor dx({f_dec}), dh_prev({cfg.hidden});
        for (std::size_t t = t_dec; t-- > 0;) {
            // output projection
            const Tensor& h = dec_hidden[j][t];
            Tensor dh = carry;
            for (std::size_t k = 0; k < f_dec; ++k) {
                grads.dec[j].b_out[k] += dy[t][k];
                for (std::size_t m = 0; m < cfg.hidden; ++m) {
                    grads.dec[j].W_out.at(k, m) += dy[t][k] * h[m];
                    dh[m] += dp.W_out.at(k, m) * dy[t][k];
                }
            }
            rnn_step_backward(dec_caches[j][t], dp.cell, dh, dx, dh_prev, cell_grads);
            carry = dh_prev;
            if (t > 0 && !teacher) {
                for (std::size_t k = 0; k < f_dec; ++k) dy[t - 1][k] += dx[k];
            }
        }
        grads.dec[j].cell.W_x += cell_grads.dW_x;
        grads.dec[j].cell.W_h += cell_grads.dW_h;
        grads.dec[j].cell.b += cell_grads.db;

        // attention: dc = carry (gradient w.r.t. the decoder's initial hidden state)
        const Tensor& dc = carry;
        const Tensor& w_row = w_rows[j];
        Tensor dw({e_count});
        for (std::size_t i = 0; i < e_count; ++i) {
            if (!mask[i]) continue;
            dw[i] = scale * dot(dc, state.e[i]);
            axpy(scale * w_row[i], dc, de[i]);
        }
        double wsum = 0.0;
        for (std::size_t i = 0; i < e_count; ++i) {
            if (mask[i]) wsum += w_row[i] * dw[i];
        }
        FfnGrads ffn_grads(params.att[att_j]);
        for (std::size_t i = 0; i < e_count; ++i) {
            if (!mask[i]) continue;
            const double dz = w_row[i] * (dw[i] - wsum);
            ffn_score_backward(att_caches[j][i], params.att[att_j], dz, de[i], ffn_grads);
        }
        grads.att[att_j].W1 += ffn_grads.dW1;
        grads.att[att_j].b1 += ffn_grads.db1;
        grads.att[att_j].W2 += ffn_grads.dW2;
        grads.att[att_j].b2 += ffn_grads.db2;
    }

    // encoders: BPTT from de[i]; skipped entirely for masked-out stations
    for (std::size_t i = 0; i < e_count; ++i) {
        if (!mask[i]) continue;
        RnnCellGrads cell_grads(params.enc[i]);
        Tensor carry = de[i];
        Tensor dx({cfg.f_enc}), dh_prev({cfg.hidden});
        for (std::size_t t = t_enc; t-- > 0;) {
            rnn_step_backward(enc_caches[i][t], params.enc[i], carry, dx, dh_prev, cell_grads);
            carry = dh_prev;
        }
        grads.enc[i].W_x += cell_grads.dW_x;
        grads.enc[i].W_h += cell_grads.dW_h;
        grads.enc[i].b += cell_grads.db;
    }

    return res;
}

}  // namespace medfuse
