#include "medfuse/baselines.hpp"

#include <cmath>

#include "medfuse/checkpoint.hpp"

namespace medfuse {

Tensor last_observed(const Tensor& x, std::size_t t_dec) {
    if (x.rank() != 3) throw std::invalid_argument("last_observed: rank-3 input required");
    const std::size_t e = x.extent(0), t_enc = x.extent(1), f = x.extent(2);
    Tensor out({e, t_dec, f});
    for (std::size_t j = 0; j < e; ++j) {
        for (std::size_t t = 0; t < t_dec; ++t) {
            for (std::size_t k = 0; k < f; ++k) out.at(j, t, k) = x.at(j, t_enc - 1, k);
        }
    }
    return out;
}

Tensor cholesky_solve(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || a.extent(0) != a.extent(1) || b.rank() != 2 ||
        b.extent(0) != a.extent(0)) {
        throw std::invalid_argument("cholesky_solve: incompatible shapes " + a.shape_str() +
                                    " and " + b.shape_str());
    }
    const std::size_t n = a.extent(0), m = b.extent(1);
    Tensor l({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = a.at(i, j);
            for (std::size_t k = 0; k < j; ++k) acc -= l.at(i, k) * l.at(j, k);
            if (i == j) {
                if (acc <= 0.0) {
                    throw std::runtime_error(
                        "cholesky_solve: matrix not positive definite; for ridge systems use "
                        "lambda > 0");
                }
                l.at(i, i) = std::sqrt(acc);
            } else {
                l.at(i, j) = acc / l.at(j, j);
            }
        }
    }
    // forward then backward substitution, column by column
    Tensor x({n, m});
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = b.at(i, c);
            for (std::size_t k = 0; k < i; ++k) acc -= l.at(i, k) * x.at(k, c);
            x.at(i, c) = acc / l.at(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double acc = x.at(i, c);
            for (std::size_t k = i + 1; k < n; ++k) acc -= l.at(k, i) * x.at(k, c);
            x.at(i, c) = acc / l.at(i, i);
        }
    }
    return x;
}

namespace {

void flatten_group(const Tensor& x, std::size_t station_begin, std::size_t station_end,
                   std::vector<double>& out) {
    for (std::size_t i = station_begin; i < station_end; ++i) {
        for (std::size_t t = 0; t < x.extent(1); ++t) {
            for (std::size_t k = 0; k < x.extent(2); ++k) out.push_back(x.at(i, t, k));
        }
    }
}

}  // namespace

RidgeModel ridge_fit(const Dataset& data, bool joint, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("ridge_fit: lambda must be >= 0");
    if (data.samples.empty()) throw std::invalid_argument("ridge_fit: empty dataset");
    const Tensor& x0 = data.samples[0].x;
    const Tensor& y0 = data.samples[0].y;
    const std::size_t stations = x0.extent(0);
    const std::size_t t_enc = x0.extent(1), t_dec = y0.extent(1), f = x0.extent(2);
    const std::size_t n = data.samples.size();

    RidgeModel model;
    model.joint = joint;
    model.lambda = lambda;
    model.stations = stations;
    model.t_enc = t_enc;
    model.t_dec = t_dec;
    model.features = f;

    const std::size_t groups = joint ? 1 : stations;
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t s_begin = joint ? 0 : g;
        const std::size_t s_end = joint ? stations : g + 1;
        const std::size_t in_dim = (s_end - s_begin) * t_enc * f + 1;
        const std::size_t out_dim = (s_end - s_begin) * t_dec * f;

        Tensor design({n, in_dim});
        Tensor target({n, out_dim});
        for (std::size_t s = 0; s < n; ++s) {
            std::vector<double> row;
            row.reserve(in_dim);
            flatten_group(data.samples[s].x, s_begin, s_end, row);
            row.push_back(1.0);
            for (std::size_t c = 0; c < in_dim; ++c) design.at(s, c) = row[c];
            std::vector<double> trow;
            trow.reserve(out_dim);
            flatten_group(data.samples[s].y, s_begin, s_end, trow);
            for (std::size_t c = 0; c < out_dim; ++c) target.at(s, c) = trow[c];
        }

        Tensor gram({in_dim, in_dim});
        for (std::size_t i = 0; i < in_dim; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double acc = 0.0;
                for (std::size_t s = 0; s < n; ++s) acc += design.at(s, i) * design.at(s, j);
                gram.at(i, j) = acc;
                gram.at(j, i) = acc;
            }
        }
        // no penalty on the bias column (last)
        for (std::size_t i = 0; i + 1 < in_dim; ++i) gram.at(i, i) += lambda;

        Tensor rhs({in_dim, out_dim});
        for (std::size_t i = 0; i < in_dim; ++i) {
            for (std::size_t c = 0; c < out_dim; ++c) {
                double acc = 0.0;
                for (std::size_t s = 0; s < n; ++s) acc += design.at(s, i) * target.at(s, c);
                rhs.at(i, c) = acc;
            }
        }

        Tensor wt = cholesky_solve(gram, rhs);  // [in_dim x out_dim]
        Tensor w({out_dim, in_dim});
        for (std::size_t r = 0; r < out_dim; ++r) {
            for (std::size_t c = 0; c < in_dim; ++c) w.at(r, c) = wt.at(c, r);
        }
        model.weights.push_back(std::move(w));
    }
    return model;
}

Tensor ridge_predict(const RidgeModel& model, const Tensor& x) {
    if (x.rank() != 3 || x.extent(0) != model.stations || x.extent(1) != model.t_enc ||
        x.extent(2) != model.features) {
        throw std::invalid_argument("ridge_predict: input " + x.shape_str() +
                                    " does not match fitted dimensions");
    }
    const std::size_t f = model.features;
    Tensor out({model.stations, model.t_dec, f});
    const std::size_t groups = model.joint ? 1 : model.stations;
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t s_begin = model.joint ? 0 : g;
        const std::size_t s_end = model.joint ? model.stations : g + 1;
        std::vector<double> row;
        flatten_group(x, s_begin, s_end, row);
        row.push_back(1.0);
        const Tensor& w = model.weights[g];
        for (std::size_t r = 0; r < w.extent(0); ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < w.extent(1); ++c) acc += w.at(r, c) * row[c];
            // r indexes (station offset, t, k) row-major within the group
            const std::size_t per_station = model.t_dec * f;
            const std::size_t station = s_begin + r / per_station;
            const std::size_t t = (r % per_station) / f;
            const std::size_t k = r % f;
            out.at(station, t, k) = acc;
        }
    }
    return out;
}

double ridge_evaluate(const RidgeModel& model, const Dataset& data) {
    if (data.samples.empty()) throw std::invalid_argument("ridge_evaluate: empty dataset");
    double acc = 0.0;
    for (const SamplePair& sp : data.samples) {
        acc += loss(ridge_predict(model, sp.x), sp.y);
    }
    return 100.0 * acc / static_cast<double>(data.samples.size());
}

void save_ridge(const std::string& path, const RidgeModel& model) {
    nlohmann::json header = {{"joint", model.joint},
                             {"lambda", model.lambda},
                             {"stations", model.stations},
                             {"t_enc", model.t_enc},
                             {"t_dec", model.t_dec},
                             {"features", model.features}};
    std::vector<std::pair<std::string, const Tensor*>> arrays;
    for (std::size_t g = 0; g < model.weights.size(); ++g) {
        arrays.emplace_back("group" + std::to_string(g) + ".W", &model.weights[g]);
    }
    save_container(path, CheckpointType::ridge, std::move(header), arrays);
}

RidgeModel load_ridge(const std::string& path) {
    Container c = load_container(path);
    if (c.type != CheckpointType::ridge) {
        throw CheckpointError(CheckpointError::Kind::bad_version,
                              path + ": not a ridge checkpoint");
    }
    RidgeModel model;
    model.joint = c.header.at("joint").get<bool>();
    model.lambda = c.header.at("lambda").get<double>();
    model.stations = c.header.at("stations").get<std::size_t>();
    model.t_enc = c.header.at("t_enc").get<std::size_t>();
    model.t_dec = c.header.at("t_dec").get<std::size_t>();
    model.features = c.header.at("features").get<std::size_t>();
    for (auto& [name, t] : c.arrays) model.weights.push_back(std::move(t));
    return model;
}

RegularRnnConfigs regular_rnn_configs(const ModelConfig& base) {
    base.validate();
    RegularRnnConfigs out;
    ModelConfig single = base;
    single.encoders = 1;
    single.decoders = 1;
    out.per_station.assign(base.decoders, single);
    ModelConfig joint = single;
    joint.f_enc = base.encoders * base.f_enc;
    joint.f_dec = base.decoders * base.f_dec;
    out.joint = joint;
    return out;
}

Dataset slice_station(const Dataset& data, std::size_t station) {
    Dataset out;
    out.stats = data.stats;
    out.split_name = data.split_name;
    out.stride = data.stride;
    for (const SamplePair& sp : data.samples) {
        SamplePair s;
        s.x = Tensor({std::size_t{1}, sp.x.extent(1), sp.x.extent(2)});
        s.y = Tensor({std::size_t{1}, sp.y.extent(1), sp.y.extent(2)});
        for (std::size_t t = 0; t < sp.x.extent(1); ++t) {
            for (std::size_t k = 0; k < sp.x.extent(2); ++k) {
                s.x.at(0, t, k) = sp.x.at(station, t, k);
            }
        }
        for (std::size_t t = 0; t < sp.y.extent(1); ++t) {
            for (std::size_t k = 0; k < sp.y.extent(2); ++k) {
                s.y.at(0, t, k) = sp.y.at(station, t, k);
            }
        }
        out.samples.push_back(std::move(s));
    }
    return out;
}

Dataset concat_stations(const Dataset& data) {
    Dataset out;
    out.stats = data.stats;
    out.split_name = data.split_name;
    out.stride = data.stride;
    for (const SamplePair& sp : data.samples) {
        const std::size_t e = sp.x.extent(0), f = sp.x.extent(2);
        SamplePair s;
        s.x = Tensor({std::size_t{1}, sp.x.extent(1), e * f});
        s.y = Tensor({std::size_t{1}, sp.y.extent(1), sp.y.extent(0) * sp.y.extent(2)});
        for (std::size_t t = 0; t < sp.x.extent(1); ++t) {
            for (std::size_t i = 0; i < e; ++i) {
                for (std::size_t k = 0; k < f; ++k) {
                    s.x.at(0, t, i * f + k) = sp.x.at(i, t, k);
                }
            }
        }
        for (std::size_t t = 0; t < sp.y.extent(1); ++t) {
            for (std::size_t i = 0; i < sp.y.extent(0); ++i) {
                for (std::size_t k = 0; k < sp.y.extent(2); ++k) {
                    s.y.at(0, t, i * sp.y.extent(2) + k) = sp.y.at(i, t, k);
                }
            }
        }
        out.samples.push_back(std::move(s));
    }
    return out;
}

}  // namespace medfuse
