#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "medfuse/baselines.hpp"
#include "medfuse/checkpoint.hpp"
#include "medfuse/data.hpp"
#include "medfuse/model.hpp"
#include "medfuse/trainer.hpp"

using namespace medfuse;
using nlohmann::json;

namespace {

// Flat dotted-key run configuration with documented defaults.
struct RunConfig {
    std::string family = "attention";
    std::string preset = "desk";

    std::size_t model_hidden = 32;
    std::size_t model_att_hidden = 16;
    bool model_mean_scale = true;
    bool model_share_attention = false;
    bool model_teacher_forcing = true;

    std::size_t data_t_enc = 48;
    std::size_t data_t_dec = 24;
    std::size_t data_stride = 0;  // 0: default to t_dec
    double data_train_frac = 0.7;
    double data_valid_frac = 0.1;
    double data_test_frac = 0.2;

    double train_learning_rate = 0.05;
    double train_momentum = 0.9;
    std::size_t train_batch_size = 32;
    std::size_t train_max_epochs = 200;
    double train_grad_clip_norm = 5.0;
    std::size_t train_patience = 20;
    double train_encoder_dropout_prob = 0.0;

    double ridge_lambda = 1e-3;

    std::uint64_t seed = 1;

    std::size_t stride() const { return data_stride == 0 ? data_t_dec : data_stride; }

    std::size_t hidden_for_family() const {
        if (preset == "paper-scale") {
            return (family == "rnn-per-station" || family == "linreg-per-station") ? 130 : 300;
        }
        return model_hidden;
    }
};

const std::vector<std::string> kFamilies = {"attention",    "rnn-joint",
                                            "rnn-per-station", "linreg-joint",
                                            "linreg-per-station", "last-observed"};

RunConfig parse_run_config(const std::string& path) {
    RunConfig rc;
    if (path.empty()) return rc;
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config " + path);
    json j = json::parse(f);

    std::vector<std::string> bad;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        try {
            if (k == "family") rc.family = it->get<std::string>();
            else if (k == "preset") rc.preset = it->get<std::string>();
            else if (k == "model.hidden") rc.model_hidden = it->get<std::size_t>();
            else if (k == "model.att_hidden") rc.model_att_hidden = it->get<std::size_t>();
            else if (k == "model.mean_scale") rc.model_mean_scale = it->get<bool>();
            else if (k == "model.share_attention") rc.model_share_attention = it->get<bool>();
            else if (k == "model.teacher_forcing") rc.model_teacher_forcing = it->get<bool>();
            else if (k == "data.t_enc") rc.data_t_enc = it->get<std::size_t>();
            else if (k == "data.t_dec") rc.data_t_dec = it->get<std::size_t>();
            else if (k == "data.stride") rc.data_stride = it->get<std::size_t>();
            else if (k == "data.train_frac") rc.data_train_frac = it->get<double>();
            else if (k == "data.valid_frac") rc.data_valid_frac = it->get<double>();
            else if (k == "data.test_frac") rc.data_test_frac = it->get<double>();
            else if (k == "train.learning_rate") rc.train_learning_rate = it->get<double>();
            else if (k == "train.momentum") rc.train_momentum = it->get<double>();
            else if (k == "train.batch_size") rc.train_batch_size = it->get<std::size_t>();
            else if (k == "train.max_epochs") rc.train_max_epochs = it->get<std::size_t>();
            else if (k == "train.grad_clip_norm") rc.train_grad_clip_norm = it->get<double>();
            else if (k == "train.patience") rc.train_patience = it->get<std::size_t>();
            else if (k == "train.encoder_dropout_prob")
                rc.train_encoder_dropout_prob = it->get<double>();
            else if (k == "ridge.lambda") rc.ridge_lambda = it->get<double>();
            else if (k == "seed") rc.seed = it->get<std::uint64_t>();
            else bad.push_back(k);
        } catch (const json::exception&) {
            bad.push_back(k + " (bad value type)");
        }
    }
    if (!bad.empty()) {
        std::string msg = "config errors in " + path + ":";
        for (const std::string& k : bad) msg += " unknown/invalid key '" + k + "'";
        throw std::runtime_error(msg);
    }
    if (std::find(kFamilies.begin(), kFamilies.end(), rc.family) == kFamilies.end()) {
        throw std::runtime_error("config: unknown family '" + rc.family + "'");
    }
    if (rc.preset != "desk" && rc.preset != "paper-scale") {
        throw std::runtime_error("config: unknown preset '" + rc.preset + "'");
    }
    return rc;
}

json effective_config_json(const RunConfig& rc) {
    return json{{"family", rc.family},
                {"preset", rc.preset},
                {"model.hidden", rc.hidden_for_family()},
                {"model.att_hidden", rc.model_att_hidden},
                {"model.mean_scale", rc.model_mean_scale},
                {"model.share_attention", rc.model_share_attention},
                {"model.teacher_forcing", rc.model_teacher_forcing},
                {"data.t_enc", rc.data_t_enc},
                {"data.t_dec", rc.data_t_dec},
                {"data.stride", rc.stride()},
                {"data.train_frac", rc.data_train_frac},
                {"data.valid_frac", rc.data_valid_frac},
                {"data.test_frac", rc.data_test_frac},
                {"train.learning_rate", rc.train_learning_rate},
                {"train.momentum", rc.train_momentum},
                {"train.batch_size", rc.train_batch_size},
                {"train.max_epochs", rc.train_max_epochs},
                {"train.grad_clip_norm", rc.train_grad_clip_norm},
                {"train.patience", rc.train_patience},
                {"train.encoder_dropout_prob", rc.train_encoder_dropout_prob},
                {"ridge.lambda", rc.ridge_lambda},
                {"seed", rc.seed}};
}

struct PipelineData {
    NormStats stats;
    Dataset train;
    Dataset valid;
    Dataset test;
    std::size_t stations = 0;
    std::size_t features = 0;
    RawSeries test_region;  // normalized, for predict/attention exports
};

PipelineData run_pipeline(const RawSeries& raw, const RunConfig& rc) {
    PipelineData pd;
    pd.stations = raw.station_count();
    pd.features = raw.feature_count();
    SplitResult parts = split(raw, rc.data_train_frac, rc.data_valid_frac, rc.data_test_frac);
    pd.stats = fit_normalize(parts.train);
    auto make = [&](const RawSeries& region, const char* name) {
        Dataset d;
        d.stats = pd.stats;
        d.split_name = name;
        d.stride = rc.stride();
        if (region.step_count() >= rc.data_t_enc + rc.data_t_dec) {
            d.samples = window(apply_normalize(region, pd.stats), rc.data_t_enc, rc.data_t_dec,
                               rc.stride());
        }
        return d;
    };
    pd.train = make(parts.train, "train");
    pd.valid = make(parts.valid, "valid");
    pd.test = make(parts.test, "test");
    pd.test_region = apply_normalize(parts.test.step_count() ? parts.test : parts.train, pd.stats);
    return pd;
}

json stats_to_json(const NormStats& stats) {
    return json{{"mean", stats.mean.flat()},
                {"std", stats.stddev.flat()},
                {"stations", stats.mean.extent(0)},
                {"features", stats.mean.extent(1)}};
}

NormStats stats_from_json(const json& j) {
    NormStats stats;
    const std::size_t e = j.at("stations").get<std::size_t>();
    const std::size_t f = j.at("features").get<std::size_t>();
    stats.mean = Tensor({e, f}, j.at("mean").get<std::vector<double>>());
    stats.stddev = Tensor({e, f}, j.at("std").get<std::vector<double>>());
    return stats;
}

ModelConfig build_model_config(const RunConfig& rc, std::size_t stations, std::size_t features,
                               const std::string& family) {
    ModelConfig cfg;
    cfg.t_enc = rc.data_t_enc;
    cfg.t_dec = rc.data_t_dec;
    cfg.hidden = rc.hidden_for_family();
    cfg.att_hidden = rc.model_att_hidden;
    cfg.mean_scale = rc.model_mean_scale;
    cfg.share_attention = rc.model_share_attention;
    cfg.teacher_forcing = rc.model_teacher_forcing;
    if (family == "attention") {
        cfg.encoders = stations;
        cfg.decoders = stations;
        cfg.f_enc = features;
        cfg.f_dec = features;
    } else if (family == "rnn-joint") {
        cfg.encoders = 1;
        cfg.decoders = 1;
        cfg.f_enc = stations * features;
        cfg.f_dec = stations * features;
    } else {  // rnn-per-station
        cfg.encoders = 1;
        cfg.decoders = 1;
        cfg.f_enc = features;
        cfg.f_dec = features;
    }
    return cfg;
}

TrainConfig build_train_config(const RunConfig& rc) {
    TrainConfig tcfg;
    tcfg.learning_rate = rc.train_learning_rate;
    tcfg.momentum = rc.train_momentum;
    tcfg.batch_size = rc.train_batch_size;
    tcfg.max_epochs = rc.train_max_epochs;
    tcfg.grad_clip_norm = rc.train_grad_clip_norm;
    tcfg.patience = rc.train_patience;
    tcfg.seed = rc.seed;
    tcfg.encoder_dropout_prob = rc.train_encoder_dropout_prob;
    return tcfg;
}

// ---------------------------------------------------------------------------
// training entry points per family; each returns test MSE percent and saves a
// checkpoint carrying everything eval/predict need
// ---------------------------------------------------------------------------

struct TrainOutcome {
    double test_mse = -1.0;
    json report;
};

json base_header(const RunConfig& rc, const PipelineData& pd) {
    return json{{"family", rc.family},
                {"effective_config", effective_config_json(rc)},
                {"norm", stats_to_json(pd.stats)}};
}

TrainOutcome train_attention_like(const RunConfig& rc, const PipelineData& pd,
                                  const std::string& out_path, const std::string& family) {
    const bool joint = family == "rnn-joint";
    Dataset train_ds = joint ? concat_stations(pd.train) : pd.train;
    Dataset valid_ds = joint ? concat_stations(pd.valid) : pd.valid;
    Dataset test_ds = joint ? concat_stations(pd.test) : pd.test;
    ModelConfig cfg = build_model_config(rc, pd.stations, pd.features, family);
    TrainConfig tcfg = build_train_config(rc);

    auto [params, report] = train(train_ds, valid_ds, cfg, tcfg);

    json header = base_header(rc, pd);
    header["config"] = config_to_json(cfg);
    header["seed"] = rc.seed;
    std::vector<std::pair<std::string, const Tensor*>> arrays;
    params.for_each_array(
        [&](const std::string& name, const Tensor& t) { arrays.emplace_back(name, &t); });
    save_container(out_path, CheckpointType::network, std::move(header), arrays);

    TrainOutcome out;
    out.test_mse = test_ds.samples.empty() ? -1.0 : evaluate(params, cfg, test_ds);
    out.report = {{"train_losses", report.train_losses},
                  {"valid_losses", report.valid_losses},
                  {"best_epoch", report.best_epoch},
                  {"best_valid_loss", report.best_valid_loss},
                  {"wall_seconds", report.wall_seconds},
                  {"param_checksum", report.param_checksum}};
    return out;
}

TrainOutcome train_per_station(const RunConfig& rc, const PipelineData& pd,
                               const std::string& out_path) {
    ModelConfig cfg = build_model_config(rc, pd.stations, pd.features, "rnn-per-station");
    TrainConfig tcfg = build_train_config(rc);

    std::vector<ParameterStore> stores;
    json per_station_reports = json::array();
    double mse_acc = 0.0;
    bool have_test = true;
    for (std::size_t s = 0; s < pd.stations; ++s) {
        Dataset train_ds = slice_station(pd.train, s);
        Dataset valid_ds = slice_station(pd.valid, s);
        Dataset test_ds = slice_station(pd.test, s);
        TrainConfig st_cfg = tcfg;
        st_cfg.seed = tcfg.seed + s;  // distinct streams, still deterministic
        auto [params, report] = train(train_ds, valid_ds, cfg, st_cfg);
        if (test_ds.samples.empty()) have_test = false;
        else mse_acc += evaluate(params, cfg, test_ds);
        per_station_reports.push_back({{"best_epoch", report.best_epoch},
                                       {"best_valid_loss", report.best_valid_loss},
                                       {"param_checksum", report.param_checksum}});
        stores.push_back(std::move(params));
    }

    json header = base_header(rc, pd);
    header["config"] = config_to_json(cfg);
    header["stations"] = pd.stations;
    header["seed"] = rc.seed;
    std::vector<std::pair<std::string, const Tensor*>> arrays;
    std::vector<std::string> names;  // keep storage alive for the pointer pass
    for (std::size_t s = 0; s < stores.size(); ++s) {
        stores[s].for_each_array([&](const std::string& name, const Tensor& t) {
            arrays.emplace_back("station" + std::to_string(s) + "." + name, &t);
        });
    }
    save_container(out_path, CheckpointType::network, std::move(header), arrays);

    TrainOutcome out;
    out.test_mse = have_test ? mse_acc / static_cast<double>(pd.stations) : -1.0;
    out.report = {{"per_station", per_station_reports}};
    return out;
}

TrainOutcome train_linreg(const RunConfig& rc, const PipelineData& pd,
                          const std::string& out_path, bool joint) {
    RidgeModel model = ridge_fit(pd.train, joint, rc.ridge_lambda);
    // stash the pipeline header next to the weights
    json header = base_header(rc, pd);
    header["joint"] = model.joint;
    header["lambda"] = model.lambda;
    header["stations"] = model.stations;
    header["t_enc"] = model.t_enc;
    header["t_dec"] = model.t_dec;
    header["features"] = model.features;
    std::vector<std::pair<std::string, const Tensor*>> arrays;
    for (std::size_t g = 0; g < model.weights.size(); ++g) {
        arrays.emplace_back("group" + std::to_string(g) + ".W", &model.weights[g]);
    }
    save_container(out_path, CheckpointType::ridge, std::move(header), arrays);

    TrainOutcome out;
    out.test_mse = pd.test.samples.empty() ? -1.0 : ridge_evaluate(model, pd.test);
    out.report = json::object();
    return out;
}

TrainOutcome train_last_observed(const RunConfig& rc, const PipelineData& pd,
                                 const std::string& out_path) {
    json header = base_header(rc, pd);
    save_container(out_path, CheckpointType::last_observed, std::move(header), {});
    TrainOutcome out;
    if (!pd.test.samples.empty()) {
        double acc = 0.0;
        for (const SamplePair& sp : pd.test.samples) {
            acc += loss(last_observed(sp.x, rc.data_t_dec), sp.y);
        }
        out.test_mse = 100.0 * acc / static_cast<double>(pd.test.samples.size());
    }
    out.report = json::object();
    return out;
}

// ---------------------------------------------------------------------------
// loaded-model evaluation/prediction shared by eval/predict/attention
// ---------------------------------------------------------------------------

struct LoadedModel {
    Container container;
    RunConfig rc;  // reconstructed effective config
    NormStats stats;
    std::string family;
};

RunConfig run_config_from_header(const json& eff) {
    RunConfig rc;
    rc.family = eff.at("family").get<std::string>();
    rc.preset = eff.at("preset").get<std::string>();
    rc.model_hidden = eff.at("model.hidden").get<std::size_t>();
    rc.model_att_hidden = eff.at("model.att_hidden").get<std::size_t>();
    rc.model_mean_scale = eff.at("model.mean_scale").get<bool>();
    rc.model_share_attention = eff.at("model.share_attention").get<bool>();
    rc.model_teacher_forcing = eff.at("model.teacher_forcing").get<bool>();
    rc.data_t_enc = eff.at("data.t_enc").get<std::size_t>();
    rc.data_t_dec = eff.at("data.t_dec").get<std::size_t>();
    rc.data_stride = eff.at("data.stride").get<std::size_t>();
    rc.data_train_frac = eff.at("data.train_frac").get<double>();
    rc.data_valid_frac = eff.at("data.valid_frac").get<double>();
    rc.data_test_frac = eff.at("data.test_frac").get<double>();
    rc.ridge_lambda = eff.at("ridge.lambda").get<double>();
    rc.seed = eff.at("seed").get<std::uint64_t>();
    if (rc.preset == "paper-scale") rc.preset = "desk";  // hidden already resolved
    return rc;
}

LoadedModel load_model(const std::string& path) {
    LoadedModel lm;
    lm.container = load_container(path);
    lm.family = lm.container.header.at("family").get<std::string>();
    lm.rc = run_config_from_header(lm.container.header.at("effective_config"));
    lm.rc.family = lm.family;
    lm.stats = stats_from_json(lm.container.header.at("norm"));
    return lm;
}

ParameterStore params_from_arrays(const ModelConfig& cfg,
                                  const std::vector<std::pair<std::string, Tensor>>& arrays,
                                  const std::string& prefix) {
    ParameterStore params(cfg);
    std::size_t found = 0;
    params.for_each_array([&](const std::string& name, Tensor& t) {
        for (const auto& [aname, at] : arrays) {
            if (aname == prefix + name) {
                if (!at.same_shape(t)) {
                    throw std::runtime_error("checkpoint array " + aname + " has shape " +
                                             at.shape_str() + ", expected " + t.shape_str());
                }
                t = at;
                ++found;
                return;
            }
        }
        throw std::runtime_error("checkpoint missing array " + prefix + name);
    });
    (void)found;
    return params;
}

// Per-window forecasts, shape [stations x t_dec x features] in original
// station layout, plus the attention trace when the model has one.
std::vector<Forecast> model_forecasts(const LoadedModel& lm, const Dataset& test) {
    std::vector<Forecast> out;
    const RunConfig& rc = lm.rc;
    const std::size_t stations = lm.stats.mean.extent(0);
    const std::size_t features = lm.stats.mean.extent(1);

    if (lm.family == "attention" || lm.family == "rnn-joint") {
        ModelConfig cfg = config_from_json(lm.container.header.at("config"));
        ParameterStore params = params_from_arrays(cfg, lm.container.arrays, "");
        Dataset ds = lm.family == "rnn-joint" ? concat_stations(test) : test;
        for (const SamplePair& sp : ds.samples) {
            Forecast fc = forward(sp.x, params, cfg, full_mask(cfg.encoders));
            if (lm.family == "rnn-joint") {
                // unpack station-concatenated features
                Forecast unpacked;
                unpacked.y_hat = Tensor({stations, rc.data_t_dec, features});
                for (std::size_t t = 0; t < rc.data_t_dec; ++t) {
                    for (std::size_t i = 0; i < stations; ++i) {
                        for (std::size_t k = 0; k < features; ++k) {
                            unpacked.y_hat.at(i, t, k) = fc.y_hat.at(0, t, i * features + k);
                        }
                    }
                }
                out.push_back(std::move(unpacked));
            } else {
                out.push_back(std::move(fc));
            }
        }
    } else if (lm.family == "rnn-per-station") {
        ModelConfig cfg = config_from_json(lm.container.header.at("config"));
        std::vector<ParameterStore> stores;
        for (std::size_t s = 0; s < stations; ++s) {
            stores.push_back(params_from_arrays(cfg, lm.container.arrays,
                                                "station" + std::to_string(s) + "."));
        }
        for (const SamplePair& sp : test.samples) {
            Forecast fc;
            fc.y_hat = Tensor({stations, rc.data_t_dec, features});
            for (std::size_t s = 0; s < stations; ++s) {
                Tensor x({std::size_t{1}, rc.data_t_enc, features});
                for (std::size_t t = 0; t < rc.data_t_enc; ++t) {
                    for (std::size_t k = 0; k < features; ++k) x.at(0, t, k) = sp.x.at(s, t, k);
                }
                Forecast one = forward(x, stores[s], cfg, full_mask(1));
                for (std::size_t t = 0; t < rc.data_t_dec; ++t) {
                    for (std::size_t k = 0; k < features; ++k) {
                        fc.y_hat.at(s, t, k) = one.y_hat.at(0, t, k);
                    }
                }
            }
            out.push_back(std::move(fc));
        }
    } else if (lm.family == "linreg-joint" || lm.family == "linreg-per-station") {
        RidgeModel model;
        model.joint = lm.container.header.at("joint").get<bool>();
        model.lambda = lm.container.header.at("lambda").get<double>();
        model.stations = lm.container.header.at("stations").get<std::size_t>();
        model.t_enc = lm.container.header.at("t_enc").get<std::size_t>();
        model.t_dec = lm.container.header.at("t_dec").get<std::size_t>();
        model.features = lm.container.header.at("features").get<std::size_t>();
        for (const auto& [name, t] : lm.container.arrays) model.weights.push_back(t);
        for (const SamplePair& sp : test.samples) {
            Forecast fc;
            fc.y_hat = ridge_predict(model, sp.x);
            out.push_back(std::move(fc));
        }
    } else if (lm.family == "last-observed") {
        for (const SamplePair& sp : test.samples) {
            Forecast fc;
            fc.y_hat = last_observed(sp.x, rc.data_t_dec);
            out.push_back(std::move(fc));
        }
    } else {
        throw std::runtime_error("unknown model family in checkpoint: " + lm.family);
    }
    return out;
}

// test split of a data file, windowed with the checkpoint's stored statistics
Dataset eval_dataset(const LoadedModel& lm, const std::string& data_path) {
    RawSeries raw = load_csv(data_path);
    if (raw.station_count() != lm.stats.mean.extent(0) ||
        raw.feature_count() != lm.stats.mean.extent(1)) {
        throw std::runtime_error("data file has " + std::to_string(raw.station_count()) +
                                 " stations x " + std::to_string(raw.feature_count()) +
                                 " features, checkpoint expects " +
                                 std::to_string(lm.stats.mean.extent(0)) + " x " +
                                 std::to_string(lm.stats.mean.extent(1)));
    }
    const RunConfig& rc = lm.rc;
    RawSeries region = raw;
    if (rc.data_test_frac > 0.0) {
        SplitResult parts = split(raw, rc.data_train_frac, rc.data_valid_frac, rc.data_test_frac);
        region = parts.test;
    }
    Dataset ds;
    ds.stats = lm.stats;
    ds.split_name = "test";
    ds.stride = rc.stride();
    ds.samples = window(apply_normalize(region, lm.stats), rc.data_t_enc, rc.data_t_dec,
                        rc.stride());
    return ds;
}

double eval_loaded(const LoadedModel& lm, const Dataset& ds) {
    std::vector<Forecast> fcs = model_forecasts(lm, ds);
    double acc = 0.0;
    for (std::size_t n = 0; n < ds.samples.size(); ++n) {
        acc += loss(fcs[n].y_hat, ds.samples[n].y);
    }
    return 100.0 * acc / static_cast<double>(ds.samples.size());
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_synth(const std::string& out_dir, std::size_t stations, std::size_t steps,
              std::uint64_t seed) {
    std::filesystem::create_directories(out_dir);
    RawSeries series = synth_generate(stations, steps, seed);
    write_csv(out_dir + "/data.csv", series);
    std::cout << out_dir + "/data.csv" << "\n";
    return 0;
}

int cmd_train(const std::string& data_path, const std::string& config_path,
              const std::string& out_path, std::uint64_t seed, bool seed_given,
              const std::string& report_path_in) {
    RunConfig rc = parse_run_config(config_path);
    if (seed_given) rc.seed = seed;
    RawSeries raw = load_csv(data_path);
    PipelineData pd = run_pipeline(raw, rc);
    if (pd.train.samples.empty()) throw std::runtime_error("training split yields no windows");
    if (pd.valid.samples.empty() && (rc.family == "attention" || rc.family == "rnn-joint" ||
                                     rc.family == "rnn-per-station")) {
        throw std::runtime_error("validation split yields no windows");
    }

    TrainOutcome outcome;
    if (rc.family == "attention" || rc.family == "rnn-joint") {
        outcome = train_attention_like(rc, pd, out_path, rc.family);
    } else if (rc.family == "rnn-per-station") {
        outcome = train_per_station(rc, pd, out_path);
    } else if (rc.family == "linreg-joint") {
        outcome = train_linreg(rc, pd, out_path, true);
    } else if (rc.family == "linreg-per-station") {
        outcome = train_linreg(rc, pd, out_path, false);
    } else {
        outcome = train_last_observed(rc, pd, out_path);
    }

    json report = outcome.report;
    report["family"] = rc.family;
    report["effective_config"] = effective_config_json(rc);
    report["test_mse_percent"] = outcome.test_mse;
    const std::string report_path =
        report_path_in.empty() ? out_path + ".report.json" : report_path_in;
    std::ofstream rf(report_path);
    rf << report.dump(2) << "\n";
    if (!rf) throw std::runtime_error("cannot write report " + report_path);

    if (outcome.test_mse >= 0.0) {
        std::cout.setf(std::ios::fixed);
        std::cout.precision(2);
        std::cout << outcome.test_mse << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path) {
    LoadedModel lm = load_model(model_path);
    Dataset ds = eval_dataset(lm, data_path);
    std::cout.setf(std::ios::fixed);
    std::cout.precision(2);
    std::cout << eval_loaded(lm, ds) << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path) {
    LoadedModel lm = load_model(model_path);
    RawSeries raw = load_csv(data_path);
    Dataset ds = eval_dataset(lm, data_path);
    std::vector<Forecast> fcs = model_forecasts(lm, ds);

    const RunConfig& rc = lm.rc;
    const std::size_t stations = lm.stats.mean.extent(0);
    const std::size_t features = lm.stats.mean.extent(1);

    // assemble predictions onto the forecast time grid; later windows win when
    // strides overlap
    const std::size_t horizon = (ds.samples.size() - 1) * rc.stride() + rc.data_t_dec;
    RawSeries pred;
    pred.stations.reserve(stations);
    for (std::size_t i = 0; i < stations; ++i) pred.stations.push_back("s" + std::to_string(i));
    if (raw.station_count() == stations) pred.stations = raw.stations;
    pred.feature_names.resize(features, "value");
    if (raw.feature_count() == features) pred.feature_names = raw.feature_names;
    pred.timestamps.resize(horizon);
    const std::int64_t step =
        raw.timestamps.size() > 1 ? raw.timestamps[1] - raw.timestamps[0] : 1;
    // forecasts live on the evaluated region's grid, offset by the encoder window
    std::int64_t region_start = raw.timestamps[0];
    if (rc.data_test_frac > 0.0) {
        SplitResult parts = split(raw, rc.data_train_frac, rc.data_valid_frac, rc.data_test_frac);
        region_start = parts.test.timestamps[0];
    }
    for (std::size_t t = 0; t < horizon; ++t) {
        pred.timestamps[t] = region_start + static_cast<std::int64_t>(rc.data_t_enc + t) * step;
    }
    pred.values = Tensor({stations, horizon, features});
    for (std::size_t n = 0; n < fcs.size(); ++n) {
        const std::size_t off = n * rc.stride();
        for (std::size_t i = 0; i < stations; ++i) {
            for (std::size_t t = 0; t < rc.data_t_dec; ++t) {
                for (std::size_t k = 0; k < features; ++k) {
                    pred.values.at(i, off + t, k) = fcs[n].y_hat.at(i, t, k);
                }
            }
        }
    }
    write_csv(out_path, undo_normalize(pred, lm.stats));
    return 0;
}

int cmd_attention(const std::string& model_path, const std::string& data_path,
                  const std::string& out_path) {
    LoadedModel lm = load_model(model_path);
    if (lm.family != "attention") {
        throw std::runtime_error("attention export requires an attention-family checkpoint, got " +
                                 lm.family);
    }
    Dataset ds = eval_dataset(lm, data_path);
    std::vector<Forecast> fcs = model_forecasts(lm, ds);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << "sample,decoder,encoder,weight\n";
    out << std::setprecision(17);
    for (std::size_t n = 0; n < fcs.size(); ++n) {
        const Tensor& w = fcs[n].trace.w;
        for (std::size_t j = 0; j < w.extent(0); ++j) {
            for (std::size_t i = 0; i < w.extent(1); ++i) {
                out << n << "," << j << "," << i << "," << w.at(j, i) << "\n";
            }
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-encoder-decoder forecasting toolkit"};
    app.require_subcommand(1);

    std::string out_dir, data_path, config_path, out_path, model_path, report_path;
    std::size_t stations = 6, steps = 6000;
    std::uint64_t seed = 1;

    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark series");
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--stations", stations, "station count (>= 3)");
    synth->add_option("--steps", steps, "series length (>= 500)");
    synth->add_option("--seed", seed, "generator seed");

    auto* train = app.add_subcommand("train", "train a model family");
    train->add_option("--data", data_path, "input CSV")->required();
    train->add_option("--config", config_path, "JSON run config");
    train->add_option("--out", out_path, "checkpoint path")->required();
    auto* seed_opt = train->add_option("--seed", seed, "training seed (overrides config)");
    train->add_option("--report", report_path, "report path (default: <out>.report.json)");

    auto* eval_cmd = app.add_subcommand("eval", "print test MSE percent for a checkpoint");
    eval_cmd->add_option("--model", model_path, "checkpoint path")->required();
    eval_cmd->add_option("--data", data_path, "input CSV")->required();

    auto* predict = app.add_subcommand("predict", "write forecasts in the input CSV schema");
    predict->add_option("--model", model_path, "checkpoint path")->required();
    predict->add_option("--data", data_path, "input CSV")->required();
    predict->add_option("--out", out_path, "output CSV")->required();

    auto* attention = app.add_subcommand("attention", "export attention weights as CSV");
    attention->add_option("--model", model_path, "checkpoint path")->required();
    attention->add_option("--data", data_path, "input CSV")->required();
    attention->add_option("--out", out_path, "output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(out_dir, stations, steps, seed);
        if (train->parsed()) {
            return cmd_train(data_path, config_path, out_path, seed, seed_opt->count() > 0,
                             report_path);
        }
        if (eval_cmd->parsed()) return cmd_eval(model_path, data_path);
        if (predict->parsed()) return cmd_predict(model_path, data_path, out_path);
        if (attention->parsed()) return cmd_attention(model_path, data_path, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
