#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "medfuse/baselines.hpp"
#include "medfuse/checkpoint.hpp"
#include "medfuse/data.hpp"
#include "medfuse/trainer.hpp"

namespace py = pybind11;
using namespace medfuse;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.flat().begin(), t.flat().end(), out.mutable_data());
    return out;
}

Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() < 1 || a.ndim() > 3) {
        throw std::invalid_argument("expected an array of rank 1..3");
    }
    std::vector<std::size_t> shape;
    for (py::ssize_t i = 0; i < a.ndim(); ++i) {
        shape.push_back(static_cast<std::size_t>(a.shape(i)));
    }
    std::vector<double> values(a.data(), a.data() + a.size());
    return Tensor(std::move(shape), std::move(values));
}

Dataset make_dataset(const std::vector<SamplePair>& samples) {
    Dataset d;
    d.samples = samples;
    return d;
}

py::dict report_to_dict(const TrainReport& r) {
    py::dict d;
    d["train_losses"] = r.train_losses;
    d["valid_losses"] = r.valid_losses;
    d["best_epoch"] = r.best_epoch;
    d["best_valid_loss"] = r.best_valid_loss;
    d["wall_seconds"] = r.wall_seconds;
    d["param_checksum"] = r.param_checksum;
    return d;
}

}  // namespace

PYBIND11_MODULE(_medfuse, m) {
    m.doc() = "multi-encoder-decoder forecasting library";

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("encoders", &ModelConfig::encoders)
        .def_readwrite("decoders", &ModelConfig::decoders)
        .def_readwrite("t_enc", &ModelConfig::t_enc)
        .def_readwrite("t_dec", &ModelConfig::t_dec)
        .def_readwrite("f_enc", &ModelConfig::f_enc)
        .def_readwrite("f_dec", &ModelConfig::f_dec)
        .def_readwrite("hidden", &ModelConfig::hidden)
        .def_readwrite("att_hidden", &ModelConfig::att_hidden)
        .def_readwrite("mean_scale", &ModelConfig::mean_scale)
        .def_readwrite("share_attention", &ModelConfig::share_attention)
        .def_readwrite("teacher_forcing", &ModelConfig::teacher_forcing);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("momentum", &TrainConfig::momentum)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("max_epochs", &TrainConfig::max_epochs)
        .def_readwrite("grad_clip_norm", &TrainConfig::grad_clip_norm)
        .def_readwrite("patience", &TrainConfig::patience)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("encoder_dropout_prob", &TrainConfig::encoder_dropout_prob);

    py::class_<RawSeries>(m, "RawSeries")
        .def_readwrite("stations", &RawSeries::stations)
        .def_readwrite("timestamps", &RawSeries::timestamps)
        .def_readwrite("feature_names", &RawSeries::feature_names)
        .def_property(
            "values", [](const RawSeries& s) { return to_numpy(s.values); },
            [](RawSeries& s, const py::array_t<double>& a) { s.values = to_tensor(a); });

    py::class_<NormStats>(m, "NormStats")
        .def_property_readonly("mean", [](const NormStats& s) { return to_numpy(s.mean); })
        .def_property_readonly("stddev", [](const NormStats& s) { return to_numpy(s.stddev); });

    py::class_<SamplePair>(m, "SamplePair")
        .def_property_readonly("x", [](const SamplePair& s) { return to_numpy(s.x); })
        .def_property_readonly("y", [](const SamplePair& s) { return to_numpy(s.y); });

    py::class_<ParameterStore>(m, "ParameterStore")
        .def("total_size", &ParameterStore::total_size)
        .def("flatten", [](const ParameterStore& p) {
            py::array_t<double> out(static_cast<py::ssize_t>(p.total_size()));
            const std::vector<double> flat = p.flatten();
            std::copy(flat.begin(), flat.end(), out.mutable_data());
            return out;
        })
        .def("checksum", [](const ParameterStore& p) { return param_checksum(p); });

    py::class_<RidgeModel>(m, "RidgeModel")
        .def_readonly("joint", &RidgeModel::joint)
        .def_readonly("lambda_", &RidgeModel::lambda)
        .def_property_readonly("weights", [](const RidgeModel& r) {
            py::list out;
            for (const Tensor& w : r.weights) out.append(to_numpy(w));
            return out;
        });

    // data pipeline
    m.def("synth_generate",
          [](std::size_t stations, std::size_t steps, std::uint64_t seed) {
              return synth_generate(stations, steps, seed);
          },
          py::arg("stations") = 6, py::arg("steps") = 6000, py::arg("seed") = 1);
    m.def("load_csv", &load_csv, py::arg("path"));
    m.def("write_csv", &write_csv, py::arg("path"), py::arg("series"));
    m.def("split",
          [](const RawSeries& s, double train, double valid, double test) {
              SplitResult r = split(s, train, valid, test);
              return py::make_tuple(r.train, r.valid, r.test);
          },
          py::arg("series"), py::arg("train_frac") = 0.7, py::arg("valid_frac") = 0.1,
          py::arg("test_frac") = 0.2);
    m.def("fit_normalize", &fit_normalize, py::arg("train"));
    m.def("apply_normalize", &apply_normalize, py::arg("series"), py::arg("stats"));
    m.def("undo_normalize", &undo_normalize, py::arg("series"), py::arg("stats"));
    m.def("window", &window, py::arg("series"), py::arg("t_enc"), py::arg("t_dec"),
          py::arg("stride"));

    // model
    m.def("init_params", &init_params, py::arg("config"), py::arg("seed"));
    m.def("forward",
          [](const py::array_t<double>& x, const ParameterStore& params, const ModelConfig& cfg,
             std::optional<std::vector<bool>> mask) {
              Forecast fc = forward(to_tensor(x), params, cfg,
                                    mask ? *mask : full_mask(cfg.encoders));
              py::dict out;
              out["y_hat"] = to_numpy(fc.y_hat);
              out["weights"] = to_numpy(fc.trace.w);
              out["scores"] = to_numpy(fc.trace.z);
              return out;
          },
          py::arg("x"), py::arg("params"), py::arg("config"), py::arg("mask") = py::none());
    m.def("loss",
          [](const py::array_t<double>& y_hat, const py::array_t<double>& y) {
              return loss(to_tensor(y_hat), to_tensor(y));
          },
          py::arg("y_hat"), py::arg("y"));

    // training and evaluation
    m.def("train",
          [](const std::vector<SamplePair>& train_samples,
             const std::vector<SamplePair>& valid_samples, const ModelConfig& cfg,
             const TrainConfig& tcfg) {
              auto [params, report] =
                  train(make_dataset(train_samples), make_dataset(valid_samples), cfg, tcfg);
              return py::make_tuple(std::move(params), report_to_dict(report));
          },
          py::arg("train_samples"), py::arg("valid_samples"), py::arg("config"),
          py::arg("train_config"));
    m.def("evaluate",
          [](const ParameterStore& params, const ModelConfig& cfg,
             const std::vector<SamplePair>& samples) {
              return evaluate(params, cfg, make_dataset(samples));
          },
          py::arg("params"), py::arg("config"), py::arg("samples"));

    // persistence
    m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("config"),
          py::arg("params"), py::arg("seed") = 0);
    m.def("load_checkpoint", [](const std::string& path) {
        auto [cfg, params] = load_checkpoint(path);
        return py::make_tuple(cfg, std::move(params));
    });

    // baselines
    m.def("last_observed",
          [](const py::array_t<double>& x, std::size_t t_dec) {
              return to_numpy(last_observed(to_tensor(x), t_dec));
          },
          py::arg("x"), py::arg("t_dec"));
    m.def("ridge_fit",
          [](const std::vector<SamplePair>& samples, bool joint, double lambda) {
              return ridge_fit(make_dataset(samples), joint, lambda);
          },
          py::arg("samples"), py::arg("joint") = false, py::arg("lambda") = 1e-3);
    m.def("ridge_predict",
          [](const RidgeModel& model, const py::array_t<double>& x) {
              return to_numpy(ridge_predict(model, to_tensor(x)));
          },
          py::arg("model"), py::arg("x"));
    m.def("ridge_evaluate",
          [](const RidgeModel& model, const std::vector<SamplePair>& samples) {
              return ridge_evaluate(model, make_dataset(samples));
          },
          py::arg("model"), py::arg("samples"));
}
