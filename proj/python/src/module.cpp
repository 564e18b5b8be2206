#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "smg/config.hpp"
#include "smg/error.hpp"
#include "smg/features.hpp"
#include "smg/hand.hpp"
#include "smg/learn.hpp"
#include "smg/phantom.hpp"
#include "smg/store.hpp"

namespace py = pybind11;
using namespace smg;

namespace {

using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;
using U8 = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

template <class T>
py::array_t<T> vec_array(const T* p, std::size_t n) {
    py::array_t<T> out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(n)});
    std::copy(p, p + n, out.mutable_data());
    return out;
}

RunConfig config_from(const std::string& json) { return json.empty() ? RunConfig{} : parse_config(json); }

py::array_t<std::uint8_t> frame_array(const UltrasoundFrame& f) {
    py::array_t<std::uint8_t> out({static_cast<py::ssize_t>(f.height), static_cast<py::ssize_t>(f.width)});
    std::memcpy(out.mutable_data(), f.pixels.data(), f.pixels.size());
    return out;
}

UltrasoundFrame frame_from(const U8& img) {
    if (img.ndim() != 2) throw ValidationError("frame must be a 2-D uint8 array");
    UltrasoundFrame f;
    f.height = static_cast<std::uint16_t>(img.shape(0));
    f.width = static_cast<std::uint16_t>(img.shape(1));
    f.pixels.assign(img.data(), img.data() + img.size());
    return f;
}

FeatureMatrix matrix_from(const F32& X) {
    if (X.ndim() != 2) throw ValidationError("feature matrix must be 2-D");
    FeatureMatrix m(static_cast<std::size_t>(X.shape(0)), static_cast<std::size_t>(X.shape(1)));
    std::memcpy(m.data.data(), X.data(), m.data.size() * sizeof(float));
    return m;
}

py::array_t<float> matrix_array(const FeatureMatrix& m) {
    py::array_t<float> out({static_cast<py::ssize_t>(m.rows), static_cast<py::ssize_t>(m.cols)});
    std::memcpy(out.mutable_data(), m.data.data(), m.data.size() * sizeof(float));
    return out;
}

py::dict bank_dict(const FilterBank& b) {
    py::array_t<float> w({b.num_filters, b.channels, b.kh, b.kw});
    std::memcpy(w.mutable_data(), b.weights.data(), b.weights.size() * sizeof(float));
    py::dict d;
    d["weights"] = w;
    d["biases"] = vec_array(b.biases.data(), b.biases.size());
    d["provenance"] = b.provenance;
    return d;
}

FilterBank bank_from(const F32& w, const F32& biases) {
    if (w.ndim() != 4) throw ValidationError("weights must have shape (filters, channels, kh, kw)");
    FilterBank b;
    b.num_filters = static_cast<int>(w.shape(0));
    b.channels = static_cast<int>(w.shape(1));
    b.kh = static_cast<int>(w.shape(2));
    b.kw = static_cast<int>(w.shape(3));
    b.weights.assign(w.data(), w.data() + w.size());
    b.biases.assign(biases.data(), biases.data() + biases.size());
    b.provenance = "python";
    b.validate();
    return b;
}

struct PyPhantom {
    RunConfig cfg;
    PhantomModel model;

    explicit PyPhantom(const std::string& json) : cfg(config_from(json)), model(make_phantom(cfg.phantom)) {}

    py::array_t<std::uint8_t> render(int gesture, double depth, int shift, std::uint64_t seed) const {
        const auto g = gesture_from_id(gesture);
        if (!g) throw ValidationError("unknown gesture id " + std::to_string(gesture));
        return frame_array(render_frame(model, *g, depth, shift, seed));
    }

    py::tuple static_session(std::uint64_t seed) const {
        const auto d = generate_static_session(model, AcquisitionProtocol::from_config(cfg), seed);
        const auto h = static_cast<py::ssize_t>(cfg.phantom.height), w = static_cast<py::ssize_t>(cfg.phantom.width);
        py::array_t<std::uint8_t> frames({static_cast<py::ssize_t>(d.frames.size()), h, w});
        std::vector<int> labels;
        auto* px = frames.mutable_data();
        for (const auto& f : d.frames) {
            px = std::copy(f.pixels.begin(), f.pixels.end(), px);
            labels.push_back(gesture_id(f.label));
        }
        return py::make_tuple(frames, vec_array(labels.data(), labels.size()));
    }
};

struct PyExtractor {
    Extractor ex;

    PyExtractor(const std::string& bank, const std::string& json)
        : ex([&] {
              const auto cfg = config_from(json);
              return Extractor(resolve_bank(bank, cfg.features), cfg.features);
          }()) {}

    py::array_t<float> extract(const U8& frames) const {
        if (frames.ndim() == 2) {
            const auto v = ex.extract(frame_from(frames));
            return vec_array(v.values.data(), v.values.size());
        }
        if (frames.ndim() != 3) throw ValidationError("frames must be (height, width) or (n, height, width)");
        const auto n = static_cast<std::size_t>(frames.shape(0));
        const auto h = static_cast<std::size_t>(frames.shape(1)), w = static_cast<std::size_t>(frames.shape(2));
        FeatureMatrix out(n, ex.dim());
        UltrasoundFrame f;
        f.height = static_cast<std::uint16_t>(h);
        f.width = static_cast<std::uint16_t>(w);
        for (std::size_t i = 0; i < n; ++i) {
            f.pixels.assign(frames.data() + i * h * w, frames.data() + (i + 1) * h * w);
            ex.extract_into(f, out.row(i));
        }
        return matrix_array(out);
    }
};

struct PyModel {
    TrainedModel m;

    static PyModel train(const std::string& algo, const F32& X, const py::array_t<int>& y, const std::string& hyper,
                         std::uint64_t seed) {
        auto spec = AlgoSpec::make(parse_algo(algo), LearnDefaults{}, seed);
        if (!hyper.empty()) spec.hyper = apply_hyper_json(spec.algo, hyper, spec.hyper);
        const auto Xm = matrix_from(X);
        if (static_cast<std::size_t>(y.size()) != Xm.rows) throw ValidationError("labels and rows differ in length");
        return {fit(spec, Xm, std::span<const int>(y.data(), static_cast<std::size_t>(y.size())))};
    }

    py::array_t<int> predict(const F32& X) const {
        const auto labels = m.predict_labels(matrix_from(X));
        return vec_array(labels.data(), labels.size());
    }
};

} // namespace

PYBIND11_MODULE(_smg, m) {
    m.doc() = "Ultrasound gesture recognition toolkit";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    const auto invalid = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", invalid.ptr());

    m.def("gesture_names", [] {
        std::vector<std::string> out;
        for (auto g : kAllGestures) out.emplace_back(gesture_name(g));
        return out;
    });
    m.def("default_config", [] { return dump_config(RunConfig{}); }, "Default run configuration as JSON text.");

    m.def("read_filterbank", [](const std::string& path) { return bank_dict(read_filterbank(path)); }, py::arg("path"));
    m.def("write_filterbank",
          [](const std::string& path, const F32& w, const F32& b) { write_filterbank(bank_from(w, b), path); },
          py::arg("path"), py::arg("weights"), py::arg("biases"));
    m.def("gabor_bank", [] { return bank_dict(make_gabor_bank()); });

    py::class_<PyPhantom>(m, "Phantom")
        .def(py::init<const std::string&>(), py::arg("config") = "")
        .def_property_readonly("shape", [](const PyPhantom& p) { return py::make_tuple(p.cfg.phantom.height, p.cfg.phantom.width); })
        .def("render", &PyPhantom::render, py::arg("gesture"), py::arg("depth") = 1.0, py::arg("shift") = 0,
             py::arg("seed") = 0)
        .def("static_session", &PyPhantom::static_session, py::arg("seed") = 0,
             "Returns (frames[n, h, w] uint8, labels[n] int).");

    py::class_<PyExtractor>(m, "Extractor")
        .def(py::init<const std::string&, const std::string&>(), py::arg("bank") = "gabor", py::arg("config") = "")
        .def_property_readonly("dim", [](const PyExtractor& e) { return e.ex.dim(); })
        .def("extract", &PyExtractor::extract, py::arg("frames"));

    py::class_<PyModel>(m, "Model")
        .def_static("fit", &PyModel::train, py::arg("algo"), py::arg("X"), py::arg("y"), py::arg("hyper") = "",
                    py::arg("seed") = 0)
        .def_static("load", [](const std::string& path) { return PyModel{load_model(path)}; }, py::arg("path"))
        .def("save", [](const PyModel& p, const std::string& path) { save_model(p.m, path); }, py::arg("path"))
        .def("predict", &PyModel::predict, py::arg("X"))
        .def_property_readonly("algo", [](const PyModel& p) { return std::string(algo_name(p.m.algo())); })
        .def_property_readonly("n_classes", [](const PyModel& p) { return p.m.n_classes(); })
        .def_property_readonly("feature_dim", [](const PyModel& p) { return p.m.feature_dim(); })
        .def_property_readonly("hyper", [](const PyModel& p) { return hyper_to_json(p.m.algo(), p.m.spec().hyper); });

    m.def("force_cap", [] { return force_cap(HandSpec{}); }, "Per-finger force cap of the default hand, in newtons.");
}
