#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "melpc/analysis.hpp"
#include "melpc/checkpoint.hpp"
#include "melpc/cli.hpp"
#include "melpc/dsp.hpp"
#include "melpc/prednet.hpp"
#include "melpc/stats.hpp"
#include "melpc/stimuli.hpp"
#include "melpc/train.hpp"

namespace py = pybind11;
using namespace melpc;

namespace {

py::array_t<float> spec_to_array(const dsp::MelSpectrogram& spec) {
    py::array_t<float> arr({spec.rows, spec.cols});
    std::copy(spec.pixels.begin(), spec.pixels.end(), arr.mutable_data());
    return arr;
}

dsp::AudioClip clip_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> samples,
                               int sample_rate) {
    if (samples.ndim() != 1) throw DataError("samples must be a 1-D array");
    dsp::AudioClip clip;
    clip.sample_rate = sample_rate;
    clip.samples.resize(static_cast<size_t>(samples.shape(0)));
    const double* p = samples.data();
    for (size_t i = 0; i < clip.samples.size(); ++i) clip.samples[i] = static_cast<float>(p[i]);
    return clip;
}

std::vector<std::vector<float>> frames_from_array(
    py::array_t<float, py::array::c_style | py::array::forcecast> frames) {
    if (frames.ndim() != 3) throw DataError("frames must be a (n, rows, cols) array");
    const size_t n = frames.shape(0);
    const size_t per = static_cast<size_t>(frames.shape(1)) * frames.shape(2);
    std::vector<std::vector<float>> out(n);
    for (size_t i = 0; i < n; ++i) {
        out[i].assign(frames.data() + i * per, frames.data() + (i + 1) * per);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_melpc, m) {
    m.doc() = "mel-spectrogram predictive-coding pipeline (C++ core)";

    py::register_exception<DataError>(m, "DataError");
    py::register_exception<NumericError>(m, "NumericError");

    // ---- dsp ----
    py::class_<dsp::DspConfig>(m, "DspConfig")
        .def(py::init<>())
        .def_readwrite("fft_size", &dsp::DspConfig::fft_size)
        .def_readwrite("hop", &dsp::DspConfig::hop)
        .def_readwrite("n_mels", &dsp::DspConfig::n_mels)
        .def_readwrite("f_min", &dsp::DspConfig::f_min)
        .def_readwrite("f_max", &dsp::DspConfig::f_max)
        .def_readwrite("floor_db", &dsp::DspConfig::floor_db);

    m.def("hz_to_mel", &dsp::hz_to_mel, py::arg("f"));
    m.def("mel_to_hz", &dsp::mel_to_hz, py::arg("m"));
    m.def(
        "mel_spectrogram",
        [](py::array_t<double> samples, int sample_rate, const dsp::DspConfig& cfg) {
            return spec_to_array(dsp::mel_spectrogram(clip_from_array(samples, sample_rate), cfg));
        },
        py::arg("samples"), py::arg("sample_rate") = 44100, py::arg("config") = dsp::DspConfig{},
        "Quantized mel spectrogram (rows = 128 mel bands, [0,255] pixels)");
    m.def(
        "mel_spectrogram_from_wav",
        [](const std::string& path, const dsp::DspConfig& cfg) {
            return spec_to_array(dsp::mel_spectrogram(dsp::load_audio(path, true), cfg));
        },
        py::arg("path"), py::arg("config") = dsp::DspConfig{});
    m.def(
        "load_audio",
        [](const std::string& path, bool downmix) {
            dsp::AudioClip clip = dsp::load_audio(path, downmix);
            py::array_t<float> arr(static_cast<py::ssize_t>(clip.samples.size()));
            std::copy(clip.samples.begin(), clip.samples.end(), arr.mutable_data());
            return arr;
        },
        py::arg("path"), py::arg("downmix") = false);
    m.def("mel_band_of_frequency",
          [](double f, const dsp::DspConfig& cfg) { return dsp::mel_band_of_frequency(f, cfg); },
          py::arg("f"), py::arg("config") = dsp::DspConfig{});
    m.def(
        "extract_frames",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> pixels, int hop_columns,
           int frame_cols) {
            if (pixels.ndim() != 2) throw DataError("spectrogram must be 2-D");
            dsp::MelSpectrogram spec;
            spec.rows = static_cast<int>(pixels.shape(0));
            spec.cols = static_cast<int>(pixels.shape(1));
            spec.pixels.assign(pixels.data(), pixels.data() + pixels.size());
            dsp::FrameSequence seq = dsp::extract_frames(spec, hop_columns, frame_cols);
            py::array_t<float> out({static_cast<int>(seq.size()), seq.rows, seq.frame_cols});
            float* dst = out.mutable_data();
            for (const auto& f : seq.frames) dst = std::copy(f.begin(), f.end(), dst);
            return out;
        },
        py::arg("pixels"), py::arg("hop_columns"), py::arg("frame_cols") = 44);

    // ---- model ----
    py::class_<model::PredNetConfig>(m, "PredNetConfig")
        .def(py::init<>())
        .def_static("stock", &model::PredNetConfig::stock)
        .def_static("desk", &model::PredNetConfig::desk)
        .def_readwrite("channels", &model::PredNetConfig::channels)
        .def_readwrite("lambda_layer", &model::PredNetConfig::lambda_layer)
        .def_readwrite("frame_rows", &model::PredNetConfig::frame_rows)
        .def_readwrite("frame_cols", &model::PredNetConfig::frame_cols);

    py::class_<model::PredNet>(m, "PredNet")
        .def(py::init([](const model::PredNetConfig& cfg, uint64_t seed) {
                 model::PredNet net(cfg);
                 net.init_params(seed);
                 return net;
             }),
             py::arg("config") = model::PredNetConfig{}, py::arg("seed") = 0)
        .def_property_readonly("config", &model::PredNet::config)
        .def(
            "evaluate_sequence",
            [](const model::PredNet& net,
               py::array_t<float, py::array::c_style | py::array::forcecast> frames) {
                auto fr = frames_from_array(frames);
                model::SequenceResult<float> res = net.evaluate_sequence(fr);
                py::dict out;
                out["step_mse"] = py::cast(res.step_mse);
                out["loss"] = res.loss;
                py::array_t<float> preds(
                    {static_cast<int>(res.predictions.size()), net.config().frame_rows,
                     net.config().frame_cols});
                float* dst = preds.mutable_data();
                for (const auto& p : res.predictions) dst = std::copy(p.begin(), p.end(), dst);
                out["predictions"] = preds;
                return out;
            },
            py::arg("frames"),
            "Run a frame sequence; predictions[i] targets frames[i+1]")
        .def("save", [](const model::PredNet& net,
                        const std::string& path) { model::save_checkpoint(path, net); });

    m.def("load_checkpoint", &model::load_checkpoint, py::arg("path"));
    m.def(
        "pixel_mse",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> a,
           py::array_t<float, py::array::c_style | py::array::forcecast> b) {
            std::vector<float> va(a.data(), a.data() + a.size());
            std::vector<float> vb(b.data(), b.data() + b.size());
            return model::pixel_mse(va, vb);
        },
        py::arg("pred"), py::arg("target"));

    // ---- stats ----
    py::class_<stats::RegressionResult>(m, "RegressionResult")
        .def_readonly("slope", &stats::RegressionResult::slope)
        .def_readonly("intercept", &stats::RegressionResult::intercept)
        .def_readonly("r_squared", &stats::RegressionResult::r_squared)
        .def_readonly("p_value", &stats::RegressionResult::p_value)
        .def_readonly("n", &stats::RegressionResult::n)
        .def("__repr__", [](const stats::RegressionResult& r) {
            return "RegressionResult(slope=" + std::to_string(r.slope) +
                   ", r2=" + std::to_string(r.r_squared) + ", p=" + std::to_string(r.p_value) +
                   ", n=" + std::to_string(r.n) + ")";
        });
    m.def("ols_regress", &stats::ols_regress, py::arg("x"), py::arg("y"));
    m.def("student_t_cdf", &stats::student_t_cdf, py::arg("t"), py::arg("dof"));
    m.def("spearman", &stats::spearman, py::arg("x"), py::arg("y"));

    // ---- stimuli ----
    py::class_<stim::PitchSequence>(m, "PitchSequence")
        .def(py::init<>())
        .def_readwrite("id", &stim::PitchSequence::id)
        .def_readwrite("notes", &stim::PitchSequence::notes)
        .def_readwrite("note_duration", &stim::PitchSequence::note_duration)
        .def_readwrite("key", &stim::PitchSequence::key)
        .def_readwrite("seed", &stim::PitchSequence::seed);

    py::class_<stim::GenOptions>(m, "GenOptions")
        .def(py::init<>())
        .def_readwrite("n", &stim::GenOptions::n)
        .def_readwrite("key", &stim::GenOptions::key)
        .def_readwrite("note_min", &stim::GenOptions::note_min)
        .def_readwrite("note_max", &stim::GenOptions::note_max)
        .def_readwrite("notes_per_sequence", &stim::GenOptions::notes_per_sequence)
        .def_readwrite("note_duration", &stim::GenOptions::note_duration)
        .def_readwrite("seed", &stim::GenOptions::seed);

    m.def("midi_to_hz", &stim::midi_to_hz, py::arg("note"));
    m.def("parse_key", &stim::parse_key, py::arg("name"));
    m.def(
        "generate_set",
        [](const stim::GenOptions& opt) {
            std::vector<stim::PitchSequence> out;
            for (auto& s : stim::generate_set(opt).sequences) out.push_back(s);
            return out;
        },
        py::arg("options") = stim::GenOptions{});
    m.def(
        "synthesize",
        [](const stim::PitchSequence& seq, const std::vector<double>& harmonic_amps) {
            stim::Timbre timbre;
            if (!harmonic_amps.empty()) timbre.harmonic_amps = harmonic_amps;
            dsp::AudioClip clip = stim::synthesize(seq, timbre);
            py::array_t<float> arr(static_cast<py::ssize_t>(clip.samples.size()));
            std::copy(clip.samples.begin(), clip.samples.end(), arr.mutable_data());
            return arr;
        },
        py::arg("sequence"), py::arg("harmonic_amps") = std::vector<double>{});

    // ---- cli passthrough ----
    m.def("run_cli", [](const std::vector<std::string>& args) { return cli::run_cli(args); },
          py::arg("args"), "Invoke the melpc CLI in-process; returns the exit code");
}
