#include "melpc/runconfig.hpp"

#include <cctype>
#include <cstring>
#include <sstream>

#include "melpc/common.hpp"
#include "melpc/csv.hpp"
#include "melpc/io_util.hpp"

extern char** environ;

namespace melpc {

void RunConfig::validate() const {
    train.validate();
    if (eval_hop < 1) throw DataError("eval.hop must be >= 1");
    if (analysis_x_max < 1) throw DataError("analysis.x_max must be >= 1");
    if (analysis_group_size < 1) throw DataError("analysis.group_size must be >= 1");
    if (analysis_context_x < 1) throw DataError("analysis.context_x must be >= 1");
    if (analysis_interval_x.empty()) throw DataError("analysis.interval_x must be non-empty");
    if (corpus_n < 1) throw DataError("corpus.n must be >= 1");
    if (corpus_clip_seconds <= 0) throw DataError("corpus.clip_seconds must be positive");
}

namespace {

int to_int(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw DataError("config key " + key + ": not an integer: " + v);
    }
}

uint64_t to_u64(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw DataError("config key " + key + ": not an unsigned integer: " + v);
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw DataError("config key " + key + ": not a number: " + v);
    }
}

std::vector<int> to_int_list(const std::string& v, const std::string& key) {
    std::vector<int> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(to_int(item, key));
    if (out.empty()) throw DataError("config key " + key + ": empty list");
    return out;
}

std::string from_int_list(const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::vector<ConfigKey> build_keys() {
    std::vector<ConfigKey> keys;
    auto add = [&keys](std::string name, std::string help, auto get, auto set) {
        keys.push_back(ConfigKey{std::move(name), std::move(help), get, set});
    };

    // dsp
    add("dsp.fft_size", "STFT size in samples (power of two)",
        [](const RunConfig& c) { return std::to_string(c.train.dsp.fft_size); },
        [](RunConfig& c, const std::string& v) { c.train.dsp.fft_size = to_int(v, "dsp.fft_size"); });
    add("dsp.hop", "STFT hop in samples",
        [](const RunConfig& c) { return std::to_string(c.train.dsp.hop); },
        [](RunConfig& c, const std::string& v) { c.train.dsp.hop = to_int(v, "dsp.hop"); });
    add("dsp.n_mels", "number of mel bands",
        [](const RunConfig& c) { return std::to_string(c.train.dsp.n_mels); },
        [](RunConfig& c, const std::string& v) { c.train.dsp.n_mels = to_int(v, "dsp.n_mels"); });
    add("dsp.f_min", "lowest filterbank frequency (Hz)",
        [](const RunConfig& c) { return format_double(c.train.dsp.f_min); },
        [](RunConfig& c, const std::string& v) { c.train.dsp.f_min = to_double(v, "dsp.f_min"); });
    add("dsp.f_max", "highest filterbank frequency (Hz), must be Nyquist",
        [](const RunConfig& c) { return format_double(c.train.dsp.f_max); },
        [](RunConfig& c, const std::string& v) { c.train.dsp.f_max = to_double(v, "dsp.f_max"); });
    add("dsp.floor_db", "dB floor mapped to pixel 0",
        [](const RunConfig& c) { return format_double(c.train.dsp.floor_db); },
        [](RunConfig& c, const std::string& v) {
            c.train.dsp.floor_db = to_double(v, "dsp.floor_db");
        });

    // model
    add("model.channel_preset", "layer channels: stock (1,32,64,128) or desk (1,16,32,64)",
        [](const RunConfig& c) { return c.train.channel_preset; },
        [](RunConfig& c, const std::string& v) { c.train.channel_preset = v; });
    add("model.lambda_preset", "layer loss weights: prediction (1,0,0,0) or weighted (1,.1,.1,.1)",
        [](const RunConfig& c) { return c.train.lambda_preset; },
        [](RunConfig& c, const std::string& v) { c.train.lambda_preset = v; });

    // train
    add("train.frame_cols", "frame width in spectrogram columns",
        [](const RunConfig& c) { return std::to_string(c.train.frame_cols); },
        [](RunConfig& c, const std::string& v) { c.train.frame_cols = to_int(v, "train.frame_cols"); });
    add("train.frame_hop", "columns between training frames",
        [](const RunConfig& c) { return std::to_string(c.train.frame_hop); },
        [](RunConfig& c, const std::string& v) { c.train.frame_hop = to_int(v, "train.frame_hop"); });
    add("train.sequence_length", "frames per BPTT sequence",
        [](const RunConfig& c) { return std::to_string(c.train.sequence_length); },
        [](RunConfig& c, const std::string& v) {
            c.train.sequence_length = to_int(v, "train.sequence_length");
        });
    add("train.batch_size", "sequences per optimizer step",
        [](const RunConfig& c) { return std::to_string(c.train.batch_size); },
        [](RunConfig& c, const std::string& v) { c.train.batch_size = to_int(v, "train.batch_size"); });
    add("train.epochs", "training epochs",
        [](const RunConfig& c) { return std::to_string(c.train.epochs); },
        [](RunConfig& c, const std::string& v) { c.train.epochs = to_int(v, "train.epochs"); });
    add("train.learning_rate", "Adam learning rate",
        [](const RunConfig& c) { return format_double(c.train.learning_rate); },
        [](RunConfig& c, const std::string& v) {
            c.train.learning_rate = to_double(v, "train.learning_rate");
        });
    add("train.seed", "RNG seed for init, shuffles and splits",
        [](const RunConfig& c) { return std::to_string(c.train.seed); },
        [](RunConfig& c, const std::string& v) { c.train.seed = to_u64(v, "train.seed"); });
    add("train.patience", "early-stop patience in epochs",
        [](const RunConfig& c) { return std::to_string(c.train.patience); },
        [](RunConfig& c, const std::string& v) { c.train.patience = to_int(v, "train.patience"); });
    add("train.workers", "worker threads (1 = fully serial)",
        [](const RunConfig& c) { return std::to_string(c.train.workers); },
        [](RunConfig& c, const std::string& v) { c.train.workers = to_int(v, "train.workers"); });
    add("train.val_fraction", "fraction of clips tagged val",
        [](const RunConfig& c) { return format_double(c.train.val_fraction); },
        [](RunConfig& c, const std::string& v) {
            c.train.val_fraction = to_double(v, "train.val_fraction");
        });

    // evaluation / analysis
    add("eval.hop", "frame hop (columns) for evaluation",
        [](const RunConfig& c) { return std::to_string(c.eval_hop); },
        [](RunConfig& c, const std::string& v) { c.eval_hop = to_int(v, "eval.hop"); });
    add("analysis.x_max", "largest time lapse x (columns)",
        [](const RunConfig& c) { return std::to_string(c.analysis_x_max); },
        [](RunConfig& c, const std::string& v) { c.analysis_x_max = to_int(v, "analysis.x_max"); });
    add("analysis.group_size", "sequences per musical/non-musical group",
        [](const RunConfig& c) { return std::to_string(c.analysis_group_size); },
        [](RunConfig& c, const std::string& v) {
            c.analysis_group_size = to_int(v, "analysis.group_size");
        });
    add("analysis.context_x", "x for the context-effect CSV",
        [](const RunConfig& c) { return std::to_string(c.analysis_context_x); },
        [](RunConfig& c, const std::string& v) {
            c.analysis_context_x = to_int(v, "analysis.context_x");
        });
    add("analysis.interval_x", "comma-separated x list for interval/context regressions",
        [](const RunConfig& c) { return from_int_list(c.analysis_interval_x); },
        [](RunConfig& c, const std::string& v) {
            c.analysis_interval_x = to_int_list(v, "analysis.interval_x");
        });

    // stimuli
    add("stim.n", "number of generated stimuli",
        [](const RunConfig& c) { return std::to_string(c.stim.n); },
        [](RunConfig& c, const std::string& v) { c.stim.n = to_int(v, "stim.n"); });
    add("stim.key", "key of generated stimuli, e.g. C-major",
        [](const RunConfig& c) { return c.stim.key; },
        [](RunConfig& c, const std::string& v) { c.stim.key = v; });
    add("stim.note_min", "lowest MIDI note",
        [](const RunConfig& c) { return std::to_string(c.stim.note_min); },
        [](RunConfig& c, const std::string& v) { c.stim.note_min = to_int(v, "stim.note_min"); });
    add("stim.note_max", "highest MIDI note",
        [](const RunConfig& c) { return std::to_string(c.stim.note_max); },
        [](RunConfig& c, const std::string& v) { c.stim.note_max = to_int(v, "stim.note_max"); });
    add("stim.note_duration", "note duration in seconds",
        [](const RunConfig& c) { return format_double(c.stim.note_duration); },
        [](RunConfig& c, const std::string& v) {
            c.stim.note_duration = to_double(v, "stim.note_duration");
        });
    add("stim.seed", "stimulus generator seed",
        [](const RunConfig& c) { return std::to_string(c.stim.seed); },
        [](RunConfig& c, const std::string& v) { c.stim.seed = to_u64(v, "stim.seed"); });

    // synthetic corpus
    add("corpus.n", "number of synthetic corpus clips",
        [](const RunConfig& c) { return std::to_string(c.corpus_n); },
        [](RunConfig& c, const std::string& v) { c.corpus_n = to_int(v, "corpus.n"); });
    add("corpus.seed", "synthetic corpus seed",
        [](const RunConfig& c) { return std::to_string(c.corpus_seed); },
        [](RunConfig& c, const std::string& v) { c.corpus_seed = to_u64(v, "corpus.seed"); });
    add("corpus.clip_seconds", "synthetic corpus clip length",
        [](const RunConfig& c) { return format_double(c.corpus_clip_seconds); },
        [](RunConfig& c, const std::string& v) {
            c.corpus_clip_seconds = to_double(v, "corpus.clip_seconds");
        });

    return keys;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = build_keys();
    return keys;
}

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& k : config_keys()) {
        if (k.name == key) {
            k.set(cfg, value);
            return;
        }
    }
    throw DataError("unknown config key: " + key);
}

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(start, eq - start);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        std::string value = line.substr(eq + 1);
        size_t vstart = value.find_first_not_of(" \t");
        value = vstart == std::string::npos ? "" : value.substr(vstart);
        set_config_key(cfg, key, value);
    }
}

void apply_env_overrides(RunConfig& cfg) {
    constexpr const char* kPrefix = "MELPC_";
    for (char** env = environ; *env; ++env) {
        const char* entry = *env;
        if (std::strncmp(entry, kPrefix, std::strlen(kPrefix)) != 0) continue;
        const char* eq = std::strchr(entry, '=');
        if (!eq) continue;
        std::string env_name(entry + std::strlen(kPrefix), eq - entry - std::strlen(kPrefix));
        std::string value(eq + 1);
        bool matched = false;
        for (const auto& k : config_keys()) {
            std::string mapped;
            for (char c : k.name)
                mapped += (c == '.') ? '_' : static_cast<char>(std::toupper(c));
            if (mapped == env_name) {
                k.set(cfg, value);
                matched = true;
                break;
            }
        }
        if (!matched)
            throw DataError("unknown config key in environment: " + std::string(kPrefix) +
                            env_name);
    }
}

std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& k : config_keys()) out += k.name + "=" + k.get(cfg) + "\n";
    return out;
}

}  // namespace melpc
