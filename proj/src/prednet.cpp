#include "melpc/prednet.hpp"

#include <sstream>

namespace melpc::model {

void PredNetConfig::validate() const {
    if (channels.empty()) throw DataError("model needs at least one layer");
    if (channels[0] != 1) throw DataError("layer 0 must have 1 channel (one spectrogram plane)");
    for (int c : channels)
        if (c < 1) throw DataError("channel counts must be positive");
    if (lambda_layer.size() != channels.size())
        throw DataError("lambda_layer length must match the layer count");
    for (double l : lambda_layer)
        if (l < 0) throw DataError("lambda_layer weights must be >= 0");
    if (frame_rows < 2 || frame_cols < 2) throw DataError("frame dims too small");
    // Every layer needs at least 2x2 input for the 2x2 pooling to make sense.
    auto dims = layer_dims();
    if (dims.back().first < 1 || dims.back().second < 1)
        throw DataError("frame too small for this many layers");
}

std::vector<std::pair<int, int>> PredNetConfig::layer_dims() const {
    std::vector<std::pair<int, int>> dims;
    int h = frame_rows, w = frame_cols;
    for (size_t l = 0; l < channels.size(); ++l) {
        dims.emplace_back(h, w);
        h = (h + 1) / 2;
        w = (w + 1) / 2;
    }
    return dims;
}

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::string join_doubles(const std::vector<double>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i];
    }
    return os.str();
}

}  // namespace

std::string PredNetConfig::serialize() const {
    std::ostringstream os;
    os << "channels=" << join_ints(channels) << "\n";
    os << "lambda_layer=" << join_doubles(lambda_layer) << "\n";
    os << "frame_rows=" << frame_rows << "\n";
    os << "frame_cols=" << frame_cols << "\n";
    return os.str();
}

PredNetConfig PredNetConfig::parse(const std::string& text) {
    PredNetConfig cfg;
    cfg.channels.clear();
    cfg.lambda_layer.clear();
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("bad config line: " + line);
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        std::istringstream vs(val);
        std::string item;
        if (key == "channels") {
            while (std::getline(vs, item, ',')) cfg.channels.push_back(std::stoi(item));
        } else if (key == "lambda_layer") {
            while (std::getline(vs, item, ',')) cfg.lambda_layer.push_back(std::stod(item));
        } else if (key == "frame_rows") {
            cfg.frame_rows = std::stoi(val);
        } else if (key == "frame_cols") {
            cfg.frame_cols = std::stoi(val);
        } else {
            throw DataError("unknown model config key: " + key);
        }
    }
    cfg.validate();
    return cfg;
}

namespace {

template <typename S>
double mse_impl(const std::vector<S>& a, const std::vector<S>& b) {
    if (a.size() != b.size())
        throw DataError("pixel_mse: size mismatch " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
    if (a.empty()) throw DataError("pixel_mse: empty tensors");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace

double pixel_mse(const std::vector<float>& a, const std::vector<float>& b) {
    return mse_impl(a, b);
}

double pixel_mse(const std::vector<double>& a, const std::vector<double>& b) {
    return mse_impl(a, b);
}

}  // namespace melpc::model
