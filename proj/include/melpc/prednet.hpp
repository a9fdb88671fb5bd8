#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "melpc/common.hpp"
#include "melpc/rng.hpp"
#include "melpc/tensor.hpp"

namespace melpc::model {

// Hyperparameters of the 4-level predictive-coding hierarchy. channels[l] is
// the A (and R) channel count of layer l; error tensors carry 2x that.
struct PredNetConfig {
    std::vector<int> channels = {1, 32, 64, 128};
    std::vector<double> lambda_layer = {1.0, 0.0, 0.0, 0.0};
    int frame_rows = 128;
    int frame_cols = 44;

    int num_layers() const { return static_cast<int>(channels.size()); }
    void validate() const;

    // Spatial dims per layer: ceil-mode halving from the frame size.
    std::vector<std::pair<int, int>> layer_dims() const;

    std::string serialize() const;
    static PredNetConfig parse(const std::string& text);

    static PredNetConfig stock() { return PredNetConfig{}; }
    static PredNetConfig desk() {
        PredNetConfig cfg;
        cfg.channels = {1, 16, 32, 64};
        return cfg;
    }
};

template <typename S>
struct ParamEntry {
    std::string name;
    nn::Shape shape;
    std::vector<S> value;
    std::vector<S> grad;  // accumulated across a batch
    std::vector<S> m, v;  // Adam moments
};

// Per-layer recurrent state as raw values: representation R, LSTM cell C and
// the rectified error pair E (always elementwise >= 0).
template <typename S>
struct LayerState {
    std::vector<S> R, C, E;
};

template <typename S>
struct StepResult {
    std::vector<S> prediction;             // layer-0 prediction in [0,255]
    std::vector<double> layer_error_mean;  // mean(E_l) per layer
};

template <typename S>
struct SequenceResult {
    // predictions[i] is the prediction of frame i+1 (in [0,255] space).
    std::vector<std::vector<S>> predictions;
    // step_mse[i] is the pixel MSE of predictions[i] against frame i+1.
    std::vector<double> step_mse;
    double loss = 0.0;
};

template <typename S>
class PredNetT {
  public:
    explicit PredNetT(PredNetConfig cfg);

    void init_params(uint64_t seed);

    const PredNetConfig& config() const { return cfg_; }
    std::vector<ParamEntry<S>>& params() { return params_; }
    const std::vector<ParamEntry<S>>& params() const { return params_; }
    ParamEntry<S>* find_param(const std::string& name);

    int64_t adam_step_count() const { return adam_step_; }
    void set_adam_step_count(int64_t t) { adam_step_ = t; }

    std::vector<LayerState<S>> zero_state() const;

    // One time step: update representations top-down from the previous
    // errors, emit the layer-0 prediction, then compute the new error stack
    // bottom-up against the given frame (pixels in [0,255]).
    StepResult<S> step(std::vector<LayerState<S>>& state, const std::vector<S>& frame) const;

    // Whole sequence without a tape; memory stays bounded per step.
    SequenceResult<S> evaluate_sequence(std::span<const std::vector<S>> frames) const;

    // Whole sequence on a recording graph (BPTT). Returns the loss node; call
    // g.backward(loss_id) then accumulate_grads(g, param_ids).
    struct Taped {
        SequenceResult<S> result;
        nn::Id loss_id = nn::kNoId;
        std::vector<nn::Id> param_ids;
    };
    Taped forward_sequence(nn::Graph<S>& g, std::span<const std::vector<S>> frames) const;

    // Adds the tape's parameter gradients into the entries' grad buffers.
    void accumulate_grads(const nn::Graph<S>& g, const std::vector<nn::Id>& param_ids);
    void zero_grads();

    // Bias-corrected Adam over all parameters from the accumulated grads.
    void adam_update(S lr, S beta1 = S(0.9), S beta2 = S(0.999), S eps = S(1e-8));

  private:
    struct LayerIds {
        nn::Id R, C, E;
    };
    struct LayerParams {
        int lstm_wx, lstm_wh, lstm_b;
        int pred_w, pred_b;
        int target_w = -1, target_b = -1;  // layers >= 1
    };
    struct StepIds {
        nn::Id prediction;
        std::vector<nn::Id> err_mean;
    };

    std::vector<nn::Id> bind_params(nn::Graph<S>& g) const;
    StepIds step_on_graph(nn::Graph<S>& g, const std::vector<nn::Id>& pids,
                          std::vector<LayerIds>& st, nn::Id frame) const;
    std::vector<LayerIds> state_to_graph(nn::Graph<S>& g,
                                         const std::vector<LayerState<S>>& state) const;

    int add_param(const std::string& name, const nn::Shape& shape);

    PredNetConfig cfg_;
    std::vector<std::pair<int, int>> dims_;
    std::vector<LayerParams> layer_params_;
    std::vector<ParamEntry<S>> params_;
    int64_t adam_step_ = 0;
};

using PredNet = PredNetT<float>;

// Mean squared difference in [0,255] pixel units, double accumulation.
double pixel_mse(const std::vector<float>& a, const std::vector<float>& b);
double pixel_mse(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------------------
// template implementation

template <typename S>
PredNetT<S>::PredNetT(PredNetConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    dims_ = cfg_.layer_dims();
    const int n_layers = cfg_.num_layers();
    layer_params_.resize(n_layers);
    for (int l = 0; l < n_layers; ++l) {
        const int a = cfg_.channels[l];
        const int top_ch = (l + 1 < n_layers) ? cfg_.channels[l + 1] : 0;
        const int in_ch = 2 * a + top_ch;
        const std::string p = "l" + std::to_string(l) + ".";
        LayerParams& lp = layer_params_[l];
        lp.lstm_wx = add_param(p + "lstm.wx", nn::Shape::kernel(4 * a, in_ch, 3, 3));
        lp.lstm_wh = add_param(p + "lstm.wh", nn::Shape::kernel(4 * a, a, 3, 3));
        lp.lstm_b = add_param(p + "lstm.b", nn::Shape::vec(4 * a));
        lp.pred_w = add_param(p + "pred.w", nn::Shape::kernel(a, a, 3, 3));
        lp.pred_b = add_param(p + "pred.b", nn::Shape::vec(a));
        if (l >= 1) {
            lp.target_w = add_param(p + "target.w", nn::Shape::kernel(a, 2 * cfg_.channels[l - 1], 3, 3));
            lp.target_b = add_param(p + "target.b", nn::Shape::vec(a));
        }
    }
}

template <typename S>
int PredNetT<S>::add_param(const std::string& name, const nn::Shape& shape) {
    ParamEntry<S> e;
    e.name = name;
    e.shape = shape;
    e.value.assign(shape.numel(), S(0));
    e.grad.assign(shape.numel(), S(0));
    e.m.assign(shape.numel(), S(0));
    e.v.assign(shape.numel(), S(0));
    params_.push_back(std::move(e));
    return static_cast<int>(params_.size() - 1);
}

template <typename S>
ParamEntry<S>* PredNetT<S>::find_param(const std::string& name) {
    for (auto& e : params_)
        if (e.name == name) return &e;
    return nullptr;
}

template <typename S>
void PredNetT<S>::init_params(uint64_t seed) {
    Rng rng(seed);
    for (auto& e : params_) {
        if (e.shape.rank == 4) {
            // Glorot-style uniform from kernel fan-in/out.
            const double fan_in = static_cast<double>(e.shape.d[1]) * e.shape.d[2] * e.shape.d[3];
            const double fan_out = static_cast<double>(e.shape.d[0]) * e.shape.d[2] * e.shape.d[3];
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            for (auto& v : e.value) v = static_cast<S>(rng.uniform(-limit, limit));
        } else {
            std::fill(e.value.begin(), e.value.end(), S(0));
        }
    }
    // Forget-gate bias 1.0; gate order is [i, f, o, g].
    for (int l = 0; l < cfg_.num_layers(); ++l) {
        ParamEntry<S>& b = params_[layer_params_[l].lstm_b];
        const int a = cfg_.channels[l];
        for (int i = a; i < 2 * a; ++i) b.value[i] = S(1);
    }
    adam_step_ = 0;
}

template <typename S>
std::vector<LayerState<S>> PredNetT<S>::zero_state() const {
    std::vector<LayerState<S>> st(cfg_.num_layers());
    for (int l = 0; l < cfg_.num_layers(); ++l) {
        const auto [h, w] = dims_[l];
        const int a = cfg_.channels[l];
        st[l].R.assign(static_cast<size_t>(a) * h * w, S(0));
        st[l].C.assign(static_cast<size_t>(a) * h * w, S(0));
        st[l].E.assign(static_cast<size_t>(2 * a) * h * w, S(0));
    }
    return st;
}

template <typename S>
std::vector<nn::Id> PredNetT<S>::bind_params(nn::Graph<S>& g) const {
    std::vector<nn::Id> ids;
    ids.reserve(params_.size());
    for (const auto& e : params_) ids.push_back(g.leaf(e.shape, e.value.data(), true));
    return ids;
}

template <typename S>
typename PredNetT<S>::StepIds PredNetT<S>::step_on_graph(nn::Graph<S>& g,
                                                         const std::vector<nn::Id>& pids,
                                                         std::vector<LayerIds>& st,
                                                         nn::Id frame) const {
    const int n_layers = cfg_.num_layers();
    if (g.shape(frame) != nn::Shape::chw(1, cfg_.frame_rows, cfg_.frame_cols))
        throw NumericError("step: frame shape " + g.shape(frame).str() + " does not match model " +
                           nn::Shape::chw(1, cfg_.frame_rows, cfg_.frame_cols).str());

    // Top-down sweep: each layer folds its previous error and the upsampled
    // representation from above into its convLSTM.
    for (int l = n_layers - 1; l >= 0; --l) {
        const LayerParams& lp = layer_params_[l];
        const auto [h, w] = dims_[l];
        nn::Id x_in = st[l].E;
        if (l + 1 < n_layers) x_in = g.concat(st[l].E, g.upsample2(st[l + 1].R, h, w));
        nn::Id gates = g.add(g.conv2d(x_in, pids[lp.lstm_wx], pids[lp.lstm_b]),
                             g.conv2d(st[l].R, pids[lp.lstm_wh]));
        const int a = cfg_.channels[l];
        nn::Id gi = g.sigmoid(g.slice_ch(gates, 0, a));
        nn::Id gf = g.sigmoid(g.slice_ch(gates, a, 2 * a));
        nn::Id go = g.sigmoid(g.slice_ch(gates, 2 * a, 3 * a));
        nn::Id gg = g.tanh(g.slice_ch(gates, 3 * a, 4 * a));
        nn::Id c_new = g.add(g.hadamard(gf, st[l].C), g.hadamard(gi, gg));
        nn::Id r_new = g.hadamard(go, g.tanh(c_new));
        st[l].C = c_new;
        st[l].R = r_new;
    }

    // Bottom-up sweep: predict, compare, and feed rectified errors upward.
    StepIds out;
    out.err_mean.resize(n_layers);
    nn::Id a_cur = g.scale(frame, S(1) / S(255));
    for (int l = 0; l < n_layers; ++l) {
        const LayerParams& lp = layer_params_[l];
        if (l > 0)
            a_cur = g.maxpool2(g.relu(g.conv2d(st[l - 1].E, pids[lp.target_w], pids[lp.target_b])));
        nn::Id ahat = g.conv2d(st[l].R, pids[lp.pred_w], pids[lp.pred_b]);
        ahat = (l == 0) ? g.clamp(g.relu(ahat), S(0), S(1)) : g.relu(ahat);
        nn::Id e = g.concat(g.relu(g.sub(a_cur, ahat)), g.relu(g.sub(ahat, a_cur)));
        st[l].E = e;
        out.err_mean[l] = g.mean(e);
        if (l == 0) out.prediction = g.scale(ahat, S(255));
    }
    return out;
}

template <typename S>
typename std::vector<typename PredNetT<S>::LayerIds> PredNetT<S>::state_to_graph(
    nn::Graph<S>& g, const std::vector<LayerState<S>>& state) const {
    if (static_cast<int>(state.size()) != cfg_.num_layers())
        throw NumericError("state has wrong number of layers");
    std::vector<LayerIds> st(state.size());
    for (int l = 0; l < cfg_.num_layers(); ++l) {
        const auto [h, w] = dims_[l];
        const int a = cfg_.channels[l];
        if (state[l].R.size() != static_cast<size_t>(a) * h * w ||
            state[l].C.size() != state[l].R.size() ||
            state[l].E.size() != 2 * state[l].R.size())
            throw NumericError("state tensors of layer " + std::to_string(l) +
                               " do not match model shapes");
        st[l].R = g.leaf(nn::Shape::chw(a, h, w), state[l].R.data(), false);
        st[l].C = g.leaf(nn::Shape::chw(a, h, w), state[l].C.data(), false);
        st[l].E = g.leaf(nn::Shape::chw(2 * a, h, w), state[l].E.data(), false);
    }
    return st;
}

template <typename S>
StepResult<S> PredNetT<S>::step(std::vector<LayerState<S>>& state,
                                const std::vector<S>& frame) const {
    nn::Graph<S> g(/*record=*/false);
    auto pids = bind_params(g);
    auto st = state_to_graph(g, state);
    nn::Id frame_id =
        g.leaf(nn::Shape::chw(1, cfg_.frame_rows, cfg_.frame_cols), frame, false);
    StepIds ids = step_on_graph(g, pids, st, frame_id);

    StepResult<S> res;
    res.prediction = g.value(ids.prediction);
    res.layer_error_mean.resize(cfg_.num_layers());
    for (int l = 0; l < cfg_.num_layers(); ++l) {
        res.layer_error_mean[l] = static_cast<double>(g.value(ids.err_mean[l])[0]);
        state[l].R = g.value(st[l].R);
        state[l].C = g.value(st[l].C);
        state[l].E = g.value(st[l].E);
    }
    return res;
}

template <typename S>
SequenceResult<S> PredNetT<S>::evaluate_sequence(
    std::span<const std::vector<S>> frames) const {
    if (frames.size() < 2) throw DataError("sequence needs at least 2 frames");
    auto state = zero_state();
    SequenceResult<S> res;
    double loss = 0.0;
    for (size_t t = 0; t < frames.size(); ++t) {
        StepResult<S> sr = step(state, frames[t]);
        if (t >= 1) {  // lambda_time(0) = 0
            res.step_mse.push_back(pixel_mse(sr.prediction, frames[t]));
            res.predictions.push_back(std::move(sr.prediction));
            for (int l = 0; l < cfg_.num_layers(); ++l)
                if (cfg_.lambda_layer[l] != 0.0)
                    loss += cfg_.lambda_layer[l] * sr.layer_error_mean[l];
        }
    }
    res.loss = loss;
    return res;
}

template <typename S>
typename PredNetT<S>::Taped PredNetT<S>::forward_sequence(
    nn::Graph<S>& g, std::span<const std::vector<S>> frames) const {
    if (frames.size() < 2) throw DataError("sequence needs at least 2 frames");
    Taped taped;
    taped.param_ids = bind_params(g);

    std::vector<LayerIds> st;
    {
        auto zero = zero_state();
        st = state_to_graph(g, zero);
    }
    nn::Id loss = nn::kNoId;
    const nn::Shape frame_shape = nn::Shape::chw(1, cfg_.frame_rows, cfg_.frame_cols);
    for (size_t t = 0; t < frames.size(); ++t) {
        nn::Id frame_id = g.leaf(frame_shape, frames[t], false);
        StepIds ids = step_on_graph(g, taped.param_ids, st, frame_id);
        if (t >= 1) {
            taped.result.predictions.push_back(g.value(ids.prediction));
            taped.result.step_mse.push_back(pixel_mse(g.value(ids.prediction), frames[t]));
            for (int l = 0; l < cfg_.num_layers(); ++l) {
                if (cfg_.lambda_layer[l] == 0.0) continue;
                nn::Id term = g.scale(ids.err_mean[l], static_cast<S>(cfg_.lambda_layer[l]));
                loss = (loss == nn::kNoId) ? term : g.add(loss, term);
            }
        }
    }
    taped.loss_id = loss;
    taped.result.loss = static_cast<double>(g.value(loss)[0]);
    return taped;
}

template <typename S>
void PredNetT<S>::accumulate_grads(const nn::Graph<S>& g, const std::vector<nn::Id>& param_ids) {
    if (param_ids.size() != params_.size())
        throw NumericError("accumulate_grads: parameter id list does not match model");
    for (size_t i = 0; i < params_.size(); ++i) {
        std::vector<S> pg = g.grad(param_ids[i]);
        auto& acc = params_[i].grad;
        for (size_t j = 0; j < acc.size(); ++j) acc[j] += pg[j];
    }
}

template <typename S>
void PredNetT<S>::zero_grads() {
    for (auto& e : params_) std::fill(e.grad.begin(), e.grad.end(), S(0));
}

template <typename S>
void PredNetT<S>::adam_update(S lr, S beta1, S beta2, S eps) {
    adam_step_ += 1;
    const double t = static_cast<double>(adam_step_);
    const S bc1 = static_cast<S>(1.0 - std::pow(static_cast<double>(beta1), t));
    const S bc2 = static_cast<S>(1.0 - std::pow(static_cast<double>(beta2), t));
    for (auto& e : params_) {
        for (size_t i = 0; i < e.value.size(); ++i) {
            const S gi = e.grad[i];
            e.m[i] = beta1 * e.m[i] + (S(1) - beta1) * gi;
            e.v[i] = beta2 * e.v[i] + (S(1) - beta2) * gi * gi;
            const S mhat = e.m[i] / bc1;
            const S vhat = e.v[i] / bc2;
            e.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace melpc::model
