#pragma once

#include <cmath>
#include <vector>

#include "melpc/prednet.hpp"
#include "melpc/rng.hpp"

// Finite-difference oracle for the full network: perturb every parameter of a
// PredNetT<double> and compare the BPTT gradients of the sequence loss
// against central differences (step 1e-5).
namespace test_util {

struct GradCheckReport {
    double max_rel_error = 0.0;
    int checked = 0;
};

inline double sequence_loss(melpc::model::PredNetT<double>& net,
                            const std::vector<std::vector<double>>& frames) {
    melpc::nn::Graph<double> g(/*record=*/false);
    // forward_sequence needs a recording graph only for backward; value-only
    // evaluation reuses the eval path.
    return net.evaluate_sequence(frames).loss;
}

inline GradCheckReport gradcheck_network(melpc::model::PredNetT<double>& net,
                                         const std::vector<std::vector<double>>& frames,
                                         double step = 1e-5) {
    melpc::nn::Graph<double> g;
    auto taped = net.forward_sequence(g, frames);
    g.backward(taped.loss_id);

    GradCheckReport report;
    auto& params = net.params();
    for (size_t p = 0; p < params.size(); ++p) {
        const std::vector<double> analytic = g.grad(taped.param_ids[p]);
        for (size_t i = 0; i < params[p].value.size(); ++i) {
            const double orig = params[p].value[i];
            params[p].value[i] = orig + step;
            const double up = sequence_loss(net, frames);
            params[p].value[i] = orig - step;
            const double down = sequence_loss(net, frames);
            params[p].value[i] = orig;
            const double numeric = (up - down) / (2.0 * step);
            const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-3});
            report.max_rel_error =
                std::max(report.max_rel_error, std::fabs(analytic[i] - numeric) / denom);
            ++report.checked;
        }
    }
    return report;
}

inline std::vector<std::vector<double>> random_frames(int n, int rows, int cols, uint64_t seed) {
    melpc::Rng rng(seed);
    std::vector<std::vector<double>> frames(n);
    for (auto& f : frames) {
        f.resize(static_cast<size_t>(rows) * cols);
        for (auto& v : f) v = rng.uniform(0.0, 255.0);
    }
    return frames;
}

// Zero-initialized biases put every pre-activation exactly on the ReLU kink
// at t=0, where central differences are undefined; jitter all parameters so
// the check measures the gradients, not the kinks.
inline void randomize_all_params(melpc::model::PredNetT<double>& net, uint64_t seed) {
    melpc::Rng rng(seed);
    for (auto& e : net.params())
        for (auto& v : e.value) v += rng.uniform(-0.05, 0.05);
}

}  // namespace test_util
