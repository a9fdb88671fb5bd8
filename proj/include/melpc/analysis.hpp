#pragma once

#include <map>
#include <string>
#include <vector>

#include "melpc/dsp.hpp"
#include "melpc/prednet.hpp"
#include "melpc/stats.hpp"
#include "melpc/stimuli.hpp"

namespace melpc::analysis {

// One stimulus run through a frozen model at evaluation hop (1 column).
// mse_of_frame[j] is the pixel MSE of the prediction of frame j (the frame
// starting at column j); frame 0 has no prediction and holds NaN.
struct StimulusEval {
    std::string id;
    int n_frames = 0;
    int frame_cols = 0;
    int source_columns = 0;
    double column_duration = 0.0;
    std::vector<double> mse_of_frame;
    double total_error = 0.0;  // sum of per-step pixel MSE over the clip
};

StimulusEval evaluate_stimulus(const model::PredNet& net, const std::string& id,
                               const dsp::MelSpectrogram& spec, int eval_hop = 1);

// Sum of per-step pixel MSE over all predictions in the clip.
double total_error(const model::PredNet& net, const dsp::MelSpectrogram& spec);

// Rank maps are id -> rank with 1 = least musical, N = most musical.
std::map<std::string, int> ranking_from_ratings(const stim::StimulusSet& set);

// Proxy when no human ratings exist: order by mean interval size (bands);
// the smallest mean interval gets rank N ("most musical").
std::map<std::string, int> proxy_ranking_by_interval(const stim::StimulusSet& set,
                                                     const dsp::DspConfig& cfg);

// OLS of per-sequence total error against rank.
stats::RegressionResult musicality_regression(const std::vector<double>& errors,
                                              const std::vector<int>& ranks);

// group: "musical", "non-musical", or "" for ungrouped middle sequences.
std::map<std::string, std::string> assign_groups(const std::map<std::string, int>& ranking,
                                                 int group_size);

struct TransitionError {
    std::string sequence_id;
    int transition_index = 0;  // 1..notes-1
    int x = 0;                 // time lapse in columns after the onset
    double mse = 0.0;
    int interval_bands = 0;
    std::string group;
};

struct GroupCurve {
    std::string group;
    std::map<int, double> mean_mse_by_x;
    std::map<int, int> count_by_x;
};

struct TimelapseResult {
    std::vector<TransitionError> errors;
    std::vector<GroupCurve> groups;
};

// For each transition and each x in 1..x_max, the MSE of the prediction
// whose target frame ends exactly x columns after the onset. Transitions too
// close to the clip edge or to the next onset are skipped, never padded.
TimelapseResult error_by_timelapse(const std::vector<StimulusEval>& evals,
                                   const stim::StimulusSet& set, const dsp::DspConfig& dsp_cfg,
                                   int x_max,
                                   const std::map<std::string, std::string>& groups);

// OLS of MSE against interval size (in mel bands) at a fixed x.
stats::RegressionResult interval_regression(const std::vector<TransitionError>& errors, int x);

struct ContextPoint {
    int k = 0;  // transition index
    double norm_musical = 0.0;
    double norm_nonmusical = 0.0;
    double diff = 0.0;
    bool valid = false;
};

struct ContextResult {
    std::vector<ContextPoint> points;
    stats::RegressionResult regression;  // diff against k over valid points
    int x = 0;
};

// Normalized group difference per transition index at a fixed x:
// norm(g,k) = meanMSE(g,k) / meanInterval(g,k), diff = non-musical - musical.
// The interval mean runs over every group member at index k; the MSE mean
// over the transitions measurable at this x.
ContextResult context_effect(const std::vector<TransitionError>& errors,
                             const stim::StimulusSet& set, const dsp::DspConfig& dsp_cfg,
                             const std::map<std::string, std::string>& groups, int x);

// ---- CSV emission ----------------------------------------------------------

struct RegressionRow {
    std::string analysis;
    std::string x;  // empty for whole-clip analyses
    stats::RegressionResult result;
};

void write_per_sequence_csv(const std::string& path, const std::vector<std::string>& ids,
                            const std::vector<double>& totals, const std::vector<int>& ranks);
void write_timelapse_csv(const std::string& path, const std::vector<TransitionError>& errors);
void write_interval_csv(const std::string& path, const std::vector<TransitionError>& errors);
void write_context_csv(const std::string& path, const ContextResult& context);
void write_regressions_csv(const std::string& path, const std::vector<RegressionRow>& rows);

}  // namespace melpc::analysis
