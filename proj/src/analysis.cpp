#include "melpc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "melpc/common.hpp"
#include "melpc/csv.hpp"

namespace melpc::analysis {

StimulusEval evaluate_stimulus(const model::PredNet& net, const std::string& id,
                               const dsp::MelSpectrogram& spec, int eval_hop) {
    const int frame_cols = net.config().frame_cols;
    dsp::FrameSequence frames = dsp::extract_frames(spec, eval_hop, frame_cols);
    if (frames.size() < 2) throw DataError("stimulus " + id + " yields fewer than 2 frames");

    model::SequenceResult<float> run = net.evaluate_sequence(frames.frames);

    StimulusEval eval;
    eval.id = id;
    eval.n_frames = static_cast<int>(frames.size());
    eval.frame_cols = frame_cols;
    eval.source_columns = spec.cols;
    eval.column_duration = spec.column_duration;
    eval.mse_of_frame.assign(frames.size(), std::numeric_limits<double>::quiet_NaN());
    for (size_t t = 1; t < frames.size(); ++t) {
        eval.mse_of_frame[t] = run.step_mse[t - 1];
        eval.total_error += run.step_mse[t - 1];
    }
    return eval;
}

double total_error(const model::PredNet& net, const dsp::MelSpectrogram& spec) {
    return evaluate_stimulus(net, spec.clip_id.empty() ? "clip" : spec.clip_id, spec)
        .total_error;
}

std::map<std::string, int> ranking_from_ratings(const stim::StimulusSet& set) {
    if (!set.has_ratings()) throw DataError("stimulus set has no ratings");
    std::map<std::string, int> ranking;
    for (const auto& [id, rating] : set.ratings) ranking[id] = rating.rank;
    return ranking;
}

std::map<std::string, int> proxy_ranking_by_interval(const stim::StimulusSet& set,
                                                     const dsp::DspConfig& cfg) {
    std::vector<std::pair<double, std::string>> keyed;
    for (const auto& seq : set.sequences) {
        auto trs = stim::transitions(seq, cfg);
        double mean = 0.0;
        for (const auto& tr : trs) mean += tr.interval_bands;
        mean /= static_cast<double>(trs.size());
        keyed.emplace_back(mean, seq.id);
    }
    // Largest mean interval = least musical = rank 1; ties break by id so the
    // ranking stays a deterministic permutation.
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::map<std::string, int> ranking;
    for (size_t i = 0; i < keyed.size(); ++i) ranking[keyed[i].second] = static_cast<int>(i + 1);
    return ranking;
}

stats::RegressionResult musicality_regression(const std::vector<double>& errors,
                                              const std::vector<int>& ranks) {
    if (errors.size() != ranks.size())
        throw DataError("musicality_regression: errors and ranks differ in length");
    const int n = static_cast<int>(ranks.size());
    if (n < 3) throw DataError("musicality_regression: need at least 3 sequences");
    std::vector<bool> seen(n + 1, false);
    for (int r : ranks) {
        if (r < 1 || r > n || seen[r])
            throw DataError("musicality_regression: ranks are not a permutation of 1..N");
        seen[r] = true;
    }
    std::vector<double> x(ranks.begin(), ranks.end());
    return stats::ols_regress(x, errors);
}

std::map<std::string, std::string> assign_groups(const std::map<std::string, int>& ranking,
                                                 int group_size) {
    const int n = static_cast<int>(ranking.size());
    if (2 * group_size > n)
        throw DataError("group size " + std::to_string(group_size) +
                        " too large for " + std::to_string(n) + " sequences");
    std::map<std::string, std::string> groups;
    for (const auto& [id, rank] : ranking) {
        if (rank > n - group_size) groups[id] = "musical";
        else if (rank <= group_size) groups[id] = "non-musical";
        else groups[id] = "";
    }
    return groups;
}

TimelapseResult error_by_timelapse(const std::vector<StimulusEval>& evals,
                                   const stim::StimulusSet& set, const dsp::DspConfig& dsp_cfg,
                                   int x_max,
                                   const std::map<std::string, std::string>& groups) {
    if (x_max < 1) throw DataError("x_max must be >= 1");
    TimelapseResult result;
    for (const auto& eval : evals) {
        const stim::PitchSequence* seq = set.find(eval.id);
        if (!seq) throw DataError("no stimulus metadata for " + eval.id);
        auto trs = stim::transitions(*seq, dsp_cfg);
        std::string group;
        if (auto it = groups.find(eval.id); it != groups.end()) group = it->second;

        for (size_t ti = 0; ti < trs.size(); ++ti) {
            const stim::Transition& tr = trs[ti];
            // A repeated pitch changes nothing in the spectrogram; there is
            // no transition to time-lapse over.
            if (tr.interval_semitones == 0) continue;
            const int next_onset = (ti + 1 < trs.size())
                                       ? trs[ti + 1].onset_column
                                       : std::numeric_limits<int>::max();
            int skipped_lo = 0, skipped_hi = 0;
            for (int x = 1; x <= x_max; ++x) {
                // Target frame ends x columns after the onset.
                if (tr.onset_column + x - 1 >= next_onset) break;  // next note bleeds in
                const int j = tr.onset_column + x - eval.frame_cols;
                if (j < 1) {
                    ++skipped_lo;
                    continue;
                }
                if (j >= eval.n_frames) {
                    ++skipped_hi;
                    continue;
                }
                TransitionError te;
                te.sequence_id = eval.id;
                te.transition_index = tr.index;
                te.x = x;
                te.mse = eval.mse_of_frame[j];
                te.interval_bands = tr.interval_bands;
                te.group = group;
                result.errors.push_back(std::move(te));
            }
            if (skipped_lo || skipped_hi)
                log_info("stimulus " + eval.id + " transition " + std::to_string(tr.index) +
                         ": skipped " + std::to_string(skipped_lo + skipped_hi) +
                         " x values at the clip edge");
        }
    }

    for (const std::string& tag : {"musical", "non-musical"}) {
        GroupCurve curve;
        curve.group = tag;
        std::map<int, double> sum;
        for (const auto& te : result.errors) {
            if (te.group != tag) continue;
            sum[te.x] += te.mse;
            curve.count_by_x[te.x] += 1;
        }
        for (const auto& [x, s] : sum) curve.mean_mse_by_x[x] = s / curve.count_by_x[x];
        if (!curve.mean_mse_by_x.empty()) result.groups.push_back(std::move(curve));
    }
    return result;
}

stats::RegressionResult interval_regression(const std::vector<TransitionError>& errors, int x) {
    std::vector<double> bands, mses;
    for (const auto& te : errors) {
        if (te.x != x) continue;
        bands.push_back(te.interval_bands);
        mses.push_back(te.mse);
    }
    if (bands.size() < 3)
        throw DataError("interval_regression: fewer than 3 transitions at x=" +
                        std::to_string(x));
    return stats::ols_regress(bands, mses);
}

ContextResult context_effect(const std::vector<TransitionError>& errors,
                             const stim::StimulusSet& set, const dsp::DspConfig& dsp_cfg,
                             const std::map<std::string, std::string>& groups, int x) {
    ContextResult result;
    result.x = x;

    // Interval means per (group, index) over every group member.
    std::map<std::pair<std::string, int>, std::pair<double, int>> interval_acc;
    int max_index = 0;
    for (const auto& seq : set.sequences) {
        auto it = groups.find(seq.id);
        if (it == groups.end() || it->second.empty()) continue;
        for (const auto& tr : stim::transitions(seq, dsp_cfg)) {
            auto& acc = interval_acc[{it->second, tr.index}];
            acc.first += tr.interval_bands;
            acc.second += 1;
            max_index = std::max(max_index, tr.index);
        }
    }
    if (interval_acc.empty()) throw DataError("context_effect: both groups are empty");

    // MSE means per (group, index) over transitions measurable at this x.
    std::map<std::pair<std::string, int>, std::pair<double, int>> mse_acc;
    for (const auto& te : errors) {
        if (te.x != x || te.group.empty()) continue;
        auto& acc = mse_acc[{te.group, te.transition_index}];
        acc.first += te.mse;
        acc.second += 1;
    }

    std::vector<double> ks, diffs;
    for (int k = 1; k <= max_index; ++k) {
        ContextPoint pt;
        pt.k = k;
        bool ok = true;
        double norms[2] = {0.0, 0.0};
        const char* tags[2] = {"musical", "non-musical"};
        for (int gi = 0; gi < 2; ++gi) {
            auto mit = mse_acc.find({tags[gi], k});
            auto iit = interval_acc.find({tags[gi], k});
            if (mit == mse_acc.end() || mit->second.second == 0 ||
                iit == interval_acc.end() || iit->second.second == 0) {
                ok = false;
                break;
            }
            const double mean_mse = mit->second.first / mit->second.second;
            const double mean_interval = iit->second.first / iit->second.second;
            if (mean_interval == 0.0) {
                log_warn("context_effect: mean interval is zero at transition " +
                         std::to_string(k) + " (" + tags[gi] + "); point excluded");
                ok = false;
                break;
            }
            norms[gi] = mean_mse / mean_interval;
        }
        if (!ok) {
            result.points.push_back(pt);  // valid = false
            continue;
        }
        pt.norm_musical = norms[0];
        pt.norm_nonmusical = norms[1];
        pt.diff = pt.norm_nonmusical - pt.norm_musical;
        pt.valid = true;
        result.points.push_back(pt);
        ks.push_back(k);
        diffs.push_back(pt.diff);
    }
    if (ks.size() >= 3) {
        result.regression = stats::ols_regress(ks, diffs);
    } else {
        result.regression = stats::RegressionResult{};
        result.regression.n = static_cast<int>(ks.size());
        log_warn("context_effect: only " + std::to_string(ks.size()) +
                 " valid transition indices; regression undefined");
    }
    return result;
}

void write_per_sequence_csv(const std::string& path, const std::vector<std::string>& ids,
                            const std::vector<double>& totals, const std::vector<int>& ranks) {
    CsvTable table;
    table.header = {"stimulus_id", "total_mse", "rank"};
    for (size_t i = 0; i < ids.size(); ++i)
        table.rows.push_back({ids[i], format_double(totals[i]), std::to_string(ranks[i])});
    csv_write_file(path, table);
}

void write_timelapse_csv(const std::string& path, const std::vector<TransitionError>& errors) {
    CsvTable table;
    table.header = {"stimulus_id", "transition", "x", "mse", "group"};
    for (const auto& te : errors)
        table.rows.push_back({te.sequence_id, std::to_string(te.transition_index),
                              std::to_string(te.x), format_double(te.mse), te.group});
    csv_write_file(path, table);
}

void write_interval_csv(const std::string& path, const std::vector<TransitionError>& errors) {
    CsvTable table;
    table.header = {"transition_key", "x", "interval_bands", "mse"};
    for (const auto& te : errors)
        table.rows.push_back({te.sequence_id + ":" + std::to_string(te.transition_index),
                              std::to_string(te.x), std::to_string(te.interval_bands),
                              format_double(te.mse)});
    csv_write_file(path, table);
}

void write_context_csv(const std::string& path, const ContextResult& context) {
    CsvTable table;
    table.header = {"k", "norm_musical", "norm_nonmusical", "diff"};
    for (const auto& pt : context.points) {
        if (!pt.valid) continue;
        table.rows.push_back({std::to_string(pt.k), format_double(pt.norm_musical),
                              format_double(pt.norm_nonmusical), format_double(pt.diff)});
    }
    csv_write_file(path, table);
}

void write_regressions_csv(const std::string& path, const std::vector<RegressionRow>& rows) {
    CsvTable table;
    table.header = {"analysis", "x", "slope", "intercept", "r2", "p", "n"};
    for (const auto& row : rows)
        table.rows.push_back({row.analysis, row.x, format_double(row.result.slope),
                              format_double(row.result.intercept),
                              format_double(row.result.r_squared),
                              format_double(row.result.p_value), std::to_string(row.result.n)});
    csv_write_file(path, table);
}

}  // namespace melpc::analysis
