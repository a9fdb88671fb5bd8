#include "melpc/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "melpc/common.hpp"
#include "melpc/csv.hpp"
#include "melpc/parallel.hpp"
#include "melpc/rng.hpp"

namespace melpc::train {

void TrainConfig::validate() const {
    if (sequence_length < 2) throw DataError("sequence_length must be >= 2");
    if (frame_cols < 2) throw DataError("frame_cols must be >= 2");
    if (frame_hop < 1) throw DataError("frame_hop must be >= 1");
    if (batch_size < 1) throw DataError("batch_size must be >= 1");
    if (epochs < 0) throw DataError("epochs must be >= 0");
    if (learning_rate <= 0) throw DataError("learning_rate must be positive");
    if (patience < 1) throw DataError("patience must be >= 1");
    if (workers < 1) throw DataError("workers must be >= 1");
    if (val_fraction < 0 || val_fraction >= 1) throw DataError("val_fraction must be in [0,1)");
    if (channel_preset != "stock" && channel_preset != "desk")
        throw DataError("channel_preset must be stock or desk");
    if (lambda_preset != "prediction" && lambda_preset != "weighted")
        throw DataError("lambda_preset must be prediction or weighted");
    dsp.validate();
}

model::PredNetConfig TrainConfig::model_config() const {
    model::PredNetConfig mc =
        channel_preset == "desk" ? model::PredNetConfig::desk() : model::PredNetConfig::stock();
    if (lambda_preset == "weighted") mc.lambda_layer = {1.0, 0.1, 0.1, 0.1};
    mc.frame_rows = dsp.n_mels;
    mc.frame_cols = frame_cols;
    return mc;
}

namespace {

dsp::MelSpectrogram load_spectrogram(const std::string& path, const dsp::DspConfig& cfg) {
    auto ends_with = [&path](const char* suffix) {
        std::string s(suffix);
        return path.size() >= s.size() && path.compare(path.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".mels")) return dsp::load_mels(path);
    return dsp::mel_spectrogram(dsp::load_audio(path, /*downmix=*/true), cfg);
}

}  // namespace

LoadedSplit load_split(const Manifest& manifest, const std::string& split,
                       const TrainConfig& cfg) {
    LoadedSplit out;
    std::vector<const ManifestEntry*> entries = manifest.split(split);
    // Two passes: clips vector must stop reallocating before spans are taken.
    for (const ManifestEntry* e : entries) {
        dsp::MelSpectrogram spec = load_spectrogram(e->path, cfg.dsp);
        if (spec.cols < cfg.frame_cols) {
            log_warn("skipping " + e->path + ": " + std::to_string(spec.cols) +
                     " columns < one frame");
            continue;
        }
        dsp::FrameSequence frames = dsp::extract_frames(spec, cfg.frame_hop, cfg.frame_cols);
        if (static_cast<int>(frames.size()) < cfg.sequence_length) {
            log_warn("skipping " + e->path + ": " + std::to_string(frames.size()) +
                     " frames < one sequence of " + std::to_string(cfg.sequence_length));
            continue;
        }
        out.clips.push_back(std::move(frames));
    }
    for (const auto& clip : out.clips) {
        const int n_seq = static_cast<int>(clip.size()) / cfg.sequence_length;
        for (int k = 0; k < n_seq; ++k) {
            std::span<const std::vector<float>> all(clip.frames);
            out.sequences.push_back(
                SequenceView{all.subspan(static_cast<size_t>(k) * cfg.sequence_length,
                                         cfg.sequence_length)});
        }
    }
    return out;
}

double validation_loss(const model::PredNet& net, const std::vector<SequenceView>& sequences,
                       int workers) {
    if (sequences.empty()) return 0.0;
    std::vector<double> losses(sequences.size(), 0.0);
    parallel_for(static_cast<int>(sequences.size()), workers, [&](int i) {
        losses[i] = net.evaluate_sequence(sequences[i].frames).loss;
    });
    double total = 0.0;
    for (double l : losses) total += l;
    return total / static_cast<double>(losses.size());
}

TrainResult train(const Manifest& manifest, const TrainConfig& cfg) {
    cfg.validate();
    LoadedSplit train_split = load_split(manifest, "train", cfg);
    LoadedSplit val_split = load_split(manifest, "val", cfg);
    if (train_split.sequences.empty()) throw DataError("no usable training sequences");

    model::PredNet net(cfg.model_config());
    net.init_params(cfg.seed);

    TrainResult result{std::move(net), {}, 0};
    if (cfg.epochs == 0) return result;

    model::PredNet& model = result.net;
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    // Snapshot of the best-validation parameters (values and moments).
    std::vector<model::ParamEntry<float>> best_params = model.params();
    int64_t best_adam_step = model.adam_step_count();
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;

    std::vector<int> order(train_split.sequences.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    struct SeqGrads {
        std::vector<std::vector<float>> grads;  // per parameter
        double loss = 0.0;
    };

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order);

        double train_loss_sum = 0.0;
        int train_loss_count = 0;
        for (size_t batch_start = 0; batch_start < order.size();
             batch_start += cfg.batch_size) {
            const int batch_n = static_cast<int>(
                std::min<size_t>(cfg.batch_size, order.size() - batch_start));
            std::vector<SeqGrads> slots(batch_n);
            parallel_for(batch_n, cfg.workers, [&](int bi) {
                const SequenceView& seq = train_split.sequences[order[batch_start + bi]];
                nn::Graph<float> g;
                auto taped = model.forward_sequence(g, seq.frames);
                g.backward(taped.loss_id);
                SeqGrads& slot = slots[bi];
                slot.loss = taped.result.loss;
                slot.grads.reserve(taped.param_ids.size());
                for (nn::Id pid : taped.param_ids) slot.grads.push_back(g.grad(pid));
            });

            model.zero_grads();
            for (int bi = 0; bi < batch_n; ++bi) {  // fixed-order reduction
                if (!std::isfinite(slots[bi].loss))
                    throw NumericError("training diverged: non-finite loss in epoch " +
                                       std::to_string(epoch));
                train_loss_sum += slots[bi].loss;
                ++train_loss_count;
                auto& params = model.params();
                for (size_t p = 0; p < params.size(); ++p) {
                    auto& acc = params[p].grad;
                    const auto& g = slots[bi].grads[p];
                    const float scale = 1.0f / static_cast<float>(batch_n);
                    for (size_t j = 0; j < acc.size(); ++j) acc[j] += g[j] * scale;
                }
            }
            model.adam_update(static_cast<float>(cfg.learning_rate));
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = train_loss_sum / std::max(1, train_loss_count);
        entry.val_loss = validation_loss(model, val_split.sequences, cfg.workers);
        entry.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                           epoch_start)
                                 .count();
        if (!std::isfinite(entry.train_loss) || !std::isfinite(entry.val_loss))
            throw NumericError("training diverged: non-finite epoch loss");
        result.log.push_back(entry);

        const double tracked = val_split.sequences.empty() ? entry.train_loss : entry.val_loss;
        if (tracked < best_val) {
            best_val = tracked;
            best_epoch = epoch;
            best_params = model.params();
            best_adam_step = model.adam_step_count();
        } else if (epoch - best_epoch >= cfg.patience) {
            log_info("early stop at epoch " + std::to_string(epoch) + " (best epoch " +
                     std::to_string(best_epoch) + ")");
            break;
        }
    }

    model.params() = std::move(best_params);
    model.set_adam_step_count(best_adam_step);
    result.best_epoch = best_epoch;
    return result;
}

void save_loss_log(const std::string& path, const std::vector<EpochLog>& log) {
    CsvTable table;
    table.header = {"epoch", "train_loss", "val_loss", "wall_seconds"};
    for (const auto& e : log)
        table.rows.push_back({std::to_string(e.epoch), format_double(e.train_loss),
                              format_double(e.val_loss), format_double(e.wall_seconds)});
    csv_write_file(path, table);
}

double copy_baseline_mse(std::span<const std::vector<float>> frames) {
    if (frames.size() < 2) throw DataError("baseline needs at least 2 frames");
    double total = 0.0;
    for (size_t t = 1; t < frames.size(); ++t) total += model::pixel_mse(frames[t - 1], frames[t]);
    return total / static_cast<double>(frames.size() - 1);
}

}  // namespace melpc::train
