#pragma once

#include <span>
#include <string>
#include <vector>

#include "melpc/dsp.hpp"
#include "melpc/manifest.hpp"
#include "melpc/prednet.hpp"

namespace melpc::train {

struct TrainConfig {
    int frame_cols = 44;  // window duration: 44 columns = 508 ms at hop 512
    int frame_hop = 4;
    int sequence_length = 10;
    int batch_size = 4;
    int epochs = 10;
    double learning_rate = 1e-3;
    uint64_t seed = 42;
    int patience = 5;
    int workers = 1;
    double val_fraction = 0.1;
    std::string channel_preset = "stock";      // stock | desk
    std::string lambda_preset = "prediction";  // prediction | weighted
    dsp::DspConfig dsp;

    void validate() const;
    model::PredNetConfig model_config() const;
};

struct EpochLog {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    model::PredNet net;  // best-validation parameters (and moments)
    std::vector<EpochLog> log;
    int best_epoch = 0;  // 0 when no epochs ran
};

// One training sequence: a span of consecutive frames from a loaded clip.
struct SequenceView {
    std::span<const std::vector<float>> frames;
};

// Frames of every usable clip in a split, chopped into non-overlapping
// sequences of cfg.sequence_length. Clips shorter than one sequence are
// skipped with a warning.
struct LoadedSplit {
    std::vector<dsp::FrameSequence> clips;  // owns the frames
    std::vector<SequenceView> sequences;
};

LoadedSplit load_split(const Manifest& manifest, const std::string& split, const TrainConfig& cfg);

// Mean sequence loss over a split; no gradient state is touched.
double validation_loss(const model::PredNet& net, const std::vector<SequenceView>& sequences,
                       int workers);

TrainResult train(const Manifest& manifest, const TrainConfig& cfg);

// Loss log CSV: epoch,train_loss,val_loss,wall_seconds.
void save_loss_log(const std::string& path, const std::vector<EpochLog>& log);

// Copy-last-frame baseline: predict frame t with frame t-1, aligned with the
// model's scored steps.
double copy_baseline_mse(std::span<const std::vector<float>> frames);

}  // namespace melpc::train
