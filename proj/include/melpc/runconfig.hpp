#pragma once

#include <functional>
#include <string>
#include <vector>

#include "melpc/stimuli.hpp"
#include "melpc/train.hpp"

namespace melpc {

// Union of every tunable knob; subcommands use the slices they need. All
// keys can come from a key=value config file, MELPC_* environment overrides,
// or command-line flags (flags win).
struct RunConfig {
    train::TrainConfig train;  // includes train.dsp
    int eval_hop = 1;
    int analysis_x_max = 8;
    int analysis_group_size = 10;
    int analysis_context_x = 3;
    std::vector<int> analysis_interval_x = {1, 2, 3, 4, 5};
    stim::GenOptions stim;
    int corpus_n = 200;
    uint64_t corpus_seed = 7;
    double corpus_clip_seconds = 1.2;

    void validate() const;
};

struct ConfigKey {
    std::string name;
    std::string help;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<ConfigKey>& config_keys();

// Rejects unknown keys.
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

void load_config_file(RunConfig& cfg, const std::string& path);

// MELPC_<KEY> with dots mapped to underscores, e.g. MELPC_TRAIN_EPOCHS.
// Unknown MELPC_-prefixed variables are rejected.
void apply_env_overrides(RunConfig& cfg);

std::string serialize_config(const RunConfig& cfg);

}  // namespace melpc
