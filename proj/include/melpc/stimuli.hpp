#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "melpc/dsp.hpp"

namespace melpc::stim {

// A symbolic test melody: fixed-duration notes drawn from one key.
struct PitchSequence {
    std::string id;
    std::vector<int> notes;  // MIDI note numbers
    double note_duration = 0.297;
    std::string key = "C-major";
    uint64_t seed = 0;
};

struct Rating {
    double mean_rating = 0.0;  // in [1,5]
    int rank = 0;              // 1..N, N = most musical
};

struct StimulusSet {
    std::vector<PitchSequence> sequences;
    std::map<std::string, Rating> ratings;

    bool has_ratings() const { return !ratings.empty(); }
    const PitchSequence* find(const std::string& id) const;
};

// Metadata of one note-to-note change, derived from the symbolic sequence
// (not from spectrogram inspection).
struct Transition {
    std::string sequence_id;
    int index = 0;               // 1..notes-1
    double onset_time = 0.0;     // seconds
    int onset_column = 0;        // round(onset_time / column_duration)
    int interval_bands = 0;      // |band(next) - band(prev)|
    int interval_semitones = 0;  // signed
};

struct GenOptions {
    int n = 50;
    std::string key = "C-major";
    int note_min = 60;  // C4
    int note_max = 84;  // C6
    int notes_per_sequence = 10;
    double note_duration = 0.297;
    uint64_t seed = 0;
    std::string id_prefix = "stim";
};

struct Timbre {
    std::vector<double> harmonic_amps = {1.0, 0.5, 0.25};
};

double midi_to_hz(int note);

// Pitch-class set of a named key ("C-major", "f#-minor", ...).
std::vector<int> parse_key(const std::string& name);

// n sequences of uniform i.i.d. in-key pitches; deterministic under seed.
StimulusSet generate_set(const GenOptions& opt);

// Additive synthesis with a 10 ms linear cross-fade at note boundaries,
// peak-normalized to 0.9.
dsp::AudioClip synthesize(const PitchSequence& seq, const Timbre& timbre = Timbre{},
                          int sample_rate = 44100);

std::vector<Transition> transitions(const PitchSequence& seq, const dsp::DspConfig& cfg,
                                    int sample_rate = 44100);

// Ratings CSV: stimulus_id,mean_rating,rank. Ranks must be a permutation of
// 1..N over exactly the sequences of the set.
void load_ratings(const std::string& csv_path, StimulusSet& set);

// Stimulus manifest CSV: stimulus_id,seed,key,notes(semicolon-separated),
// note_duration.
void save_stimulus_manifest(const std::string& path, const StimulusSet& set);
StimulusSet load_stimulus_manifest(const std::string& path);

// Synthetic training corpus: a mix of sustained tones and short random
// melodies with per-clip timbre and decay variation. File labels come from
// the id prefix (steady_*, melody_*).
struct CorpusOptions {
    int n = 200;
    uint64_t seed = 7;
    double clip_seconds = 1.2;
};

struct CorpusClip {
    PitchSequence seq;
    std::string label;  // "steady" | "melody"
    Timbre timbre;
    double decay_rate = 0.0;  // amplitude envelope exp(-decay_rate * t)
};

std::vector<CorpusClip> plan_corpus(const CorpusOptions& opt);
dsp::AudioClip synthesize_corpus_clip(const CorpusClip& clip, int sample_rate = 44100);

}  // namespace melpc::stim
