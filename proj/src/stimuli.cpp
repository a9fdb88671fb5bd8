#include "melpc/stimuli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "melpc/common.hpp"
#include "melpc/csv.hpp"
#include "melpc/rng.hpp"

namespace melpc::stim {

double midi_to_hz(int note) { return 440.0 * std::pow(2.0, (note - 69) / 12.0); }

const PitchSequence* StimulusSet::find(const std::string& id) const {
    for (const auto& s : sequences)
        if (s.id == id) return &s;
    return nullptr;
}

std::vector<int> parse_key(const std::string& name) {
    static const int kMajor[7] = {0, 2, 4, 5, 7, 9, 11};
    static const int kMinor[7] = {0, 2, 3, 5, 7, 8, 10};
    static const int kLetter[7] = {9, 11, 0, 2, 4, 5, 7};  // A..G

    auto dash = name.find('-');
    if (dash == std::string::npos || dash == 0)
        throw DataError("bad key name (expected e.g. C-major): " + name);
    std::string tonic = name.substr(0, dash);
    std::string mode = name.substr(dash + 1);
    for (auto& c : mode) c = static_cast<char>(std::tolower(c));

    char letter = static_cast<char>(std::toupper(tonic[0]));
    if (letter < 'A' || letter > 'G') throw DataError("bad key tonic: " + tonic);
    int pc = kLetter[letter - 'A'];
    for (size_t i = 1; i < tonic.size(); ++i) {
        if (tonic[i] == '#') pc += 1;
        else if (tonic[i] == 'b') pc -= 1;
        else throw DataError("bad key accidental: " + tonic);
    }
    pc = ((pc % 12) + 12) % 12;

    const int* steps;
    if (mode == "major") steps = kMajor;
    else if (mode == "minor") steps = kMinor;
    else throw DataError("bad key mode (major|minor): " + mode);

    std::vector<int> pcs(7);
    for (int i = 0; i < 7; ++i) pcs[i] = (pc + steps[i]) % 12;
    std::sort(pcs.begin(), pcs.end());
    return pcs;
}

StimulusSet generate_set(const GenOptions& opt) {
    if (opt.n < 1) throw DataError("need at least one sequence");
    if (opt.notes_per_sequence < 2) throw DataError("sequences need at least 2 notes");
    if (opt.note_duration <= 0) throw DataError("note duration must be positive");
    std::vector<int> pcs = parse_key(opt.key);

    std::vector<int> pool;
    for (int note = opt.note_min; note <= opt.note_max; ++note)
        if (std::find(pcs.begin(), pcs.end(), note % 12) != pcs.end()) pool.push_back(note);
    if (pool.size() < 8)
        throw DataError("pitch range spans only " + std::to_string(pool.size()) +
                        " in-key pitches (need >= 8)");

    Rng master(opt.seed);
    StimulusSet set;
    set.sequences.reserve(opt.n);
    int width = std::max(4, static_cast<int>(std::to_string(opt.n).size()));
    for (int i = 0; i < opt.n; ++i) {
        PitchSequence seq;
        seq.seed = master.next_u64();
        seq.key = opt.key;
        seq.note_duration = opt.note_duration;
        std::ostringstream id;
        id << opt.id_prefix << "_";
        std::string num = std::to_string(i);
        id << std::string(width - num.size(), '0') << num;
        seq.id = id.str();
        Rng rng(seq.seed);
        seq.notes.resize(opt.notes_per_sequence);
        for (int k = 0; k < opt.notes_per_sequence; ++k)
            seq.notes[k] = pool[rng.uniform_index(pool.size())];
        set.sequences.push_back(std::move(seq));
    }
    return set;
}

dsp::AudioClip synthesize(const PitchSequence& seq, const Timbre& timbre, int sample_rate) {
    if (seq.notes.empty()) throw DataError("cannot synthesize an empty sequence");
    if (timbre.harmonic_amps.empty()) throw DataError("timbre needs at least one partial");
    const double nyquist = sample_rate / 2.0;
    for (int note : seq.notes) {
        const double f0 = midi_to_hz(note);
        for (size_t k = 0; k < timbre.harmonic_amps.size(); ++k) {
            if (timbre.harmonic_amps[k] != 0.0 && f0 * (k + 1) >= nyquist)
                throw DataError("partial " + std::to_string(k + 1) + " of note " +
                                std::to_string(note) + " aliases above Nyquist");
        }
    }

    const int n_notes = static_cast<int>(seq.notes.size());
    const int total = static_cast<int>(std::lround(n_notes * seq.note_duration * sample_rate));
    const int fade = static_cast<int>(std::lround(0.010 * sample_rate));
    const int half = fade / 2;

    std::vector<double> mix(total, 0.0);
    for (int i = 0; i < n_notes; ++i) {
        const double f0 = midi_to_hz(seq.notes[i]);
        const int nominal_start = static_cast<int>(std::lround(i * seq.note_duration * sample_rate));
        const int nominal_end =
            static_cast<int>(std::lround((i + 1) * seq.note_duration * sample_rate));
        // Cross-fade centered on each interior boundary; edge fades at the
        // clip ends keep onsets/offsets click-free.
        const int start = std::max(0, nominal_start - half);
        const int end = std::min(total, nominal_end + half);
        for (int t = start; t < end; ++t) {
            double gain = 1.0;
            const int fade_in_end = (i == 0) ? half : nominal_start + half;
            const int fade_out_start = (i == n_notes - 1) ? total - half : nominal_end - half;
            if (t < fade_in_end) {
                const int fade_in_start = (i == 0) ? 0 : nominal_start - half;
                gain *= static_cast<double>(t - fade_in_start) /
                        static_cast<double>(fade_in_end - fade_in_start);
            }
            if (t >= fade_out_start) {
                const int fade_out_end = (i == n_notes - 1) ? total : nominal_end + half;
                gain *= static_cast<double>(fade_out_end - t) /
                        static_cast<double>(fade_out_end - fade_out_start);
            }
            double v = 0.0;
            const double phase = 2.0 * std::numbers::pi * f0 * (t - nominal_start) / sample_rate;
            for (size_t k = 0; k < timbre.harmonic_amps.size(); ++k)
                v += timbre.harmonic_amps[k] * std::sin(phase * (k + 1));
            mix[t] += gain * v;
        }
    }

    double peak = 0.0;
    for (double v : mix) peak = std::max(peak, std::fabs(v));
    const double norm = peak > 0 ? 0.9 / peak : 0.0;

    dsp::AudioClip clip;
    clip.sample_rate = sample_rate;
    clip.samples.resize(total);
    for (int t = 0; t < total; ++t) clip.samples[t] = static_cast<float>(mix[t] * norm);
    return clip;
}

std::vector<Transition> transitions(const PitchSequence& seq, const dsp::DspConfig& cfg,
                                    int sample_rate) {
    const dsp::MelFilterbank fb = dsp::MelFilterbank::build(cfg, sample_rate);
    auto band_of = [&fb](double f) {
        auto it = std::lower_bound(fb.center_hz.begin(), fb.center_hz.end(), f);
        if (it == fb.center_hz.begin()) return 0;
        if (it == fb.center_hz.end()) return fb.n_bands - 1;
        int hi = static_cast<int>(it - fb.center_hz.begin());
        return (f - fb.center_hz[hi - 1] <= fb.center_hz[hi] - f) ? hi - 1 : hi;
    };
    const double col_dur = cfg.column_duration(sample_rate);
    std::vector<Transition> out;
    for (size_t i = 1; i < seq.notes.size(); ++i) {
        Transition tr;
        tr.sequence_id = seq.id;
        tr.index = static_cast<int>(i);
        tr.onset_time = i * seq.note_duration;
        tr.onset_column = static_cast<int>(std::lround(tr.onset_time / col_dur));
        tr.interval_semitones = seq.notes[i] - seq.notes[i - 1];
        tr.interval_bands = std::abs(band_of(midi_to_hz(seq.notes[i])) -
                                     band_of(midi_to_hz(seq.notes[i - 1])));
        out.push_back(tr);
    }
    return out;
}

void load_ratings(const std::string& csv_path, StimulusSet& set) {
    CsvTable table = csv_read_file(csv_path);
    const int id_col = table.require_column("stimulus_id");
    const int rating_col = table.require_column("mean_rating");
    const int rank_col = table.require_column("rank");

    const int n = static_cast<int>(set.sequences.size());
    if (static_cast<int>(table.rows.size()) != n)
        throw DataError("ratings file has " + std::to_string(table.rows.size()) +
                        " rows but the set has " + std::to_string(n) + " sequences");

    std::map<std::string, Rating> ratings;
    std::map<int, std::string> rank_owner;
    for (const auto& row : table.rows) {
        const std::string& id = row[id_col];
        if (!set.find(id)) throw DataError("ratings reference unknown stimulus: " + id);
        if (ratings.count(id)) throw DataError("duplicate stimulus in ratings: " + id);
        Rating r;
        r.mean_rating = std::stod(row[rating_col]);
        r.rank = std::stoi(row[rank_col]);
        if (r.mean_rating < 1.0 || r.mean_rating > 5.0)
            throw DataError("mean_rating out of [1,5] for " + id + ": " + row[rating_col]);
        if (r.rank < 1 || r.rank > n)
            throw DataError("rank out of 1.." + std::to_string(n) + " for " + id);
        auto clash = rank_owner.find(r.rank);
        if (clash != rank_owner.end())
            throw DataError("rank " + std::to_string(r.rank) + " assigned to both " +
                            clash->second + " and " + id);
        rank_owner[r.rank] = id;
        ratings[id] = r;
    }
    set.ratings = std::move(ratings);
}

void save_stimulus_manifest(const std::string& path, const StimulusSet& set) {
    CsvTable table;
    table.header = {"stimulus_id", "seed", "key", "notes", "note_duration"};
    for (const auto& seq : set.sequences) {
        std::string notes;
        for (size_t i = 0; i < seq.notes.size(); ++i)
            notes += (i ? ";" : "") + std::to_string(seq.notes[i]);
        table.rows.push_back({seq.id, std::to_string(seq.seed), seq.key, notes,
                              format_double(seq.note_duration)});
    }
    csv_write_file(path, table);
}

StimulusSet load_stimulus_manifest(const std::string& path) {
    CsvTable table = csv_read_file(path);
    const int id_col = table.require_column("stimulus_id");
    const int seed_col = table.require_column("seed");
    const int key_col = table.require_column("key");
    const int notes_col = table.require_column("notes");
    const int dur_col = table.require_column("note_duration");

    StimulusSet set;
    for (const auto& row : table.rows) {
        PitchSequence seq;
        seq.id = row[id_col];
        seq.seed = std::stoull(row[seed_col]);
        seq.key = row[key_col];
        seq.note_duration = std::stod(row[dur_col]);
        std::istringstream ns(row[notes_col]);
        std::string item;
        while (std::getline(ns, item, ';')) seq.notes.push_back(std::stoi(item));
        if (seq.notes.empty()) throw DataError("stimulus " + seq.id + " has no notes");
        set.sequences.push_back(std::move(seq));
    }
    if (set.sequences.empty()) throw DataError("empty stimulus manifest: " + path);
    return set;
}

}  // namespace melpc::stim

namespace melpc::stim {

std::vector<CorpusClip> plan_corpus(const CorpusOptions& opt) {
    if (opt.n < 1) throw DataError("corpus needs at least one clip");
    if (opt.clip_seconds <= 0.2) throw DataError("corpus clips must be longer than 0.2 s");
    static const char* kKeys[] = {"C-major", "G-major", "D-major", "F-major",
                                  "A-minor", "E-minor"};
    Rng rng(opt.seed);
    std::vector<CorpusClip> clips;
    clips.reserve(opt.n);
    int steady_count = 0, melody_count = 0;
    for (int i = 0; i < opt.n; ++i) {
        CorpusClip clip;
        const bool steady = (i % 5) < 2;  // 40% sustained tones
        clip.label = steady ? "steady" : "melody";
        clip.seq.key = kKeys[rng.uniform_index(6)];
        const int note_min = 50 + static_cast<int>(rng.uniform_index(12));
        const int note_max = note_min + 14 + static_cast<int>(rng.uniform_index(10));
        const int n_notes = steady ? 1 : 3 + static_cast<int>(rng.uniform_index(4));
        clip.seq.note_duration = opt.clip_seconds / n_notes;
        clip.seq.seed = rng.next_u64();

        std::vector<int> pcs = parse_key(clip.seq.key);
        std::vector<int> pool;
        for (int note = note_min; note <= note_max; ++note)
            if (std::find(pcs.begin(), pcs.end(), note % 12) != pcs.end()) pool.push_back(note);
        Rng note_rng(clip.seq.seed);
        clip.seq.notes.resize(n_notes);
        for (int k = 0; k < n_notes; ++k)
            clip.seq.notes[k] = pool[note_rng.uniform_index(pool.size())];

        clip.timbre.harmonic_amps = {1.0, 0.3 + 0.3 * rng.uniform(), 0.1 + 0.2 * rng.uniform()};
        clip.decay_rate = 0.25 + 0.5 * rng.uniform();

        const int idx = steady ? steady_count++ : melody_count++;
        std::string num = std::to_string(idx);
        clip.seq.id = clip.label + "_" + std::string(4 - std::min<size_t>(4, num.size()), '0') + num;
        clips.push_back(std::move(clip));
    }
    return clips;
}

dsp::AudioClip synthesize_corpus_clip(const CorpusClip& clip, int sample_rate) {
    dsp::AudioClip audio = synthesize(clip.seq, clip.timbre, sample_rate);
    double peak = 0.0;
    for (size_t t = 0; t < audio.samples.size(); ++t) {
        const double env = std::exp(-clip.decay_rate * static_cast<double>(t) / sample_rate);
        audio.samples[t] = static_cast<float>(audio.samples[t] * env);
        peak = std::max(peak, std::fabs(static_cast<double>(audio.samples[t])));
    }
    if (peak > 0) {
        const float norm = static_cast<float>(0.9 / peak);
        for (auto& s : audio.samples) s *= norm;
    }
    return audio;
}

}  // namespace melpc::stim
