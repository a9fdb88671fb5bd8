#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "melpc/common.hpp"
#include "melpc/csv.hpp"
#include "melpc/dsp.hpp"
#include "melpc/stimuli.hpp"
#include "test_util.hpp"

using namespace melpc;
using test_util::TempDir;

namespace {

std::vector<int> notes_of(const stim::StimulusSet& set) {
    std::vector<int> all;
    for (const auto& s : set.sequences) all.insert(all.end(), s.notes.begin(), s.notes.end());
    return all;
}

}  // namespace

TEST_CASE("parse_key produces the right pitch-class sets") {
    CHECK(stim::parse_key("C-major") == std::vector<int>{0, 2, 4, 5, 7, 9, 11});
    CHECK(stim::parse_key("G-major") == std::vector<int>{0, 2, 4, 6, 7, 9, 11});
    CHECK(stim::parse_key("E-minor") == std::vector<int>{0, 2, 4, 6, 7, 9, 11});
    CHECK(stim::parse_key("F#-minor") == std::vector<int>{1, 2, 4, 6, 8, 9, 11});
    CHECK_THROWS_AS(stim::parse_key("H-major"), DataError);
    CHECK_THROWS_AS(stim::parse_key("C-dorian"), DataError);
    CHECK_THROWS_AS(stim::parse_key("nonsense"), DataError);
}

TEST_CASE("midi_to_hz hits the reference pitches") {
    CHECK(stim::midi_to_hz(69) == doctest::Approx(440.0));
    CHECK(stim::midi_to_hz(81) == doctest::Approx(880.0));
    CHECK(stim::midi_to_hz(60) == doctest::Approx(261.6255653).epsilon(1e-8));
}

TEST_CASE("generate_set: 50 sequences of 10 in-key notes, deterministic under seed") {
    stim::GenOptions opt;
    opt.seed = 1234;
    stim::StimulusSet set = stim::generate_set(opt);
    REQUIRE(set.sequences.size() == 50);

    std::vector<int> key = stim::parse_key(opt.key);
    for (const auto& seq : set.sequences) {
        REQUIRE(seq.notes.size() == 10);
        for (int note : seq.notes) {
            REQUIRE(note >= opt.note_min);
            REQUIRE(note <= opt.note_max);
            REQUIRE(std::find(key.begin(), key.end(), note % 12) != key.end());
        }
    }

    std::set<std::string> ids;
    for (const auto& seq : set.sequences) ids.insert(seq.id);
    CHECK(ids.size() == set.sequences.size());

    stim::StimulusSet again = stim::generate_set(opt);
    for (size_t i = 0; i < set.sequences.size(); ++i) {
        REQUIRE(again.sequences[i].notes == set.sequences[i].notes);
        REQUIRE(again.sequences[i].seed == set.sequences[i].seed);
    }

    opt.seed = 1235;
    stim::StimulusSet other = stim::generate_set(opt);
    CHECK(notes_of(other) != notes_of(set));
}

TEST_CASE("generate_set rejects ranges with fewer than 8 in-key pitches") {
    stim::GenOptions opt;
    opt.note_min = 60;
    opt.note_max = 67;  // only 5 in-key pitches in C major
    CHECK_THROWS_AS(stim::generate_set(opt), DataError);
}

TEST_CASE("synthesize: single note with one partial is a pure tone at band(f0)") {
    stim::PitchSequence seq;
    seq.id = "tone";
    seq.notes = {69};  // A4 = 440 Hz
    seq.note_duration = 1.0;
    stim::Timbre timbre;
    timbre.harmonic_amps = {1.0};
    dsp::AudioClip clip = stim::synthesize(seq, timbre);
    REQUIRE(clip.samples.size() == 44100);

    float peak = 0.0f;
    for (float s : clip.samples) peak = std::max(peak, std::fabs(s));
    CHECK(peak == doctest::Approx(0.9).epsilon(1e-3));

    dsp::DspConfig cfg;
    dsp::MelSpectrogram spec = dsp::mel_spectrogram(clip, cfg);
    const int band = dsp::mel_band_of_frequency(440.0, cfg);
    for (int c = 12; c < spec.cols - 12; c += 9) {
        int argmax = 0;
        for (int r = 1; r < spec.rows; ++r)
            if (spec.at(r, c) > spec.at(argmax, c)) argmax = r;
        REQUIRE(argmax == band);
    }
}

TEST_CASE("synthesize rejects empty sequences and aliasing harmonics") {
    stim::PitchSequence empty;
    CHECK_THROWS_AS(stim::synthesize(empty), DataError);

    stim::PitchSequence shrill;
    shrill.notes = {127};  // ~12.5 kHz fundamental; partial 2 aliases
    shrill.note_duration = 0.1;
    CHECK_THROWS_AS(stim::synthesize(shrill), DataError);
}

TEST_CASE("synthesized duration is exactly notes x note_duration") {
    stim::GenOptions opt;
    opt.n = 3;
    opt.seed = 9;
    stim::StimulusSet set = stim::generate_set(opt);
    for (const auto& seq : set.sequences) {
        dsp::AudioClip clip = stim::synthesize(seq);
        CHECK(static_cast<long>(clip.samples.size()) ==
              std::lround(10 * seq.note_duration * 44100));
    }
}

TEST_CASE("two-note sequence: the spectral change lands on the declared onset column") {
    stim::PitchSequence seq;
    seq.id = "two";
    seq.notes = {60, 67};  // a fifth
    seq.note_duration = 0.5;
    dsp::AudioClip clip = stim::synthesize(seq);
    dsp::DspConfig cfg;
    dsp::MelSpectrogram spec = dsp::mel_spectrogram(clip, cfg);

    auto trs = stim::transitions(seq, cfg);
    REQUIRE(trs.size() == 1);

    // Centered two-column stencil: adjacent-column differences sit half a
    // column off and split into an enter/exit lobe pair at this window size.
    int best_col = -1;
    double best = -1.0;
    for (int c = trs[0].onset_column - 5; c <= trs[0].onset_column + 5; ++c) {
        double change = 0.0;
        for (int r = 0; r < spec.rows; ++r)
            change += std::fabs(spec.at(r, c + 1) - spec.at(r, c - 1));
        if (change > best) {
            best = change;
            best_col = c;
        }
    }
    CHECK(std::abs(best_col - trs[0].onset_column) <= 1);
}

TEST_CASE("transitions carry onsets, both interval measures, and count 9 for 10 notes") {
    dsp::DspConfig cfg;
    stim::PitchSequence seq;
    seq.id = "t";
    seq.notes = {69, 81, 81, 76, 69, 71, 72, 74, 76, 77};
    seq.note_duration = 0.297;
    auto trs = stim::transitions(seq, cfg);
    REQUIRE(trs.size() == 9);

    const double col_dur = cfg.column_duration();
    for (size_t i = 0; i < trs.size(); ++i) {
        CHECK(trs[i].index == static_cast<int>(i + 1));
        CHECK(trs[i].onset_time == doctest::Approx((i + 1) * 0.297));
        CHECK(trs[i].onset_column == std::lround((i + 1) * 0.297 / col_dur));
    }

    // Octave jump 440 -> 880 measured through the filterbank map.
    const int expected =
        dsp::mel_band_of_frequency(880, cfg) - dsp::mel_band_of_frequency(440, cfg);
    CHECK(trs[0].interval_bands == expected);
    CHECK(trs[0].interval_semitones == 12);

    // Repeated identical pitch: zero interval in both measures.
    CHECK(trs[1].interval_bands == 0);
    CHECK(trs[1].interval_semitones == 0);

    // Descending jump is signed in semitones, absolute in bands.
    CHECK(trs[2].interval_semitones == -5);
    CHECK(trs[2].interval_bands > 0);
}

TEST_CASE("synthesized onsets agree with transition metadata within 2 columns") {
    stim::GenOptions opt;
    opt.n = 2;
    opt.seed = 77;
    dsp::DspConfig cfg;
    stim::StimulusSet set = stim::generate_set(opt);
    for (const auto& seq : set.sequences) {
        dsp::MelSpectrogram spec = dsp::mel_spectrogram(stim::synthesize(seq), cfg);
        for (const auto& tr : stim::transitions(seq, cfg)) {
            if (tr.interval_semitones == 0) continue;
            int best_col = -1;
            double best = -1.0;
            for (int c = std::max(1, tr.onset_column - 5);
                 c <= std::min(spec.cols - 2, tr.onset_column + 5); ++c) {
                double change = 0.0;
                for (int r = 0; r < spec.rows; ++r)
                    change += std::fabs(spec.at(r, c + 1) - spec.at(r, c - 1));
                if (change > best) {
                    best = change;
                    best_col = c;
                }
            }
            REQUIRE(std::abs(best_col - tr.onset_column) <= 2);
        }
    }
}

TEST_CASE("stimulus manifest round-trips") {
    TempDir dir("stim_manifest");
    stim::GenOptions opt;
    opt.n = 5;
    opt.seed = 3;
    stim::StimulusSet set = stim::generate_set(opt);
    const std::string path = dir.file("stimuli.csv");
    stim::save_stimulus_manifest(path, set);
    stim::StimulusSet loaded = stim::load_stimulus_manifest(path);
    REQUIRE(loaded.sequences.size() == set.sequences.size());
    for (size_t i = 0; i < set.sequences.size(); ++i) {
        CHECK(loaded.sequences[i].id == set.sequences[i].id);
        CHECK(loaded.sequences[i].notes == set.sequences[i].notes);
        CHECK(loaded.sequences[i].seed == set.sequences[i].seed);
        CHECK(loaded.sequences[i].key == set.sequences[i].key);
        CHECK(loaded.sequences[i].note_duration ==
              doctest::Approx(set.sequences[i].note_duration));
    }
}

TEST_CASE("load_ratings validates ids, ranges and rank permutations") {
    TempDir dir("ratings");
    stim::GenOptions opt;
    opt.n = 4;
    opt.seed = 5;
    stim::StimulusSet set = stim::generate_set(opt);
    auto id = [&set](int i) { return set.sequences[i].id; };

    SUBCASE("valid file attaches all ratings") {
        test_util::write_file(dir.file("r.csv"),
                              "stimulus_id,mean_rating,rank\n" + id(0) + ",1.5,2\n" + id(1) +
                                  ",4.5,4\n" + id(2) + ",2.25,1\n" + id(3) + ",3.0,3\n");
        stim::load_ratings(dir.file("r.csv"), set);
        REQUIRE(set.has_ratings());
        CHECK(set.ratings.at(id(1)).rank == 4);
        CHECK(set.ratings.at(id(2)).mean_rating == doctest::Approx(2.25));
    }
    SUBCASE("duplicate rank names both ids") {
        test_util::write_file(dir.file("r.csv"),
                              "stimulus_id,mean_rating,rank\n" + id(0) + ",1.5,2\n" + id(1) +
                                  ",4.5,2\n" + id(2) + ",2.5,1\n" + id(3) + ",3.0,3\n");
        try {
            stim::load_ratings(dir.file("r.csv"), set);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            std::string msg = e.what();
            CHECK(msg.find(id(0)) != std::string::npos);
            CHECK(msg.find(id(1)) != std::string::npos);
        }
    }
    SUBCASE("rating above 5 is a range error") {
        test_util::write_file(dir.file("r.csv"),
                              "stimulus_id,mean_rating,rank\n" + id(0) + ",5.2,2\n" + id(1) +
                                  ",4.5,4\n" + id(2) + ",2.5,1\n" + id(3) + ",3.0,3\n");
        CHECK_THROWS_AS(stim::load_ratings(dir.file("r.csv"), set), DataError);
    }
    SUBCASE("unknown id is rejected") {
        test_util::write_file(dir.file("r.csv"),
                              "stimulus_id,mean_rating,rank\nnope,3.0,2\n" + id(1) + ",4.5,4\n" +
                                  id(2) + ",2.5,1\n" + id(3) + ",3.0,3\n");
        CHECK_THROWS_AS(stim::load_ratings(dir.file("r.csv"), set), DataError);
    }
    SUBCASE("missing rows are rejected") {
        test_util::write_file(dir.file("r.csv"),
                              "stimulus_id,mean_rating,rank\n" + id(0) + ",3.0,1\n");
        CHECK_THROWS_AS(stim::load_ratings(dir.file("r.csv"), set), DataError);
    }
}

TEST_CASE("corpus planner mixes steady and melody clips deterministically") {
    stim::CorpusOptions opt;
    opt.n = 20;
    opt.seed = 11;
    opt.clip_seconds = 1.0;
    auto clips = stim::plan_corpus(opt);
    REQUIRE(clips.size() == 20);
    int steady = 0;
    for (const auto& c : clips) {
        if (c.label == "steady") {
            ++steady;
            CHECK(c.seq.notes.size() == 1);
        } else {
            CHECK(c.seq.notes.size() >= 3);
        }
        CHECK(c.seq.note_duration * c.seq.notes.size() == doctest::Approx(1.0));
    }
    CHECK(steady == 8);  // 40%

    auto again = stim::plan_corpus(opt);
    for (size_t i = 0; i < clips.size(); ++i) {
        REQUIRE(again[i].seq.notes == clips[i].seq.notes);
        REQUIRE(again[i].decay_rate == clips[i].decay_rate);
    }

    dsp::AudioClip audio = stim::synthesize_corpus_clip(clips[0]);
    CHECK(audio.samples.size() == 44100);
    float peak = 0.0f;
    for (float s : audio.samples) peak = std::max(peak, std::fabs(s));
    CHECK(peak == doctest::Approx(0.9).epsilon(1e-3));
}
