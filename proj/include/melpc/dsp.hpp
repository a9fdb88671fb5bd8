#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace melpc::dsp {

// Mono PCM audio at 44.1 kHz, samples in [-1,1].
struct AudioClip {
    std::vector<float> samples;
    int sample_rate = 44100;
};

struct DspConfig {
    int fft_size = 2048;  // Hann window, power of two
    int hop = 512;
    int n_mels = 128;
    double f_min = 0.0;
    double f_max = 22050.0;
    double floor_db = -80.0;

    void validate(int sample_rate = 44100) const;
    double column_duration(int sample_rate = 44100) const {
        return static_cast<double>(hop) / sample_rate;
    }
};

// Quantized mel spectrogram: rows = mel bands (low to high), cols = time.
// Pixels are stored row-major in [0,255].
struct MelSpectrogram {
    int rows = 0;
    int cols = 0;
    std::vector<float> pixels;
    std::string clip_id;
    double column_duration = 0.0;

    float at(int r, int c) const { return pixels[static_cast<size_t>(r) * cols + c]; }
    float& at(int r, int c) { return pixels[static_cast<size_t>(r) * cols + c]; }
};

// Fixed-size windows cut from a spectrogram; frame k starts at column
// k * hop_columns.
struct FrameSequence {
    int rows = 0;
    int frame_cols = 0;
    int hop_columns = 0;
    int source_columns = 0;
    std::vector<std::vector<float>> frames;  // each rows x frame_cols, row-major

    size_t size() const { return frames.size(); }
};

// HTK mel scale.
double hz_to_mel(double f);
double mel_to_hz(double m);

// Linear [floor_db, 0] dB -> [0, 255] pixel mapping (clamped).
double db_to_pixel(double db, double floor_db = -80.0);

// Triangular filterbank, unit peak, bands equally spaced on the mel scale.
struct MelFilterbank {
    int n_bands = 0;
    int n_bins = 0;
    std::vector<double> weights;    // [band][bin], row-major
    std::vector<double> center_hz;  // strictly increasing

    static MelFilterbank build(const DspConfig& cfg, int sample_rate = 44100);
    double weight(int band, int bin) const {
        return weights[static_cast<size_t>(band) * n_bins + bin];
    }
};

AudioClip load_audio(const std::string& path, bool downmix = false);
void write_wav16(const std::string& path, const AudioClip& clip);

MelSpectrogram mel_spectrogram(const AudioClip& clip, const DspConfig& cfg);

// Index of the filter whose center frequency is nearest to f.
int mel_band_of_frequency(double f, const DspConfig& cfg, int sample_rate = 44100);

FrameSequence extract_frames(const MelSpectrogram& spec, int hop_columns, int frame_cols = 44);

// MELS cache file: magic "MELS", version u16, rows u32, cols u32,
// column_duration f64, row-major little-endian f32 pixels.
void save_mels(const std::string& path, const MelSpectrogram& spec);
MelSpectrogram load_mels(const std::string& path);

// In-place radix-2 FFT over interleaved complex doubles; n power of two.
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

}  // namespace melpc::dsp
