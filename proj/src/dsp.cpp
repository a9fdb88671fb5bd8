#include "melpc/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "melpc/common.hpp"
#include "melpc/io_util.hpp"

namespace melpc::dsp {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

constexpr uint16_t kMelsVersion = 1;

// Guard against log(0); well below the -80 dB floor for any real signal.
constexpr double kPowerGuard = 1e-20;

}  // namespace

void DspConfig::validate(int sample_rate) const {
    if (!is_pow2(fft_size)) throw DataError("fft_size must be a power of two");
    if (hop <= 0 || hop > fft_size) throw DataError("hop must be in [1, fft_size]");
    if (n_mels <= 0) throw DataError("n_mels must be positive");
    if (f_min < 0 || f_max <= f_min) throw DataError("need 0 <= f_min < f_max");
    if (f_max != sample_rate / 2.0)
        throw DataError("f_max must equal sample_rate/2 (= " +
                        std::to_string(sample_rate / 2.0) + ")");
    if (floor_db >= 0) throw DataError("floor_db must be negative");
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }

double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

double db_to_pixel(double db, double floor_db) {
    db = std::clamp(db, floor_db, 0.0);
    return (db - floor_db) / (0.0 - floor_db) * 255.0;
}

MelFilterbank MelFilterbank::build(const DspConfig& cfg, int sample_rate) {
    cfg.validate(sample_rate);
    MelFilterbank fb;
    fb.n_bands = cfg.n_mels;
    fb.n_bins = cfg.fft_size / 2 + 1;
    fb.weights.assign(static_cast<size_t>(fb.n_bands) * fb.n_bins, 0.0);
    fb.center_hz.resize(fb.n_bands);

    // n_mels + 2 mel points; filter m rises from point m to m+1, falls to m+2.
    const double mel_lo = hz_to_mel(cfg.f_min);
    const double mel_hi = hz_to_mel(cfg.f_max);
    std::vector<double> hz_pts(cfg.n_mels + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i)
        hz_pts[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

    const double bin_hz = static_cast<double>(sample_rate) / cfg.fft_size;
    for (int m = 0; m < fb.n_bands; ++m) {
        const double left = hz_pts[m], center = hz_pts[m + 1], right = hz_pts[m + 2];
        fb.center_hz[m] = center;
        for (int k = 0; k < fb.n_bins; ++k) {
            const double f = k * bin_hz;
            double w = 0.0;
            if (f >= left && f <= center && center > left) {
                w = (f - left) / (center - left);
            } else if (f > center && f <= right && right > center) {
                w = (right - f) / (right - center);
            }
            fb.weights[static_cast<size_t>(m) * fb.n_bins + k] = w;
        }
    }
    return fb;
}

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
    const size_t n = re.size();
    if (!is_pow2(static_cast<int>(n)) || im.size() != n)
        throw NumericError("fft_radix2: length must be a power of two");
    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const double wr = std::cos(ang), wi = std::sin(ang);
        for (size_t i = 0; i < n; i += len) {
            double cr = 1.0, ci = 0.0;
            for (size_t k = 0; k < len / 2; ++k) {
                const size_t a = i + k, b = i + k + len / 2;
                const double tr = re[b] * cr - im[b] * ci;
                const double ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                const double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

MelSpectrogram mel_spectrogram(const AudioClip& clip, const DspConfig& cfg) {
    cfg.validate(clip.sample_rate);
    const int n = static_cast<int>(clip.samples.size());
    const int nfft = cfg.fft_size;
    if (n < nfft)
        throw DataError("clip shorter than one FFT window (" + std::to_string(n) + " < " +
                        std::to_string(nfft) + " samples)");

    const int pad = nfft / 2;
    const int cols = n / cfg.hop + 1;
    const int bins = nfft / 2 + 1;

    // Periodic Hann window.
    std::vector<double> window(nfft);
    for (int i = 0; i < nfft; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / nfft);

    // Centered frames over a reflect-padded signal.
    auto sample_at = [&](int idx) -> double {
        if (idx < 0) idx = -idx;
        if (idx >= n) idx = 2 * (n - 1) - idx;
        return clip.samples[static_cast<size_t>(idx)];
    };

    MelFilterbank fb = MelFilterbank::build(cfg, clip.sample_rate);

    // Mel-band powers, then dB relative to the clip maximum.
    std::vector<double> mel_power(static_cast<size_t>(cfg.n_mels) * cols);
    std::vector<double> re(nfft), im(nfft), power(bins);
    for (int t = 0; t < cols; ++t) {
        const int start = t * cfg.hop - pad;
        for (int i = 0; i < nfft; ++i) {
            re[i] = sample_at(start + i) * window[i];
            im[i] = 0.0;
        }
        fft_radix2(re, im);
        for (int k = 0; k < bins; ++k) power[k] = re[k] * re[k] + im[k] * im[k];
        for (int m = 0; m < cfg.n_mels; ++m) {
            const double* w = &fb.weights[static_cast<size_t>(m) * bins];
            double acc = 0.0;
            for (int k = 0; k < bins; ++k) acc += w[k] * power[k];
            mel_power[static_cast<size_t>(m) * cols + t] = acc;
        }
    }

    double s_max = 0.0;
    for (double v : mel_power) s_max = std::max(s_max, v);

    MelSpectrogram spec;
    spec.rows = cfg.n_mels;
    spec.cols = cols;
    spec.column_duration = cfg.column_duration(clip.sample_rate);
    spec.pixels.resize(mel_power.size());
    if (s_max <= 0.0) {
        // Digital silence: defined as all-floor, not NaN.
        std::fill(spec.pixels.begin(), spec.pixels.end(), 0.0f);
        return spec;
    }
    const double ref_db = 10.0 * std::log10(s_max);
    for (size_t i = 0; i < mel_power.size(); ++i) {
        const double db = 10.0 * std::log10(std::max(mel_power[i], kPowerGuard)) - ref_db;
        spec.pixels[i] = static_cast<float>(db_to_pixel(db, cfg.floor_db));
    }
    return spec;
}

int mel_band_of_frequency(double f, const DspConfig& cfg, int sample_rate) {
    if (f < cfg.f_min || f > cfg.f_max)
        throw DataError("frequency " + std::to_string(f) + " outside [f_min, f_max]");
    MelFilterbank fb = MelFilterbank::build(cfg, sample_rate);
    auto it = std::lower_bound(fb.center_hz.begin(), fb.center_hz.end(), f);
    if (it == fb.center_hz.begin()) return 0;
    if (it == fb.center_hz.end()) return fb.n_bands - 1;
    int hi = static_cast<int>(it - fb.center_hz.begin());
    return (f - fb.center_hz[hi - 1] <= fb.center_hz[hi] - f) ? hi - 1 : hi;
}

FrameSequence extract_frames(const MelSpectrogram& spec, int hop_columns, int frame_cols) {
    if (hop_columns < 1) throw DataError("hop_columns must be >= 1");
    if (frame_cols < 1) throw DataError("frame_cols must be >= 1");
    if (spec.cols < frame_cols)
        throw DataError("spectrogram has " + std::to_string(spec.cols) +
                        " columns, narrower than one " + std::to_string(frame_cols) +
                        "-column frame");
    FrameSequence seq;
    seq.rows = spec.rows;
    seq.frame_cols = frame_cols;
    seq.hop_columns = hop_columns;
    seq.source_columns = spec.cols;
    const int n_frames = (spec.cols - frame_cols) / hop_columns + 1;
    seq.frames.reserve(n_frames);
    for (int k = 0; k < n_frames; ++k) {
        const int start = k * hop_columns;
        std::vector<float> frame(static_cast<size_t>(spec.rows) * frame_cols);
        for (int r = 0; r < spec.rows; ++r)
            for (int c = 0; c < frame_cols; ++c)
                frame[static_cast<size_t>(r) * frame_cols + c] = spec.at(r, start + c);
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

void save_mels(const std::string& path, const MelSpectrogram& spec) {
    std::string out;
    out.reserve(18 + spec.pixels.size() * 4);
    out += "MELS";
    put_u16(out, kMelsVersion);
    put_u32(out, static_cast<uint32_t>(spec.rows));
    put_u32(out, static_cast<uint32_t>(spec.cols));
    put_f64(out, spec.column_duration);
    for (float v : spec.pixels) put_f32(out, v);
    atomic_write_file(path, out);
}

MelSpectrogram load_mels(const std::string& path) {
    std::string blob = read_file(path);
    ByteReader r(blob);
    try {
        if (r.bytes(4) != "MELS") throw DataError("bad magic, not a MELS file");
        uint16_t version = r.u16();
        if (version != kMelsVersion)
            throw DataError("unsupported MELS version " + std::to_string(version));
        MelSpectrogram spec;
        spec.rows = static_cast<int>(r.u32());
        spec.cols = static_cast<int>(r.u32());
        spec.column_duration = r.f64();
        if (spec.rows <= 0 || spec.cols <= 0) throw DataError("bad MELS dimensions");
        const size_t n = static_cast<size_t>(spec.rows) * spec.cols;
        if (r.remaining() != n * 4) throw DataError("MELS pixel payload size mismatch");
        spec.pixels.resize(n);
        for (size_t i = 0; i < n; ++i) spec.pixels[i] = r.f32();
        return spec;
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

}  // namespace melpc::dsp
