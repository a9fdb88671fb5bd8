#include <algorithm>
#include <cmath>
#include <cstdint>

#include "melpc/common.hpp"
#include "melpc/dsp.hpp"
#include "melpc/io_util.hpp"

namespace melpc::dsp {

namespace {

constexpr int kRequiredRate = 44100;

struct WavFormat {
    uint16_t format = 0;  // 1 = PCM, 3 = IEEE float
    uint16_t channels = 0;
    uint32_t sample_rate = 0;
    uint16_t bits = 0;
};

float decode_sample(const uint8_t* p, const WavFormat& fmt) {
    switch (fmt.bits) {
        case 16: {
            int16_t v = static_cast<int16_t>(p[0] | (p[1] << 8));
            return static_cast<float>(v) / 32768.0f;
        }
        case 24: {
            int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
            if (v & 0x800000) v |= static_cast<int32_t>(0xff000000);
            return static_cast<float>(v) / 8388608.0f;
        }
        case 32: {
            uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                            (static_cast<uint32_t>(p[2]) << 16) |
                            (static_cast<uint32_t>(p[3]) << 24);
            float v;
            std::memcpy(&v, &bits, 4);
            return v;
        }
        default:
            throw DataError("unsupported WAV bit depth: " + std::to_string(fmt.bits));
    }
}

}  // namespace

AudioClip load_audio(const std::string& path, bool downmix) {
    std::string blob = read_file(path);
    ByteReader r(blob);
    try {
        if (r.bytes(4) != "RIFF") throw DataError("malformed WAV header: missing RIFF");
        r.u32();  // riff size, unreliable in the wild
        if (r.bytes(4) != "WAVE") throw DataError("malformed WAV header: missing WAVE");

        WavFormat fmt;
        bool have_fmt = false;
        std::string data;
        while (r.remaining() >= 8) {
            std::string chunk_id = r.bytes(4);
            uint32_t chunk_size = r.u32();
            if (chunk_id == "fmt ") {
                if (chunk_size < 16) throw DataError("malformed WAV header: fmt chunk too short");
                fmt.format = r.u16();
                fmt.channels = r.u16();
                fmt.sample_rate = r.u32();
                r.u32();  // byte rate
                r.u16();  // block align
                fmt.bits = r.u16();
                r.skip(chunk_size - 16);
                if (fmt.format == 0xFFFE) {
                    // WAVE_FORMAT_EXTENSIBLE carries the real format in the
                    // extension GUID; the leading u16 of the GUID matches the
                    // plain format tags we support.
                    throw DataError("unsupported WAV format tag: extensible");
                }
                have_fmt = true;
            } else if (chunk_id == "data") {
                data = r.bytes(chunk_size);
                if (chunk_size % 2) r.skip(std::min<size_t>(1, r.remaining()));
            } else {
                size_t n = chunk_size + (chunk_size % 2);
                r.skip(std::min(n, r.remaining()));
            }
        }
        if (!have_fmt) throw DataError("malformed WAV header: no fmt chunk");
        if (data.empty()) throw DataError("malformed WAV header: no data chunk");
        if (fmt.format != 1 && fmt.format != 3)
            throw DataError("unsupported WAV format tag: " + std::to_string(fmt.format));
        if (fmt.format == 3 && fmt.bits != 32)
            throw DataError("IEEE float WAV must be 32-bit");
        if (fmt.sample_rate != kRequiredRate)
            throw DataError("unsupported sample rate: " + std::to_string(fmt.sample_rate) +
                            " (corpus must be pre-resampled to 44100)");
        if (fmt.channels != 1 && fmt.channels != 2)
            throw DataError("unsupported channel count: " + std::to_string(fmt.channels));
        if (fmt.channels == 2 && !downmix)
            throw DataError("stereo input: pass downmix to average to mono");

        const size_t bytes_per_sample = fmt.bits / 8;
        const size_t stride = bytes_per_sample * fmt.channels;
        const size_t n = data.size() / stride;
        AudioClip clip;
        clip.sample_rate = kRequiredRate;
        clip.samples.resize(n);
        const uint8_t* p = reinterpret_cast<const uint8_t*>(data.data());
        for (size_t i = 0; i < n; ++i) {
            float v = decode_sample(p + i * stride, fmt);
            if (fmt.channels == 2) {
                v = 0.5f * (v + decode_sample(p + i * stride + bytes_per_sample, fmt));
            }
            if (!std::isfinite(v)) throw DataError("non-finite sample in WAV data");
            clip.samples[i] = v;
        }
        return clip;
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_wav16(const std::string& path, const AudioClip& clip) {
    const uint32_t n = static_cast<uint32_t>(clip.samples.size());
    const uint32_t data_bytes = n * 2;
    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVE";
    out += "fmt ";
    put_u32(out, 16);
    put_u16(out, 1);  // PCM
    put_u16(out, 1);  // mono
    put_u32(out, static_cast<uint32_t>(clip.sample_rate));
    put_u32(out, static_cast<uint32_t>(clip.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out += "data";
    put_u32(out, data_bytes);
    for (float s : clip.samples) {
        float c = std::clamp(s, -1.0f, 1.0f);
        int v = static_cast<int>(std::lrint(c * 32767.0f));
        put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(v)));
    }
    atomic_write_file(path, out);
}

}  // namespace melpc::dsp
