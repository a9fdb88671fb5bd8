#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace melpc {

// Little-endian binary encoding, independent of host byte order.
inline void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline void put_f64(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

// Cursor over an in-memory blob; throws DataError past the end.
class ByteReader {
  public:
    ByteReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}
    explicit ByteReader(const std::string& s)
        : data_(reinterpret_cast<const uint8_t*>(s.data())), size_(s.size()) {}

    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    float f32();
    double f64();
    std::string bytes(size_t n);
    void skip(size_t n);
    size_t remaining() const { return size_ - pos_; }
    size_t pos() const { return pos_; }

  private:
    void need(size_t n) const;
    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
};

std::string read_file(const std::string& path);

// Writes to <path>.tmp.<pid> then renames, so outputs are never half-written.
void atomic_write_file(const std::string& path, const std::string& contents);

}  // namespace melpc
