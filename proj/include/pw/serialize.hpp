#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pw/vec3.hpp"

namespace pw {

// Round a double through IEEE float32. Geometry destined for the on-disk
// formats is snapped at creation so round trips are bit-exact. The volatile
// store blocks the SLP vectorizer from folding the conversion pair away
// (observed with GCC 11 at -O3).
inline double snap_f32(double v) {
    volatile float f = static_cast<float>(v);
    return static_cast<double>(f);
}

inline Vec3 snap_f32(const Vec3& v) { return {snap_f32(v.x), snap_f32(v.y), snap_f32(v.z)}; }

inline void snap_f32(PointSet& points) {
    for (Vec3& p : points) p = snap_f32(p);
}

// Append little-endian scalars to a byte buffer.
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f32(std::string& out, float v);
void put_points_f32(std::string& out, const PointSet& points);

// Cursor over an in-memory byte buffer. Throws FormatError with the byte
// offset on truncation.
class ByteReader {
  public:
    ByteReader(const std::string& data, std::uint64_t base_offset = 0)
        : data_(data), base_(base_offset) {}

    std::uint64_t offset() const { return base_ + pos_; }
    bool at_end() const { return pos_ >= data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }

    std::uint32_t get_u32();
    std::uint64_t get_u64();
    float get_f32();
    // Reads count points (count*3 float32), validating finiteness.
    PointSet get_points_f32(std::size_t count, const char* what);
    std::string get_bytes(std::size_t count, const char* what);
    // Reads up to and including the next '\n'; error if none remains.
    std::string get_line(const char* what);

  private:
    void need(std::size_t n, const char* what);
    const std::string& data_;
    std::uint64_t base_ = 0;
    std::size_t pos_ = 0;
};

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

// Whole-file IO. Throws IoError on failure; read never returns partial data.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

// FNV-1a fingerprint of a file's bytes, hex-encoded.
std::string file_fingerprint(const std::string& path);
std::string hash_hex(std::uint64_t h);

}  // namespace pw
