#include "pw/serialize.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "pw/error.hpp"
#include "pw/rng.hpp"

namespace pw {

namespace {

// Serialized formats are little-endian; byte-swap would go here for BE hosts.
static_assert(sizeof(float) == 4, "float must be IEEE binary32");

template <typename T>
void put_raw(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

}  // namespace

void put_u32(std::string& out, std::uint32_t v) { put_raw(out, v); }
void put_u64(std::string& out, std::uint64_t v) { put_raw(out, v); }
void put_f32(std::string& out, float v) { put_raw(out, v); }

void put_points_f32(std::string& out, const PointSet& points) {
    for (const Vec3& p : points) {
        put_f32(out, static_cast<float>(p.x));
        put_f32(out, static_cast<float>(p.y));
        put_f32(out, static_cast<float>(p.z));
    }
}

void ByteReader::need(std::size_t n, const char* what) {
    if (pos_ + n > data_.size())
        throw FormatError(std::string("truncated data while reading ") + what, offset());
}

std::uint32_t ByteReader::get_u32() {
    need(4, "u32");
    std::uint32_t v;
    std::memcpy(&v, data_.data() + pos_, 4);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::get_u64() {
    need(8, "u64");
    std::uint64_t v;
    std::memcpy(&v, data_.data() + pos_, 8);
    pos_ += 8;
    return v;
}

float ByteReader::get_f32() {
    need(4, "f32");
    float v;
    std::memcpy(&v, data_.data() + pos_, 4);
    pos_ += 4;
    return v;
}

PointSet ByteReader::get_points_f32(std::size_t count, const char* what) {
    PointSet points;
    points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t at = offset();
        Vec3 p{get_f32(), get_f32(), get_f32()};
        if (!p.finite())
            throw FormatError(std::string("non-finite value in ") + what, at);
        points.push_back(p);
    }
    return points;
}

std::string ByteReader::get_bytes(std::size_t count, const char* what) {
    need(count, what);
    std::string s = data_.substr(pos_, count);
    pos_ += count;
    return s;
}

std::string ByteReader::get_line(const char* what) {
    const std::size_t nl = data_.find('\n', pos_);
    if (nl == std::string::npos)
        throw FormatError(std::string("missing newline terminating ") + what, offset());
    std::string s = data_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return s;
}

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const std::string& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= bytes.size()) {
        const std::uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                                (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                                static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(kB64[(v >> 6) & 63]);
        out.push_back(kB64[v & 63]);
        i += 3;
    }
    const std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        const std::uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.append("==");
    } else if (rest == 2) {
        const std::uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                                (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(kB64[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::string base64_decode(const std::string& text) {
    int rev[256];
    for (int i = 0; i < 256; ++i) rev[i] = -1;
    for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kB64[i])] = i;

    if (text.size() % 4 != 0)
        throw FormatError("base64 payload length not a multiple of 4", text.size());
    std::string out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        std::uint32_t v = 0;
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=') {
                ++pad;
                v <<= 6;
                continue;
            }
            const int d = rev[static_cast<unsigned char>(c)];
            if (d < 0 || pad > 0) throw FormatError("invalid base64 character", i + k);
            v = (v << 6) | static_cast<std::uint32_t>(d);
        }
        out.push_back(static_cast<char>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<char>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<char>(v & 0xff));
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure: " + path);
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failure: " + path);
}

std::string hash_hex(std::uint64_t h) {
    static const char* hex = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = hex[h & 0xf];
        h >>= 4;
    }
    return s;
}

std::string file_fingerprint(const std::string& path) {
    return hash_hex(fnv1a64(read_file(path)));
}

}  // namespace pw
