#include "wela/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wela {

std::uint64_t fnv1a64(const void* bytes, std::size_t len, std::uint64_t seed) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

void write_f32_le(std::ostream& os, const float* values, std::size_t count) {
    std::vector<unsigned char> buf(count * 4);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t u;
        std::memcpy(&u, &values[i], 4);
        buf[4 * i + 0] = static_cast<unsigned char>(u & 0xff);
        buf[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
        buf[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
        buf[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw std::runtime_error("write_f32_le: stream write failed");
}

std::vector<float> read_f32_le(std::istream& is, std::size_t count) {
    std::vector<unsigned char> buf(count * 4);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw std::runtime_error("read_f32_le: stream read failed");
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t u = static_cast<std::uint32_t>(buf[4 * i + 0]) |
                          (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                          (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                          (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
        std::memcpy(&out[i], &u, 4);
    }
    return out;
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_pgm(const std::string& path, int width, int height,
               const std::vector<unsigned char>& gray) {
    if (static_cast<std::size_t>(width) * static_cast<std::size_t>(height) != gray.size())
        throw std::invalid_argument("write_pgm: pixel count does not match dimensions");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "P5\n" << width << " " << height << "\n255\n";
    os.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace wela
