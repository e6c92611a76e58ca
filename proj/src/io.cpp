#include "rad/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rad::io {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

void ByteWriter::u32(std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    buf_.append(b, 4);
}

void ByteWriter::f32(float v) {
    char b[4];
    std::memcpy(b, &v, 4);
    buf_.append(b, 4);
}

void ByteWriter::bytes(std::string_view s) {
    buf_.append(s);
}

std::string_view ByteReader::bytes(std::size_t n) {
    if (remaining() < n) throw FormatError(what_ + ": truncated data");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
}

std::uint32_t ByteReader::u32() {
    std::uint32_t v;
    std::memcpy(&v, bytes(4).data(), 4);
    return v;
}

float ByteReader::f32() {
    float v;
    std::memcpy(&v, bytes(4).data(), 4);
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed on '" + path.string() + "'");
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed on '" + path.string() + "'");
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    auto tmp = path;
    tmp += ".tmp";
    write_file(tmp, bytes);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

std::string encode_tensor(const Field& f) {
    ByteWriter w;
    w.bytes("RADT");
    w.u32(kTensorVersion);
    w.u32(2);
    w.u32(static_cast<std::uint32_t>(f.height()));
    w.u32(static_cast<std::uint32_t>(f.width()));
    for (double v : f.values()) w.f32(static_cast<float>(v));
    return w.str();
}

Field decode_tensor(std::string_view bytes, const std::string& what) {
    ByteReader r(bytes, what);
    if (r.bytes(4) != "RADT") throw FormatError(what + ": bad magic (expected RADT)");
    const auto version = r.u32();
    if (version != kTensorVersion) throw FormatError(what + ": unsupported version " + std::to_string(version));
    const auto ndim = r.u32();
    if (ndim == 0 || ndim > 8) throw FormatError(what + ": bad ndim " + std::to_string(ndim));
    std::vector<std::uint32_t> dims(ndim);
    std::uint64_t count = 1;
    for (auto& d : dims) {
        d = r.u32();
        count *= d;
        if (count > (1ULL << 32)) throw FormatError(what + ": tensor too large");
    }
    if (r.remaining() != count * 4) {
        throw FormatError(what + ": payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(count * 4));
    }
    // Leading unit dimensions are accepted so C x H x W files with C = 1 load as fields.
    std::size_t lead = 0;
    while (dims.size() - lead > 2 && dims[lead] == 1) ++lead;
    if (dims.size() - lead != 2) throw FormatError(what + ": expected a 2-D field");
    const int h = static_cast<int>(dims[lead]);
    const int w = static_cast<int>(dims[lead + 1]);
    if (h <= 0 || w <= 0) throw FormatError(what + ": empty field");
    std::vector<double> vals(count);
    for (auto& v : vals) v = r.f32();
    return Field(h, w, std::move(vals));
}

void save_tensor(const std::filesystem::path& path, const Field& f) {
    write_file(path, encode_tensor(f));
}

Field load_tensor(const std::filesystem::path& path) {
    return decode_tensor(read_file(path), path.string());
}

std::string encode_pgm(const Field& f, double lo, double hi) {
    require(lo < hi, "pgm: need lo < hi");
    std::string out = "P5\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n255\n";
    out.reserve(out.size() + f.size());
    for (double v : f.values()) {
        const double c = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::floor(255.0 * c + 0.5))));
    }
    return out;
}

void save_pgm(const std::filesystem::path& path, const Field& f, double lo, double hi) {
    write_file(path, encode_pgm(f, lo, hi));
}

std::string encode_mask_pgm(const Mask& m) {
    std::string out = "P5\n" + std::to_string(m.width()) + " " + std::to_string(m.height()) + "\n255\n";
    for (auto v : m.values()) out.push_back(static_cast<char>(v ? 255 : 0));
    return out;
}

void save_mask_pgm(const std::filesystem::path& path, const Mask& m) {
    write_file(path, encode_mask_pgm(m));
}

Mask decode_mask_pgm(std::string_view bytes, const std::string& what) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&] {
        skip_space();
        long v = 0;
        std::size_t digits = 0;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1'000'000) throw FormatError(what + ": header value too large");
            ++pos;
            ++digits;
        }
        if (digits == 0) throw FormatError(what + ": malformed header");
        return v;
    };
    if (bytes.substr(0, 2) != "P5") throw FormatError(what + ": not a binary PGM (P5)");
    pos = 2;
    const long w = number();
    const long h = number();
    const long maxval = number();
    if (w <= 0 || h <= 0) throw FormatError(what + ": empty image");
    if (maxval <= 0 || maxval > 255) throw FormatError(what + ": only 8-bit PGM is supported");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw FormatError(what + ": malformed header");
    ++pos;
    const auto n = static_cast<std::size_t>(w * h);
    if (bytes.size() - pos != n) throw FormatError(what + ": pixel payload size mismatch");
    std::vector<std::uint8_t> vals(n);
    for (std::size_t i = 0; i < n; ++i) {
        vals[i] = static_cast<unsigned char>(bytes[pos + i]) * 2 > maxval ? 1 : 0;
    }
    return Mask(static_cast<int>(h), static_cast<int>(w), std::move(vals));
}

Mask load_mask_pgm(const std::filesystem::path& path) {
    return decode_mask_pgm(read_file(path), path.string());
}

std::string format_double(double v) {
    char buf[64];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace rad::io
