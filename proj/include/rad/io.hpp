#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rad/field.hpp"

namespace rad::io {

constexpr std::uint32_t kTensorVersion = 1;

// Little-endian byte builder.
class ByteWriter {
public:
    void u32(std::uint32_t v);
    void f32(float v);
    void bytes(std::string_view s);
    const std::string& str() const { return buf_; }

private:
    std::string buf_;
};

// Bounds-checked reader; every overrun is a FormatError naming `what`.
class ByteReader {
public:
    ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}
    std::uint32_t u32();
    float f32();
    std::string_view bytes(std::size_t n);
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);
// Writes to a sibling temporary and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// "RADT", u32 version, u32 ndim, u32 dims[ndim], f32 payload (row-major, LE).
std::string encode_tensor(const Field& f);
Field decode_tensor(std::string_view bytes, const std::string& what = "tensor");
void save_tensor(const std::filesystem::path& path, const Field& f);
Field load_tensor(const std::filesystem::path& path);

// Binary P5 greymap, maxval 255: round-half-up of 255 * clamp((x - lo) / (hi - lo)).
std::string encode_pgm(const Field& f, double lo, double hi);
void save_pgm(const std::filesystem::path& path, const Field& f, double lo, double hi);

// Masks are written as 0/255 and read back as (value > maxval / 2).
std::string encode_mask_pgm(const Mask& m);
void save_mask_pgm(const std::filesystem::path& path, const Mask& m);
Mask decode_mask_pgm(std::string_view bytes, const std::string& what = "pgm");
Mask load_mask_pgm(const std::filesystem::path& path);

// Shortest decimal that round-trips a double, for CSV output.
std::string format_double(double v);

}  // namespace rad::io
