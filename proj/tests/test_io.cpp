#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "oracles.hpp"
#include "rad/io.hpp"
#include "rad/rng.hpp"

using namespace rad;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "rad_io_test";
    fs::create_directories(dir);
    return dir / name;
}

std::string le32(std::uint32_t v) {
    std::string s(4, '\0');
    for (int i = 0; i < 4; ++i) s[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    return s;
}

std::string f32le(float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    return le32(u);
}

}  // namespace

TEST(Tensor, ExactLayout) {
    const Field f(2, 2, std::vector<double>{0.0, 1.0, 2.0, 3.0});
    const std::string want = "RADT" + le32(1) + le32(2) + le32(2) + le32(2) + f32le(0.0f) + f32le(1.0f) +
                             f32le(2.0f) + f32le(3.0f);
    EXPECT_EQ(io::encode_tensor(f), want);
}

TEST(Tensor, RoundTripBitwiseForF32Data) {
    Rng rng(1);
    Field f(5, 7);
    for (auto& v : f.values()) v = static_cast<float>(rng.normal());
    const auto path = scratch("rt.radt");
    io::save_tensor(path, f);
    EXPECT_EQ(io::load_tensor(path), f);
    EXPECT_EQ(io::encode_tensor(io::load_tensor(path)), io::read_file(path));
}

TEST(Tensor, LeadingUnitDimsAccepted) {
    const std::string bytes = "RADT" + le32(1) + le32(3) + le32(1) + le32(1) + le32(2) + f32le(4.0f) + f32le(5.0f);
    const Field f = io::decode_tensor(bytes);
    EXPECT_EQ(f.height(), 1);
    EXPECT_EQ(f.width(), 2);
    EXPECT_EQ(f[1], 5.0);
}

TEST(Tensor, StructuredFormatErrors) {
    const std::string good = io::encode_tensor(Field(2, 2, 1.0));
    std::string bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(io::decode_tensor(bad_magic), FormatError);
    std::string bad_version = good;
    bad_version[4] = 9;
    EXPECT_THROW(io::decode_tensor(bad_version), FormatError);
    EXPECT_THROW(io::decode_tensor(good.substr(0, good.size() - 1)), FormatError);
    EXPECT_THROW(io::decode_tensor(good + "x"), FormatError);
    EXPECT_THROW(io::decode_tensor("RA"), FormatError);
    const std::string three_d = "RADT" + le32(1) + le32(3) + le32(2) + le32(1) + le32(1) + f32le(0) + f32le(0);
    EXPECT_THROW(io::decode_tensor(three_d), FormatError);
}

TEST(Tensor, MissingFileIsIoError) {
    EXPECT_THROW(io::load_tensor(scratch("does_not_exist.radt")), IoError);
    EXPECT_THROW(io::save_tensor(scratch("no_such_dir") / "x" / "y.radt", Field(1, 1)), IoError);
}

TEST(Pgm, LevelsAndRounding) {
    const auto header = std::string("P5\n3 1\n255\n");
    const std::string lo = io::encode_pgm(Field(1, 3, -1.0), -1.0, 1.0);
    EXPECT_EQ(lo, header + std::string(3, '\0'));
    const std::string hi = io::encode_pgm(Field(1, 3, 1.0), -1.0, 1.0);
    EXPECT_EQ(hi, header + std::string(3, '\xff'));
    const std::string mid = io::encode_pgm(Field(1, 3, 0.0), -1.0, 1.0);
    EXPECT_EQ(static_cast<unsigned char>(mid.back()), 128);

    Rng rng(2);
    Field f(4, 4);
    for (auto& v : f.values()) v = rng.uniform(-1.5, 1.5);
    const std::string img = io::encode_pgm(f, -1.0, 1.0);
    const std::size_t off = img.size() - 16;
    for (std::size_t i = 0; i < 16; ++i)
        EXPECT_EQ(static_cast<unsigned char>(img[off + i]), oracle::pgm_level(f[i], -1.0, 1.0));
    EXPECT_THROW(io::encode_pgm(f, 1.0, 1.0), InvalidArgument);
}

TEST(Pgm, MaskRoundTripAndHeaderParsing) {
    Mask m(3, 5);
    m.set(0, 1, true);
    m.set(2, 4, true);
    const auto path = scratch("m.pgm");
    io::save_mask_pgm(path, m);
    EXPECT_EQ(io::load_mask_pgm(path), m);
    const std::string bytes = io::read_file(path);
    EXPECT_EQ(bytes.substr(0, 11), "P5\n5 3\n255\n");
    for (std::size_t i = 11; i < bytes.size(); ++i) {
        const auto v = static_cast<unsigned char>(bytes[i]);
        EXPECT_TRUE(v == 0 || v == 255);
    }
    const std::string commented = "P5\n# made by hand\n2 1\n# max\n255\n" + std::string("\x00\xc8", 2);
    const Mask c = io::decode_mask_pgm(commented);
    EXPECT_EQ(c[0], 0);
    EXPECT_EQ(c[1], 1);
    EXPECT_THROW(io::decode_mask_pgm("P2\n1 1\n255\n0"), FormatError);
    EXPECT_THROW(io::decode_mask_pgm("P5\n2 2\n255\n" + std::string(3, '\0')), FormatError);
}

TEST(Writers, ByteIdenticalForIdenticalInputs) {
    const Field f(3, 3, 0.25);
    io::save_tensor(scratch("a.radt"), f);
    io::save_tensor(scratch("b.radt"), f);
    EXPECT_EQ(io::read_file(scratch("a.radt")), io::read_file(scratch("b.radt")));
    io::write_file_atomic(scratch("c.txt"), "hello");
    EXPECT_EQ(io::read_file(scratch("c.txt")), "hello");
}

TEST(FormatDouble, ShortestRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 0.9999, 123456789.0}) {
        EXPECT_EQ(std::stod(io::format_double(v)), v);
    }
    EXPECT_EQ(io::format_double(0.1), "0.1");
    EXPECT_EQ(io::format_double(0.9999), "0.9999");
}
