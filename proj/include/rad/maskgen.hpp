#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "rad/field.hpp"

namespace rad {

struct PerlinParams {
    std::uint64_t seed = 0;
    double scale = 4.0;      // lattice cells across the image
    double threshold = 0.0;
    int octaves = 1;
};

// Classic 2-D Perlin noise over a seeded permutation of 0..255 with the eight
// unit gradient directions and quintic fade.
class PerlinNoise {
public:
    explicit PerlinNoise(std::uint64_t seed);

    // Raw noise at lattice coordinates (u, v); zero on integer points.
    // Scaled by sqrt(2) so the range is [-1, 1].
    double operator()(double u, double v) const;

    const std::array<std::uint8_t, 256>& permutation() const { return perm_; }

private:
    std::array<std::uint8_t, 256> perm_{};
};

// Noise sampled at pixel centres: u = (x + 0.5) * scale / W.
Field perlin2d(const PerlinParams& params, int height, int width);

Mask threshold_mask(const Field& noise, double threshold);

constexpr int kMaxMaskResamples = 16;

struct TrainingMask {
    Mask mask;
    PerlinParams params;
};

// Draws scale ~ U[2, 8] and threshold ~ U[-0.2, 0.2]; resamples with a fresh
// sub-seed while the result is all zeros or all ones. `forced_threshold`
// replaces the sampled threshold (used to exercise the resample path).
TrainingMask sample_training_mask(std::uint64_t seed, int height, int width,
                                  std::optional<double> forced_threshold = std::nullopt);

enum class EvalMaskKind { box, extreme, wide };

EvalMaskKind parse_eval_mask_kind(const std::string& s);
const char* to_string(EvalMaskKind k);

struct Square {
    int y0, x0, side_h, side_w;
};

// Top-left corner of the (H/2) x (W/2) square used by box and extreme masks.
Square eval_square(std::uint64_t seed, int height, int width);

Mask eval_mask(EvalMaskKind kind, std::uint64_t seed, int height, int width);

}  // namespace rad
