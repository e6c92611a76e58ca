#include "rad/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "rad/rng.hpp"

namespace rad {

namespace {

constexpr double kScaleMin = 2.0;
constexpr double kScaleMax = 8.0;
constexpr double kThresholdSpan = 0.2;

double fade(double t) {
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
}

double lerp(double a, double b, double t) {
    return a + t * (b - a);
}

// Dot product of gradient h (one of 8 unit directions) with (dx, dy).
double grad(std::uint8_t h, double dx, double dy) {
    constexpr double r = std::numbers::sqrt2 / 2.0;
    switch (h & 7) {
        case 0: return dx;
        case 1: return r * (dx + dy);
        case 2: return dy;
        case 3: return r * (dy - dx);
        case 4: return -dx;
        case 5: return -r * (dx + dy);
        case 6: return -dy;
        default: return r * (dx - dy);
    }
}

}  // namespace

PerlinNoise::PerlinNoise(std::uint64_t seed) {
    for (int i = 0; i < 256; ++i) perm_[i] = static_cast<std::uint8_t>(i);
    Rng rng(seed, 0x5045524cULL);
    for (int i = 255; i > 0; --i) {
        const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(perm_[i], perm_[j]);
    }
}

double PerlinNoise::operator()(double u, double v) const {
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const auto xi = static_cast<long long>(fu);
    const auto yi = static_cast<long long>(fv);
    const double dx = u - fu;
    const double dy = v - fv;
    auto hash = [&](long long x, long long y) {
        const auto px = perm_[static_cast<std::size_t>(x & 255)];
        return perm_[static_cast<std::size_t>((px + y) & 255)];
    };
    const double n00 = grad(hash(xi, yi), dx, dy);
    const double n10 = grad(hash(xi + 1, yi), dx - 1.0, dy);
    const double n01 = grad(hash(xi, yi + 1), dx, dy - 1.0);
    const double n11 = grad(hash(xi + 1, yi + 1), dx - 1.0, dy - 1.0);
    const double su = fade(dx);
    const double sv = fade(dy);
    return std::numbers::sqrt2 * lerp(lerp(n00, n10, su), lerp(n01, n11, su), sv);
}

Field perlin2d(const PerlinParams& params, int height, int width) {
    require(height >= 4 && width >= 4, "perlin2d: H and W must be >= 4");
    require(params.scale >= 1.0, "perlin2d: scale must be >= 1");
    require(params.octaves >= 1, "perlin2d: octaves must be >= 1");
    Field out(height, width);
    double amp_total = 0.0;
    double amp = 1.0;
    double freq = params.scale;
    for (int o = 0; o < params.octaves; ++o) {
        const PerlinNoise noise(params.seed + static_cast<std::uint64_t>(o) * 0x9e3779b97f4a7c15ULL);
        for (int y = 0; y < height; ++y) {
            const double v = (y + 0.5) * freq / height;
            for (int x = 0; x < width; ++x) {
                const double u = (x + 0.5) * freq / width;
                out(y, x) += amp * noise(u, v);
            }
        }
        amp_total += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    if (params.octaves > 1) {
        for (auto& v : out.values()) v /= amp_total;
    }
    return out;
}

Mask threshold_mask(const Field& noise, double threshold) {
    Mask m(noise.height(), noise.width());
    for (std::size_t i = 0; i < noise.size(); ++i) m.set(i, noise[i] > threshold);
    return m;
}

TrainingMask sample_training_mask(std::uint64_t seed, int height, int width, std::optional<double> forced_threshold) {
    for (int attempt = 0; attempt < kMaxMaskResamples; ++attempt) {
        Rng rng(seed, static_cast<std::uint64_t>(attempt));
        PerlinParams p;
        p.seed = rng.next_u64();
        p.scale = rng.uniform(kScaleMin, kScaleMax);
        p.threshold = rng.uniform(-kThresholdSpan, kThresholdSpan);
        if (forced_threshold) p.threshold = *forced_threshold;
        Mask m = threshold_mask(perlin2d(p, height, width), p.threshold);
        if (!m.degenerate()) return {std::move(m), p};
    }
    throw DegenerateMask("training mask: still degenerate after " + std::to_string(kMaxMaskResamples) + " resamples");
}

EvalMaskKind parse_eval_mask_kind(const std::string& s) {
    if (s == "box") return EvalMaskKind::box;
    if (s == "extreme") return EvalMaskKind::extreme;
    if (s == "wide") return EvalMaskKind::wide;
    throw InvalidArgument("unknown mask kind '" + s + "' (expected box, extreme or wide)");
}

const char* to_string(EvalMaskKind k) {
    switch (k) {
        case EvalMaskKind::box: return "box";
        case EvalMaskKind::extreme: return "extreme";
        case EvalMaskKind::wide: return "wide";
    }
    return "?";
}

Square eval_square(std::uint64_t seed, int height, int width) {
    require(height >= 8 && width >= 8, "eval mask: H and W must be >= 8");
    Rng rng(seed, 0xb0c5ULL);
    Square s{0, 0, height / 2, width / 2};
    s.y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - s.side_h + 1)));
    s.x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - s.side_w + 1)));
    return s;
}

Mask eval_mask(EvalMaskKind kind, std::uint64_t seed, int height, int width) {
    require(height >= 8 && width >= 8, "eval mask: H and W must be >= 8");
    if (kind == EvalMaskKind::wide) {
        // Union of 1-3 low-frequency blobs, thresholded at the quantile that
        // yields a target area drawn from [0.15, 0.45].
        Rng rng(seed, 0x77696465ULL);
        const int blobs = 1 + static_cast<int>(rng.below(3));
        const double target = rng.uniform(0.15, 0.45);
        Field combined(height, width, -2.0);
        for (int k = 0; k < blobs; ++k) {
            PerlinParams p;
            p.seed = rng.next_u64();
            p.scale = rng.uniform(1.5, 3.0);
            const Field f = perlin2d(p, height, width);
            for (std::size_t i = 0; i < f.size(); ++i) combined[i] = std::max(combined[i], f[i]);
        }
        const std::size_t n = combined.size();
        auto ones = static_cast<std::size_t>(std::lround(target * static_cast<double>(n)));
        ones = std::clamp<std::size_t>(ones, 1, n - 1);
        // Mark exactly the `ones` largest values; ties broken by index order.
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return combined[a] > combined[b]; });
        Mask m(height, width);
        for (std::size_t i = 0; i < ones; ++i) m.set(order[i], true);
        return m;
    }
    const Square s = eval_square(seed, height, width);
    Mask m(height, width);
    for (int y = s.y0; y < s.y0 + s.side_h; ++y)
        for (int x = s.x0; x < s.x0 + s.side_w; ++x) m.set(y, x, true);
    return kind == EvalMaskKind::box ? m : m.complement();
}

}  // namespace rad
