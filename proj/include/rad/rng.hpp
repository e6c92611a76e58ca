#pragma once

#include <cstdint>

namespace rad {

// Counter-based generator: the n-th draw of stream s under key k is a pure
// function of (k, s, n). Forking a stream never disturbs its parent, so
// independent consumers (per step, per batch element) stay aligned across runs.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    Rng fork(std::uint64_t stream) const { return Rng(key_, stream, tag{}); }

    std::uint64_t next_u64();
    // Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n);
    double normal();

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    struct tag {};
    Rng(std::uint64_t parent_key, std::uint64_t stream, tag);

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace rad
