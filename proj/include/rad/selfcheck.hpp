#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rad/diffusion.hpp"

namespace rad {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct SelfcheckOptions {
    std::uint64_t seed = 0;
    Fault fault = Fault::none;
};

// Runs the brute-force oracles against the library: schedule products and
// terminal conditions, posterior vs. bivariate Gaussian conditioning,
// finite-difference gradients, the weighted-MSE/KL identity, inverse-map
// grid identity and inpainting preservation. Order is fixed.
std::vector<CheckResult> run_selfcheck(const SelfcheckOptions& opts);

std::string format_selfcheck(const std::vector<CheckResult>& results);

// Gradient check of the denoiser's backward pass against central differences.
struct GradCheck {
    std::size_t params = 0;
    double max_rel_error = 0.0;
};
GradCheck finite_difference_check(std::uint64_t seed, int width, int emb_dim, int height, int field_width,
                                  double h = 1e-4);

}  // namespace rad
