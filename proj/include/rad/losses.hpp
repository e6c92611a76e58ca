#pragma once

#include "rad/diffusion.hpp"
#include "rad/field.hpp"
#include "rad/schedule.hpp"

namespace rad {

constexpr double kVarianceFloor = 1e-12;

// Pixels with nonzero per-step noise b (the set I_t).
Mask active_set(const Field& b);

struct SimpleLoss {
    double value = 0.0;
    std::size_t active = 0;
    bool empty = false;
};

// Mean of (eps - eps_hat)^2 over active pixels; 0 and flagged when none.
SimpleLoss simple_loss(const Field& eps, const Field& eps_hat, const Mask& active);

// KL(N(m1, v1) || N(m2, v2)) with v1 floored at kVarianceFloor.
double gaussian_kl(double m1, double v1, double m2, double v2);

// Sum of per-pixel Gaussian KLs over active pixels. Throws on s_theta <= 0
// at an active pixel.
double vlb_kl(const PosteriorParams& posterior, const Field& mu_theta, const Field& s_theta, const Mask& active);

// w = b^2 / (a (1 - abar) s~) on active pixels with bbar_prev > 0, else 0.
// With s_theta = s~, 0.5 * sum w (eps - eps_hat)^2 equals the KL term.
Field vlb_weights(const Transition& tr);
Field vlb_weights(const ScheduleSpec& spec, int t, const Mask& mask);

double weighted_mse(const Field& eps, const Field& eps_hat, const Field& w);

struct LossBreakdown {
    double simple = 0.0;
    double vlb = 0.0;
    double total = 0.0;
    std::size_t active_count = 0;
    bool vlb_skipped = false;
};

// Loss of one training example plus d(total)/d(eps_hat).
struct ExampleLoss {
    LossBreakdown loss;
    Field grad_eps_hat;
};

// total = simple + lambda * vlb with fixed reverse variance s_theta = s~.
// The vlb term is skipped when every active pixel has a point-mass posterior.
ExampleLoss example_loss(const Field& x0, const Field& x_t, const Field& eps, const Field& eps_hat,
                         const Transition& tr, double lambda_vlb);

}  // namespace rad
