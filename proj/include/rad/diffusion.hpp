#pragma once

#include <vector>

#include "rad/field.hpp"
#include "rad/rng.hpp"
#include "rad/schedule.hpp"

namespace rad {

// Anything that predicts the standardized noise in x_t from x_t and the
// per-pixel accumulants.
class EpsModel {
public:
    virtual ~EpsModel() = default;
    virtual Field predict(const Field& x_t, const AccumState& accum) = 0;
};

struct NoisyState {
    Field x;
    int t = 0;
    AccumState accum;
};

struct PosteriorParams {
    Field mean;
    Field var;
};

struct Gaussian1 {
    double mean = 0.0;
    double var = 0.0;
};

// Coefficients of one pixel for a transition prev -> t.
struct PixelCoeffs {
    double a = 1.0;
    double b = 0.0;
    double b_bar = 0.0;
    double a_bar_prev = 1.0;
    double b_bar_prev = 0.0;
};

PixelCoeffs pixel_coeffs(const Transition& tr, std::size_t i);

// Mutation hook for the self-check's fault-injection mode.
enum class Fault { none, flip_posterior_sign };

// q(x_prev | x_t, x0) for one pixel, covering the point-mass cases:
// b == 0 gives N(x_t, 0); b != 0 with bbar_prev == 0 gives N(x0, 0).
Gaussian1 posterior_pixel(const PixelCoeffs& c, double x_t, double x0, Fault fault = Fault::none);

struct ForwardSample {
    Field x_t;
    Field eps;
};

// x_t = sqrt(abar) x0 + sqrt(bbar) eps; one normal is drawn per pixel in
// row-major order whether or not the pixel is noised.
ForwardSample forward_sample(const Field& x0, const AccumState& accum, Rng& rng);

PosteriorParams forward_posterior(const Field& x_t, const Field& x0, const Transition& tr);
PosteriorParams forward_posterior(const Field& x_t, const Field& x0, const ScheduleSpec& spec, int t,
                                  const Mask& mask);

Field predicted_mean(const Field& x_t, const Field& eps_hat, const Transition& tr);
Field predicted_mean(const Field& x_t, const Field& eps_hat, const ScheduleSpec& spec, int t, const Mask& mask);

// Reverse-process variance s_t = b * bbar_prev / bbar (0 where bbar == 0).
Field reverse_variance(const Transition& tr);

// One reverse transition t -> prev (prev defaults to t - 1). Pixels with
// b == 0 are copied bitwise; the rest get mean + sqrt(s) z where z comes from
// noise_root.fork(t), or z = 0 when prev == 0.
NoisyState reverse_step(const NoisyState& state, const Field& eps_hat, const ScheduleSpec& spec, const Mask& mask,
                        const Rng& noise_root, int prev = -1);

// Uniformly strided phase-1 timesteps 0 = s_0 < s_1 < ... < s_steps = T1.
std::vector<int> strided_timesteps(int t1, int steps);

struct InpaintResult {
    Field x;
    int denoiser_calls = 0;
};

// Noises x0 to T1 with the mask schedule, then runs `steps` strided reverse
// steps. Non-mask pixels come back bitwise equal to x0.
InpaintResult inpaint(const Field& x0, const Mask& mask, const ScheduleSpec& spec, EpsModel& model, int steps,
                      const Rng& rng);

// Unconditional sampling: x_T ~ N(0, I) with an all-ones mask, so phase 2 is
// an identity and phase 1 runs over `steps` strided steps (0 means T1).
Field generate(const ScheduleSpec& spec, EpsModel& model, int height, int width, const Rng& rng, int steps = 0);

}  // namespace rad
