#include "rad/diffusion.hpp"

#include <cmath>

namespace rad {

namespace {

void check_shape(const Field& a, const Field& b, const char* what) {
    if (!a.same_shape(b)) throw InvalidArgument(std::string(what) + ": shape mismatch");
}

void check_shape(const Field& a, const Mask& m, const char* what) {
    if (!m.shape_matches(a)) throw InvalidArgument(std::string(what) + ": mask shape mismatch");
}

}  // namespace

PixelCoeffs pixel_coeffs(const Transition& tr, std::size_t i) {
    return {tr.a[i], tr.b[i], tr.b_bar[i], tr.a_bar_prev[i], tr.b_bar_prev[i]};
}

Gaussian1 posterior_pixel(const PixelCoeffs& c, double x_t, double x0, Fault fault) {
    if (c.b == 0.0) return {x_t, 0.0};
    if (c.b_bar_prev == 0.0) return {x0, 0.0};
    const double sign = fault == Fault::flip_posterior_sign ? -1.0 : 1.0;
    const double mean = (std::sqrt(c.a) * c.b_bar_prev * x_t + sign * std::sqrt(c.a_bar_prev) * c.b * x0) / c.b_bar;
    return {mean, c.b * c.b_bar_prev / c.b_bar};
}

ForwardSample forward_sample(const Field& x0, const AccumState& accum, Rng& rng) {
    check_shape(x0, accum.b_bar, "forward_sample");
    ForwardSample s{Field(x0.height(), x0.width()), Field(x0.height(), x0.width())};
    for (std::size_t i = 0; i < x0.size(); ++i) {
        s.eps[i] = rng.normal();
        if (accum.b_bar[i] == 0.0) {
            s.x_t[i] = x0[i];
        } else {
            s.x_t[i] = std::sqrt(accum.a_bar[i]) * x0[i] + std::sqrt(accum.b_bar[i]) * s.eps[i];
        }
    }
    return s;
}

PosteriorParams forward_posterior(const Field& x_t, const Field& x0, const Transition& tr) {
    check_shape(x_t, x0, "forward_posterior");
    check_shape(x_t, tr.b, "forward_posterior");
    PosteriorParams p{Field(x_t.height(), x_t.width()), Field(x_t.height(), x_t.width())};
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        const auto g = posterior_pixel(pixel_coeffs(tr, i), x_t[i], x0[i]);
        p.mean[i] = g.mean;
        p.var[i] = g.var;
    }
    return p;
}

PosteriorParams forward_posterior(const Field& x_t, const Field& x0, const ScheduleSpec& spec, int t,
                                  const Mask& mask) {
    check_shape(x_t, mask, "forward_posterior");
    return forward_posterior(x_t, x0, spec.transition(t - 1, t, mask));
}

Field predicted_mean(const Field& x_t, const Field& eps_hat, const Transition& tr) {
    check_shape(x_t, eps_hat, "predicted_mean");
    check_shape(x_t, tr.b, "predicted_mean");
    Field mu(x_t.height(), x_t.width());
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        if (tr.b_bar[i] == 0.0 || tr.b[i] == 0.0) {
            mu[i] = x_t[i];
        } else {
            mu[i] = (x_t[i] - tr.b[i] * eps_hat[i] / std::sqrt(tr.b_bar[i])) / std::sqrt(tr.a[i]);
        }
    }
    return mu;
}

Field predicted_mean(const Field& x_t, const Field& eps_hat, const ScheduleSpec& spec, int t, const Mask& mask) {
    check_shape(x_t, mask, "predicted_mean");
    return predicted_mean(x_t, eps_hat, spec.transition(t - 1, t, mask));
}

Field reverse_variance(const Transition& tr) {
    Field s(tr.b.height(), tr.b.width());
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = tr.b_bar[i] == 0.0 ? 0.0 : tr.b[i] * tr.b_bar_prev[i] / tr.b_bar[i];
    }
    return s;
}

NoisyState reverse_step(const NoisyState& state, const Field& eps_hat, const ScheduleSpec& spec, const Mask& mask,
                        const Rng& noise_root, int prev) {
    require(state.t >= 1, "reverse_step: state.t must be >= 1");
    if (prev < 0) prev = state.t - 1;
    require(prev < state.t, "reverse_step: prev must precede t");
    check_shape(state.x, mask, "reverse_step");
    const Transition tr = spec.transition(prev, state.t, mask);
    const Field mu = predicted_mean(state.x, eps_hat, tr);
    const Field s = reverse_variance(tr);

    NoisyState next;
    next.t = prev;
    next.x = state.x;
    Rng z = noise_root.fork(static_cast<std::uint64_t>(state.t));
    for (std::size_t i = 0; i < next.x.size(); ++i) {
        const double zi = z.normal();
        if (tr.b[i] == 0.0) continue;
        next.x[i] = prev == 0 ? mu[i] : mu[i] + std::sqrt(s[i]) * zi;
    }
    next.accum = spec.accumulate(prev, mask);
    return next;
}

std::vector<int> strided_timesteps(int t1, int steps) {
    require(steps >= 1, "sampling steps must be >= 1");
    require(steps <= t1, "sampling steps must not exceed T1");
    std::vector<int> seq(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) {
        seq[k] = static_cast<int>(static_cast<long long>(k) * t1 / steps);
    }
    return seq;
}

InpaintResult inpaint(const Field& x0, const Mask& mask, const ScheduleSpec& spec, EpsModel& model, int steps,
                      const Rng& rng) {
    check_shape(x0, mask, "inpaint");
    const auto seq = strided_timesteps(spec.t1(), steps);

    NoisyState st;
    st.t = spec.t1();
    st.accum = spec.accumulate(st.t, mask);
    Rng fwd = rng.fork(0);
    st.x = forward_sample(x0, st.accum, fwd).x_t;

    const Rng noise_root = rng.fork(1);
    InpaintResult r;
    for (int k = steps; k >= 1; --k) {
        const Field eps_hat = model.predict(st.x, st.accum);
        ++r.denoiser_calls;
        st = reverse_step(st, eps_hat, spec, mask, noise_root, seq[k - 1]);
    }
    r.x = std::move(st.x);
    return r;
}

Field generate(const ScheduleSpec& spec, EpsModel& model, int height, int width, const Rng& rng, int steps) {
    if (steps == 0) steps = spec.t1();
    const auto seq = strided_timesteps(spec.t1(), steps);
    const Mask all = Mask::ones(height, width);

    NoisyState st;
    st.t = spec.total();
    st.accum = spec.accumulate(st.t, all);
    st.x = Field(height, width);
    Rng init = rng.fork(0);
    for (auto& v : st.x.values()) v = init.normal();

    const Rng noise_root = rng.fork(1);
    // Phase 2 leaves every pixel of an all-ones mask untouched.
    st = reverse_step(st, Field(height, width), spec, all, noise_root, spec.t1());
    for (int k = steps; k >= 1; --k) {
        const Field eps_hat = model.predict(st.x, st.accum);
        st = reverse_step(st, eps_hat, spec, all, noise_root, seq[k - 1]);
    }
    return st.x;
}

}  // namespace rad
