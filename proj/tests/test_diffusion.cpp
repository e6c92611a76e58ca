#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rad/diffusion.hpp"
#include "rad/maskgen.hpp"

using namespace rad;

namespace {

// Deterministic stand-in predictor: a fixed nonlinear function of x_t and b̄.
class StubEps : public EpsModel {
public:
    Field predict(const Field& x_t, const AccumState& accum) override {
        ++calls;
        Field out(x_t.height(), x_t.width());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x_t[i]) * (0.5 + accum.b_bar[i]);
        return out;
    }
    int calls = 0;
};

Field random_field(Rng& rng, int h, int w) {
    Field f(h, w);
    for (auto& v : f.values()) v = rng.uniform(-1.0, 1.0);
    return f;
}

Transition scalar_transition(double a, double abar_prev) {
    Transition tr;
    auto one = [](double v) { return Field(1, 1, v); };
    tr.a = one(a);
    tr.b = one(1.0 - a);
    tr.a_bar_prev = one(abar_prev);
    tr.b_bar_prev = one(1.0 - abar_prev);
    tr.a_bar = one(a * abar_prev);
    tr.b_bar = one(1.0 - a * abar_prev);
    return tr;
}

}  // namespace

TEST(ForwardSample, IdentityWhenNoNoise) {
    Rng rng(1);
    const Field x0 = random_field(rng, 4, 5);
    const auto spec = ScheduleSpec::linear(10, 10, 0.9999, 1e-4, 0.02);
    const auto acc = spec.accumulate(0, Mask::ones(4, 5));
    const auto s = forward_sample(x0, acc, rng);
    EXPECT_EQ(s.x_t, x0);
}

TEST(ForwardSample, PlugIn) {
    AccumState acc{Field(1, 1, 0.25), Field(1, 1, 0.75), 1};
    Rng rng(17);
    Rng copy = rng;
    const double eps = copy.normal();
    const auto s = forward_sample(Field(1, 1, 2.0), acc, rng);
    EXPECT_EQ(s.eps[0], eps);
    EXPECT_NEAR(s.x_t[0], std::sqrt(0.25) * 2.0 + std::sqrt(0.75) * eps, 1e-15);
}

TEST(ForwardSample, VarianceMatchesBbar) {
    const double bbar = 0.37;
    AccumState acc{Field(1, 1, 1.0 - bbar), Field(1, 1, bbar), 1};
    Rng rng(99);
    const int n = 100000;
    double s1 = 0.0, s2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double v = forward_sample(Field(1, 1, 0.3), acc, rng).x_t[0];
        s1 += v;
        s2 += v * v;
    }
    const double mean = s1 / n;
    const double var = s2 / n - mean * mean;
    // Standard error of a sample variance is about var * sqrt(2/n).
    EXPECT_NEAR(var, bbar, 3.0 * bbar * std::sqrt(2.0 / n));
    EXPECT_NEAR(mean, std::sqrt(1.0 - bbar) * 0.3, 3.0 * std::sqrt(bbar / n));
}

TEST(ForwardSample, ComposedOneStepTransitionsMatchMarginal) {
    const auto spec = ScheduleSpec::linear(20, 20, 0.9999, 1e-4, 0.02);
    const Mask m(1, 2, std::vector<std::uint8_t>{1, 0});
    const int t = 33;
    // Telescoped analytic check of the one-step recursion.
    for (std::size_t i = 0; i < 2; ++i) {
        long double mean_coef = 1.0L, var = 0.0L;
        for (int s = 1; s <= t; ++s) {
            const double b = spec.eval_b(s, m)[i];
            mean_coef *= std::sqrt(1.0L - b);
            var = (1.0L - b) * var + b;
        }
        const auto acc = spec.accumulate(t, m);
        EXPECT_NEAR(static_cast<double>(mean_coef), std::sqrt(acc.a_bar[i]), 1e-10);
        EXPECT_NEAR(static_cast<double>(var), acc.b_bar[i], 1e-10);
    }
    // Monte-Carlo: simulate the chain step by step.
    Rng rng(5);
    const int n = 20000;
    double s1 = 0.0, s2 = 0.0;
    for (int k = 0; k < n; ++k) {
        double x = 0.5;
        for (int s = 1; s <= t; ++s) {
            const double b = spec.eval_b(s, m)[0];
            x = std::sqrt(1.0 - b) * x + std::sqrt(b) * rng.normal();
        }
        s1 += x;
        s2 += x * x;
    }
    const auto acc = spec.accumulate(t, m);
    const double mean = s1 / n, var = s2 / n - mean * mean;
    EXPECT_NEAR(mean, std::sqrt(acc.a_bar[0]) * 0.5, 3.0 * std::sqrt(acc.b_bar[0] / n));
    EXPECT_NEAR(var, acc.b_bar[0], 3.0 * acc.b_bar[0] * std::sqrt(2.0 / n));
}

TEST(Posterior, DegenerateCases) {
    PixelCoeffs no_noise;  // b = 0
    auto g = posterior_pixel(no_noise, 0.7, -0.2);
    EXPECT_EQ(g.mean, 0.7);
    EXPECT_EQ(g.var, 0.0);

    PixelCoeffs first_step{0.9, 0.1, 0.1, 1.0, 0.0};  // b̄' = 0
    g = posterior_pixel(first_step, 0.7, -0.2);
    EXPECT_EQ(g.mean, -0.2);
    EXPECT_EQ(g.var, 0.0);
}

TEST(Posterior, ScalarCaseMatchesBivariateConditioning) {
    const auto tr = scalar_transition(0.9, 0.95);
    const auto p = forward_posterior(Field(1, 1, 1.0), Field(1, 1, 0.5), tr);
    const auto want = oracle::condition_prev_on_t(0.9, 0.95, 1.0, 0.5);
    EXPECT_NEAR(p.mean[0], want.mean, 1e-10);
    EXPECT_NEAR(p.var[0], want.var, 1e-10);
}

TEST(Posterior, RandomCasesMatchOracle) {
    Rng rng(8);
    for (int n = 0; n < 1000; ++n) {
        const double a = rng.uniform(1e-3, 1.0 - 1e-6);
        const double ap = rng.uniform(1e-3, 1.0 - 1e-6);
        const double xt = 2.0 * rng.normal(), x0 = rng.uniform(-1.0, 1.0);
        const auto p = forward_posterior(Field(1, 1, xt), Field(1, 1, x0), scalar_transition(a, ap));
        const auto want = oracle::condition_prev_on_t(a, ap, xt, x0);
        EXPECT_NEAR(p.mean[0], want.mean, 1e-10);
        EXPECT_NEAR(p.var[0], want.var, 1e-10);
        EXPECT_GE(p.var[0], 0.0);
    }
}

TEST(Posterior, ContinuityNearDegenerate) {
    PixelCoeffs c;
    c.a = 0.9;
    c.b = 0.1;
    c.b_bar_prev = 1e-8;
    c.a_bar_prev = 1.0 - 1e-8;
    c.b_bar = 1.0 - c.a * c.a_bar_prev;
    const auto g = posterior_pixel(c, 0.8, -0.3);
    EXPECT_NEAR(g.mean, -0.3, 1e-6);
    EXPECT_NEAR(g.var, 0.0, 1e-6);
}

TEST(Posterior, SpecOverloadUsesMaskSchedule) {
    const auto spec = ScheduleSpec::linear(10, 10, 0.9999, 1e-4, 0.02);
    const Mask m(1, 2, std::vector<std::uint8_t>{1, 0});
    const Field xt(1, 2, std::vector<double>{0.4, 0.9});
    const Field x0(1, 2, std::vector<double>{-0.1, 0.2});
    const auto p = forward_posterior(xt, x0, spec, 5, m);
    EXPECT_EQ(p.mean[1], 0.9);  // non-mask pixel is untouched in phase 1
    EXPECT_EQ(p.var[1], 0.0);
    const auto p1 = forward_posterior(xt, x0, spec, 1, m);
    EXPECT_EQ(p1.mean[0], -0.1);  // first step: point mass at x0
    EXPECT_GT(p.var[0], 0.0);
}

TEST(PredictedMean, SpecialCases) {
    const auto spec = ScheduleSpec::linear(10, 10, 0.9999, 1e-4, 0.02);
    const Mask m(1, 2, std::vector<std::uint8_t>{1, 0});
    const Field xt(1, 2, std::vector<double>{0.4, 0.9});
    const auto mu = predicted_mean(xt, Field(1, 2, 5.0), spec, 3, m);
    EXPECT_EQ(mu[1], 0.9);
    const auto tr = spec.transition(2, 3, m);
    const auto mu0 = predicted_mean(xt, Field(1, 2, 0.0), tr);
    EXPECT_NEAR(mu0[0], 0.4 / std::sqrt(tr.a[0]), 1e-15);
}

TEST(PredictedMean, TrueNoiseRecoversCleanValueAtFirstStep) {
    const auto spec = ScheduleSpec::linear(10, 10, 0.9999, 1e-4, 0.02);
    const Mask m = Mask::ones(1, 1);
    const auto acc = spec.accumulate(1, m);
    Rng rng(3);
    for (int k = 0; k < 100; ++k) {
        const Field x0(1, 1, rng.uniform(-1.0, 1.0));
        const auto fs = forward_sample(x0, acc, rng);
        EXPECT_NEAR(predicted_mean(fs.x_t, fs.eps, spec, 1, m)[0], x0[0], 1e-10);
    }
}

TEST(ReverseVariance, PlugIn) {
    Transition tr;
    tr.b = Field(1, 1, 0.1);
    tr.b_bar_prev = Field(1, 1, 0.2);
    tr.b_bar = Field(1, 1, 0.28);
    EXPECT_NEAR(reverse_variance(tr)[0], 0.1 * 0.2 / 0.28, 1e-15);
}

TEST(ReverseStep, CopiesPixelsWithoutNoise) {
    const auto spec = ScheduleSpec::linear(10, 10, 0.9999, 1e-4, 0.02);
    Rng rng(2);
    const Mask zeros = Mask::zeros(3, 4);
    NoisyState st{random_field(rng, 3, 4), 5, spec.accumulate(5, zeros)};
    const auto next = reverse_step(st, random_field(rng, 3, 4), spec, zeros, Rng(7));
    EXPECT_EQ(next.x, st.x);
    EXPECT_EQ(next.t, 4);
    EXPECT_EQ(next.accum.step, 4);
}

TEST(ReverseStep, LastStepIsDeterministic) {
    const auto spec = ScheduleSpec::linear(10, 10, 0.9999, 1e-4, 0.02);
    const Mask m = Mask::ones(2, 2);
    Rng rng(4);
    NoisyState st{random_field(rng, 2, 2), 1, spec.accumulate(1, m)};
    const Field eps = random_field(rng, 2, 2);
    const auto a = reverse_step(st, eps, spec, m, Rng(1));
    const auto b = reverse_step(st, eps, spec, m, Rng(2));
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.x, predicted_mean(st.x, eps, spec, 1, m));
}

TEST(ReverseStep, AddsScaledNoiseOnActivePixels) {
    const auto spec = ScheduleSpec::linear(10, 10, 0.9999, 1e-4, 0.02);
    const Mask m = Mask::ones(1, 1);
    NoisyState st{Field(1, 1, 0.3), 6, spec.accumulate(6, m)};
    const Field eps(1, 1, 0.1);
    const Rng root(11);
    Rng z = root.fork(6);
    const double zi = z.normal();
    const auto tr = spec.transition(5, 6, m);
    const auto next = reverse_step(st, eps, spec, m, root);
    const double want = predicted_mean(st.x, eps, tr)[0] + std::sqrt(reverse_variance(tr)[0]) * zi;
    EXPECT_EQ(next.x[0], want);
}

TEST(Strided, Sequence) {
    EXPECT_EQ(strided_timesteps(10, 10), (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
    EXPECT_EQ(strided_timesteps(100, 4), (std::vector<int>{0, 25, 50, 75, 100}));
    EXPECT_EQ(strided_timesteps(10, 3), (std::vector<int>{0, 3, 6, 10}));
    EXPECT_THROW(strided_timesteps(10, 0), InvalidArgument);
    EXPECT_THROW(strided_timesteps(10, 11), InvalidArgument);
}

TEST(Inpaint, AllZeroMaskReturnsInput) {
    const auto spec = ScheduleSpec::linear(20, 20, 0.9999, 1e-4, 0.02);
    Rng rng(6);
    const Field x0 = random_field(rng, 8, 8);
    StubEps model;
    const auto r = inpaint(x0, Mask::zeros(8, 8), spec, model, 20, Rng(1));
    EXPECT_EQ(r.x, x0);
    EXPECT_EQ(r.denoiser_calls, 20);
}

TEST(Inpaint, PreservesKnownPixelsAndCountsCalls) {
    const auto spec = ScheduleSpec::linear(50, 50, 0.9999, 1e-4, 0.02);
    Rng rng(12);
    for (int n = 0; n < 10; ++n) {
        const Field x0 = random_field(rng, 16, 16);
        const Mask m = sample_training_mask(rng.next_u64(), 16, 16).mask;
        StubEps model;
        const int steps = 1 + static_cast<int>(rng.below(50));
        const auto r = inpaint(x0, m, spec, model, steps, Rng(rng.next_u64()));
        EXPECT_EQ(r.denoiser_calls, steps);
        EXPECT_EQ(model.calls, steps);
        for (std::size_t i = 0; i < x0.size(); ++i) {
            if (!m[i]) { EXPECT_EQ(r.x[i], x0[i]); }
            EXPECT_TRUE(std::isfinite(r.x[i]));
        }
    }
}

TEST(Inpaint, FullStrideEqualsUnstridedChain) {
    const auto spec = ScheduleSpec::linear(25, 25, 0.9999, 1e-4, 0.02);
    Rng rng(13);
    const Field x0 = random_field(rng, 8, 8);
    const Mask m = sample_training_mask(3, 8, 8).mask;
    const Rng run(77);
    StubEps model;
    const auto strided = inpaint(x0, m, spec, model, spec.t1(), run);

    // Hand-rolled chain t = T1 .. 1, one step at a time, same streams.
    NoisyState st{Field(), spec.t1(), spec.accumulate(spec.t1(), m)};
    Rng fwd = run.fork(0);
    st.x = forward_sample(x0, st.accum, fwd).x_t;
    const Rng noise = run.fork(1);
    while (st.t > 0) st = reverse_step(st, model.predict(st.x, st.accum), spec, m, noise);
    EXPECT_EQ(strided.x, st.x);
}

TEST(Inpaint, RejectsBadArguments) {
    const auto spec = ScheduleSpec::linear(10, 10, 0.9999, 1e-4, 0.02);
    StubEps model;
    EXPECT_THROW(inpaint(Field(4, 4), Mask::ones(4, 4), spec, model, 0, Rng(1)), InvalidArgument);
    EXPECT_THROW(inpaint(Field(4, 4), Mask::ones(4, 4), spec, model, 11, Rng(1)), InvalidArgument);
    EXPECT_THROW(inpaint(Field(4, 4), Mask::ones(4, 5), spec, model, 5, Rng(1)), InvalidArgument);
}

TEST(Generate, ShapeDeterminismAndCalls) {
    const auto spec = ScheduleSpec::linear(12, 12, 0.9999, 1e-4, 0.02);
    StubEps model;
    const Field a = generate(spec, model, 6, 10, Rng(3));
    EXPECT_EQ(model.calls, 12);
    EXPECT_EQ(a.height(), 6);
    EXPECT_EQ(a.width(), 10);
    EXPECT_EQ(a, generate(spec, model, 6, 10, Rng(3)));
    EXPECT_NE(a, generate(spec, model, 6, 10, Rng(4)));
    StubEps strided;
    generate(spec, strided, 6, 10, Rng(3), 4);
    EXPECT_EQ(strided.calls, 4);
}

TEST(RngTest, ForkStreamsAreIndependentAndReproducible) {
    const Rng root(5);
    Rng a = root.fork(1), b = root.fork(1), c = root.fork(2);
    const auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    EXPECT_NE(va, c.next_u64());
    Rng u(9);
    for (int k = 0; k < 10000; ++k) {
        const double x = u.uniform();
        EXPECT_GE(x, 0.0);
        EXPECT_LT(x, 1.0);
        EXPECT_LT(u.below(7), 7u);
    }
}

TEST(RngTest, NormalMoments) {
    Rng r(21);
    const int n = 200000;
    double s1 = 0, s2 = 0;
    for (int k = 0; k < n; ++k) {
        const double v = r.normal();
        s1 += v;
        s2 += v * v;
    }
    EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}
