#include "rad/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "rad/denoiser.hpp"
#include "rad/io.hpp"
#include "rad/losses.hpp"
#include "rad/maskgen.hpp"
#include "rad/schedule.hpp"

namespace rad {

namespace {

std::string fmt(const char* f, double v) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

// x_prev ~ N(sqrt(abar') x0, bbar'), x_t | x_prev ~ N(sqrt(a) x_prev, b);
// condition x_prev on x_t by the bivariate-normal formula.
Gaussian1 condition_bivariate(double a, double abar_prev, double x_t, double x0) {
    const double b = 1.0 - a;
    const double bbar_prev = 1.0 - abar_prev;
    const double m_prev = std::sqrt(abar_prev) * x0;
    const double m_t = std::sqrt(a) * m_prev;
    const double v_prev = bbar_prev;
    const double cov = std::sqrt(a) * bbar_prev;
    const double v_t = a * bbar_prev + b;
    if (v_t == 0.0) return {m_prev, v_prev};
    return {m_prev + cov / v_t * (x_t - m_t), v_prev - cov * cov / v_t};
}

CheckResult check_schedule(Rng& rng) {
    double worst_terminal = 0.0, worst_product = 0.0;
    for (int n = 0; n < 50; ++n) {
        const int t1 = 1 + static_cast<int>(rng.below(64));
        const int t2 = 1 + static_cast<int>(rng.below(64));
        const double nu = rng.below(2) ? 1.0 - 1e-2 : 1.0 - 1e-4;
        const auto spec = ScheduleSpec::linear(t1, t2, nu, 1e-4, 0.02);
        Mask m(4, 4);
        for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng.below(2));
        const auto mid = spec.accumulate(t1, m);
        const auto end = spec.accumulate(t1 + t2, m);
        for (std::size_t i = 0; i < m.size(); ++i) {
            worst_terminal = std::max(worst_terminal, std::abs(mid.b_bar[i] - nu * m[i]));
            worst_terminal = std::max(worst_terminal, std::abs(end.b_bar[i] - nu));
        }
        // Looped product of per-step factors, independent of the closed form.
        for (int which = 0; which < 2; ++which) {
            long double prod = 1.0L;
            for (double b : (which ? spec.phase2() : spec.phase1()).betas) prod *= 1.0L - b;
            worst_product = std::max(worst_product, static_cast<double>(std::abs((prod - (1.0L - nu)) / (1.0L - nu))));
        }
    }
    const bool ok = worst_terminal <= 1e-10 && worst_product <= 1e-12;
    return {"schedule_laws", ok,
            fmt("terminal err %.3g", worst_terminal) + fmt(", phase product rel err %.3g", worst_product)};
}

CheckResult check_posterior(Rng& rng, Fault fault) {
    double worst = 0.0;
    for (int n = 0; n < 1000; ++n) {
        PixelCoeffs c;
        const int kind = n % 10;
        const double a = kind == 0 ? 1.0 : rng.uniform(0.5, 0.9999);
        const double abar_prev = kind == 1 ? 1.0 : rng.uniform(1e-4, 0.9999);
        c.a = a;
        c.b = 1.0 - a;
        c.a_bar_prev = abar_prev;
        c.b_bar_prev = 1.0 - abar_prev;
        c.b_bar = 1.0 - a * abar_prev;
        const double x0 = rng.uniform(-1.0, 1.0);
        const double x_t = rng.normal();
        const Gaussian1 got = posterior_pixel(c, x_t, x0, fault);
        const Gaussian1 want = condition_bivariate(a, abar_prev, x_t, x0);
        worst = std::max({worst, std::abs(got.mean - want.mean), std::abs(got.var - want.var)});
    }
    return {"posterior_oracle", worst <= 1e-10, fmt("max abs err %.3g over 1000 cases", worst)};
}

CheckResult check_gradient(std::uint64_t seed) {
    const auto g = finite_difference_check(seed, 2, 4, 8, 8);
    return {"fd_gradient", g.params <= 500 && g.max_rel_error < 1e-4,
            std::to_string(g.params) + " params" + fmt(", max rel err %.3g", g.max_rel_error)};
}

CheckResult check_weight_identity(Rng& rng) {
    double worst = 0.0;
    for (int n = 0; n < 500; ++n) {
        Transition tr;
        const double a = rng.uniform(0.5, 0.9999);
        const double abar_prev = rng.uniform(1e-4, 0.9999);
        auto one = [](double v) { return Field(1, 1, v); };
        tr.a = one(a);
        tr.b = one(1.0 - a);
        tr.a_bar_prev = one(abar_prev);
        tr.b_bar_prev = one(1.0 - abar_prev);
        tr.a_bar = one(a * abar_prev);
        tr.b_bar = one(1.0 - a * abar_prev);
        const Field x0 = one(rng.uniform(-1.0, 1.0));
        const Field eps = one(rng.normal());
        const Field eps_hat = one(eps[0] + rng.normal());
        const Field x_t = one(std::sqrt(tr.a_bar[0]) * x0[0] + std::sqrt(tr.b_bar[0]) * eps[0]);
        const double lhs = weighted_mse(eps, eps_hat, vlb_weights(tr));
        const double rhs = vlb_kl(forward_posterior(x_t, x0, tr), predicted_mean(x_t, eps_hat, tr),
                                  reverse_variance(tr), Mask::ones(1, 1));
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    return {"vlb_weight_identity", worst <= 1e-8, fmt("max rel err %.3g over 500 cases", worst)};
}

CheckResult check_invmap() {
    const auto ref = reference_bbar(1000, 1e-4, 0.02);
    int bad = 0;
    for (int t = 0; t <= 1000; ++t) {
        if (invmap_scalar(ref[t], ref) != static_cast<double>(t)) ++bad;
    }
    return {"invmap_grid_identity", bad == 0, std::to_string(bad) + " mismatches over 1001 grid points"};
}

CheckResult check_preservation(Rng& rng) {
    DenoiserConfig cfg;
    cfg.width = 4;
    cfg.emb_dim = 8;
    NeuralEps model(DenoiserParams::init(cfg, rng.next_u64()));
    const auto spec = ScheduleSpec::linear(20, 20, 1.0 - 1e-4, 1e-4, 0.02);
    double worst = 0.0;
    for (int n = 0; n < 10; ++n) {
        Field x0(16, 16);
        for (auto& v : x0.values()) v = rng.uniform(-1.0, 1.0);
        const Mask mask = sample_training_mask(rng.next_u64(), 16, 16).mask;
        const auto out = inpaint(x0, mask, spec, model, 10, Rng(rng.next_u64()));
        for (std::size_t i = 0; i < x0.size(); ++i) {
            if (!mask[i]) worst = std::max(worst, std::abs(out.x[i] - x0[i]));
        }
    }
    return {"inpaint_preservation", worst == 0.0, fmt("max non-mask diff %.3g", worst)};
}

}  // namespace

GradCheck finite_difference_check(std::uint64_t seed, int width, int emb_dim, int height, int field_width, double h) {
    DenoiserConfig cfg;
    cfg.width = width;
    cfg.emb_dim = emb_dim;
    const Denoiser net(cfg);
    Rng rng(seed, 0x6664ULL);
    auto params = DenoiserParams::init(cfg, rng.next_u64()).values;
    for (auto& p : params) p += 0.1 * rng.normal();  // nonzero biases too

    Field x(height, field_width), eps(height, field_width), bbar(height, field_width);
    for (auto& v : x.values()) v = rng.normal();
    for (auto& v : eps.values()) v = rng.normal();
    for (auto& v : bbar.values()) v = rng.uniform(0.0, 0.99);
    const auto emb = embed(bbar, reference_bbar(1000, 1e-4, 0.02), emb_dim);
    Mask active(height, field_width);
    for (std::size_t i = 0; i < active.size(); ++i) active.set(i, rng.uniform() < 0.6);
    active.set(0, true);

    auto loss = [&](const std::vector<double>& p) {
        return simple_loss(eps, net.forward(p, x, emb), active).value;
    };

    Denoiser::Cache cache;
    const Field out = net.forward(params, x, emb, &cache);
    Field d_out(height, field_width);
    const double n_active = static_cast<double>(active.count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (active[i]) d_out[i] = 2.0 * (out[i] - eps[i]) / n_active;
    }
    std::vector<double> grad(params.size(), 0.0);
    net.backward(params, cache, d_out, grad);

    GradCheck r;
    r.params = params.size();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params;
        p[i] = params[i] + h;
        const double up = loss(p);
        p[i] = params[i] - h;
        const double down = loss(p);
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
        r.max_rel_error = std::max(r.max_rel_error, std::abs(fd - grad[i]) / denom);
    }
    return r;
}

std::vector<CheckResult> run_selfcheck(const SelfcheckOptions& opts) {
    const Rng root(opts.seed, 0x73656c66ULL);
    std::vector<CheckResult> out;
    Rng r1 = root.fork(1);
    out.push_back(check_schedule(r1));
    Rng r2 = root.fork(2);
    out.push_back(check_posterior(r2, opts.fault));
    out.push_back(check_gradient(root.fork(3).next_u64()));
    Rng r4 = root.fork(4);
    out.push_back(check_weight_identity(r4));
    out.push_back(check_invmap());
    Rng r6 = root.fork(6);
    out.push_back(check_preservation(r6));
    return out;
}

std::string format_selfcheck(const std::vector<CheckResult>& results) {
    std::string s;
    int failed = 0;
    for (const auto& r : results) {
        s += std::string(r.pass ? "PASS " : "FAIL ") + r.name + ": " + r.detail + "\n";
        failed += r.pass ? 0 : 1;
    }
    s += failed == 0 ? "all " + std::to_string(results.size()) + " checks passed\n"
                     : std::to_string(failed) + " of " + std::to_string(results.size()) + " checks failed\n";
    return s;
}

}  // namespace rad
