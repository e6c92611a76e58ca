#include "rad/losses.hpp"

#include <algorithm>
#include <cmath>

namespace rad {

Mask active_set(const Field& b) {
    Mask m(b.height(), b.width());
    for (std::size_t i = 0; i < b.size(); ++i) m.set(i, b[i] != 0.0);
    return m;
}

SimpleLoss simple_loss(const Field& eps, const Field& eps_hat, const Mask& active) {
    require(eps.same_shape(eps_hat) && active.shape_matches(eps), "simple_loss: shape mismatch");
    SimpleLoss r;
    double sum = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!active[i]) continue;
        const double d = eps[i] - eps_hat[i];
        sum += d * d;
        ++r.active;
    }
    r.empty = r.active == 0;
    r.value = r.empty ? 0.0 : sum / static_cast<double>(r.active);
    return r;
}

double gaussian_kl(double m1, double v1, double m2, double v2) {
    v1 = std::max(v1, kVarianceFloor);
    const double d = m1 - m2;
    return 0.5 * (std::log(v2 / v1) + (v1 + d * d) / v2 - 1.0);
}

double vlb_kl(const PosteriorParams& posterior, const Field& mu_theta, const Field& s_theta, const Mask& active) {
    require(posterior.mean.same_shape(mu_theta) && mu_theta.same_shape(s_theta) && active.shape_matches(mu_theta),
            "vlb_kl: shape mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_theta.size(); ++i) {
        if (!active[i]) continue;
        if (!(s_theta[i] > 0.0)) throw InvalidArgument("vlb_kl: nonpositive model variance on an active pixel");
        sum += gaussian_kl(posterior.mean[i], posterior.var[i], mu_theta[i], s_theta[i]);
    }
    return sum;
}

Field vlb_weights(const Transition& tr) {
    Field w(tr.b.height(), tr.b.width());
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (tr.b[i] == 0.0 || tr.b_bar_prev[i] == 0.0) continue;
        const double s = tr.b[i] * tr.b_bar_prev[i] / tr.b_bar[i];
        w[i] = tr.b[i] * tr.b[i] / (tr.a[i] * tr.b_bar[i] * s);
    }
    return w;
}

Field vlb_weights(const ScheduleSpec& spec, int t, const Mask& mask) {
    return vlb_weights(spec.transition(t - 1, t, mask));
}

double weighted_mse(const Field& eps, const Field& eps_hat, const Field& w) {
    require(eps.same_shape(eps_hat) && eps.same_shape(w), "weighted_mse: shape mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double d = eps[i] - eps_hat[i];
        sum += w[i] * d * d;
    }
    return 0.5 * sum;
}

ExampleLoss example_loss(const Field& x0, const Field& x_t, const Field& eps, const Field& eps_hat,
                         const Transition& tr, double lambda_vlb) {
    require(lambda_vlb >= 0.0, "loss: lambda_vlb must be >= 0");
    const Mask active = active_set(tr.b);
    const SimpleLoss simple = simple_loss(eps, eps_hat, active);

    ExampleLoss r;
    r.grad_eps_hat = Field(eps.height(), eps.width());
    r.loss.simple = simple.value;
    r.loss.active_count = simple.active;
    if (!simple.empty) {
        const double scale = 2.0 / static_cast<double>(simple.active);
        for (std::size_t i = 0; i < eps.size(); ++i) {
            if (active[i]) r.grad_eps_hat[i] = scale * (eps_hat[i] - eps[i]);
        }
    }

    // Pixels whose posterior is a point mass are excluded from the KL term.
    Mask kl_active(active.height(), active.width());
    for (std::size_t i = 0; i < active.size(); ++i) kl_active.set(i, active[i] && tr.b_bar_prev[i] != 0.0);
    r.loss.vlb_skipped = kl_active.count() == 0;
    if (lambda_vlb > 0.0 && !r.loss.vlb_skipped) {
        const PosteriorParams post = forward_posterior(x_t, x0, tr);
        const Field mu = predicted_mean(x_t, eps_hat, tr);
        const Field s = reverse_variance(tr);
        r.loss.vlb = vlb_kl(post, mu, s, kl_active);
        for (std::size_t i = 0; i < eps.size(); ++i) {
            if (!kl_active[i]) continue;
            // dKL/dmu * dmu/deps_hat
            const double dmu = (mu[i] - post.mean[i]) / s[i];
            const double dmu_deps = -tr.b[i] / (std::sqrt(tr.b_bar[i]) * std::sqrt(tr.a[i]));
            r.grad_eps_hat[i] += lambda_vlb * dmu * dmu_deps;
        }
    }
    r.loss.total = r.loss.simple + lambda_vlb * r.loss.vlb;
    return r;
}

}  // namespace rad
