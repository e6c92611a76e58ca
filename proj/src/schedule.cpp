#include "rad/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace rad {

namespace {

// 1 - exp(l) without producing -0.0 for l == 0.
double one_minus_exp(double l) {
    return l == 0.0 ? 0.0 : -std::expm1(l);
}

void check_betas(const BaseSchedule& s) {
    require(!s.betas.empty(), "schedule: empty base schedule");
    for (double b : s.betas) {
        if (!(b > 0.0 && b < 1.0)) throw InvalidArgument("schedule: beta outside (0, 1)");
    }
}

template <class Fn>
Field per_mask_value(const Mask& mask, Fn fn) {
    const double v0 = fn(false);
    const double v1 = fn(true);
    Field out(mask.height(), mask.width());
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? v1 : v0;
    return out;
}

}  // namespace

BaseSchedule make_linear_schedule(int n, double beta_min, double beta_max) {
    require(n >= 1, "linear schedule: n must be >= 1");
    require(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0,
            "linear schedule: need 0 < beta_min <= beta_max < 1");
    BaseSchedule s;
    s.betas.resize(static_cast<std::size_t>(n));
    if (n == 1) {
        s.betas[0] = beta_min;
        return s;
    }
    for (int t = 0; t < n; ++t) {
        s.betas[t] = beta_min + (beta_max - beta_min) * static_cast<double>(t) / static_cast<double>(n - 1);
    }
    return s;
}

BaseSchedule normalize_schedule(const BaseSchedule& s, double nu) {
    check_betas(s);
    require(nu > 0.0 && nu < 1.0, "normalize: nu must lie in (0, 1)");
    double total = 0.0;
    for (double b : s.betas) total += std::log1p(-b);
    const double g = std::log1p(-nu) / total;
    BaseSchedule out;
    out.betas.reserve(s.size());
    for (double b : s.betas) out.betas.push_back(-std::expm1(g * std::log1p(-b)));
    return out;
}

ScheduleSpec::ScheduleSpec(BaseSchedule phase1, BaseSchedule phase2, double nu) : nu_(nu) {
    require(nu > 0.0 && nu < 1.0, "schedule: nu must lie in (0, 1)");
    phase1_ = normalize_schedule(phase1, nu);
    phase2_ = normalize_schedule(phase2, nu);
    for (double b : phase1_.betas) require(b > 0.0 && b < 1.0, "schedule: normalization pushed beta outside (0, 1)");
    for (double b : phase2_.betas) require(b > 0.0 && b < 1.0, "schedule: normalization pushed beta outside (0, 1)");
    log_keep_ = std::log1p(-nu);

    auto fill = [&](const BaseSchedule& s, std::vector<double>& gam, std::vector<double>& cum) {
        gam.clear();
        cum.assign(1, 0.0);
        for (double b : s.betas) {
            gam.push_back(std::log1p(-b) / log_keep_);
            cum.push_back(cum.back() + gam.back());
        }
    };
    fill(phase1_, gamma1_, cum1_);
    fill(phase2_, gamma2_, cum2_);
}

ScheduleSpec ScheduleSpec::linear(int t1, int t2, double nu, double beta_min, double beta_max) {
    require(t1 >= 1, "schedule: phase 1 needs at least one step");
    require(t2 >= 1, "schedule: phase 2 needs at least one step");
    return ScheduleSpec(make_linear_schedule(t1, beta_min, beta_max), make_linear_schedule(t2, beta_min, beta_max), nu);
}

void ScheduleSpec::check_step(int t, int lo) const {
    if (t < lo || t > total()) {
        throw InvalidArgument("schedule: step " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                              std::to_string(total()) + "]");
    }
}

double ScheduleSpec::beta(int t) const {
    check_step(t, 1);
    return t <= t1() ? phase1_.betas[t - 1] : phase2_.betas[t - t1() - 1];
}

double ScheduleSpec::gamma(int t) const {
    check_step(t, 1);
    return t <= t1() ? gamma1_[t - 1] : gamma2_[t - t1() - 1];
}

double ScheduleSpec::log_abar(int t, bool m) const {
    check_step(t, 0);
    const double lm = m ? log_keep_ : 0.0;
    if (t <= t1()) return cum1_[t] * lm;
    return lm + cum2_[t - t1()] * (log_keep_ - lm);
}

double ScheduleSpec::log_step(int prev, int t, bool m) const {
    check_step(t, 1);
    check_step(prev, 0);
    require(prev < t, "schedule: transition needs prev < t");
    const double lm = m ? log_keep_ : 0.0;
    double g1 = 0.0;
    for (int s = prev + 1; s <= std::min(t, t1()); ++s) g1 += gamma1_[s - 1];
    double g2 = 0.0;
    for (int s = std::max(prev, t1()) + 1; s <= t; ++s) g2 += gamma2_[s - t1() - 1];
    double l = 0.0;
    if (g1 != 0.0) l += g1 * lm;
    if (g2 != 0.0) l += g2 * (log_keep_ - lm);
    return l;
}

Field ScheduleSpec::eval_b(int t, const Mask& mask) const {
    check_step(t, 1);
    return per_mask_value(mask, [&](bool m) { return one_minus_exp(log_step(t - 1, t, m)); });
}

AccumState ScheduleSpec::accumulate(int t, const Mask& mask) const {
    check_step(t, 0);
    AccumState st;
    st.step = t;
    st.b_bar = per_mask_value(mask, [&](bool m) { return one_minus_exp(log_abar(t, m)); });
    st.a_bar = Field(mask.height(), mask.width());
    for (std::size_t i = 0; i < st.b_bar.size(); ++i) st.a_bar[i] = 1.0 - st.b_bar[i];
    return st;
}

Transition ScheduleSpec::transition(int prev, int t, const Mask& mask) const {
    Transition tr;
    tr.t = t;
    tr.prev = prev;
    tr.b = per_mask_value(mask, [&](bool m) { return one_minus_exp(log_step(prev, t, m)); });
    tr.a = Field(mask.height(), mask.width());
    for (std::size_t i = 0; i < tr.b.size(); ++i) tr.a[i] = 1.0 - tr.b[i];
    auto cur = accumulate(t, mask);
    auto before = accumulate(prev, mask);
    tr.a_bar = std::move(cur.a_bar);
    tr.b_bar = std::move(cur.b_bar);
    tr.a_bar_prev = std::move(before.a_bar);
    tr.b_bar_prev = std::move(before.b_bar);
    return tr;
}

std::vector<double> reference_bbar(int n_ref, double beta_min, double beta_max) {
    const auto s = make_linear_schedule(n_ref, beta_min, beta_max);
    std::vector<double> ref(static_cast<std::size_t>(n_ref) + 1, 0.0);
    double l = 0.0;
    for (int t = 1; t <= n_ref; ++t) {
        l += std::log1p(-s.betas[t - 1]);
        ref[t] = -std::expm1(l);
    }
    return ref;
}

double invmap_scalar(double bbar, const std::vector<double>& ref, bool* clamped) {
    require(ref.size() >= 2, "invmap: reference table too short");
    if (clamped) *clamped = false;
    const int n = static_cast<int>(ref.size()) - 1;
    if (!(bbar > ref.front())) return 0.0;
    if (bbar >= ref.back()) {
        if (clamped && bbar > ref.back()) *clamped = true;
        return static_cast<double>(n);
    }
    const auto it = std::upper_bound(ref.begin(), ref.end(), bbar);
    const int k = static_cast<int>(it - ref.begin()) - 1;
    const double frac = (bbar - ref[k]) / (ref[k + 1] - ref[k]);
    return static_cast<double>(k) + frac;
}

InvMapResult invmap_bbar(const Field& bbar, const std::vector<double>& ref) {
    InvMapResult r{Field(bbar.height(), bbar.width()), 0};
    for (std::size_t i = 0; i < bbar.size(); ++i) {
        bool c = false;
        r.tau[i] = invmap_scalar(bbar[i], ref, &c);
        r.clamped += c ? 1 : 0;
    }
    return r;
}

std::string schedule_csv(const ScheduleSpec& spec) {
    std::string out = "t,beta,gamma,bbar_mask,bbar_nonmask\n";
    char line[256];
    for (int t = 0; t <= spec.total(); ++t) {
        const double beta = t == 0 ? 0.0 : spec.beta(t);
        const double gam = t == 0 ? 0.0 : spec.gamma(t);
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g\n", t, beta, gam,
                      one_minus_exp(spec.log_abar(t, true)), one_minus_exp(spec.log_abar(t, false)));
        out += line;
    }
    return out;
}

}  // namespace rad
