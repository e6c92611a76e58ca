#pragma once

#include <string>
#include <vector>

#include "rad/field.hpp"

namespace rad {

struct BaseSchedule {
    std::vector<double> betas;

    std::size_t size() const { return betas.size(); }
};

BaseSchedule make_linear_schedule(int n, double beta_min, double beta_max);

// Rescales every step as beta <- 1 - (1 - beta)^g so that prod(1 - beta) = 1 - nu.
BaseSchedule normalize_schedule(const BaseSchedule& s, double nu);

// Per-pixel accumulants at a given step.
struct AccumState {
    Field a_bar;
    Field b_bar;
    int step = 0;
};

// Per-pixel coefficients of a (possibly strided) transition prev -> t.
struct Transition {
    Field a;          // abar_t / abar_prev
    Field b;          // 1 - a
    Field a_bar;      // at t
    Field b_bar;      // at t
    Field a_bar_prev;
    Field b_bar_prev;
    int t = 0;
    int prev = 0;
};

// Two-phase spatially variant schedule. Phase 1 (t <= t1) noises only mask
// pixels, phase 2 only the rest; both end at accumulated noise nu.
//
// Nothing is materialized per (t, pixel): every query goes through the
// exponent sums of gamma_t = log(1 - beta_t) / log(1 - nu), so for a pixel
// with mask value m the log of abar is a linear combination of log1p(-nu m)
// and log1p(-nu).
class ScheduleSpec {
public:
    ScheduleSpec(BaseSchedule phase1, BaseSchedule phase2, double nu);

    // Linear betas in [beta_min, beta_max] for both phases, normalized to nu.
    static ScheduleSpec linear(int t1, int t2, double nu, double beta_min, double beta_max);

    int t1() const { return static_cast<int>(phase1_.size()); }
    int t2() const { return static_cast<int>(phase2_.size()); }
    int total() const { return t1() + t2(); }
    double nu() const { return nu_; }

    const BaseSchedule& phase1() const { return phase1_; }
    const BaseSchedule& phase2() const { return phase2_; }

    // Scalar base variance and exponent for step t in [1, T].
    double beta(int t) const;
    double gamma(int t) const;

    // log(abar) for one pixel with mask value m at step t in [0, T].
    double log_abar(int t, bool m) const;
    // log of prod_{s in (prev, t]} (1 - b_s) for one pixel.
    double log_step(int prev, int t, bool m) const;

    Field eval_b(int t, const Mask& mask) const;
    AccumState accumulate(int t, const Mask& mask) const;
    Transition transition(int prev, int t, const Mask& mask) const;

private:
    void check_step(int t, int lo) const;

    BaseSchedule phase1_;
    BaseSchedule phase2_;
    double nu_;
    double log_keep_;              // log1p(-nu)
    std::vector<double> gamma1_;   // gamma for phase-1 steps
    std::vector<double> gamma2_;
    std::vector<double> cum1_;     // cum1_[k] = sum of first k gammas
    std::vector<double> cum2_;
};

// Accumulated-noise table of a plain scalar DDPM linear schedule, t = 0..n_ref.
std::vector<double> reference_bbar(int n_ref, double beta_min, double beta_max);

struct InvMapResult {
    Field tau;
    std::size_t clamped = 0;  // pixels above the table maximum
};

// Maps accumulated noise onto fractional reference timesteps by linear
// interpolation in the (strictly increasing) reference table.
InvMapResult invmap_bbar(const Field& bbar, const std::vector<double>& ref);
double invmap_scalar(double bbar, const std::vector<double>& ref, bool* clamped = nullptr);

// CSV with columns t,beta,gamma,bbar_mask,bbar_nonmask for t = 0..T.
std::string schedule_csv(const ScheduleSpec& spec);

}  // namespace rad
