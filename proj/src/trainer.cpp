#include "rad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rad/io.hpp"
#include "rad/losses.hpp"

namespace rad {

ToyDataset::ToyDataset(DatasetKind kind, int height, int width, Gaussian2pxParams g2)
    : kind_(kind), h_(height), w_(width), g2_(g2) {
    require(height >= 1 && width >= 1, "dataset: dimensions must be positive");
    if (kind == DatasetKind::gaussian2px) require(width % 2 == 0, "gaussian2px: width must be even");
}

ToyDataset ToyDataset::from_config(const TrainConfig& cfg) {
    return ToyDataset(cfg.dataset, cfg.height, cfg.width, cfg.g2);
}

Field ToyDataset::sample(Rng& rng) const {
    Field f(h_, w_);
    switch (kind_) {
        case DatasetKind::gaussian2px: {
            const double c = std::sqrt(std::max(0.0, 1.0 - g2_.rho * g2_.rho));
            for (int y = 0; y < h_; ++y) {
                for (int x = 0; x < w_; x += 2) {
                    const double z1 = rng.normal();
                    const double z2 = rng.normal();
                    f(y, x) = g2_.mean0 + g2_.std0 * z1;
                    f(y, x + 1) = g2_.mean1 + g2_.std1 * (g2_.rho * z1 + c * z2);
                }
            }
            break;
        }
        case DatasetKind::blobs: {
            const int k = 1 + static_cast<int>(rng.below(3));
            for (auto& v : f.values()) v = -0.8;
            for (int b = 0; b < k; ++b) {
                const double cy = rng.uniform(0.0, h_);
                const double cx = rng.uniform(0.0, w_);
                const double r = rng.uniform(1.0, 1.0 + std::max(h_, w_) / 4.0);
                for (int y = 0; y < h_; ++y)
                    for (int x = 0; x < w_; ++x) {
                        const double d2 = (y + 0.5 - cy) * (y + 0.5 - cy) + (x + 0.5 - cx) * (x + 0.5 - cx);
                        f(y, x) += 1.6 * std::exp(-d2 / (2.0 * r * r));
                    }
            }
            break;
        }
        case DatasetKind::gradients: {
            const double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double amp = rng.uniform(0.5, 1.0);
            for (int y = 0; y < h_; ++y)
                for (int x = 0; x < w_; ++x) {
                    const double u = w_ > 1 ? 2.0 * x / (w_ - 1) - 1.0 : 0.0;
                    const double v = h_ > 1 ? 2.0 * y / (h_ - 1) - 1.0 : 0.0;
                    f(y, x) = amp * (std::cos(th) * u + std::sin(th) * v);
                }
            break;
        }
        case DatasetKind::checker: {
            const int cell = rng.below(2) ? 4 : 2;
            const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(cell)));
            const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(cell)));
            const double pol = rng.below(2) ? 0.8 : -0.8;
            for (int y = 0; y < h_; ++y)
                for (int x = 0; x < w_; ++x) f(y, x) = (((y + oy) / cell + (x + ox) / cell) % 2) ? pol : -pol;
            break;
        }
    }
    for (auto& v : f.values()) v = std::clamp(v, -1.0, 1.0);
    return f;
}

PairMoments pair_moments(const Gaussian2pxParams& g) {
    PairMoments m{};
    m.mean[0] = g.mean0;
    m.mean[1] = g.mean1;
    m.cov[0][0] = g.std0 * g.std0;
    m.cov[1][1] = g.std1 * g.std1;
    m.cov[0][1] = m.cov[1][0] = g.rho * g.std0 * g.std1;
    return m;
}

namespace {

// Moore-Penrose inverse of a symmetric positive semidefinite 2x2 matrix.
void pinv_sym2(const double m[2][2], double out[2][2]) {
    const double tr = m[0][0] + m[1][1];
    const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if (tr <= 0.0) {
        out[0][0] = out[0][1] = out[1][0] = out[1][1] = 0.0;
    } else if (det > 1e-14 * tr * tr) {
        out[0][0] = m[1][1] / det;
        out[1][1] = m[0][0] / det;
        out[0][1] = out[1][0] = -m[0][1] / det;
    } else {
        // rank one: M = tr * v v^T, pinv = M / tr^2
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) out[i][j] = m[i][j] / (tr * tr);
    }
}

}  // namespace

Field GaussianOracleEps::predict(const Field& x_t, const AccumState& accum) {
    ++calls_;
    require(x_t.same_shape(accum.b_bar), "oracle: shape mismatch");
    require(x_t.width() % 2 == 0, "oracle: width must be even");
    const PairMoments pm = pair_moments(g_);
    Field eps(x_t.height(), x_t.width());
    for (int y = 0; y < x_t.height(); ++y) {
        for (int x = 0; x < x_t.width(); x += 2) {
            double sa[2], sb[2], r[2];
            for (int k = 0; k < 2; ++k) {
                sa[k] = std::sqrt(accum.a_bar(y, x + k));
                sb[k] = std::sqrt(accum.b_bar(y, x + k));
                r[k] = x_t(y, x + k) - sa[k] * pm.mean[k];
            }
            // Cov(x_t) = A S A + B^2, Cov(eps, x_t) = B.
            double m[2][2], mi[2][2];
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) m[i][j] = sa[i] * pm.cov[i][j] * sa[j] + (i == j ? sb[i] * sb[i] : 0.0);
            pinv_sym2(m, mi);
            for (int k = 0; k < 2; ++k) {
                if (accum.b_bar(y, x + k) == 0.0) continue;
                eps(y, x + k) = sb[k] * (mi[k][0] * r[0] + mi[k][1] * r[1]);
            }
        }
    }
    return eps;
}

Field gaussian_conditional_mean(const Gaussian2pxParams& g, const Field& x0, const Mask& mask) {
    require(mask.shape_matches(x0), "conditional mean: shape mismatch");
    require(x0.width() % 2 == 0, "conditional mean: width must be even");
    const PairMoments pm = pair_moments(g);
    Field out = x0;
    for (int y = 0; y < x0.height(); ++y) {
        for (int x = 0; x < x0.width(); x += 2) {
            const bool m0 = mask(y, x), m1 = mask(y, x + 1);
            for (int k = 0; k < 2; ++k) {
                const bool masked = k == 0 ? m0 : m1;
                if (!masked) continue;
                const int o = 1 - k;
                const bool other_observed = o == 0 ? !m0 : !m1;
                double v = pm.mean[k];
                if (other_observed && pm.cov[o][o] > 0.0) {
                    v += pm.cov[k][o] / pm.cov[o][o] * (x0(y, x + o) - pm.mean[o]);
                }
                out(y, x + k) = v;
            }
        }
    }
    return out;
}

std::string loss_csv(const std::vector<LossRecord>& log, int every) {
    std::string out = "step,simple,vlb,lr\n";
    for (const auto& r : log) {
        if (r.step % every != 0 && r.step != static_cast<int>(log.size())) continue;
        out += std::to_string(r.step) + "," + io::format_double(r.simple) + "," + io::format_double(r.vlb) + "," +
               io::format_double(r.lr) + "\n";
    }
    return out;
}

TrainResult train(const TrainConfig& cfg, const ToyDataset& data, const std::optional<std::filesystem::path>& out_dir,
                  const std::function<void(const LossRecord&)>& on_log) {
    cfg.validate();
    require(data.height() == cfg.height && data.width() == cfg.width, "train: dataset shape differs from config");
    const DenoiserConfig mcfg = cfg.denoiser();
    const ScheduleSpec spec = cfg.schedule();
    const auto ref = reference_bbar(mcfg.ref_steps, mcfg.ref_beta_min, mcfg.ref_beta_max);
    const Denoiser net(mcfg);

    TrainResult res;
    res.params = DenoiserParams::init(mcfg, cfg.seed);
    auto& theta = res.params.values;
    const std::size_t n = theta.size();
    std::vector<double> grad(n), m1(n, 0.0), m2(n, 0.0);
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

    if (out_dir) std::filesystem::create_directories(*out_dir);
    const auto ckpt_path = out_dir ? std::optional(*out_dir / "checkpoint.radc") : std::nullopt;

    const Rng root(cfg.seed, 0x747261696eULL);
    const int t_max = cfg.phase2_enabled ? spec.total() : spec.t1();
    std::optional<Mask> debug_mask;
    if (cfg.fixed_mask) debug_mask = sample_training_mask(cfg.seed, cfg.height, cfg.width).mask;
    Denoiser::Cache cache;

    for (int step = 1; step <= cfg.steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double simple_sum = 0.0, vlb_sum = 0.0;
        const Rng step_rng = root.fork(static_cast<std::uint64_t>(step));
        for (int b = 0; b < cfg.batch; ++b) {
            Rng r = step_rng.fork(static_cast<std::uint64_t>(b));
            Rng data_rng = r.fork(0);
            const Field x0 = data.sample(data_rng);
            const Mask mask = debug_mask ? *debug_mask : sample_training_mask(r.next_u64(), cfg.height, cfg.width).mask;
            const int t = 1 + static_cast<int>(r.below(static_cast<std::uint64_t>(t_max)));
            const Transition tr = spec.transition(t - 1, t, mask);
            if (!cfg.phase2_enabled) {
                if (t > spec.t1()) throw ContractViolation("train: drew a phase-2 step with phase 2 disabled");
                for (std::size_t i = 0; i < mask.size(); ++i) {
                    if (!mask[i] && tr.b_bar[i] != 0.0)
                        throw ContractViolation("train: non-mask pixel received noise with phase 2 disabled");
                }
            }
            const AccumState acc{tr.a_bar, tr.b_bar, t};
            Rng noise = r.fork(1);
            const ForwardSample fs = forward_sample(x0, acc, noise);
            const Field eps_hat = net.forward(theta, fs.x_t, make_embedding(mcfg, ref, acc), &cache);
            const ExampleLoss el = example_loss(x0, fs.x_t, fs.eps, eps_hat, tr, cfg.lambda_vlb);
            if (!std::isfinite(el.loss.total)) {
                if (ckpt_path) save_checkpoint(*ckpt_path, cfg, res.params);
                throw NumericError("train: non-finite loss at step " + std::to_string(step) +
                                   (ckpt_path ? "; last good checkpoint written" : ""));
            }
            simple_sum += el.loss.simple;
            vlb_sum += el.loss.vlb;
            Field d_out = el.grad_eps_hat;
            for (auto& v : d_out.values()) v /= cfg.batch;
            net.backward(theta, cache, d_out, grad);
        }

        double norm2 = 0.0;
        for (double g : grad) norm2 += g * g;
        const double norm = std::sqrt(norm2);
        if (!std::isfinite(norm)) {
            if (ckpt_path) save_checkpoint(*ckpt_path, cfg, res.params);
            throw NumericError("train: non-finite gradient at step " + std::to_string(step));
        }
        if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) {
            const double s = cfg.grad_clip / norm;
            for (auto& g : grad) g *= s;
            ++res.clipped_updates;
        }
        const double lr = cfg.lr_decay ? cfg.lr * (1.0 - static_cast<double>(step - 1) / cfg.steps) : cfg.lr;
        const double bc1 = 1.0 - std::pow(kBeta1, step);
        const double bc2 = 1.0 - std::pow(kBeta2, step);
        for (std::size_t i = 0; i < n; ++i) {
            m1[i] = kBeta1 * m1[i] + (1.0 - kBeta1) * grad[i];
            m2[i] = kBeta2 * m2[i] + (1.0 - kBeta2) * grad[i] * grad[i];
            theta[i] -= lr * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + kAdamEps);
        }
        res.log.push_back({step, simple_sum / cfg.batch, vlb_sum / cfg.batch, lr});
        if (on_log && cfg.log_every > 0 && (step % cfg.log_every == 0 || step == cfg.steps)) on_log(res.log.back());
    }

    if (out_dir) {
        save_checkpoint(*ckpt_path, cfg, res.params);
        io::write_file_atomic(*out_dir / "loss.csv", loss_csv(res.log, cfg.log_every));
        io::write_file_atomic(*out_dir / "config.txt", cfg.to_text());
    }
    return res;
}

std::string encode_checkpoint(const TrainConfig& cfg, const DenoiserParams& params) {
    require(params.values.size() == param_count(params.config), "checkpoint: parameter count mismatch");
    io::ByteWriter w;
    w.bytes("RADC");
    w.u32(1);
    const std::string text = cfg.to_text();
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.bytes(text);
    const auto layout = param_layout(params.config);
    w.u32(static_cast<std::uint32_t>(layout.size()));
    for (const auto& s : layout) {
        w.u32(static_cast<std::uint32_t>(s.name.size()));
        w.bytes(s.name);
        w.u32(static_cast<std::uint32_t>(s.shape.size()));
        for (int d : s.shape) w.u32(static_cast<std::uint32_t>(d));
        for (std::size_t i = 0; i < s.size; ++i) w.f32(static_cast<float>(params.values[s.offset + i]));
    }
    return w.str();
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& what) {
    io::ByteReader r(bytes, what);
    if (r.bytes(4) != "RADC") throw FormatError(what + ": bad magic (expected RADC)");
    if (const auto v = r.u32(); v != 1) throw FormatError(what + ": unsupported version " + std::to_string(v));
    Checkpoint ck;
    ck.config = TrainConfig::from_text(std::string(r.bytes(r.u32())));
    ck.config.validate();
    ck.params = DenoiserParams::zeros(ck.config.denoiser());
    const auto layout = param_layout(ck.params.config);
    if (r.u32() != layout.size()) throw FormatError(what + ": tensor count does not match the config");
    for (const auto& s : layout) {
        if (r.bytes(r.u32()) != s.name) throw FormatError(what + ": expected tensor '" + s.name + "'");
        if (r.u32() != s.shape.size()) throw FormatError(what + ": bad rank for '" + s.name + "'");
        for (int d : s.shape) {
            if (r.u32() != static_cast<std::uint32_t>(d)) throw FormatError(what + ": bad shape for '" + s.name + "'");
        }
        for (std::size_t i = 0; i < s.size; ++i) ck.params.values[s.offset + i] = r.f32();
    }
    if (r.remaining() != 0) throw FormatError(what + ": trailing bytes");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& cfg, const DenoiserParams& params) {
    io::write_file_atomic(path, encode_checkpoint(cfg, params));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(io::read_file(path), path.string());
}

MaskSource MaskSource::parse(const std::string& s) {
    MaskSource m;
    if (s == "perlin") m.kind = Kind::perlin;
    else if (s == "box") m.kind = Kind::box;
    else if (s == "extreme") m.kind = Kind::extreme;
    else if (s == "wide") m.kind = Kind::wide;
    else throw InvalidArgument("unknown mask source '" + s + "' (expected perlin, box, extreme or wide)");
    return m;
}

Mask MaskSource::draw(std::uint64_t seed, int height, int width) const {
    switch (kind) {
        case Kind::perlin: return sample_training_mask(seed, height, width).mask;
        case Kind::box: return eval_mask(EvalMaskKind::box, seed, height, width);
        case Kind::extreme: return eval_mask(EvalMaskKind::extreme, seed, height, width);
        case Kind::wide: return eval_mask(EvalMaskKind::wide, seed, height, width);
        case Kind::fixed: break;
    }
    require(fixed.height() == height && fixed.width() == width, "mask source: fixed mask shape mismatch");
    return fixed;
}

EvalReport evaluate(EpsModel& model, const ScheduleSpec& spec, const ToyDataset& data, const MaskSource& masks,
                    int n, int steps, std::uint64_t seed) {
    require(n >= 1, "evaluate: n must be >= 1");
    EvalReport rep;
    rep.n = n;
    rep.steps = steps;
    rep.has_conditional = data.kind() == DatasetKind::gaussian2px;
    rep.min_denoiser_calls = std::numeric_limits<int>::max();
    double sq = 0.0, out_sum = 0.0, out_sq = 0.0, truth_sum = 0.0, truth_sq = 0.0;
    double cond_sum = 0.0, cond_sq = 0.0;
    int cond_trials = 0;
    const Rng root(seed, 0x6576616cULL);
    for (int i = 0; i < n; ++i) {
        const Rng r = root.fork(static_cast<std::uint64_t>(i));
        Rng dr = r.fork(0);
        const Field x0 = data.sample(dr);
        const Mask mask = masks.draw(r.fork(1).next_u64(), data.height(), data.width());
        const InpaintResult out = inpaint(x0, mask, spec, model, steps, r.fork(2));
        rep.min_denoiser_calls = std::min(rep.min_denoiser_calls, out.denoiser_calls);
        rep.max_denoiser_calls = std::max(rep.max_denoiser_calls, out.denoiser_calls);
        const Field cond = rep.has_conditional ? gaussian_conditional_mean(data.gaussian(), x0, mask) : Field();
        double trial_cond = 0.0;
        std::size_t trial_count = 0;
        for (std::size_t k = 0; k < x0.size(); ++k) {
            if (!mask[k]) {
                rep.preservation_max_abs = std::max(rep.preservation_max_abs, std::abs(out.x[k] - x0[k]));
                continue;
            }
            const double d = out.x[k] - x0[k];
            sq += d * d;
            out_sum += out.x[k];
            out_sq += out.x[k] * out.x[k];
            truth_sum += x0[k];
            truth_sq += x0[k] * x0[k];
            ++rep.masked_pixels;
            if (rep.has_conditional) {
                trial_cond += out.x[k] - cond[k];
                ++trial_count;
            }
        }
        if (trial_count > 0) {
            const double v = trial_cond / static_cast<double>(trial_count);
            cond_sum += v;
            cond_sq += v * v;
            ++cond_trials;
        }
    }
    if (rep.masked_pixels > 0) {
        const double m = static_cast<double>(rep.masked_pixels);
        rep.masked_rmse = std::sqrt(sq / m);
        rep.inpainted_mean = out_sum / m;
        rep.truth_mean = truth_sum / m;
        rep.inpainted_var = out_sq / m - rep.inpainted_mean * rep.inpainted_mean;
        rep.truth_var = truth_sq / m - rep.truth_mean * rep.truth_mean;
    }
    if (cond_trials > 1) {
        const double k = cond_trials;
        rep.cond_mean_error = cond_sum / k;
        const double var = (cond_sq - k * rep.cond_mean_error * rep.cond_mean_error) / (k - 1.0);
        rep.cond_mean_stderr = std::sqrt(std::max(var, 0.0) / k);
    } else {
        rep.has_conditional = false;
    }
    return rep;
}

std::string EvalReport::to_text() const {
    using io::format_double;
    std::string s;
    s += "images: " + std::to_string(n) + "\n";
    s += "sampling steps: " + std::to_string(steps) + "\n";
    s += "denoiser evaluations per image: " + std::to_string(min_denoiser_calls) +
         (min_denoiser_calls == max_denoiser_calls ? "" : ".." + std::to_string(max_denoiser_calls)) + "\n";
    s += "preservation max abs diff: " + format_double(preservation_max_abs) + "\n";
    s += "masked pixels: " + std::to_string(masked_pixels) + "\n";
    s += "masked rmse: " + format_double(masked_rmse) + "\n";
    s += "inpainted mean/var: " + format_double(inpainted_mean) + " " + format_double(inpainted_var) + "\n";
    s += "ground-truth mean/var: " + format_double(truth_mean) + " " + format_double(truth_var) + "\n";
    if (has_conditional) {
        s += "conditional-mean error: " + format_double(cond_mean_error) + " (stderr " +
             format_double(cond_mean_stderr) + ")\n";
    }
    return s;
}

}  // namespace rad
