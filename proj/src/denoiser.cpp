#include "rad/denoiser.hpp"

#include <algorithm>
#include <cmath>

#include "rad/schedule.hpp"

namespace rad {

Padding parse_padding(const std::string& s) {
    if (s == "circular") return Padding::circular;
    if (s == "zero") return Padding::zero;
    throw InvalidArgument("unknown padding '" + s + "' (expected circular or zero)");
}

EmbedMode parse_embed_mode(const std::string& s) {
    if (s == "spatial") return EmbedMode::spatial;
    if (s == "scalar_t") return EmbedMode::scalar_t;
    if (s == "none") return EmbedMode::none;
    throw InvalidArgument("unknown embedding mode '" + s + "' (expected spatial, scalar_t or none)");
}

const char* to_string(Padding p) {
    return p == Padding::circular ? "circular" : "zero";
}

const char* to_string(EmbedMode m) {
    switch (m) {
        case EmbedMode::spatial: return "spatial";
        case EmbedMode::scalar_t: return "scalar_t";
        case EmbedMode::none: return "none";
    }
    return "?";
}

std::vector<ParamSpec> param_layout(const DenoiserConfig& cfg) {
    require(cfg.width >= 1, "denoiser: width must be >= 1");
    require(cfg.emb_dim >= 2 && cfg.emb_dim % 2 == 0, "denoiser: emb_dim must be even and >= 2");
    const int c = cfg.width;
    const int c2 = 2 * cfg.width;
    const int d = cfg.emb_dim;
    std::vector<ParamSpec> specs = {
        {"emb1.weight", {c, d}},          {"emb1.bias", {c}},
        {"emb2.weight", {c, c}},          {"emb2.bias", {c}},
        {"conv_in.weight", {c, 1, 3, 3}}, {"conv_in.bias", {c}},
        {"enc1.weight", {c, c, 3, 3}},    {"enc1.bias", {c}},
        {"down.weight", {c2, c, 3, 3}},   {"down.bias", {c2}},
        {"mid.weight", {c2, c2, 3, 3}},   {"mid.bias", {c2}},
        {"dec1.weight", {c, c2 + c, 3, 3}}, {"dec1.bias", {c}},
        {"conv_out.weight", {1, c, 3, 3}}, {"conv_out.bias", {1}},
    };
    std::size_t off = 0;
    for (auto& s : specs) {
        s.size = 1;
        for (int n : s.shape) s.size *= static_cast<std::size_t>(n);
        s.offset = off;
        off += s.size;
    }
    return specs;
}

std::size_t param_count(const DenoiserConfig& cfg) {
    const auto l = param_layout(cfg);
    return l.back().offset + l.back().size;
}

SpatialEmbedding sinusoidal_embedding(const Field& tau, int dim) {
    require(dim >= 2 && dim % 2 == 0, "embedding: dim must be even and >= 2");
    SpatialEmbedding e{tau.height(), tau.width(), dim, {}};
    const std::size_t hw = tau.size();
    e.features.resize(hw * static_cast<std::size_t>(dim));
    for (int k = 0; k < dim / 2; ++k) {
        const double freq = std::pow(10000.0, -2.0 * k / dim);
        double* s = e.features.data() + static_cast<std::size_t>(2 * k) * hw;
        double* c = s + hw;
        for (std::size_t i = 0; i < hw; ++i) {
            s[i] = std::sin(tau[i] * freq);
            c[i] = std::cos(tau[i] * freq);
        }
    }
    return e;
}

SpatialEmbedding embed(const Field& bbar, const std::vector<double>& ref, int dim) {
    return sinusoidal_embedding(invmap_bbar(bbar, ref).tau, dim);
}

SpatialEmbedding make_embedding(const DenoiserConfig& cfg, const std::vector<double>& ref, const AccumState& accum) {
    const Field& bbar = accum.b_bar;
    switch (cfg.embed) {
        case EmbedMode::spatial:
            return embed(bbar, ref, cfg.emb_dim);
        case EmbedMode::scalar_t:
            return sinusoidal_embedding(Field(bbar.height(), bbar.width(), static_cast<double>(accum.step)), cfg.emb_dim);
        case EmbedMode::none:
            break;
    }
    SpatialEmbedding e{bbar.height(), bbar.width(), cfg.emb_dim, {}};
    e.features.assign(bbar.size() * static_cast<std::size_t>(cfg.emb_dim), 0.0);
    return e;
}

DenoiserParams DenoiserParams::zeros(const DenoiserConfig& cfg) {
    return {cfg, std::vector<double>(param_count(cfg), 0.0)};
}

DenoiserParams DenoiserParams::init(const DenoiserConfig& cfg, std::uint64_t seed) {
    DenoiserParams p = zeros(cfg);
    Rng rng(seed, 0x696e6974ULL);
    for (const auto& s : param_layout(cfg)) {
        if (s.shape.size() == 1) continue;  // biases start at zero
        std::size_t fan_in = 1;
        for (std::size_t k = 1; k < s.shape.size(); ++k) fan_in *= static_cast<std::size_t>(s.shape[k]);
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < s.size; ++i) p.values[s.offset + i] = std_dev * rng.normal();
    }
    return p;
}

namespace {

double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

double silu(double x) {
    return x * sigmoid(x);
}

double silu_grad(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

// Copies C x H x W into C x (H+2) x (W+2) with a one-pixel border.
std::vector<double> pad(const std::vector<double>& in, int c, int h, int w, Padding mode) {
    const int hp = h + 2, wp = w + 2;
    std::vector<double> out(static_cast<std::size_t>(c) * hp * wp, 0.0);
    for (int ch = 0; ch < c; ++ch) {
        const double* src = in.data() + static_cast<std::size_t>(ch) * h * w;
        double* dst = out.data() + static_cast<std::size_t>(ch) * hp * wp;
        for (int y = -1; y <= h; ++y) {
            int sy = y;
            if (y < 0 || y >= h) {
                if (mode == Padding::zero) continue;
                sy = (y + h) % h;
            }
            double* row = dst + static_cast<std::size_t>(y + 1) * wp;
            const double* srow = src + static_cast<std::size_t>(sy) * w;
            for (int x = 0; x < w; ++x) row[x + 1] = srow[x];
            if (mode == Padding::circular) {
                row[0] = srow[w - 1];
                row[w + 1] = srow[0];
            }
        }
    }
    return out;
}

// Adjoint of pad(): folds a padded gradient back onto the interior.
std::vector<double> unpad(const std::vector<double>& dpad, int c, int h, int w, Padding mode) {
    const int hp = h + 2, wp = w + 2;
    std::vector<double> out(static_cast<std::size_t>(c) * h * w, 0.0);
    for (int ch = 0; ch < c; ++ch) {
        const double* src = dpad.data() + static_cast<std::size_t>(ch) * hp * wp;
        double* dst = out.data() + static_cast<std::size_t>(ch) * h * w;
        for (int y = -1; y <= h; ++y) {
            int sy = y;
            if (y < 0 || y >= h) {
                if (mode == Padding::zero) continue;
                sy = (y + h) % h;
            }
            const double* row = src + static_cast<std::size_t>(y + 1) * wp;
            double* drow = dst + static_cast<std::size_t>(sy) * w;
            for (int x = 0; x < w; ++x) drow[x] += row[x + 1];
            if (mode == Padding::circular) {
                drow[w - 1] += row[0];
                drow[0] += row[w + 1];
            }
        }
    }
    return out;
}

// 3x3 convolution of a padded input. weight is [cout][cin][3][3].
std::vector<double> conv3x3(const std::vector<double>& in_pad, int cin, int h, int w, const double* weight,
                            const double* bias, int cout) {
    const int wp = w + 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t pplane = static_cast<std::size_t>(h + 2) * wp;
    std::vector<double> out(static_cast<std::size_t>(cout) * plane);
    for (int co = 0; co < cout; ++co) {
        double* o = out.data() + co * plane;
        for (std::size_t i = 0; i < plane; ++i) o[i] = bias[co];
        for (int ci = 0; ci < cin; ++ci) {
            const double* src = in_pad.data() + ci * pplane;
            const double* k = weight + (static_cast<std::size_t>(co) * cin + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const double wv = k[ky * 3 + kx];
                    for (int y = 0; y < h; ++y) {
                        const double* srow = src + static_cast<std::size_t>(y + ky) * wp + kx;
                        double* orow = o + static_cast<std::size_t>(y) * w;
                        for (int x = 0; x < w; ++x) orow[x] += wv * srow[x];
                    }
                }
            }
        }
    }
    return out;
}

// Gradients of conv3x3. d_in_pad may be null when the input gradient is not needed.
void conv3x3_backward(const std::vector<double>& in_pad, int cin, int h, int w, const double* weight, int cout,
                      const std::vector<double>& d_out, double* d_weight, double* d_bias,
                      std::vector<double>* d_in_pad) {
    const int wp = w + 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t pplane = static_cast<std::size_t>(h + 2) * wp;
    if (d_in_pad) d_in_pad->assign(static_cast<std::size_t>(cin) * pplane, 0.0);
    for (int co = 0; co < cout; ++co) {
        const double* g = d_out.data() + co * plane;
        double sum = 0.0;
        for (std::size_t i = 0; i < plane; ++i) sum += g[i];
        d_bias[co] += sum;
        for (int ci = 0; ci < cin; ++ci) {
            const double* src = in_pad.data() + ci * pplane;
            const double* k = weight + (static_cast<std::size_t>(co) * cin + ci) * 9;
            double* dk = d_weight + (static_cast<std::size_t>(co) * cin + ci) * 9;
            double* dsrc = d_in_pad ? d_in_pad->data() + ci * pplane : nullptr;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const double wv = k[ky * 3 + kx];
                    double acc = 0.0;
                    for (int y = 0; y < h; ++y) {
                        const double* srow = src + static_cast<std::size_t>(y + ky) * wp + kx;
                        const double* grow = g + static_cast<std::size_t>(y) * w;
                        for (int x = 0; x < w; ++x) acc += grow[x] * srow[x];
                        if (dsrc) {
                            double* drow = dsrc + static_cast<std::size_t>(y + ky) * wp + kx;
                            for (int x = 0; x < w; ++x) drow[x] += wv * grow[x];
                        }
                    }
                    dk[ky * 3 + kx] += acc;
                }
            }
        }
    }
}

std::vector<double> apply_silu(const std::vector<double>& pre) {
    std::vector<double> out(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) out[i] = silu(pre[i]);
    return out;
}

void mul_silu_grad(std::vector<double>& grad, const std::vector<double>& pre) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= silu_grad(pre[i]);
}

std::vector<double> avgpool2(const std::vector<double>& in, int c, int h, int w) {
    const int ho = h / 2, wo = w / 2;
    std::vector<double> out(static_cast<std::size_t>(c) * ho * wo);
    for (int ch = 0; ch < c; ++ch) {
        const double* s = in.data() + static_cast<std::size_t>(ch) * h * w;
        double* o = out.data() + static_cast<std::size_t>(ch) * ho * wo;
        for (int y = 0; y < ho; ++y) {
            for (int x = 0; x < wo; ++x) {
                const double* r0 = s + static_cast<std::size_t>(2 * y) * w + 2 * x;
                const double* r1 = r0 + w;
                o[y * wo + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
            }
        }
    }
    return out;
}

// Nearest-neighbour 2x upsampling written into channels [0, c) of dst (C_dst x h x w).
void upsample2_into(const std::vector<double>& in, int c, int h, int w, double* dst) {
    const int hi = h / 2, wi = w / 2;
    for (int ch = 0; ch < c; ++ch) {
        const double* s = in.data() + static_cast<std::size_t>(ch) * hi * wi;
        double* o = dst + static_cast<std::size_t>(ch) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) o[y * w + x] = s[(y / 2) * wi + x / 2];
    }
}

std::span<const double> view(std::span<const double> p, const ParamSpec& s) {
    return p.subspan(s.offset, s.size);
}

}  // namespace

Denoiser::Denoiser(DenoiserConfig cfg) : cfg_(cfg), layout_(param_layout(cfg)) {
    count_ = layout_.back().offset + layout_.back().size;
}

Field Denoiser::forward(std::span<const double> params, const Field& x, const SpatialEmbedding& emb,
                        Cache* cache) const {
    require(params.size() == count_, "denoiser: parameter count mismatch");
    const int h = x.height(), w = x.width();
    require(h % 2 == 0 && w % 2 == 0, "denoiser: height and width must be even");
    require(emb.height == h && emb.width == w && emb.dim == cfg_.emb_dim, "denoiser: embedding shape mismatch");
    const int c = cfg_.width, c2 = 2 * c, d = cfg_.emb_dim;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    const auto P = [&](int k) { return view(params, layout_[k]).data(); };

    Cache local;
    Cache& k = cache ? *cache : local;
    k.h = h;
    k.w = w;

    // Embedding path: two per-pixel linear maps.
    k.emb_in = emb.features;
    k.emb_pre.assign(static_cast<std::size_t>(c) * hw, 0.0);
    const double* w1 = P(0);
    const double* b1 = P(1);
    for (int o = 0; o < c; ++o) {
        double* dst = k.emb_pre.data() + o * hw;
        for (std::size_t i = 0; i < hw; ++i) dst[i] = b1[o];
        for (int j = 0; j < d; ++j) {
            const double wv = w1[o * d + j];
            const double* src = k.emb_in.data() + j * hw;
            for (std::size_t i = 0; i < hw; ++i) dst[i] += wv * src[i];
        }
    }
    k.emb_act = apply_silu(k.emb_pre);
    std::vector<double> e(static_cast<std::size_t>(c) * hw, 0.0);
    const double* w2 = P(2);
    const double* b2 = P(3);
    for (int o = 0; o < c; ++o) {
        double* dst = e.data() + o * hw;
        for (std::size_t i = 0; i < hw; ++i) dst[i] = b2[o];
        for (int j = 0; j < c; ++j) {
            const double wv = w2[o * c + j];
            const double* src = k.emb_act.data() + j * hw;
            for (std::size_t i = 0; i < hw; ++i) dst[i] += wv * src[i];
        }
    }

    std::vector<double> xin(x.values().begin(), x.values().end());
    k.x_pad = pad(xin, 1, h, w, cfg_.padding);
    k.h0_pre = conv3x3(k.x_pad, 1, h, w, P(4), P(5), c);
    for (std::size_t i = 0; i < k.h0_pre.size(); ++i) k.h0_pre[i] += e[i];
    k.h0_pad = pad(apply_silu(k.h0_pre), c, h, w, cfg_.padding);

    k.h1_pre = conv3x3(k.h0_pad, c, h, w, P(6), P(7), c);
    k.h1 = apply_silu(k.h1_pre);

    const int hh = h / 2, wh = w / 2;
    k.p_pad = pad(avgpool2(k.h1, c, h, w), c, hh, wh, cfg_.padding);
    k.h2_pre = conv3x3(k.p_pad, c, hh, wh, P(8), P(9), c2);
    k.h2_pad = pad(apply_silu(k.h2_pre), c2, hh, wh, cfg_.padding);
    k.h3_pre = conv3x3(k.h2_pad, c2, hh, wh, P(10), P(11), c2);
    const auto h3 = apply_silu(k.h3_pre);

    std::vector<double> cat(static_cast<std::size_t>(c2 + c) * hw);
    upsample2_into(h3, c2, h, w, cat.data());
    std::copy(k.h1.begin(), k.h1.end(), cat.begin() + static_cast<std::ptrdiff_t>(c2 * hw));
    k.cat_pad = pad(cat, c2 + c, h, w, cfg_.padding);
    k.h4_pre = conv3x3(k.cat_pad, c2 + c, h, w, P(12), P(13), c);
    k.h4_pad = pad(apply_silu(k.h4_pre), c, h, w, cfg_.padding);
    const auto out = conv3x3(k.h4_pad, c, h, w, P(14), P(15), 1);
    return Field(h, w, out);
}

void Denoiser::backward(std::span<const double> params, const Cache& k, const Field& d_out,
                        std::span<double> grad) const {
    require(params.size() == count_ && grad.size() == count_, "denoiser: parameter count mismatch");
    const int h = k.h, w = k.w;
    require(d_out.height() == h && d_out.width() == w, "denoiser: gradient shape mismatch");
    const int c = cfg_.width, c2 = 2 * c, d = cfg_.emb_dim;
    const int hh = h / 2, wh = w / 2;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    const auto P = [&](int i) { return params.data() + layout_[i].offset; };
    const auto G = [&](int i) { return grad.data() + layout_[i].offset; };

    std::vector<double> g_out(d_out.values().begin(), d_out.values().end());
    std::vector<double> dpad;

    conv3x3_backward(k.h4_pad, c, h, w, P(14), 1, g_out, G(14), G(15), &dpad);
    auto d_h4 = unpad(dpad, c, h, w, cfg_.padding);
    mul_silu_grad(d_h4, k.h4_pre);

    conv3x3_backward(k.cat_pad, c2 + c, h, w, P(12), c, d_h4, G(12), G(13), &dpad);
    const auto d_cat = unpad(dpad, c2 + c, h, w, cfg_.padding);

    // Upsample adjoint: sum each 2x2 block.
    std::vector<double> d_h3(static_cast<std::size_t>(c2) * hh * wh, 0.0);
    for (int ch = 0; ch < c2; ++ch) {
        const double* s = d_cat.data() + ch * hw;
        double* o = d_h3.data() + static_cast<std::size_t>(ch) * hh * wh;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) o[(y / 2) * wh + x / 2] += s[y * w + x];
    }
    std::vector<double> d_h1(d_cat.begin() + static_cast<std::ptrdiff_t>(c2 * hw), d_cat.end());

    mul_silu_grad(d_h3, k.h3_pre);
    conv3x3_backward(k.h2_pad, c2, hh, wh, P(10), c2, d_h3, G(10), G(11), &dpad);
    auto d_h2 = unpad(dpad, c2, hh, wh, cfg_.padding);
    mul_silu_grad(d_h2, k.h2_pre);
    conv3x3_backward(k.p_pad, c, hh, wh, P(8), c2, d_h2, G(8), G(9), &dpad);
    const auto d_p = unpad(dpad, c, hh, wh, cfg_.padding);
    for (int ch = 0; ch < c; ++ch) {
        const double* s = d_p.data() + static_cast<std::size_t>(ch) * hh * wh;
        double* o = d_h1.data() + ch * hw;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) o[y * w + x] += 0.25 * s[(y / 2) * wh + x / 2];
    }

    mul_silu_grad(d_h1, k.h1_pre);
    conv3x3_backward(k.h0_pad, c, h, w, P(6), c, d_h1, G(6), G(7), &dpad);
    auto d_h0 = unpad(dpad, c, h, w, cfg_.padding);
    mul_silu_grad(d_h0, k.h0_pre);
    conv3x3_backward(k.x_pad, 1, h, w, P(4), c, d_h0, G(4), G(5), nullptr);

    // d_h0 is also the gradient of the added embedding.
    const double* w2 = P(2);
    double* gw2 = G(2);
    double* gb2 = G(3);
    std::vector<double> d_act(static_cast<std::size_t>(c) * hw, 0.0);
    for (int o = 0; o < c; ++o) {
        const double* g = d_h0.data() + o * hw;
        double sum = 0.0;
        for (std::size_t i = 0; i < hw; ++i) sum += g[i];
        gb2[o] += sum;
        for (int j = 0; j < c; ++j) {
            const double* a = k.emb_act.data() + j * hw;
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += g[i] * a[i];
            gw2[o * c + j] += acc;
            double* da = d_act.data() + j * hw;
            const double wv = w2[o * c + j];
            for (std::size_t i = 0; i < hw; ++i) da[i] += wv * g[i];
        }
    }
    mul_silu_grad(d_act, k.emb_pre);
    double* gw1 = G(0);
    double* gb1 = G(1);
    for (int o = 0; o < c; ++o) {
        const double* g = d_act.data() + o * hw;
        double sum = 0.0;
        for (std::size_t i = 0; i < hw; ++i) sum += g[i];
        gb1[o] += sum;
        for (int j = 0; j < d; ++j) {
            const double* a = k.emb_in.data() + j * hw;
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += g[i] * a[i];
            gw1[o * d + j] += acc;
        }
    }
}

NeuralEps::NeuralEps(DenoiserParams params)
    : params_(std::move(params)),
      net_(params_.config),
      ref_(reference_bbar(params_.config.ref_steps, params_.config.ref_beta_min, params_.config.ref_beta_max)) {
    require(params_.values.size() == net_.param_count(), "NeuralEps: parameter count mismatch");
}

SpatialEmbedding NeuralEps::embedding_for(const AccumState& accum) const {
    return make_embedding(params_.config, ref_, accum);
}

Field NeuralEps::predict(const Field& x_t, const AccumState& accum) {
    ++calls_;
    return net_.forward(params_.values, x_t, embedding_for(accum));
}

}  // namespace rad
