#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rad/diffusion.hpp"
#include "rad/field.hpp"
#include "rad/rng.hpp"

namespace rad {

enum class Padding { circular, zero };

// How the noise level reaches the network. `spatial` encodes the per-pixel
// accumulated noise (inverse-mapped to reference timesteps); `scalar_t`
// broadcasts the global step index; `none` feeds zeros.
enum class EmbedMode { spatial, scalar_t, none };

Padding parse_padding(const std::string& s);
EmbedMode parse_embed_mode(const std::string& s);
const char* to_string(Padding p);
const char* to_string(EmbedMode m);

struct DenoiserConfig {
    int width = 16;      // channels at full resolution; the half-resolution level uses 2x
    int emb_dim = 32;    // sinusoidal feature count (even)
    Padding padding = Padding::circular;
    EmbedMode embed = EmbedMode::spatial;
    int ref_steps = 1000;
    double ref_beta_min = 1e-4;
    double ref_beta_max = 0.02;
};

struct ParamSpec {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

std::vector<ParamSpec> param_layout(const DenoiserConfig& cfg);
std::size_t param_count(const DenoiserConfig& cfg);

// Per-pixel sinusoidal features, stored channel-major (D x H x W).
struct SpatialEmbedding {
    int height = 0;
    int width = 0;
    int dim = 0;
    std::vector<double> features;

    double at(int k, int y, int x) const {
        return features[(static_cast<std::size_t>(k) * height + y) * width + x];
    }
};

// feature 2k = sin(tau / 10000^(2k/D)), feature 2k+1 = cos(same).
SpatialEmbedding sinusoidal_embedding(const Field& tau, int dim);
// tau = invmap_bbar(bbar, ref); clamped pixels use the table end.
SpatialEmbedding embed(const Field& bbar, const std::vector<double>& ref, int dim);

// Network input for the given accumulants under cfg.embed.
SpatialEmbedding make_embedding(const DenoiserConfig& cfg, const std::vector<double>& ref, const AccumState& accum);

struct DenoiserParams {
    DenoiserConfig config;
    std::vector<double> values;

    static DenoiserParams zeros(const DenoiserConfig& cfg);
    static DenoiserParams init(const DenoiserConfig& cfg, std::uint64_t seed);
};

// Tiny two-level encoder-decoder of 3x3 convolutions with SiLU. The
// embedding goes through two 1x1 maps and is added to the first feature map.
class Denoiser {
public:
    struct Cache;

    explicit Denoiser(DenoiserConfig cfg);

    const DenoiserConfig& config() const { return cfg_; }
    std::size_t param_count() const { return count_; }

    // Height and width must be even.
    Field forward(std::span<const double> params, const Field& x, const SpatialEmbedding& emb,
                  Cache* cache = nullptr) const;
    // Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
    void backward(std::span<const double> params, const Cache& cache, const Field& d_out,
                  std::span<double> grad) const;

private:
    DenoiserConfig cfg_;
    std::vector<ParamSpec> layout_;
    std::size_t count_ = 0;
};

struct Denoiser::Cache {
    int h = 0, w = 0;
    std::vector<double> emb_in, emb_pre, emb_act;
    std::vector<double> x_pad;
    std::vector<double> h0_pre, h0_pad;
    std::vector<double> h1_pre, h1;
    std::vector<double> p_pad;
    std::vector<double> h2_pre, h2_pad;
    std::vector<double> h3_pre;
    std::vector<double> cat_pad;
    std::vector<double> h4_pre, h4_pad;
};

// Adapter exposing a network as an EpsModel; builds the embedding from the
// accumulants according to the configured mode.
class NeuralEps : public EpsModel {
public:
    explicit NeuralEps(DenoiserParams params);

    Field predict(const Field& x_t, const AccumState& accum) override;
    SpatialEmbedding embedding_for(const AccumState& accum) const;

    const DenoiserParams& params() const { return params_; }
    std::size_t calls() const { return calls_; }

private:
    DenoiserParams params_;
    Denoiser net_;
    std::vector<double> ref_;
    std::size_t calls_ = 0;
};

}  // namespace rad
