#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rad/config.hpp"
#include "rad/denoiser.hpp"
#include "rad/diffusion.hpp"
#include "rad/maskgen.hpp"

namespace rad {

// Procedural training data with values in [-1, 1].
class ToyDataset {
public:
    ToyDataset(DatasetKind kind, int height, int width, Gaussian2pxParams g2 = {});
    static ToyDataset from_config(const TrainConfig& cfg);

    DatasetKind kind() const { return kind_; }
    int height() const { return h_; }
    int width() const { return w_; }
    const Gaussian2pxParams& gaussian() const { return g2_; }

    Field sample(Rng& rng) const;

private:
    DatasetKind kind_;
    int h_, w_;
    Gaussian2pxParams g2_;
};

// gaussian2px: pixels (y, 2j) and (y, 2j+1) form an independent bivariate
// normal pair with means (mean0, mean1), deviations (std0, std1) and
// correlation rho.
struct PairMoments {
    double mean[2];
    double cov[2][2];
};
PairMoments pair_moments(const Gaussian2pxParams& g);

// Closed-form E[eps | x_t] for gaussian2px data. Pixels with bbar = 0 get 0.
class GaussianOracleEps : public EpsModel {
public:
    explicit GaussianOracleEps(Gaussian2pxParams g) : g_(g) {}
    Field predict(const Field& x_t, const AccumState& accum) override;
    std::size_t calls() const { return calls_; }

private:
    Gaussian2pxParams g_;
    std::size_t calls_ = 0;
};

// E[x_masked | x_observed] for gaussian2px; observed pixels copy x0.
Field gaussian_conditional_mean(const Gaussian2pxParams& g, const Field& x0, const Mask& mask);

struct LossRecord {
    int step = 0;
    double simple = 0.0;
    double vlb = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    DenoiserParams params;
    std::vector<LossRecord> log;  // one record per optimizer update
    int clipped_updates = 0;
};

// Runs cfg.steps Adam updates. When out_dir is given, writes
// out_dir/checkpoint.radc and out_dir/loss.csv (every log_every steps).
TrainResult train(const TrainConfig& cfg, const ToyDataset& data,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                  const std::function<void(const LossRecord&)>& on_log = {});

std::string loss_csv(const std::vector<LossRecord>& log, int every);

// Checkpoint: "RADC", u32 version, u32 config length, config text,
// u32 tensor count, then per tensor u32 name length, name, u32 ndim,
// u32 dims, f32 values.
std::string encode_checkpoint(const TrainConfig& cfg, const DenoiserParams& params);
struct Checkpoint {
    TrainConfig config;
    DenoiserParams params;
};
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& what = "checkpoint");
void save_checkpoint(const std::filesystem::path& path, const TrainConfig& cfg, const DenoiserParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Where evaluation masks come from.
struct MaskSource {
    enum class Kind { perlin, box, extreme, wide, fixed } kind = Kind::perlin;
    Mask fixed;

    static MaskSource parse(const std::string& s);  // perlin|box|extreme|wide
    Mask draw(std::uint64_t seed, int height, int width) const;
};

struct EvalReport {
    int n = 0;
    int steps = 0;
    double preservation_max_abs = 0.0;
    double masked_rmse = 0.0;
    std::size_t masked_pixels = 0;
    int min_denoiser_calls = 0;
    int max_denoiser_calls = 0;
    double inpainted_mean = 0.0;   // over masked pixels
    double truth_mean = 0.0;
    double inpainted_var = 0.0;
    double truth_var = 0.0;
    // gaussian2px only: mean of (inpainted - E[x_masked | x_observed]).
    bool has_conditional = false;
    double cond_mean_error = 0.0;
    double cond_mean_stderr = 0.0;

    std::string to_text() const;
};

// Inpaints n dataset draws; trial i uses Rng(seed).fork(i).
EvalReport evaluate(EpsModel& model, const ScheduleSpec& spec, const ToyDataset& data, const MaskSource& masks,
                    int n, int steps, std::uint64_t seed);

}  // namespace rad
