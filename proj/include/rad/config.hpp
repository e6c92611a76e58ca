#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rad/denoiser.hpp"
#include "rad/schedule.hpp"

namespace rad {

// Parses "key = value" lines; '#' starts a comment. Keys keep file order.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

enum class DatasetKind { gaussian2px, blobs, gradients, checker };

DatasetKind parse_dataset_kind(const std::string& s);
const char* to_string(DatasetKind k);

struct Gaussian2pxParams {
    double mean0 = 0.1;
    double mean1 = -0.1;
    double std0 = 0.2;
    double std1 = 0.2;
    double rho = 0.9;
};

struct TrainConfig {
    // schedule
    int t1 = 100;
    int t2 = 100;
    double nu = 1.0 - 1e-4;
    double beta_min = 1e-4;
    double beta_max = 0.02;
    bool phase2_enabled = true;
    // data
    DatasetKind dataset = DatasetKind::gaussian2px;
    int height = 16;
    int width = 16;
    Gaussian2pxParams g2;
    // model
    DenoiserConfig model;
    // optimisation
    int batch = 16;
    double lr = 1e-4;
    bool lr_decay = false;  // linear decay to zero over the run
    int steps = 5000;
    double lambda_vlb = 0.001;
    double grad_clip = 1.0;
    std::uint64_t seed = 0;
    bool fixed_mask = false;
    int log_every = 10;
    // sampling
    int sample_steps = 100;

    // Every key accepted by set(), in the order to_text() writes them.
    static const std::vector<std::string>& keys();

    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    std::string to_text() const;
    static TrainConfig from_text(const std::string& text);

    // Rejects inconsistent settings.
    void validate() const;
    ScheduleSpec schedule() const;
    // Model config with the reference table tied to the base beta range.
    DenoiserConfig denoiser() const;
};

}  // namespace rad
