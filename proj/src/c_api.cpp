#include "rad/rad.h"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <functional>
#include <filesystem>
#include <memory>
#include <new>
#include <string>

#include "rad/config.hpp"
#include "rad/diffusion.hpp"
#include "rad/io.hpp"
#include "rad/maskgen.hpp"
#include "rad/schedule.hpp"
#include "rad/selfcheck.hpp"
#include "rad/trainer.hpp"

struct rad_field {
    rad::Field f;
};
struct rad_mask {
    rad::Mask m;
};
struct rad_schedule {
    rad::ScheduleSpec s;
};
struct rad_config {
    rad::TrainConfig c;
};
struct rad_model {
    rad::TrainConfig cfg;
    rad::ScheduleSpec spec;
    std::unique_ptr<rad::EpsModel> eps;
};

namespace {

thread_local std::string g_last_error;

template <class F>
rad_status guarded(F&& fn) {
    try {
        g_last_error.clear();
        fn();
        return RAD_OK;
    } catch (const rad::InvalidArgument& e) {
        g_last_error = e.what();
        return RAD_ERR_INVALID_ARGUMENT;
    } catch (const rad::IoError& e) {
        g_last_error = e.what();
        return RAD_ERR_IO;
    } catch (const std::filesystem::filesystem_error& e) {
        g_last_error = e.what();
        return RAD_ERR_IO;
    } catch (const rad::FormatError& e) {
        g_last_error = e.what();
        return RAD_ERR_FORMAT;
    } catch (const rad::DegenerateMask& e) {
        g_last_error = e.what();
        return RAD_ERR_DEGENERATE_MASK;
    } catch (const rad::ContractViolation& e) {
        g_last_error = e.what();
        return RAD_ERR_CONTRACT;
    } catch (const rad::NumericError& e) {
        g_last_error = e.what();
        return RAD_ERR_NUMERIC;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return RAD_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return RAD_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return RAD_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    if (!p) throw rad::InvalidArgument(std::string(what) + " must not be null");
}

std::uint64_t mask_seed(std::uint64_t seed, int index) {
    return rad::Rng(seed, 0x6d61736bULL).fork(static_cast<std::uint64_t>(index)).next_u64();
}

rad::Mask generate_mask(const std::string& kind, std::uint64_t seed, int h, int w) {
    return rad::MaskSource::parse(kind).draw(seed, h, w);
}

}  // namespace

extern "C" {

const char* rad_last_error(void) { return g_last_error.c_str(); }

const char* rad_status_name(rad_status s) {
    switch (s) {
        case RAD_OK: return "ok";
        case RAD_ERR_INVALID_ARGUMENT: return "invalid argument";
        case RAD_ERR_IO: return "i/o error";
        case RAD_ERR_FORMAT: return "format error";
        case RAD_ERR_DEGENERATE_MASK: return "degenerate mask";
        case RAD_ERR_CONTRACT: return "contract violation";
        case RAD_ERR_NUMERIC: return "numeric error";
        case RAD_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

rad_status rad_field_create(int height, int width, const double* values, rad_field** out) {
    return guarded([&] {
        need(out, "out");
        rad::Field f(height, width);
        if (values) std::memcpy(f.values().data(), values, f.size() * sizeof(double));
        *out = new rad_field{std::move(f)};
    });
}

rad_status rad_field_load(const char* path, rad_field** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new rad_field{rad::io::load_tensor(path)};
    });
}

rad_status rad_field_save(const rad_field* f, const char* path) {
    return guarded([&] {
        need(f, "field");
        need(path, "path");
        rad::io::save_tensor(path, f->f);
    });
}

rad_status rad_field_save_pgm(const rad_field* f, const char* path, double lo, double hi) {
    return guarded([&] {
        need(f, "field");
        need(path, "path");
        rad::io::save_pgm(path, f->f, lo, hi);
    });
}

rad_status rad_field_shape(const rad_field* f, int* height, int* width) {
    return guarded([&] {
        need(f, "field");
        if (height) *height = f->f.height();
        if (width) *width = f->f.width();
    });
}

const double* rad_field_data(const rad_field* f) { return f ? f->f.values().data() : nullptr; }

void rad_field_destroy(rad_field* f) { delete f; }

rad_status rad_mask_create(int height, int width, const uint8_t* values, rad_mask** out) {
    return guarded([&] {
        need(out, "out");
        rad::Mask m(height, width);
        if (values) {
            for (std::size_t i = 0; i < m.size(); ++i) m.set(i, values[i] != 0);
        }
        *out = new rad_mask{std::move(m)};
    });
}

rad_status rad_mask_load_pgm(const char* path, rad_mask** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new rad_mask{rad::io::load_mask_pgm(path)};
    });
}

rad_status rad_mask_save_pgm(const rad_mask* m, const char* path) {
    return guarded([&] {
        need(m, "mask");
        need(path, "path");
        rad::io::save_mask_pgm(path, m->m);
    });
}

rad_status rad_mask_generate(const char* kind, uint64_t seed, int height, int width, rad_mask** out) {
    return guarded([&] {
        need(kind, "kind");
        need(out, "out");
        *out = new rad_mask{generate_mask(kind, seed, height, width)};
    });
}

rad_status rad_mask_shape(const rad_mask* m, int* height, int* width) {
    return guarded([&] {
        need(m, "mask");
        if (height) *height = m->m.height();
        if (width) *width = m->m.width();
    });
}

const uint8_t* rad_mask_data(const rad_mask* m) { return m ? m->m.values().data() : nullptr; }

double rad_mask_area_ratio(const rad_mask* m) { return m ? m->m.area_ratio() : 0.0; }

void rad_mask_destroy(rad_mask* m) { delete m; }

rad_status rad_gen_masks(const char* kind, int count, uint64_t seed, int size, const char* out_dir) {
    return guarded([&] {
        need(kind, "kind");
        need(out_dir, "out_dir");
        rad::require(count >= 0, "gen-masks: count must be non-negative");
        rad::require(size >= 4, "gen-masks: size must be at least 4");
        rad::MaskSource::parse(kind);
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        std::string manifest = "file,kind,seed,area_ratio\n";
        for (int i = 0; i < count; ++i) {
            const std::uint64_t s = mask_seed(seed, i);
            const rad::Mask m = generate_mask(kind, s, size, size);
            char name[32];
            std::snprintf(name, sizeof(name), "mask_%04d.pgm", i);
            rad::io::save_mask_pgm(dir / name, m);
            manifest += std::string(name) + "," + kind + "," + std::to_string(s) + "," +
                        rad::io::format_double(m.area_ratio()) + "\n";
        }
        rad::io::write_file_atomic(dir / "manifest.csv", manifest);
    });
}

rad_status rad_schedule_create(int t1, int t2, double nu, double beta_min, double beta_max, rad_schedule** out) {
    return guarded([&] {
        need(out, "out");
        *out = new rad_schedule{rad::ScheduleSpec::linear(t1, t2, nu, beta_min, beta_max)};
    });
}

int rad_schedule_total(const rad_schedule* s) { return s ? s->s.total() : 0; }

rad_status rad_schedule_dump(const rad_schedule* s, const char* csv_path, const char* heatmap_path) {
    return guarded([&] {
        need(s, "schedule");
        need(csv_path, "csv_path");
        rad::io::write_file_atomic(csv_path, rad::schedule_csv(s->s));
        if (heatmap_path) {
            // Rows are timesteps; the left half shows a mask pixel, the right half a non-mask pixel.
            constexpr int kHalf = 16;
            const int rows = s->s.total() + 1;
            rad::Field img(rows, 2 * kHalf);
            const rad::Mask m(1, 2, std::vector<std::uint8_t>{1, 0});
            for (int t = 0; t < rows; ++t) {
                const auto acc = s->s.accumulate(t, m);
                for (int x = 0; x < 2 * kHalf; ++x) img(t, x) = acc.b_bar[x < kHalf ? 0 : 1];
            }
            rad::io::save_pgm(heatmap_path, img, 0.0, 1.0);
        }
    });
}

void rad_schedule_destroy(rad_schedule* s) { delete s; }

rad_status rad_config_create(rad_config** out) {
    return guarded([&] {
        need(out, "out");
        *out = new rad_config{};
    });
}

rad_status rad_config_parse_file(const char* path, rad_config** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new rad_config{rad::TrainConfig::from_text(rad::io::read_file(path))};
    });
}

rad_status rad_config_set(rad_config* c, const char* key, const char* value) {
    return guarded([&] {
        need(c, "config");
        need(key, "key");
        need(value, "value");
        c->c.set(key, value);
    });
}

rad_status rad_config_get(const rad_config* c, const char* key, char* buf, size_t cap, size_t* needed) {
    return guarded([&] {
        need(c, "config");
        need(key, "key");
        const std::string v = c->c.get(key);
        if (needed) *needed = v.size();
        if (buf && cap > 0) {
            const std::size_t n = std::min(cap - 1, v.size());
            std::memcpy(buf, v.data(), n);
            buf[n] = '\0';
        }
    });
}

int rad_config_key_count(void) { return static_cast<int>(rad::TrainConfig::keys().size()); }

const char* rad_config_key_name(int index) {
    const auto& keys = rad::TrainConfig::keys();
    if (index < 0 || index >= static_cast<int>(keys.size())) return nullptr;
    return keys[static_cast<std::size_t>(index)].c_str();
}

void rad_config_destroy(rad_config* c) { delete c; }

rad_status rad_train(const rad_config* c, const char* out_dir, rad_line_fn log, void* user) {
    return guarded([&] {
        need(c, "config");
        need(out_dir, "out_dir");
        std::function<void(const rad::LossRecord&)> on_log;
        if (log) {
            on_log = [&](const rad::LossRecord& r) {
                const std::string line = "step " + std::to_string(r.step) + " simple " +
                                         rad::io::format_double(r.simple) + " vlb " + rad::io::format_double(r.vlb);
                log(line.c_str(), user);
            };
        }
        rad::train(c->c, rad::ToyDataset::from_config(c->c), std::filesystem::path(out_dir), on_log);
    });
}

rad_status rad_model_load(const char* checkpoint_path, rad_model** out) {
    return guarded([&] {
        need(checkpoint_path, "checkpoint_path");
        need(out, "out");
        auto ck = rad::load_checkpoint(checkpoint_path);
        auto spec = ck.config.schedule();
        *out = new rad_model{ck.config, std::move(spec), std::make_unique<rad::NeuralEps>(std::move(ck.params))};
    });
}

rad_status rad_model_oracle(const rad_config* c, rad_model** out) {
    return guarded([&] {
        need(c, "config");
        need(out, "out");
        c->c.validate();
        *out = new rad_model{c->c, c->c.schedule(), std::make_unique<rad::GaussianOracleEps>(c->c.g2)};
    });
}

rad_status rad_model_config(const rad_model* m, rad_config** out) {
    return guarded([&] {
        need(m, "model");
        need(out, "out");
        *out = new rad_config{m->cfg};
    });
}

void rad_model_destroy(rad_model* m) { delete m; }

rad_status rad_inpaint(rad_model* m, const rad_field* x0, const rad_mask* mask, int steps, uint64_t seed,
                       rad_field** out, int* denoiser_calls) {
    return guarded([&] {
        need(m, "model");
        need(x0, "field");
        need(mask, "mask");
        need(out, "out");
        rad::require(mask->m.shape_matches(x0->f), "inpaint: mask and image shapes differ");
        auto r = rad::inpaint(x0->f, mask->m, m->spec, *m->eps, steps, rad::Rng(seed));
        if (denoiser_calls) *denoiser_calls = r.denoiser_calls;
        *out = new rad_field{std::move(r.x)};
    });
}

rad_status rad_sample(rad_model* m, int height, int width, int steps, uint64_t seed, rad_field** out) {
    return guarded([&] {
        need(m, "model");
        need(out, "out");
        *out = new rad_field{rad::generate(m->spec, *m->eps, height, width, rad::Rng(seed), steps)};
    });
}

rad_status rad_evaluate(rad_model* m, const char* dataset, const char* masks, int n, int steps, uint64_t seed,
                        rad_eval_metrics* out, rad_line_fn report, void* user) {
    return guarded([&] {
        need(m, "model");
        need(masks, "masks");
        const rad::DatasetKind kind = dataset ? rad::parse_dataset_kind(dataset) : m->cfg.dataset;
        const rad::ToyDataset data(kind, m->cfg.height, m->cfg.width, m->cfg.g2);
        const auto r = rad::evaluate(*m->eps, m->spec, data, rad::MaskSource::parse(masks), n, steps, seed);
        if (out) {
            out->n = r.n;
            out->steps = r.steps;
            out->preservation_max_abs = r.preservation_max_abs;
            out->masked_rmse = r.masked_rmse;
            out->min_denoiser_calls = r.min_denoiser_calls;
            out->max_denoiser_calls = r.max_denoiser_calls;
            out->inpainted_mean = r.inpainted_mean;
            out->truth_mean = r.truth_mean;
            out->has_conditional = r.has_conditional ? 1 : 0;
            out->cond_mean_error = r.cond_mean_error;
            out->cond_mean_stderr = r.cond_mean_stderr;
        }
        if (report) report(r.to_text().c_str(), user);
    });
}

rad_status rad_selfcheck(uint64_t seed, int inject_fault, rad_line_fn line, void* user, int* failures) {
    return guarded([&] {
        rad::SelfcheckOptions opts;
        opts.seed = seed;
        opts.fault = inject_fault ? rad::Fault::flip_posterior_sign : rad::Fault::none;
        const auto results = rad::run_selfcheck(opts);
        int failed = 0;
        for (const auto& r : results) failed += r.pass ? 0 : 1;
        if (line) line(rad::format_selfcheck(results).c_str(), user);
        if (failures) *failures = failed;
    });
}

}  // extern "C"
