// rad: command-line front end for region-aware diffusion inpainting.
// Everything goes through the C interface in rad/rad.h.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rad/rad.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitContract = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct Failure {
    int code;
};

int exit_code_for(rad_status s) {
    switch (s) {
        case RAD_OK: return kExitOk;
        case RAD_ERR_INVALID_ARGUMENT: return kExitUsage;
        case RAD_ERR_IO:
        case RAD_ERR_FORMAT: return kExitIo;
        default: return kExitContract;
    }
}

void check(rad_status s, const char* what) {
    if (s == RAD_OK) return;
    std::fprintf(stderr, "rad: %s: %s (%s)\n", what, rad_last_error(), rad_status_name(s));
    throw Failure{exit_code_for(s)};
}

[[noreturn]] void fail(int code, const std::string& msg) {
    std::fprintf(stderr, "rad: %s\n", msg.c_str());
    throw Failure{code};
}

template <class T, void (*Destroy)(T*)>
struct Deleter {
    void operator()(T* p) const { Destroy(p); }
};
using FieldPtr = std::unique_ptr<rad_field, Deleter<rad_field, rad_field_destroy>>;
using MaskPtr = std::unique_ptr<rad_mask, Deleter<rad_mask, rad_mask_destroy>>;
using SchedulePtr = std::unique_ptr<rad_schedule, Deleter<rad_schedule, rad_schedule_destroy>>;
using ConfigPtr = std::unique_ptr<rad_config, Deleter<rad_config, rad_config_destroy>>;
using ModelPtr = std::unique_ptr<rad_model, Deleter<rad_model, rad_model_destroy>>;

void print_line(const char* line, void*) {
    std::fputs(line, stdout);
    const std::size_t n = std::char_traits<char>::length(line);
    if (n == 0 || line[n - 1] != '\n') std::fputc('\n', stdout);
    std::fflush(stdout);
}

std::string config_default(const char* key) {
    rad_config* raw = nullptr;
    check(rad_config_create(&raw), "config");
    ConfigPtr c(raw);
    char buf[128];
    check(rad_config_get(c.get(), key, buf, sizeof(buf), nullptr), "config");
    return buf;
}

std::string flag_name(std::string key) {
    for (auto& ch : key) {
        if (ch == '_') ch = '-';
    }
    return "--" + key;
}

std::filesystem::path with_extension(const std::string& path, const char* ext) {
    return std::filesystem::path(path).replace_extension(ext);
}

ModelPtr load_model(const std::string& ckpt) {
    rad_model* raw = nullptr;
    check(rad_model_load(ckpt.c_str(), &raw), "loading checkpoint");
    return ModelPtr(raw);
}

struct ScheduleArgs {
    int t1 = 100, t2 = 100;
    double nu = 1.0 - 1e-4, beta_min = 1e-4, beta_max = 0.02;
    std::string out = "schedule.csv";
};

struct MaskArgs {
    std::string kind = "perlin", out_dir = "masks";
    int count = 16, size = 32;
    std::uint64_t seed = 0;
};

struct TrainArgs {
    std::string config, out_dir;
    std::vector<std::string> keys, values;
    std::vector<CLI::Option*> opts;
};

struct InpaintArgs {
    std::string ckpt, input, mask, out;
    int steps = 100;
    std::uint64_t seed = 0;
};

struct SampleArgs {
    std::string ckpt, out_dir = "samples";
    int n = 4, steps = 0;
    std::uint64_t seed = 0;
};

struct EvalArgs {
    std::string ckpt, config, dataset, masks = "perlin";
    int n = 100, steps = 100;
    std::uint64_t seed = 0;
    bool oracle = false;
};

struct SelfcheckArgs {
    std::uint64_t seed = 0;
    bool fault = false;
};

void run_dump_schedule(const ScheduleArgs& a) {
    rad_schedule* raw = nullptr;
    check(rad_schedule_create(a.t1, a.t2, a.nu, a.beta_min, a.beta_max, &raw), "schedule");
    SchedulePtr s(raw);
    const auto heatmap = with_extension(a.out, ".pgm");
    check(rad_schedule_dump(s.get(), a.out.c_str(), heatmap.c_str()), "writing schedule");
    std::printf("wrote %s (%d rows) and %s\n", a.out.c_str(), rad_schedule_total(s.get()) + 1, heatmap.c_str());
}

void run_gen_masks(const MaskArgs& a) {
    check(rad_gen_masks(a.kind.c_str(), a.count, a.seed, a.size, a.out_dir.c_str()), "gen-masks");
    std::printf("wrote %d masks to %s\n", a.count, a.out_dir.c_str());
}

void run_train(const TrainArgs& a) {
    rad_config* raw = nullptr;
    if (a.config.empty()) check(rad_config_create(&raw), "config");
    else check(rad_config_parse_file(a.config.c_str(), &raw), "reading config");
    ConfigPtr cfg(raw);
    for (std::size_t i = 0; i < a.keys.size(); ++i) {
        if (a.opts[i]->count() > 0) check(rad_config_set(cfg.get(), a.keys[i].c_str(), a.values[i].c_str()), "config");
    }
    check(rad_train(cfg.get(), a.out_dir.c_str(), print_line, nullptr), "train");
    std::printf("checkpoint written to %s\n", (std::filesystem::path(a.out_dir) / "checkpoint.radc").c_str());
}

void run_inpaint(const InpaintArgs& a) {
    ModelPtr model = load_model(a.ckpt);
    rad_field* fraw = nullptr;
    check(rad_field_load(a.input.c_str(), &fraw), "reading input");
    FieldPtr x0(fraw);
    rad_mask* mraw = nullptr;
    check(rad_mask_load_pgm(a.mask.c_str(), &mraw), "reading mask");
    MaskPtr mask(mraw);

    rad_field* oraw = nullptr;
    int calls = 0;
    check(rad_inpaint(model.get(), x0.get(), mask.get(), a.steps, a.seed, &oraw, &calls), "inpaint");
    FieldPtr out(oraw);

    int h = 0, w = 0;
    check(rad_field_shape(x0.get(), &h, &w), "inpaint");
    const double* in = rad_field_data(x0.get());
    const double* res = rad_field_data(out.get());
    const std::uint8_t* m = rad_mask_data(mask.get());
    for (int i = 0; i < h * w; ++i) {
        if (!m[i] && in[i] != res[i]) fail(kExitContract, "inpaint: known pixel " + std::to_string(i) + " changed");
    }
    std::printf("denoiser evaluations: %d\n", calls);
    check(rad_field_save(out.get(), a.out.c_str()), "writing output");
    check(rad_field_save_pgm(out.get(), with_extension(a.out, ".pgm").c_str(), -1.0, 1.0), "writing preview");
}

void run_sample(const SampleArgs& a) {
    ModelPtr model = load_model(a.ckpt);
    rad_config* craw = nullptr;
    check(rad_model_config(model.get(), &craw), "sample");
    ConfigPtr cfg(craw);
    char buf[32];
    check(rad_config_get(cfg.get(), "height", buf, sizeof(buf), nullptr), "sample");
    const int h = std::stoi(buf);
    check(rad_config_get(cfg.get(), "width", buf, sizeof(buf), nullptr), "sample");
    const int w = std::stoi(buf);
    std::filesystem::create_directories(a.out_dir);
    for (int i = 0; i < a.n; ++i) {
        rad_field* raw = nullptr;
        check(rad_sample(model.get(), h, w, a.steps, a.seed + static_cast<std::uint64_t>(i), &raw), "sample");
        FieldPtr f(raw);
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%04d", i);
        const auto base = std::filesystem::path(a.out_dir) / name;
        check(rad_field_save(f.get(), (base.string() + ".radt").c_str()), "writing sample");
        check(rad_field_save_pgm(f.get(), (base.string() + ".pgm").c_str(), -1.0, 1.0), "writing sample");
    }
    std::printf("wrote %d samples to %s\n", a.n, a.out_dir.c_str());
}

void run_eval(const EvalArgs& a) {
    ModelPtr model;
    if (a.oracle) {
        rad_config* raw = nullptr;
        if (!a.config.empty()) {
            check(rad_config_parse_file(a.config.c_str(), &raw), "reading config");
        } else if (!a.ckpt.empty()) {
            ModelPtr trained = load_model(a.ckpt);
            check(rad_model_config(trained.get(), &raw), "eval");
        } else {
            check(rad_config_create(&raw), "config");
        }
        ConfigPtr cfg(raw);
        rad_model* mraw = nullptr;
        check(rad_model_oracle(cfg.get(), &mraw), "oracle");
        model.reset(mraw);
    } else {
        if (a.ckpt.empty()) fail(kExitUsage, "eval: --ckpt is required unless --oracle is given");
        model = load_model(a.ckpt);
    }
    rad_eval_metrics m{};
    check(rad_evaluate(model.get(), a.dataset.empty() ? nullptr : a.dataset.c_str(), a.masks.c_str(), a.n, a.steps,
                       a.seed, &m, print_line, nullptr),
          "eval");
    if (m.preservation_max_abs != 0.0) fail(kExitContract, "eval: known pixels were modified");
}

int run_selfcheck(const SelfcheckArgs& a) {
    int failures = 0;
    check(rad_selfcheck(a.seed, a.fault ? 1 : 0, print_line, nullptr, &failures), "selfcheck");
    return failures == 0 ? kExitOk : kExitContract;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Region-aware diffusion: per-pixel noise schedules for inpainting"};
    app.require_subcommand(1);

    ScheduleArgs sched;
    auto* ds = app.add_subcommand("dump-schedule", "Write the two-phase schedule as CSV plus a PGM heatmap of bbar");
    ds->add_option("--t1", sched.t1, "Phase-1 steps (mask pixels noised)")->capture_default_str();
    ds->add_option("--t2", sched.t2, "Phase-2 steps (remaining pixels noised)")->capture_default_str();
    ds->add_option("--nu", sched.nu, "Terminal noise level bbar_T")->capture_default_str();
    ds->add_option("--beta-min", sched.beta_min, "Base linear schedule start")->capture_default_str();
    ds->add_option("--beta-max", sched.beta_max, "Base linear schedule end")->capture_default_str();
    ds->add_option("--out", sched.out, "CSV path; the heatmap goes next to it with a .pgm extension")
        ->capture_default_str();

    MaskArgs masks;
    auto* gm = app.add_subcommand("gen-masks", "Write numbered mask PGMs and manifest.csv");
    gm->add_option("--kind", masks.kind, "perlin, box, extreme or wide")->capture_default_str();
    gm->add_option("--count", masks.count, "Number of masks")->capture_default_str();
    gm->add_option("--seed", masks.seed, "Base seed")->capture_default_str();
    gm->add_option("--size", masks.size, "Mask height and width")->capture_default_str();
    gm->add_option("--out-dir", masks.out_dir, "Output directory")->capture_default_str();

    TrainArgs tr;
    auto* tc = app.add_subcommand("train", "Train the denoiser; flags override values from --config");
    tc->add_option("--config", tr.config, "key = value config file");
    tc->add_option("--out-dir", tr.out_dir, "Directory for checkpoint.radc, loss.csv and config.txt")->required();
    const int nkeys = rad_config_key_count();
    tr.keys.resize(static_cast<std::size_t>(nkeys));
    tr.values.resize(static_cast<std::size_t>(nkeys));
    for (int i = 0; i < nkeys; ++i) {
        tr.keys[i] = rad_config_key_name(i);
        auto* opt = tc->add_option(flag_name(tr.keys[i]), tr.values[i], "Config key " + tr.keys[i]);
        opt->default_str(config_default(tr.keys[i].c_str()));
        tr.opts.push_back(opt);
    }

    InpaintArgs inp;
    auto* ic = app.add_subcommand("inpaint", "Fill the masked pixels of a tensor; other pixels are kept exactly");
    ic->add_option("--ckpt", inp.ckpt, "Checkpoint file")->required();
    ic->add_option("--input", inp.input, "Input tensor (.radt)")->required();
    ic->add_option("--mask", inp.mask, "Mask PGM; white pixels are generated")->required();
    ic->add_option("--steps", inp.steps, "Reverse steps through phase 1")->capture_default_str();
    ic->add_option("--seed", inp.seed, "Noise seed")->capture_default_str();
    ic->add_option("--out", inp.out, "Output tensor; a .pgm preview is written alongside")->required();

    SampleArgs smp;
    auto* sc = app.add_subcommand("sample", "Generate unconditional samples");
    sc->add_option("--ckpt", smp.ckpt, "Checkpoint file")->required();
    sc->add_option("--n", smp.n, "Number of samples")->capture_default_str();
    sc->add_option("--seed", smp.seed, "Seed of sample 0; sample i uses seed + i")->capture_default_str();
    sc->add_option("--steps", smp.steps, "Phase-1 reverse steps (0 = all)")->capture_default_str();
    sc->add_option("--out-dir", smp.out_dir, "Output directory")->capture_default_str();

    EvalArgs ev;
    auto* ec = app.add_subcommand("eval", "Inpaint held-out data and report masked RMSE and preservation");
    ec->add_option("--ckpt", ev.ckpt, "Checkpoint file");
    ec->add_option("--dataset", ev.dataset, "gaussian2px, blobs, gradients or checker (default: training data)");
    ec->add_option("--masks", ev.masks, "perlin, box, extreme or wide")->capture_default_str();
    ec->add_option("--n", ev.n, "Number of images")->capture_default_str();
    ec->add_option("--steps", ev.steps, "Reverse steps per image")->capture_default_str();
    ec->add_option("--seed", ev.seed, "Evaluation seed")->capture_default_str();
    ec->add_flag("--oracle", ev.oracle, "Use the analytic two-pixel Gaussian noise predictor");
    ec->add_option("--config", ev.config, "Config for --oracle when no checkpoint is given");

    SelfcheckArgs chk;
    auto* kc = app.add_subcommand("selfcheck", "Run brute-force oracle checks and print PASS/FAIL per property");
    kc->add_option("--seed", chk.seed, "Seed")->capture_default_str();
    kc->add_flag("--inject-fault", chk.fault)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*ds) run_dump_schedule(sched);
        else if (*gm) run_gen_masks(masks);
        else if (*tc) run_train(tr);
        else if (*ic) run_inpaint(inp);
        else if (*sc) run_sample(smp);
        else if (*ec) run_eval(ev);
        else if (*kc) return run_selfcheck(chk);
    } catch (const Failure& f) {
        return f.code;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "rad: %s\n", e.what());
        return kExitIo;
    }
    return kExitOk;
}
