#include "rad/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "rad/io.hpp"

namespace rad {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw InvalidArgument("config: '" + key + "' expects a number, got '" + v + "'");
    }
}

template <class Int>
Int to_int(const std::string& key, const std::string& v) {
    Int out{};
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
        throw InvalidArgument("config: '" + key + "' expects an integer, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InvalidArgument("config: '" + key + "' expects true or false, got '" + v + "'");
}

std::string from_bool(bool b) {
    return b ? "true" : "false";
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key.empty()) throw FormatError("config line " + std::to_string(lineno) + ": empty key");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

DatasetKind parse_dataset_kind(const std::string& s) {
    if (s == "gaussian2px") return DatasetKind::gaussian2px;
    if (s == "blobs") return DatasetKind::blobs;
    if (s == "gradients") return DatasetKind::gradients;
    if (s == "checker") return DatasetKind::checker;
    throw InvalidArgument("unknown dataset '" + s + "' (expected gaussian2px, blobs, gradients or checker)");
}

const char* to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::gaussian2px: return "gaussian2px";
        case DatasetKind::blobs: return "blobs";
        case DatasetKind::gradients: return "gradients";
        case DatasetKind::checker: return "checker";
    }
    return "?";
}

const std::vector<std::string>& TrainConfig::keys() {
    static const std::vector<std::string> k = {
        "t1", "t2", "nu", "beta_min", "beta_max", "phase2_enabled",
        "dataset", "height", "width", "g2_mean0", "g2_mean1", "g2_std0", "g2_std1", "g2_rho",
        "model_width", "emb_dim", "embed", "padding", "ref_steps",
        "batch", "lr", "lr_decay", "steps", "lambda_vlb", "grad_clip", "seed", "fixed_mask", "log_every",
        "sample_steps",
    };
    return k;
}

void TrainConfig::set(const std::string& key, const std::string& v) {
    if (key == "t1") t1 = to_int<int>(key, v);
    else if (key == "t2") t2 = to_int<int>(key, v);
    else if (key == "nu") nu = to_double(key, v);
    else if (key == "beta_min") beta_min = to_double(key, v);
    else if (key == "beta_max") beta_max = to_double(key, v);
    else if (key == "phase2_enabled") phase2_enabled = to_bool(key, v);
    else if (key == "dataset") dataset = parse_dataset_kind(v);
    else if (key == "height") height = to_int<int>(key, v);
    else if (key == "width") width = to_int<int>(key, v);
    else if (key == "g2_mean0") g2.mean0 = to_double(key, v);
    else if (key == "g2_mean1") g2.mean1 = to_double(key, v);
    else if (key == "g2_std0") g2.std0 = to_double(key, v);
    else if (key == "g2_std1") g2.std1 = to_double(key, v);
    else if (key == "g2_rho") g2.rho = to_double(key, v);
    else if (key == "model_width") model.width = to_int<int>(key, v);
    else if (key == "emb_dim") model.emb_dim = to_int<int>(key, v);
    else if (key == "embed") model.embed = parse_embed_mode(v);
    else if (key == "padding") model.padding = parse_padding(v);
    else if (key == "ref_steps") model.ref_steps = to_int<int>(key, v);
    else if (key == "batch") batch = to_int<int>(key, v);
    else if (key == "lr") lr = to_double(key, v);
    else if (key == "steps") steps = to_int<int>(key, v);
    else if (key == "lambda_vlb") lambda_vlb = to_double(key, v);
    else if (key == "grad_clip") grad_clip = to_double(key, v);
    else if (key == "lr_decay") lr_decay = to_bool(key, v);
    else if (key == "seed") seed = to_int<std::uint64_t>(key, v);
    else if (key == "fixed_mask") fixed_mask = to_bool(key, v);
    else if (key == "log_every") log_every = to_int<int>(key, v);
    else if (key == "sample_steps") sample_steps = to_int<int>(key, v);
    else throw InvalidArgument("config: unknown key '" + key + "'");
}

std::string TrainConfig::get(const std::string& key) const {
    using io::format_double;
    if (key == "t1") return std::to_string(t1);
    if (key == "t2") return std::to_string(t2);
    if (key == "nu") return format_double(nu);
    if (key == "beta_min") return format_double(beta_min);
    if (key == "beta_max") return format_double(beta_max);
    if (key == "phase2_enabled") return from_bool(phase2_enabled);
    if (key == "dataset") return to_string(dataset);
    if (key == "height") return std::to_string(height);
    if (key == "width") return std::to_string(width);
    if (key == "g2_mean0") return format_double(g2.mean0);
    if (key == "g2_mean1") return format_double(g2.mean1);
    if (key == "g2_std0") return format_double(g2.std0);
    if (key == "g2_std1") return format_double(g2.std1);
    if (key == "g2_rho") return format_double(g2.rho);
    if (key == "model_width") return std::to_string(model.width);
    if (key == "emb_dim") return std::to_string(model.emb_dim);
    if (key == "embed") return to_string(model.embed);
    if (key == "padding") return to_string(model.padding);
    if (key == "ref_steps") return std::to_string(model.ref_steps);
    if (key == "batch") return std::to_string(batch);
    if (key == "lr") return format_double(lr);
    if (key == "steps") return std::to_string(steps);
    if (key == "lambda_vlb") return format_double(lambda_vlb);
    if (key == "grad_clip") return format_double(grad_clip);
    if (key == "lr_decay") return from_bool(lr_decay);
    if (key == "seed") return std::to_string(seed);
    if (key == "fixed_mask") return from_bool(fixed_mask);
    if (key == "log_every") return std::to_string(log_every);
    if (key == "sample_steps") return std::to_string(sample_steps);
    throw InvalidArgument("config: unknown key '" + key + "'");
}

std::string TrainConfig::to_text() const {
    std::string out;
    for (const auto& k : keys()) out += k + " = " + get(k) + "\n";
    return out;
}

TrainConfig TrainConfig::from_text(const std::string& text) {
    TrainConfig c;
    for (const auto& [k, v] : parse_key_values(text)) c.set(k, v);
    return c;
}

void TrainConfig::validate() const {
    require(t1 >= 1, "config: t1 must be >= 1");
    require(t2 >= 1, "config: t2 must be >= 1");
    require(nu > 0.0 && nu < 1.0, "config: nu must lie in (0, 1)");
    require(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0, "config: need 0 < beta_min <= beta_max < 1");
    require(height >= 4 && width >= 4, "config: height and width must be >= 4");
    require(height % 2 == 0 && width % 2 == 0, "config: height and width must be even");
    require(g2.std0 >= 0.0 && g2.std1 >= 0.0, "config: g2 standard deviations must be >= 0");
    require(g2.rho >= -1.0 && g2.rho <= 1.0, "config: g2_rho must lie in [-1, 1]");
    require(model.width >= 1, "config: model_width must be >= 1");
    require(model.emb_dim >= 2 && model.emb_dim % 2 == 0, "config: emb_dim must be even and >= 2");
    require(model.ref_steps >= 1, "config: ref_steps must be >= 1");
    require(batch >= 1, "config: batch must be >= 1");
    require(lr > 0.0, "config: lr must be > 0");
    require(steps >= 0, "config: steps must be >= 0");
    require(lambda_vlb >= 0.0, "config: lambda_vlb must be >= 0");
    require(grad_clip >= 0.0, "config: grad_clip must be >= 0");
    require(log_every >= 1, "config: log_every must be >= 1");
    require(sample_steps >= 1 && sample_steps <= t1, "config: sample_steps must lie in [1, t1]");
}

DenoiserConfig TrainConfig::denoiser() const {
    DenoiserConfig d = model;
    d.ref_beta_min = beta_min;
    d.ref_beta_max = beta_max;
    return d;
}

ScheduleSpec TrainConfig::schedule() const {
    return ScheduleSpec::linear(t1, t2, nu, beta_min, beta_max);
}

}  // namespace rad
