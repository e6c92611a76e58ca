#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "oracles.hpp"
#include "rad/io.hpp"
#include "rad/losses.hpp"
#include "rad/trainer.hpp"

using namespace rad;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "rad_trainer_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

TrainConfig small_config() {
    TrainConfig c;
    c.t1 = 20;
    c.t2 = 20;
    c.height = 8;
    c.width = 8;
    c.model.width = 4;
    c.model.emb_dim = 8;
    c.batch = 4;
    c.steps = 10;
    c.lr = 1e-3;
    c.sample_steps = 10;
    return c;
}

// Solves the 3x3 normal equations for y ~ c + k0 u + k1 v.
std::array<double, 3> regress2(const std::vector<double>& u, const std::vector<double>& v,
                               const std::vector<double>& y) {
    long double a[3][4] = {};
    for (std::size_t i = 0; i < y.size(); ++i) {
        const long double row[3] = {1.0L, u[i], v[i]};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) a[r][c] += row[r] * row[c];
            a[r][3] += row[r] * y[i];
        }
    }
    for (int p = 0; p < 3; ++p) {
        for (int r = p + 1; r < 3; ++r) {
            const long double f = a[r][p] / a[p][p];
            for (int c = p; c < 4; ++c) a[r][c] -= f * a[p][c];
        }
    }
    std::array<double, 3> x{};
    for (int r = 2; r >= 0; --r) {
        long double s = a[r][3];
        for (int c = r + 1; c < 3; ++c) s -= a[r][c] * x[c];
        x[r] = static_cast<double>(s / a[r][r]);
    }
    return x;
}

}  // namespace

TEST(Config, ParseKeyValues) {
    const auto kv = parse_key_values("# comment\n  t1 = 7  \n\nlr=0.5 # trailing\n");
    ASSERT_EQ(kv.size(), 2u);
    EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"t1", "7"}));
    EXPECT_EQ(kv[1], (std::pair<std::string, std::string>{"lr", "0.5"}));
    EXPECT_THROW(parse_key_values("t1 7\n"), FormatError);
    EXPECT_THROW(parse_key_values(" = 3\n"), FormatError);
}

TEST(Config, DefaultsMatchDocumentedValues) {
    const TrainConfig c;
    EXPECT_EQ(c.t1, 100);
    EXPECT_EQ(c.t2, 100);
    EXPECT_DOUBLE_EQ(c.nu, 1.0 - 1e-4);
    EXPECT_EQ(c.lr, 1e-4);
    EXPECT_EQ(c.batch, 16);
    EXPECT_EQ(c.lambda_vlb, 0.001);
    EXPECT_EQ(c.grad_clip, 1.0);
    EXPECT_FALSE(c.fixed_mask);
    EXPECT_TRUE(c.phase2_enabled);
    EXPECT_EQ(c.model.width, 16);
    EXPECT_EQ(c.model.emb_dim, 32);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, TextRoundTripAndEveryKey) {
    TrainConfig c = small_config();
    c.set("dataset", "checker");
    c.set("embed", "scalar_t");
    c.set("padding", "zero");
    c.set("g2_rho", "-0.3");
    c.set("phase2_enabled", "false");
    c.set("seed", "18446744073709551615");
    const TrainConfig back = TrainConfig::from_text(c.to_text());
    for (const auto& k : TrainConfig::keys()) EXPECT_EQ(back.get(k), c.get(k)) << k;
    EXPECT_EQ(back.seed, 18446744073709551615ULL);
    EXPECT_EQ(back.model.padding, Padding::zero);
}

TEST(Config, Rejections) {
    TrainConfig c;
    EXPECT_THROW(c.set("no_such_key", "1"), InvalidArgument);
    EXPECT_THROW(c.set("t1", "abc"), InvalidArgument);
    EXPECT_THROW(c.set("t1", "1.5"), InvalidArgument);
    EXPECT_THROW(c.set("fixed_mask", "maybe"), InvalidArgument);
    EXPECT_THROW(c.set("dataset", "mnist"), InvalidArgument);
    EXPECT_THROW(TrainConfig::from_text("t1 = 5\nbogus = 1\n"), InvalidArgument);
    c.t1 = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = TrainConfig{};
    c.height = 7;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = TrainConfig{};
    c.sample_steps = c.t1 + 1;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = TrainConfig{};
    c.lr = 0.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Dataset, SamplesInRangeAndReproducible) {
    for (auto kind : {DatasetKind::gaussian2px, DatasetKind::blobs, DatasetKind::gradients, DatasetKind::checker}) {
        const ToyDataset d(kind, 8, 10);
        Rng a(5), b(5);
        for (int k = 0; k < 50; ++k) {
            const Field f = d.sample(a);
            EXPECT_EQ(f, d.sample(b));
            for (double v : f.values()) {
                EXPECT_GE(v, -1.0);
                EXPECT_LE(v, 1.0);
            }
        }
    }
    EXPECT_EQ(parse_dataset_kind("blobs"), DatasetKind::blobs);
    EXPECT_STREQ(to_string(DatasetKind::gaussian2px), "gaussian2px");
}

TEST(Dataset, GaussianPairMoments) {
    const Gaussian2pxParams g;
    const ToyDataset d(DatasetKind::gaussian2px, 4, 8, g);
    Rng rng(6);
    double s0 = 0, s1 = 0, s00 = 0, s11 = 0, s01 = 0;
    long n = 0;
    for (int k = 0; k < 20000; ++k) {
        const Field f = d.sample(rng);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 8; x += 2) {
                const double a = f(y, x), b = f(y, x + 1);
                s0 += a;
                s1 += b;
                s00 += a * a;
                s11 += b * b;
                s01 += a * b;
                ++n;
            }
    }
    const double m0 = s0 / n, m1 = s1 / n;
    const double c00 = s00 / n - m0 * m0, c11 = s11 / n - m1 * m1, c01 = s01 / n - m0 * m1;
    const auto pm = pair_moments(g);
    EXPECT_NEAR(m0, pm.mean[0], 3e-3);
    EXPECT_NEAR(m1, pm.mean[1], 3e-3);
    EXPECT_NEAR(c00, pm.cov[0][0], 1.5e-3);
    EXPECT_NEAR(c11, pm.cov[1][1], 1.5e-3);
    EXPECT_NEAR(c01 / std::sqrt(c00 * c11), g.rho, 5e-3);
}

TEST(OracleEps, PointMassPrior) {
    Gaussian2pxParams g{0.3, -0.2, 0.0, 0.0, 0.0};
    GaussianOracleEps oracle(g);
    AccumState acc{Field(1, 2, 0.6), Field(1, 2, 0.4), 5};
    const Field xt(1, 2, std::vector<double>{0.9, -0.4});
    const Field eps = oracle.predict(xt, acc);
    EXPECT_NEAR(eps[0], (0.9 - std::sqrt(0.6) * 0.3) / std::sqrt(0.4), 1e-12);
    EXPECT_NEAR(eps[1], (-0.4 + std::sqrt(0.6) * 0.2) / std::sqrt(0.4), 1e-12);
    EXPECT_EQ(oracle.calls(), 1u);
}

TEST(OracleEps, CleanPixelsReturnZero) {
    GaussianOracleEps oracle(Gaussian2pxParams{});
    AccumState acc{Field(1, 2, std::vector<double>{1.0, 0.5}), Field(1, 2, std::vector<double>{0.0, 0.5}), 3};
    const Field eps = oracle.predict(Field(1, 2, 0.2), acc);
    EXPECT_EQ(eps[0], 0.0);
    EXPECT_NE(eps[1], 0.0);
}

TEST(OracleEps, IsotropicMatchesMonteCarloRegression) {
    Gaussian2pxParams g{0.1, -0.1, 1.0, 1.0, 0.0};
    GaussianOracleEps oracle(g);
    const double abar = 0.5;
    AccumState acc{Field(1, 2, abar), Field(1, 2, 1.0 - abar), 1};
    Rng rng(7);
    const int n = 1000000;
    std::vector<double> xt(n), ep(n);
    for (int i = 0; i < n; ++i) {
        const double x0 = g.mean0 + rng.normal();
        ep[i] = rng.normal();
        xt[i] = std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * ep[i];
    }
    const auto fit = oracle::least_squares(xt, ep);
    // Linear oracle: slope and intercept recovered by probing two points.
    const double e0 = oracle.predict(Field(1, 2, 0.0), acc)[0];
    const double e1 = oracle.predict(Field(1, 2, 1.0), acc)[0];
    EXPECT_NEAR(e1 - e0, fit.slope, 2e-2);
    EXPECT_NEAR(e0, fit.intercept, 2e-2);
    EXPECT_NEAR(e1 - e0, std::sqrt(1.0 - abar) / (abar + (1.0 - abar)), 1e-12);
}

TEST(OracleEps, CorrelatedPairMatchesRegressionAndBeatsLinearFits) {
    const Gaussian2pxParams g;
    GaussianOracleEps oracle(g);
    AccumState acc{Field(1, 2, std::vector<double>{0.3, 0.8}), Field(1, 2, std::vector<double>{0.7, 0.2}), 1};
    const auto pm = pair_moments(g);
    Rng rng(8);
    auto draw = [&](int n, std::vector<double>& u, std::vector<double>& v, std::vector<double>& e) {
        u.resize(n);
        v.resize(n);
        e.resize(n);
        for (int i = 0; i < n; ++i) {
            const double z1 = rng.normal(), z2 = rng.normal();
            const double x0 = pm.mean[0] + g.std0 * z1;
            const double x1 = pm.mean[1] + g.std1 * (g.rho * z1 + std::sqrt(1 - g.rho * g.rho) * z2);
            e[i] = rng.normal();
            u[i] = std::sqrt(0.3) * x0 + std::sqrt(0.7) * e[i];
            v[i] = std::sqrt(0.8) * x1 + std::sqrt(0.2) * rng.normal();
        }
    };
    std::vector<double> u, v, e;
    draw(400000, u, v, e);
    const auto coef = regress2(u, v, e);
    const double c0 = oracle.predict(Field(1, 2, std::vector<double>{0.0, 0.0}), acc)[0];
    const double cu = oracle.predict(Field(1, 2, std::vector<double>{1.0, 0.0}), acc)[0] - c0;
    const double cv = oracle.predict(Field(1, 2, std::vector<double>{0.0, 1.0}), acc)[0] - c0;
    EXPECT_NEAR(c0, coef[0], 2e-2);
    EXPECT_NEAR(cu, coef[1], 2e-2);
    EXPECT_NEAR(cv, coef[2], 2e-2);

    // Held-out loss: the oracle is at least as good as the fitted linear predictor.
    std::vector<double> u2, v2, e2;
    draw(400000, u2, v2, e2);
    double loss_oracle = 0.0, loss_fit = 0.0;
    for (std::size_t i = 0; i < e2.size(); ++i) {
        const double po = c0 + cu * u2[i] + cv * v2[i];
        const double pf = coef[0] + coef[1] * u2[i] + coef[2] * v2[i];
        loss_oracle += (e2[i] - po) * (e2[i] - po);
        loss_fit += (e2[i] - pf) * (e2[i] - pf);
    }
    EXPECT_LE(loss_oracle, loss_fit * (1.0 + 1e-4));
}

TEST(ConditionalMean, MatchesBivariateFormula) {
    const Gaussian2pxParams g;
    Field x0(1, 4, std::vector<double>{0.3, -0.5, 0.2, 0.7});
    const Mask m(1, 4, std::vector<std::uint8_t>{1, 0, 1, 1});
    const Field c = gaussian_conditional_mean(g, x0, m);
    EXPECT_NEAR(c[0], oracle::cond_mean(g.mean0, g.mean1, g.std0, g.std1, g.rho, -0.5), 1e-15);
    EXPECT_EQ(c[1], -0.5);
    EXPECT_EQ(c[2], g.mean0);
    EXPECT_EQ(c[3], g.mean1);
}

TEST(Train, ZeroStepsGivesInitialization) {
    TrainConfig c = small_config();
    c.steps = 0;
    const auto dir = scratch("zero");
    const auto r = train(c, ToyDataset::from_config(c), dir);
    EXPECT_TRUE(r.log.empty());
    const auto ck = load_checkpoint(dir / "checkpoint.radc");
    const auto init = DenoiserParams::init(c.denoiser(), c.seed);
    ASSERT_EQ(ck.params.values.size(), init.values.size());
    for (std::size_t i = 0; i < init.values.size(); ++i)
        EXPECT_EQ(ck.params.values[i], static_cast<double>(static_cast<float>(init.values[i])));
    EXPECT_TRUE(fs::exists(dir / "loss.csv"));
    EXPECT_TRUE(fs::exists(dir / "config.txt"));
}

TEST(Train, DeterministicPerSeed) {
    TrainConfig c = small_config();
    const auto data = ToyDataset::from_config(c);
    const auto da = scratch("det_a"), db = scratch("det_b");
    const auto a = train(c, data, da);
    const auto b = train(c, data, db);
    EXPECT_EQ(a.params.values, b.params.values);
    EXPECT_EQ(io::read_file(da / "checkpoint.radc"), io::read_file(db / "checkpoint.radc"));
    EXPECT_EQ(io::read_file(da / "loss.csv"), io::read_file(db / "loss.csv"));
    c.seed = 1;
    EXPECT_NE(train(c, data).params.values, a.params.values);
}

TEST(Train, LogHasOneRecordPerUpdate) {
    TrainConfig c = small_config();
    c.steps = 7;
    c.log_every = 3;
    std::vector<int> seen;
    const auto r = train(c, ToyDataset::from_config(c), std::nullopt, [&](const LossRecord& l) { seen.push_back(l.step); });
    ASSERT_EQ(r.log.size(), 7u);
    for (int i = 0; i < 7; ++i) EXPECT_EQ(r.log[i].step, i + 1);
    EXPECT_EQ(seen, (std::vector<int>{3, 6, 7}));
    std::istringstream csv(loss_csv(r.log, 3));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "step,simple,vlb,lr");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, 3);
}

TEST(Train, LinearDecayReachesZero) {
    TrainConfig c = small_config();
    c.lr_decay = true;
    c.steps = 4;
    const auto r = train(c, ToyDataset::from_config(c));
    EXPECT_EQ(r.log[0].lr, c.lr);
    EXPECT_NEAR(r.log[3].lr, c.lr * 0.25, 1e-18);
}

TEST(Train, PhaseTwoDisabledRuns) {
    TrainConfig c = small_config();
    c.phase2_enabled = false;
    c.steps = 20;
    EXPECT_NO_THROW(train(c, ToyDataset::from_config(c)));
}

TEST(Train, NonFiniteLossAbortsWithCheckpoint) {
    TrainConfig c = small_config();
    c.lr = 1e300;
    c.grad_clip = 0.0;
    c.steps = 50;
    const auto dir = scratch("diverge");
    EXPECT_THROW(train(c, ToyDataset::from_config(c), dir), NumericError);
    EXPECT_TRUE(fs::exists(dir / "checkpoint.radc"));
}

TEST(Train, LossDecreasesOnGaussianTask) {
    TrainConfig c = small_config();
    c.t1 = 100;
    c.t2 = 100;
    c.model.width = 8;
    c.model.emb_dim = 16;
    c.steps = 5000;
    c.batch = 4;
    const auto r = train(c, ToyDataset::from_config(c));
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 100; ++i) {
        first += r.log[i].simple;
        last += r.log[r.log.size() - 1 - i].simple;
    }
    EXPECT_LT(last, 0.5 * first);
}

TEST(Checkpoint, RoundTripAndErrors) {
    const TrainConfig c = small_config();
    const auto p = DenoiserParams::init(c.denoiser(), 3);
    const std::string bytes = encode_checkpoint(c, p);
    EXPECT_EQ(bytes.substr(0, 4), "RADC");
    const auto back = decode_checkpoint(bytes);
    EXPECT_EQ(back.config.to_text(), c.to_text());
    for (std::size_t i = 0; i < p.values.size(); ++i)
        EXPECT_EQ(back.params.values[i], static_cast<double>(static_cast<float>(p.values[i])));
    EXPECT_EQ(encode_checkpoint(back.config, back.params), bytes);
    std::string bad = bytes;
    bad[1] = 'X';
    EXPECT_THROW(decode_checkpoint(bad), FormatError);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
    EXPECT_THROW(decode_checkpoint(bytes + "zz"), FormatError);
    EXPECT_THROW(load_checkpoint(fs::temp_directory_path() / "rad_trainer_test" / "missing.radc"), IoError);
}

TEST(MaskSourceTest, ParseAndDraw) {
    EXPECT_EQ(MaskSource::parse("box").draw(1, 8, 8).count(), 16u);
    EXPECT_FALSE(MaskSource::parse("perlin").draw(1, 8, 8).degenerate());
    EXPECT_THROW(MaskSource::parse("square"), InvalidArgument);
}

TEST(Evaluate, OracleReportOnGaussianTask) {
    const TrainConfig c = small_config();
    GaussianOracleEps oracle(c.g2);
    const auto rep = evaluate(oracle, c.schedule(), ToyDataset::from_config(c), MaskSource::parse("perlin"), 300, 10, 4);
    EXPECT_EQ(rep.preservation_max_abs, 0.0);
    EXPECT_EQ(rep.min_denoiser_calls, 10);
    EXPECT_EQ(rep.max_denoiser_calls, 10);
    EXPECT_EQ(oracle.calls(), 3000u);
    ASSERT_TRUE(rep.has_conditional);
    EXPECT_LT(std::abs(rep.cond_mean_error), 3.0 * rep.cond_mean_stderr);
    EXPECT_NE(rep.to_text().find("denoiser evaluations per image: 10"), std::string::npos);
    EXPECT_GT(rep.masked_rmse, 0.0);
}

TEST(Evaluate, NonGaussianDatasetHasNoConditional) {
    TrainConfig c = small_config();
    c.dataset = DatasetKind::blobs;
    NeuralEps model(DenoiserParams::init(c.denoiser(), 1));
    const auto rep = evaluate(model, c.schedule(), ToyDataset::from_config(c), MaskSource::parse("box"), 5, 4, 1);
    EXPECT_FALSE(rep.has_conditional);
    EXPECT_EQ(rep.preservation_max_abs, 0.0);
    EXPECT_EQ(rep.masked_pixels, 5u * 16u);
}
