#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "onn/dataset.hpp"
#include "onn/errors.hpp"
#include "onn/image_io.hpp"
#include "onn/noise.hpp"
#include "onn/protocol.hpp"
#include "onn/trainer.hpp"

using namespace onn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("onn_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Tensor ramp(std::size_t rows, std::size_t cols) {
    Tensor t = Tensor::matrix(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i % 17) / 16.0;
    return t;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("psnr") {
    const Tensor a = ramp(6, 6);
    CHECK(psnr(a, a) == kPsnrInfinity);
    Tensor b = a;
    for (double& v : b.values()) v += 0.1;
    CHECK(std::fabs(psnr(b, a) - 20.0) <= 1e-9);
    Tensor full = Tensor::matrix(6, 6);
    Tensor ones = Tensor::matrix(6, 6);
    for (double& v : ones.values()) v = 1.0;
    CHECK(psnr(full, ones) == doctest::Approx(0.0));
    CHECK(psnr(a, b) == psnr(b, a));

    // Invariant under a shared pixel permutation; depends only on |c| for a shift.
    std::mt19937_64 rng(3);
    std::vector<std::size_t> perm(36);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor noisy = a;
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (double& v : noisy.values()) v += u(rng);
    Tensor pa = a, pn = noisy;
    for (std::size_t i = 0; i < 36; ++i) {
        pa[i] = a[perm[i]];
        pn[i] = noisy[perm[i]];
    }
    CHECK(psnr(pn, pa) == doctest::Approx(psnr(noisy, a)).epsilon(1e-14));
    Tensor minus = a;
    for (double& v : minus.values()) v -= 0.1;
    CHECK(psnr(minus, a) == doctest::Approx(psnr(b, a)).epsilon(1e-12));
    CHECK_THROWS(psnr(a, Tensor::matrix(5, 6)));
}

TEST_CASE("impulse corruption") {
    const Tensor img = ramp(60, 60);
    auto rng = make_rng(1);
    CHECK(corrupt_impulse(img, 0.0, rng) == img);
    const Tensor all = corrupt_impulse(img, 1.0, rng);
    for (double v : all.values()) CHECK((v == 0.0 || v == 1.0));

    std::size_t replaced = 0, salt = 0, pepper = 0;
    const Tensor gray = Tensor({60, 60}, std::vector<double>(3600, 0.5));
    for (int k = 0; k < 200; ++k) {
        const Tensor n = corrupt_impulse(gray, 0.4, rng, &replaced);
        for (double v : n.values()) {
            salt += v == 1.0;
            pepper += v == 0.0;
        }
    }
    CHECK(replaced == salt + pepper);
    const double frac = static_cast<double>(replaced) / (200.0 * 3600.0);
    CHECK(std::fabs(frac - 0.4) <= 4 * std::sqrt(0.4 * 0.6 / (200.0 * 3600.0)));
    CHECK(std::fabs(static_cast<double>(salt) / static_cast<double>(replaced) - 0.5) < 0.005);
}

TEST_CASE("speckle corruption") {
    const Tensor zero = Tensor::matrix(10, 10);
    auto rng = make_rng(2);
    CHECK(corrupt_speckle(zero, 1, rng) == zero);
    const Tensor half = Tensor({100, 100}, std::vector<double>(10000, 0.5));
    double prev = INFINITY;
    for (int m : {1, 5, 100}) {
        const Tensor n = corrupt_speckle(half, m, rng, false);
        double mean = 0.0, var = 0.0;
        for (double v : n.values()) mean += v / 0.5;
        mean /= 10000.0;
        for (double v : n.values()) var += (v / 0.5 - mean) * (v / 0.5 - mean);
        var /= 10000.0;
        CHECK(mean == doctest::Approx(1.0).epsilon(0.05));
        CHECK(var == doctest::Approx(1.0 / m).epsilon(0.1));
        CHECK(var < prev);
        prev = var;
    }
    const Tensor clamped = corrupt_speckle(half, 1, rng, true);
    for (double v : clamped.values()) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("corruption is a pure function of seed and image index") {
    const Tensor img = ramp(20, 20);
    NoiseModel m;
    m.seed = 42;
    CHECK(corrupt(img, m, 7) == corrupt(img, m, 7));
    CHECK_FALSE(corrupt(img, m, 7) == corrupt(img, m, 8));
    m.kind = NoiseKind::Speckle;
    m.shape = 5;
    CHECK(corrupt(img, m, 3) == corrupt(img, m, 3));
    NoiseModel bad;
    bad.p = 1.5;
    CHECK_THROWS(bad.validate());
    bad = NoiseModel{};
    bad.kind = NoiseKind::Speckle;
    bad.shape = 0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("fold plan partitions the images") {
    const auto plan = FoldPlan::create(1000, 10, 5);
    std::vector<int> seen(1000, 0);
    for (const auto& f : plan.folds) {
        CHECK(f.train.size() == 100);
        CHECK(f.test.size() == 900);
        for (std::size_t i : f.train) ++seen[i];
        std::vector<std::size_t> all = f.train;
        all.insert(all.end(), f.test.begin(), f.test.end());
        std::sort(all.begin(), all.end());
        CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
        CHECK(all.size() == 1000);
    }
    for (int s : seen) CHECK(s == 1);
    CHECK(FoldPlan::create(1000, 10, 5).fold_of == plan.fold_of);
    CHECK_THROWS(FoldPlan::create(5, 10, 0));
}

TEST_CASE("dataset loading") {
    const auto dir = scratch("load");
    Raster g{60, 60, 1, std::vector<std::uint8_t>(3600)};
    for (std::size_t i = 0; i < 3600; ++i) g.pixels[i] = static_cast<std::uint8_t>(i % 256);
    write_pgm(dir / "a.pgm", g);
    Raster big{120, 120, 1, std::vector<std::uint8_t>(14400, 77)};
    write_pgm(dir / "b.pgm", big);
    Raster white{30, 30, 1, std::vector<std::uint8_t>(900, 255)};
    write_pgm(dir / "c.pgm", white);
    std::ofstream(dir / "0.pgm") << "not an image";  // sorts first

    std::vector<std::string> warnings;
    const auto imgs = load_dataset(dir, LoadOptions{3, 60, 60}, &warnings);
    REQUIRE(imgs.size() == 3);
    CHECK(warnings.size() == 1);
    for (std::size_t i = 0; i < 3600; ++i) CHECK(imgs[0][i] == static_cast<double>(i % 256) / 255.0);
    for (double v : imgs[1].values()) CHECK(v == doctest::Approx(77.0 / 255.0).epsilon(1e-12));
    for (double v : imgs[2].values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(load_dataset(dir, LoadOptions{4, 60, 60}), DataError);

    Raster rgb{1, 1, 3, {100, 150, 200}};
    CHECK(to_grayscale(rgb)[0] == doctest::Approx((0.299 * 100 + 0.587 * 150 + 0.114 * 200) / 255.0));
    fs::remove_all(dir);
}

TEST_CASE("helpers") {
    CHECK(epochs_to_reach({1, 2, 3, 4}, 2.5) == 3);
    CHECK(epochs_to_reach({1, 2, 3, 4}, 1.0) == 1);
    CHECK(epochs_to_reach({1, 2, 3, 4}, 9.0) == 5);
    CHECK(percent_improvement(22.0, 20.0) == doctest::Approx(10.0));
    CHECK(format_number(kPsnrInfinity) == "inf");
    CHECK(format_number(0.1) == "0.1");
}

TEST_CASE("identical models give zero improvement") {
    const auto clean = synthetic_corpus(6, 12, 12, 1);
    Architecture arch;
    arch.hidden = {2};
    arch.rows = arch.cols = 12;
    ProtocolConfig cfg;
    cfg.plan_folds = 2;
    cfg.folds = 1;
    cfg.restarts = 2;
    cfg.epochs = 2;
    cfg.onn_optimizer = cfg.cnn_optimizer;
    cfg.assignment = Assignment{std::vector<OperatorSet>(2, convolution_set(ActivationKind::Tanh))};
    cfg.library = OperatorLibrary::default_library();
    NoiseModel noise;
    const auto dir = scratch("self");
    const auto r = run_protocol(clean, arch, noise, cfg, dir);
    REQUIRE(r.folds.size() == 1);
    CHECK(r.folds[0].onn_test == r.folds[0].cnn_test);
    CHECK(r.folds[0].improvement_pct == 0.0);
    fs::remove_all(dir);
}

TEST_CASE("smoke protocol run is well formed and denoises") {
    const auto clean = synthetic_corpus(10, 16, 16, 2);
    Architecture arch;
    arch.hidden = {4};
    arch.rows = arch.cols = 16;
    ProtocolConfig cfg;
    cfg.plan_folds = 2;
    cfg.folds = 1;
    cfg.restarts = 1;
    cfg.epochs = 30;
    cfg.onn_optimizer.lr = 1e-2;
    cfg.cnn_optimizer.lr = 1e-2;
    cfg.library = OperatorLibrary({parse_operator_set("mul-median-tanh"), parse_operator_set("mul-sum-tanh")});
    cfg.spm.gamma = 10;
    cfg.spm.iterations = 20;
    cfg.spm.top_k = 2;
    cfg.spm_probe = 5;
    NoiseModel noise;
    noise.p = 0.2;
    const auto dir = scratch("smoke");
    const auto r = run_protocol(clean, arch, noise, cfg, dir);
    REQUIRE(r.folds.size() == 1);
    const auto& f = r.folds[0];
    CHECK_FALSE(f.failed);
    CHECK(f.cnn_test > f.input_test);
    CHECK(f.onn_test > f.input_test);
    for (const char* name : {"report.csv", "curves.csv", "folds.csv", "manifest.txt", "schema.txt",
                             "fold0_assignment.json", "fold0_spm.csv", "fold0_onn.ckpt", "fold0_cnn.ckpt"})
        CHECK_MESSAGE(fs::exists(dir / name), name);
    CHECK_FALSE(fs::exists(dir / "fold0_spm_partial.csv"));
    const auto report = slurp(dir / "report.csv");
    CHECK(report.rfind("fold,model,restart,seed,status,train_psnr,test_psnr,selected\n", 0) == 0);
    CHECK(std::count(report.begin(), report.end(), '\n') == 3);

    const auto dir2 = scratch("smoke2");
    run_protocol(clean, arch, noise, cfg, dir2);
    CHECK(slurp(dir / "report.csv") == slurp(dir2 / "report.csv"));
    CHECK(slurp(dir / "curves.csv") == slurp(dir2 / "curves.csv"));
    fs::remove_all(dir);
    fs::remove_all(dir2);
}
