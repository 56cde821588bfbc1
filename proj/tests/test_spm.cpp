#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "onn/dataset.hpp"
#include "onn/errors.hpp"
#include "onn/spm.hpp"

using namespace onn;

namespace {

OperatorLibrary four_sets() {
    return OperatorLibrary({parse_operator_set("mul-sum-tanh"), parse_operator_set("sin-median-tanh"),
                            parse_operator_set("log-max-lincut"), parse_operator_set("cubic-sum-identity")});
}

// Population variance written out directly.
double variance(const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size());
}

double chi_square(const std::vector<std::size_t>& counts, const std::vector<double>& probs) {
    const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
    double chi = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double e = n * probs[i];
        chi += (static_cast<double>(counts[i]) - e) * (static_cast<double>(counts[i]) - e) / e;
    }
    return chi;
}

std::vector<std::size_t> layer_counts(const std::vector<Assignment>& draws, const OperatorLibrary& lib, std::size_t l) {
    std::vector<std::size_t> counts(lib.size(), 0);
    for (const auto& a : draws)
        for (const auto& s : a[l]) ++counts[*lib.index_of(s)];
    return counts;
}

std::vector<Sample> toy_samples(std::size_t n, std::size_t size) {
    const auto clean = synthetic_corpus(n, size, size, 3);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    NoiseModel noise;
    noise.seed = 9;
    return make_samples(clean, idx, noise);
}

}  // namespace

TEST_CASE("health factor examples") {
    const std::vector<double> k1{0.1, -0.3, 0.2, 0.5}, k2{1.0, 0.0, -1.0, 0.4};
    const std::span<const double> a[] = {k1};
    CHECK(health_factor(a, a).rho == 0.0);

    std::vector<double> scaled = k1;
    for (double& x : scaled) x *= std::sqrt(2.0);  // doubles the variance
    const std::span<const double> b[] = {scaled};
    CHECK(health_factor(a, b).rho == doctest::Approx(1.0).epsilon(1e-12));

    // Fan-out of two: powers averaged before the ratio.
    std::vector<double> k1b = k1, k2b = k2;
    for (double& x : k1b) x *= 1.5;
    for (double& x : k2b) x *= 0.5;
    const std::span<const double> before[] = {k1, k2};
    const std::span<const double> after[] = {k1b, k2b};
    const double p0 = (variance(k1) + variance(k2)) / 2.0, p1 = (variance(k1b) + variance(k2b)) / 2.0;
    CHECK(health_factor(before, after).rho == doctest::Approx(std::fabs(p1 - p0) / p0).epsilon(1e-12));
    CHECK(kernel_variance(k2) == doctest::Approx(variance(k2)).epsilon(1e-14));

    const std::vector<double> flat(4, 0.25);
    const std::span<const double> f[] = {flat};
    const auto deg = health_factor(f, a);
    CHECK(deg.degenerate);
    CHECK(deg.rho == doctest::Approx(variance(k1) / kHealthFloor));
    CHECK_FALSE(health_factor(a, f).degenerate);
}

TEST_CASE("random assignment") {
    Architecture arch;
    arch.hidden = {12, 12};
    const OperatorLibrary single({parse_operator_set("sinh-sum-tanh")});
    auto rng = make_rng(1);
    for (const auto& layer : assign_random(arch, single, rng))
        for (const auto& s : layer) CHECK(s == single[0]);

    const auto lib = four_sets();
    std::vector<Assignment> draws;
    auto r2 = make_rng(2);
    arch.hidden = {1};
    for (int i = 0; i < 10000; ++i) draws.push_back(assign_random(arch, lib, r2));
    const auto counts = layer_counts(draws, lib, 0);
    const double sigma = std::sqrt(10000 * 0.25 * 0.75);
    for (std::size_t c : counts) CHECK(std::fabs(static_cast<double>(c) - 2500.0) <= 3 * sigma);

    auto r3 = make_rng(77), r4 = make_rng(77);
    CHECK(assign_random(Architecture{}, lib, r3) == assign_random(Architecture{}, lib, r4));
}

TEST_CASE("guided assignment follows the ledger") {
    const auto lib = four_sets();
    Architecture arch;
    arch.hidden = {1, 1};
    HealthLedger ledger(2, lib);
    ledger.add_run({{{0, 3.0}, {1, 1.0}}, {{2, 0.5}}});
    auto rng = make_rng(4);
    std::vector<Assignment> draws;
    for (int i = 0; i < 10000; ++i) draws.push_back(assign_guided(arch, ledger, rng));
    const auto c0 = layer_counts(draws, lib, 0);
    CHECK(c0[2] == 0);
    CHECK(c0[3] == 0);
    const double frac = static_cast<double>(c0[0]) / 10000.0;
    CHECK(std::fabs(frac - 0.75) <= 3 * std::sqrt(0.75 * 0.25 / 10000));
    const auto c1 = layer_counts(draws, lib, 1);
    CHECK(c1[2] == 10000);
}

TEST_CASE("guided draws with a uniform ledger pass a chi-square test against uniform") {
    const auto lib = four_sets();
    Architecture arch;
    arch.hidden = {12};
    auto rng = make_rng(5);
    const std::vector<double> uniform(4, 0.25);

    HealthLedger empty(1, lib);
    std::vector<Assignment> a, b;
    for (int i = 0; i < 1000; ++i) a.push_back(assign_guided(arch, empty, rng));
    HealthLedger equal(1, lib);
    equal.add_run({{{0, 0.5}, {1, 0.5}, {2, 0.5}, {3, 0.5}}});
    for (int i = 0; i < 1000; ++i) b.push_back(assign_guided(arch, equal, rng));
    // 0.99 quantile of chi-square with 3 degrees of freedom.
    CHECK(chi_square(layer_counts(a, lib, 0), uniform) < 11.345);
    CHECK(chi_square(layer_counts(b, lib, 0), uniform) < 11.345);
}

TEST_CASE("ledger scores, probabilities and rankings") {
    const auto lib = four_sets();
    HealthLedger ledger(1, lib);
    ledger.add_run({{{0, 0.2}, {3, 0.4}}});
    ledger.add_run({{{0, 0.1}, {1, 0.4}}});
    CHECK(ledger.runs() == 2);
    CHECK(ledger.score(0, 0) == doctest::Approx(0.3));
    CHECK_FALSE(ledger.scored(0, 2));
    const auto p = ledger.probabilities(0);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    // 0.4 tie between cubic-sum-identity and sin-median-tanh resolves lexicographically.
    CHECK(ledger.ranking(0) == std::vector<std::size_t>{3, 1, 0});

    HealthLedger zero(1, lib);
    zero.add_run({{{0, 0.0}}});
    for (double q : zero.probabilities(0)) CHECK(q == doctest::Approx(0.25));
}

TEST_CASE("ledger accumulation does not depend on run order") {
    const auto lib = four_sets();
    const std::vector<std::vector<std::vector<HealthLedger::LayerCredit>>> runs{
        {{{0, 0.1}}}, {{{0, 1e16}}}, {{{0, 0.3}}}, {{{0, -1e16 + 1e16}}}, {{{0, 1.0 / 3.0}}}};
    std::vector<std::size_t> order{0, 1, 2, 3, 4};
    double first = -1.0;
    do {
        HealthLedger l(1, lib);
        for (std::size_t i : order) l.add_run(runs[i]);
        if (first < 0) first = l.score(0, 0);
        CHECK(l.score(0, 0) == first);
    } while (std::next_permutation(order.begin(), order.end()));
}

TEST_CASE("elite allocation") {
    const double s[] = {3, 2, 1};
    CHECK(allocate_neurons(s, 12) == std::vector<std::size_t>{6, 4, 2});
    const double skew[] = {100, 1, 1};
    const auto a = allocate_neurons(skew, 12);
    CHECK(std::accumulate(a.begin(), a.end(), std::size_t{0}) == 12);
    for (std::size_t n : a) CHECK(n >= 1);
    const double odd[] = {0.37, 0.21, 0.13};
    const auto b = allocate_neurons(odd, 7);
    CHECK(std::accumulate(b.begin(), b.end(), std::size_t{0}) == 7);

    const auto lib = four_sets();
    Architecture arch;
    arch.hidden = {12, 12};
    HealthLedger ledger(2, lib);
    ledger.add_run({{{0, 3.0}, {1, 2.0}, {2, 1.0}, {3, 0.5}}, {{1, 1.0}}});
    const auto elite = configure_elite(arch, ledger, 3);
    std::vector<std::size_t> counts(4, 0);
    for (const auto& s2 : elite[0]) ++counts[*lib.index_of(s2)];
    CHECK(counts == std::vector<std::size_t>{6, 4, 2, 0});
    // Fewer scored sets than K: all scored sets are used.
    for (const auto& s2 : elite[1]) CHECK(s2 == lib[1]);
    const auto k1 = configure_elite(arch, ledger, 1);
    for (const auto& s2 : k1[0]) CHECK(s2 == lib[0]);
}

TEST_CASE("frozen control set scores zero and ranks last") {
    const OperatorLibrary lib({parse_operator_set("mul-sum-tanh"), parse_operator_set("sin-sum-tanh")});
    Architecture arch;
    arch.hidden = {4, 4};
    arch.rows = arch.cols = 12;
    SpmConfig cfg;
    cfg.gamma = 20;
    cfg.iterations = 60;
    cfg.runs = 3;
    cfg.top_k = 2;
    cfg.optimizer.lr = 1e-2;
    const auto samples = toy_samples(8, 12);
    SpmHooks hooks;
    hooks.mask = [&](const NetworkSpec& spec) { return freeze_outgoing(spec, lib[0]); };
    const auto result = run_spm(arch, lib, cfg, samples, 11, hooks);
    CHECK(result.ledger.runs() == 3);
    for (std::size_t l = 0; l < 2; ++l) {
        for (double r : result.ledger.samples(l, 0)) CHECK(r == 0.0);
        CHECK(result.ledger.score(l, 1) > 0.0);
        CHECK(result.ledger.ranking(l).front() == 1);
    }
    const auto again = run_spm(arch, lib, cfg, samples, 11, hooks);
    CHECK(ledger_csv(again.ledger) == ledger_csv(result.ledger));
}

TEST_CASE("single-set search and config validation") {
    const OperatorLibrary lib({parse_operator_set("cubic-median-tanh")});
    Architecture arch;
    arch.hidden = {3, 3};
    arch.rows = arch.cols = 10;
    SpmConfig cfg;
    cfg.gamma = 10;
    cfg.iterations = 20;
    cfg.runs = 1;
    cfg.top_k = 1;
    cfg.confinement = 1;
    const auto result = run_spm(arch, lib, cfg, toy_samples(4, 10), 2);
    for (std::size_t l = 0; l < 2; ++l) {
        REQUIRE(result.ledger.samples(l, 0).size() == 1);
        CHECK(result.ledger.samples(l, 0)[0] >= 0.0);
    }
    CHECK(ledger_report(result.ledger).find("cubic") != std::string::npos);
    CHECK(ledger_csv(result.ledger).rfind("layer,rank,nodal,pool,activation,score,probability,runs_scored", 0) == 0);

    SpmConfig bad = cfg;
    bad.iterations = 5;
    CHECK_THROWS_AS(bad.validate(lib), ConfigError);
    bad = cfg;
    bad.top_k = 2;
    CHECK_THROWS_AS(bad.validate(lib), ConfigError);
    bad = cfg;
    bad.gamma = 0;
    CHECK_THROWS_AS(bad.validate(lib), ConfigError);
    CHECK(parse_window(to_string(HealthWindow::All)) == HealthWindow::All);
}
