#include "onn/spm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "onn/errors.hpp"

namespace onn {

std::string_view to_string(HealthWindow window) { return window == HealthWindow::Last ? "last" : "all"; }

HealthWindow parse_window(std::string_view name) {
    if (name == "last") return HealthWindow::Last;
    if (name == "all") return HealthWindow::All;
    throw ConfigError("unknown health window '" + std::string(name) + "' (expected last or all)");
}

void SpmConfig::validate(const OperatorLibrary& library) const {
    if (library.empty()) throw ConfigError("operator library is empty");
    if (gamma < 1) throw ConfigError("spm gamma must be >= 1");
    if (runs < 1) throw ConfigError("spm runs must be >= 1");
    if (top_k < 1 || top_k > library.size())
        throw ConfigError("spm top_k must be between 1 and the library size (" + std::to_string(library.size()) + ")");
    if (iterations < gamma) throw ConfigError("spm iterations must be >= gamma");
}

HealthLedger::HealthLedger(std::size_t layers, OperatorLibrary library)
    : library_(std::move(library)), samples_(layers, std::vector<std::vector<double>>(library_.size())) {}

void HealthLedger::add_run(const std::vector<std::vector<LayerCredit>>& credits, std::size_t degenerate) {
    if (credits.size() != samples_.size()) throw std::invalid_argument("ledger: run covers a different layer count");
    for (std::size_t l = 0; l < credits.size(); ++l)
        for (const auto& c : credits[l]) {
            if (c.set >= library_.size()) throw std::invalid_argument("ledger: operator set outside the library");
            if (!(c.rho >= 0.0) || !std::isfinite(c.rho)) throw std::invalid_argument("ledger: rho must be finite and >= 0");
            samples_[l][c.set].push_back(c.rho);
        }
    ++runs_;
    degenerate_ += degenerate;
}

double HealthLedger::score(std::size_t layer, std::size_t set) const {
    std::vector<double> v = samples_.at(layer).at(set);
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

std::vector<double> HealthLedger::probabilities(std::size_t layer) const {
    const std::size_t n = library_.size();
    std::vector<double> p(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += (p[i] = score(layer, i));
    if (!(total > 0.0)) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(n));
        return p;
    }
    for (auto& x : p) x /= total;
    return p;
}

std::vector<std::size_t> HealthLedger::ranking(std::size_t layer) const {
    std::vector<std::size_t> order;
    std::vector<double> scores(library_.size());
    for (std::size_t i = 0; i < library_.size(); ++i)
        if (scored(layer, i)) {
            order.push_back(i);
            scores[i] = score(layer, i);
        }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return lexicographic_less(library_[a], library_[b]);
    });
    return order;
}

Assignment assign_random(const Architecture& arch, const OperatorLibrary& library, Rng& rng) {
    if (library.empty()) throw ConfigError("operator library is empty");
    std::uniform_int_distribution<std::size_t> pick(0, library.size() - 1);
    Assignment out;
    for (auto width : arch.hidden) {
        out.emplace_back();
        for (std::size_t i = 0; i < width; ++i) out.back().push_back(library[pick(rng)]);
    }
    return out;
}

Assignment assign_guided(const Architecture& arch, const HealthLedger& ledger, Rng& rng) {
    const auto& library = ledger.library();
    if (library.empty()) throw ConfigError("operator library is empty");
    if (ledger.layers() != arch.hidden.size()) throw ConfigError("ledger layer count does not match the architecture");
    Assignment out;
    for (std::size_t l = 0; l < arch.hidden.size(); ++l) {
        const auto p = ledger.probabilities(l);
        std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
        out.emplace_back();
        for (std::size_t i = 0; i < arch.hidden[l]; ++i) out.back().push_back(library[pick(rng)]);
    }
    return out;
}

double kernel_variance(std::span<const double> kernel) {
    if (kernel.empty()) throw std::invalid_argument("kernel_variance: empty kernel");
    double mean = 0.0;
    for (double v : kernel) mean += v;
    mean /= static_cast<double>(kernel.size());
    double s = 0.0;
    for (double v : kernel) s += (v - mean) * (v - mean);
    return s / static_cast<double>(kernel.size());
}

HealthFactor health_factor(std::span<const std::span<const double>> before,
                           std::span<const std::span<const double>> after) {
    if (before.empty() || before.size() != after.size())
        throw std::invalid_argument("health_factor: snapshots must be non-empty and of equal fan-out");
    double p0 = 0.0;
    double p1 = 0.0;
    for (std::size_t k = 0; k < before.size(); ++k) {
        if (before[k].size() != after[k].size()) throw std::invalid_argument("health_factor: kernel size mismatch");
        p0 += kernel_variance(before[k]);
        p1 += kernel_variance(after[k]);
    }
    p0 /= static_cast<double>(before.size());
    p1 /= static_cast<double>(before.size());
    if (p0 == 0.0) return {std::fabs(p1) / kHealthFloor, true};
    return {std::fabs(p1 - p0) / std::fabs(p0), false};
}

GradientMask freeze_outgoing(const NetworkSpec& spec, const OperatorSet& frozen) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;  // offset, length
    const Parameters layout(spec);
    for (std::size_t l = 0; l + 1 < spec.layers.size(); ++l)
        for (std::size_t a = 0; a < spec.layers[l].neurons.size(); ++a) {
            if (!(spec.layers[l].neurons[a].operators == frozen)) continue;
            for (std::size_t b = 0; b < spec.layers[l + 1].neurons.size(); ++b)
                ranges.emplace_back(layout.weight_offset(l + 1, a, b), spec.layers[l + 1].neurons[b].kernel.size());
        }
    return [ranges](Parameters& grads) {
        auto g = grads.mutable_values();
        for (auto [offset, length] : ranges) std::fill_n(g.begin() + static_cast<std::ptrdiff_t>(offset), length, 0.0);
    };
}

namespace {

struct RunOutcome {
    std::vector<std::vector<HealthLedger::LayerCredit>> credits;
    std::size_t degenerate = 0;
};

// Per hidden layer, per neuron: rho between two parameter snapshots.
std::vector<std::vector<HealthFactor>> neuron_health(const NetworkSpec& spec, const Parameters& before,
                                                     const Parameters& after) {
    std::vector<std::vector<HealthFactor>> out;
    for (std::size_t l = 0; l + 1 < spec.layers.size(); ++l) {
        out.emplace_back();
        const std::size_t fan_out = spec.layers[l + 1].neurons.size();
        for (std::size_t a = 0; a < spec.layers[l].neurons.size(); ++a) {
            std::vector<std::span<const double>> k0;
            std::vector<std::span<const double>> k1;
            for (std::size_t b = 0; b < fan_out; ++b) {
                k0.push_back(before.weight(l + 1, a, b));
                k1.push_back(after.weight(l + 1, a, b));
            }
            out.back().push_back(health_factor(k0, k1));
        }
    }
    return out;
}

RunOutcome probe_run(const Architecture& arch, const OperatorLibrary& library, const SpmConfig& config,
                     std::span<const Sample> samples, const Assignment& assignment, std::uint64_t run_seed,
                     const SpmHooks& hooks) {
    const NetworkSpec spec = make_network(arch, assignment);
    auto init_rng = make_rng(run_seed, {0x73706dULL, 0x696e6974ULL});
    Trainer trainer(spec, initialize_parameters(spec, init_rng), config.optimizer);
    if (hooks.mask) trainer.set_gradient_mask(hooks.mask(spec));

    // Snapshot iterations: the window ends, always including (M - gamma, M).
    const std::size_t m = config.iterations;
    std::vector<std::size_t> marks;
    if (config.window == HealthWindow::All)
        for (std::size_t t = 0; t + config.gamma <= m; t += config.gamma) marks.push_back(t);
    marks.push_back(m - config.gamma);
    marks.push_back(m);
    std::sort(marks.begin(), marks.end());
    marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

    std::vector<std::pair<std::size_t, Parameters>> snaps;
    std::size_t next_mark = 0;
    std::vector<std::size_t> order;
    std::size_t epoch = 0;
    std::size_t pos = 0;
    for (std::size_t t = 0;; ++t) {
        if (next_mark < marks.size() && marks[next_mark] == t) {
            snaps.emplace_back(t, trainer.params());
            ++next_mark;
        }
        if (t == m) break;
        if (pos == order.size()) {
            order = epoch_order(samples.size(), run_seed ^ 0x73706d0000000000ULL, epoch++);
            pos = 0;
        }
        trainer.step(samples[order[pos++]]);
    }

    // Windows of length gamma between recorded snapshots.
    std::vector<std::pair<std::size_t, std::size_t>> windows;
    if (config.window == HealthWindow::Last) {
        windows.emplace_back(snaps.size() - 2, snaps.size() - 1);
    } else {
        for (std::size_t i = 0; i < snaps.size(); ++i)
            for (std::size_t j = i + 1; j < snaps.size(); ++j)
                if (snaps[j].first == snaps[i].first + config.gamma) windows.emplace_back(i, j);
    }

    RunOutcome outcome;
    const std::size_t hidden = spec.layers.size() - 1;
    std::vector<std::vector<double>> rho(hidden);
    for (std::size_t l = 0; l < hidden; ++l) rho[l].assign(spec.layers[l].neurons.size(), 0.0);
    for (auto [i, j] : windows) {
        const auto h = neuron_health(spec, snaps[i].second, snaps[j].second);
        for (std::size_t l = 0; l < hidden; ++l)
            for (std::size_t a = 0; a < h[l].size(); ++a) {
                rho[l][a] += h[l][a].rho / static_cast<double>(windows.size());
                if (h[l][a].degenerate) ++outcome.degenerate;
            }
    }

    // Per layer: mean rho of the neurons sharing an operator set.
    outcome.credits.resize(hidden);
    for (std::size_t l = 0; l < hidden; ++l) {
        std::vector<double> sum(library.size(), 0.0);
        std::vector<std::size_t> count(library.size(), 0);
        for (std::size_t a = 0; a < rho[l].size(); ++a) {
            const auto idx = library.index_of(assignment[l][a]);
            if (!idx) throw ConfigError("assigned operator set " + assignment[l][a].name() + " is not in the library");
            sum[*idx] += rho[l][a];
            ++count[*idx];
        }
        for (std::size_t s = 0; s < library.size(); ++s)
            if (count[s] > 0) outcome.credits[l].push_back({s, sum[s] / static_cast<double>(count[s])});
    }
    return outcome;
}

}  // namespace

SpmResult run_spm(const Architecture& arch, const OperatorLibrary& library, const SpmConfig& config,
                  std::span<const Sample> samples, std::uint64_t seed, const SpmHooks& hooks) {
    config.validate(library);
    if (samples.empty()) throw DataError("spm needs at least one probe sample");

    SpmResult result;
    result.ledger = HealthLedger(arch.hidden.size(), library);
    result.runs.resize(config.runs);

    struct Pending {
        RunOutcome outcome;
        std::vector<std::string> log;
        bool ok = false;
    };

    auto attempt_run = [&](std::size_t r, const HealthLedger* guide) {
        Pending p;
        for (std::size_t attempt = 0; attempt <= config.max_redraws; ++attempt) {
            const std::uint64_t run_seed = seed + 1000 * r + attempt;
            auto rng = make_rng(run_seed, {0x61737367ULL});
            result.runs[r].assignment =
                guide != nullptr ? assign_guided(arch, *guide, rng) : assign_random(arch, library, rng);
            result.runs[r].attempts = attempt + 1;
            result.runs[r].guided = guide != nullptr;
            try {
                p.outcome = probe_run(arch, library, config, samples, result.runs[r].assignment, run_seed, hooks);
                p.ok = true;
                return p;
            } catch (const NumericalError& e) {
                p.log.push_back("run " + std::to_string(r) + " attempt " + std::to_string(attempt) +
                                " diverged (" + e.what() + "); redrawing");
            }
        }
        return p;
    };

    const std::size_t free_runs = std::min(config.confinement, config.runs);
    std::vector<Pending> early(free_runs);
    const auto n_free = static_cast<std::ptrdiff_t>(free_runs);
    // Runs before the confinement threshold are independent.
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t r = 0; r < n_free; ++r) early[static_cast<std::size_t>(r)] = attempt_run(static_cast<std::size_t>(r), nullptr);

    auto merge = [&](std::size_t r, Pending& p) {
        for (auto& line : p.log) result.diagnostics.push_back(std::move(line));
        if (!p.ok)
            throw NumericalError("spm run " + std::to_string(r) + " diverged on every redraw");
        result.ledger.add_run(p.outcome.credits, p.outcome.degenerate);
        if (p.outcome.degenerate > 0)
            result.diagnostics.push_back("run " + std::to_string(r) + ": " + std::to_string(p.outcome.degenerate) +
                                         " neurons with zero baseline power");
        if (hooks.on_run) hooks.on_run(r, result.ledger);
    };
    for (std::size_t r = 0; r < free_runs; ++r) merge(r, early[r]);
    for (std::size_t r = free_runs; r < config.runs; ++r) {
        auto p = attempt_run(r, &result.ledger);
        merge(r, p);
    }
    return result;
}

std::vector<std::size_t> allocate_neurons(std::span<const double> scores, std::size_t neurons) {
    const std::size_t k = scores.size();
    if (k == 0) throw std::invalid_argument("allocate_neurons: no sets");
    double total = 0.0;
    for (double s : scores) total += s;
    std::vector<double> quota(k);
    for (std::size_t i = 0; i < k; ++i)
        quota[i] = total > 0.0 ? static_cast<double>(neurons) * scores[i] / total
                               : static_cast<double>(neurons) / static_cast<double>(k);
    std::vector<std::size_t> alloc(k);
    std::size_t used = 0;
    for (std::size_t i = 0; i < k; ++i) used += (alloc[i] = static_cast<std::size_t>(std::floor(quota[i])));
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]);
    });
    for (std::size_t i = 0; used < neurons; i = (i + 1) % k, ++used) ++alloc[order[i]];

    if (neurons >= k) {
        // Every chosen set keeps at least one neuron, taken from the largest allocation
        // (the lowest-ranked one among equals).
        for (std::size_t i = 0; i < k; ++i) {
            if (alloc[i] > 0) continue;
            std::size_t donor = 0;
            for (std::size_t j = 0; j < k; ++j)
                if (alloc[j] >= alloc[donor]) donor = j;
            --alloc[donor];
            ++alloc[i];
        }
    }
    return alloc;
}

Assignment configure_elite(const Architecture& arch, const HealthLedger& ledger, std::size_t top_k) {
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
    if (ledger.layers() != arch.hidden.size()) throw ConfigError("ledger layer count does not match the architecture");
    Assignment out;
    for (std::size_t l = 0; l < arch.hidden.size(); ++l) {
        auto rank = ledger.ranking(l);
        if (rank.empty()) throw ConfigError("hidden layer " + std::to_string(l) + " has no scored operator sets");
        if (rank.size() > top_k) rank.resize(top_k);
        std::vector<double> scores;
        for (auto s : rank) scores.push_back(ledger.score(l, s));
        const auto alloc = allocate_neurons(scores, arch.hidden[l]);
        out.emplace_back();
        for (std::size_t i = 0; i < rank.size(); ++i)
            for (std::size_t n = 0; n < alloc[i]; ++n) out.back().push_back(ledger.library()[rank[i]]);
    }
    return out;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string ledger_report(const HealthLedger& ledger) {
    std::ostringstream os;
    os << "runs " << ledger.runs() << ", degenerate baselines " << ledger.degenerate_baselines() << "\n";
    for (std::size_t l = 0; l < ledger.layers(); ++l) {
        const auto p = ledger.probabilities(l);
        os << "\nhidden layer " << l + 1 << "\n";
        char line[160];
        std::snprintf(line, sizeof line, "  %-4s %-8s %-8s %-10s %14s %10s %5s\n", "rank", "nodal", "pool",
                      "activation", "score", "P", "runs");
        os << line;
        std::size_t rank = 1;
        for (auto s : ledger.ranking(l)) {
            const auto& set = ledger.library()[s];
            std::snprintf(line, sizeof line, "  %-4zu %-8s %-8s %-10s %14.6g %10.4f %5zu\n", rank++,
                          std::string(set.nodal.name).c_str(), std::string(to_string(set.pool)).c_str(),
                          std::string(to_string(set.activation)).c_str(), ledger.score(l, s), p[s],
                          ledger.samples(l, s).size());
            os << line;
        }
    }
    return os.str();
}

std::string ledger_csv(const HealthLedger& ledger) {
    std::ostringstream os;
    os << "layer,rank,nodal,pool,activation,score,probability,runs_scored\n";
    for (std::size_t l = 0; l < ledger.layers(); ++l) {
        const auto p = ledger.probabilities(l);
        std::size_t rank = 1;
        for (auto s : ledger.ranking(l)) {
            const auto& set = ledger.library()[s];
            os << l + 1 << ',' << rank++ << ',' << set.nodal.name << ',' << to_string(set.pool) << ','
               << to_string(set.activation) << ',' << format_double(ledger.score(l, s)) << ','
               << format_double(p[s]) << ',' << ledger.samples(l, s).size() << '\n';
        }
    }
    return os.str();
}

}  // namespace onn
