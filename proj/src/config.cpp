#include "onn/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "onn/errors.hpp"

namespace onn {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v) { return static_cast<std::size_t>(to_u64(key, v)); }

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

KernelShape to_kernel(const std::string& key, const std::string& v) {
    const auto x = v.find('x');
    if (x == std::string::npos) {
        const auto n = to_size(key, v);
        return {n, n};
    }
    return {to_size(key, trim(v.substr(0, x))), to_size(key, trim(v.substr(x + 1)))};
}

OptimizerKind to_optimizer(const std::string& key, const std::string& v) {
    try {
        return parse_optimizer(v);
    } catch (const std::exception&) {
        throw ConfigError(key + ": unknown optimizer '" + v + "' (expected sgd, adam or vadam)");
    }
}

template <class T, class Parse>
std::vector<T> parse_ids(const std::string& key, const std::string& v, Parse parse) {
    std::vector<T> out;
    for (const auto& item : split_list(v)) {
        auto p = parse(item);
        if (!p) throw ConfigError(key + ": unknown operator id '" + item + "'");
        out.push_back(*p);
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
    return s;
}

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

IniDocument IniDocument::parse(const std::string& text, const std::string& origin) {
    IniDocument doc;
    std::istringstream is(text);
    std::string line;
    std::string section;
    for (std::size_t n = 1; std::getline(is, line); ++n) {
        const auto cut = line.find_first_of("#;");
        const std::string body = trim(cut == std::string::npos ? line : line.substr(0, cut));
        if (body.empty()) continue;
        const std::string where = origin + ":" + std::to_string(n);
        if (body.front() == '[') {
            if (body.back() != ']') throw ConfigError(where + ": unterminated section header");
            section = trim(body.substr(1, body.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = trim(body.substr(0, eq));
        if (key.empty()) throw ConfigError(where + ": missing key");
        doc.set(section.empty() ? key : section + "." + key, trim(body.substr(eq + 1)));
    }
    return doc;
}

IniDocument IniDocument::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path.string());
}

void IniDocument::set(const std::string& key, const std::string& value) { values_[key] = value; }

ExperimentConfig ExperimentConfig::from_ini(const IniDocument& doc) {
    ExperimentConfig c;
    std::vector<NodalOp> nodals;
    std::vector<PoolKind> pools;
    std::vector<ActivationKind> activations;
    std::string explicit_sets;
    std::string models = "both";

    for (const auto& [key, v] : doc.values()) {
        if (key == "data.path") c.dataset = v;
        else if (key == "data.images") c.images = to_size(key, v);
        else if (key == "data.rows") c.arch.rows = to_size(key, v);
        else if (key == "data.cols") c.arch.cols = to_size(key, v);
        else if (key == "data.corpus_seed") c.corpus_seed = to_u64(key, v);
        else if (key == "noise.kind") {
            try {
                c.noise.kind = parse_noise(v);
            } catch (const std::exception& e) {
                throw ConfigError(key + ": " + e.what());
            }
        } else if (key == "noise.p") c.noise.p = to_double(key, v);
        else if (key == "noise.shape") c.noise.shape = static_cast<int>(to_size(key, v));
        else if (key == "network.hidden") {
            c.arch.hidden.clear();
            for (const auto& item : split_list(v)) c.arch.hidden.push_back(to_size(key, item));
        } else if (key == "network.kernel") c.arch.kernel = to_kernel(key, v);
        else if (key == "library.sets") explicit_sets = v;
        else if (key == "library.nodal") nodals = parse_ids<NodalOp>(key, v, parse_nodal);
        else if (key == "library.pool") pools = parse_ids<PoolKind>(key, v, parse_pool);
        else if (key == "library.activation") activations = parse_ids<ActivationKind>(key, v, parse_activation);
        else if (key == "spm.gamma") c.spm.gamma = to_size(key, v);
        else if (key == "spm.runs") c.spm.runs = to_size(key, v);
        else if (key == "spm.top_k") c.spm.top_k = to_size(key, v);
        else if (key == "spm.confinement") c.spm.confinement = to_size(key, v);
        else if (key == "spm.iterations") c.spm.iterations = to_size(key, v);
        else if (key == "spm.window") {
            try {
                c.spm.window = parse_window(v);
            } catch (const ConfigError& e) {
                throw ConfigError(key + ": " + e.what());
            }
        } else if (key == "spm.probe") c.spm_probe = to_size(key, v);
        else if (key == "spm.max_redraws") c.spm.max_redraws = to_size(key, v);
        else if (key == "onn.optimizer") c.protocol.onn_optimizer.kind = to_optimizer(key, v);
        else if (key == "onn.lr") c.protocol.onn_optimizer.lr = to_double(key, v);
        else if (key == "onn.beta1") c.protocol.onn_optimizer.beta1 = to_double(key, v);
        else if (key == "onn.beta2") c.protocol.onn_optimizer.beta2 = to_double(key, v);
        else if (key == "onn.eps") c.protocol.onn_optimizer.eps = to_double(key, v);
        else if (key == "cnn.optimizer") c.protocol.cnn_optimizer.kind = to_optimizer(key, v);
        else if (key == "cnn.lr") c.protocol.cnn_optimizer.lr = to_double(key, v);
        else if (key == "cnn.beta1") c.protocol.cnn_optimizer.beta1 = to_double(key, v);
        else if (key == "cnn.beta2") c.protocol.cnn_optimizer.beta2 = to_double(key, v);
        else if (key == "cnn.eps") c.protocol.cnn_optimizer.eps = to_double(key, v);
        else if (key == "cnn.activation") {
            auto a = parse_activation(v);
            if (!a) throw ConfigError(key + ": unknown activation '" + v + "'");
            c.protocol.cnn_activation = *a;
        } else if (key == "protocol.plan_folds") c.protocol.plan_folds = to_size(key, v);
        else if (key == "protocol.folds") c.protocol.folds = to_size(key, v);
        else if (key == "protocol.restarts") c.protocol.restarts = to_size(key, v);
        else if (key == "protocol.epochs") c.protocol.epochs = to_size(key, v);
        else if (key == "protocol.max_epochs") c.max_epochs = to_size(key, v);
        else if (key == "protocol.models") models = v;
        else if (key == "gradcheck.configs") c.gradcheck.configs_per_set = to_size(key, v);
        else if (key == "gradcheck.max_extent") c.gradcheck.max_extent = to_size(key, v);
        else if (key == "gradcheck.step") c.gradcheck.step = to_double(key, v);
        else if (key == "gradcheck.tolerance") c.gradcheck.tolerance = to_double(key, v);
        else if (key == "gradcheck.scale_floor") c.gradcheck.scale_floor = to_double(key, v);
        else if (key == "gradcheck.tie_margin") c.gradcheck.tie_margin = to_double(key, v);
        else if (key == "run.seed") c.seed = to_u64(key, v);
        else if (key == "run.out") c.out = v;
        else if (key == "run.workers") c.workers = to_size(key, v);
        else throw ConfigError("unknown config key '" + key + "'");
    }

    if (!explicit_sets.empty()) {
        if (!nodals.empty() || !pools.empty() || !activations.empty())
            throw ConfigError("library.sets cannot be combined with library.nodal/pool/activation");
        std::vector<OperatorSet> sets;
        for (const auto& item : split_list(explicit_sets)) {
            try {
                sets.push_back(parse_operator_set(item));
            } catch (const std::exception& e) {
                throw ConfigError("library.sets: " + std::string(e.what()));
            }
        }
        try {
            c.library = OperatorLibrary(std::move(sets));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("library.sets: ") + e.what());
        }
    } else if (!nodals.empty() || !pools.empty() || !activations.empty()) {
        auto all_nodals = builtin_nodal_ops();
        if (nodals.empty()) nodals.assign(all_nodals.begin(), all_nodals.end());
        if (pools.empty()) pools = {PoolKind::Sum, PoolKind::Median, PoolKind::Max};
        if (activations.empty()) activations = {ActivationKind::Tanh, ActivationKind::LinCut, ActivationKind::Identity};
        c.library = OperatorLibrary::product(nodals, pools, activations);
    }

    if (models == "both") {
        c.protocol.run_onn = c.protocol.run_cnn = true;
    } else if (models == "onn") {
        c.protocol.run_onn = true;
        c.protocol.run_cnn = false;
    } else if (models == "cnn") {
        c.protocol.run_onn = false;
        c.protocol.run_cnn = true;
    } else {
        throw ConfigError("protocol.models: expected both, onn or cnn, got '" + models + "'");
    }

    c.noise.seed = c.seed;
    c.protocol.seed = c.seed;
    c.protocol.library = c.library;
    c.spm.optimizer = c.protocol.onn_optimizer;
    c.protocol.spm = c.spm;
    c.protocol.spm_probe = c.spm_probe;
    c.gradcheck.seed = c.seed;
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    try {
        noise.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("noise: ") + e.what());
    }
    if (!dataset.empty() && !std::filesystem::is_directory(dataset))
        throw ConfigError("data.path: directory " + dataset.string() + " does not exist");
    if (images < 1) throw ConfigError("data.images must be >= 1");
    if (arch.rows < 1 || arch.cols < 1) throw ConfigError("data.rows and data.cols must be >= 1");
    if (arch.hidden.empty()) throw ConfigError("network.hidden needs at least one layer");
    for (auto h : arch.hidden)
        if (h < 1) throw ConfigError("network.hidden: every layer needs at least one neuron");
    if (arch.kernel.rows % 2 == 0 || arch.kernel.cols % 2 == 0 || arch.kernel.rows < 1)
        throw ConfigError("network.kernel must have odd sides");
    if (library.empty()) throw ConfigError("library: no operator sets");
    spm.validate(library);
    if (spm_probe < 1) throw ConfigError("spm.probe must be >= 1");
    if (protocol.epochs > max_epochs)
        throw ConfigError("protocol.epochs (" + std::to_string(protocol.epochs) + ") exceeds protocol.max_epochs (" +
                          std::to_string(max_epochs) + ")");
    for (const auto* o : {&protocol.onn_optimizer, &protocol.cnn_optimizer})
        if (!(o->lr > 0.0) || !(o->beta1 >= 0.0 && o->beta1 < 1.0) || !(o->beta2 >= 0.0 && o->beta2 < 1.0) ||
            !(o->eps > 0.0))
            throw ConfigError("optimizer: need lr > 0, 0 <= beta < 1 and eps > 0");
    if (!(gradcheck.step > 0.0) || !(gradcheck.tolerance > 0.0) || !(gradcheck.tie_margin >= 0.0))
        throw ConfigError("gradcheck: step and tolerance must be > 0, tie_margin >= 0");
    protocol.validate(arch, images);
}

std::string ExperimentConfig::to_ini() const {
    std::ostringstream os;
    auto opt = [&](const char* section, const OptimizerConfig& o) {
        os << "\n[" << section << "]\noptimizer = " << to_string(o.kind) << "\nlr = " << format_number(o.lr)
           << "\nbeta1 = " << format_number(o.beta1) << "\nbeta2 = " << format_number(o.beta2)
           << "\neps = " << format_number(o.eps) << "\n";
    };
    os << "[run]\nseed = " << seed << "\nout = " << out.string() << "\nworkers = " << workers << "\n";
    os << "\n[data]\npath = " << dataset.string() << "\nimages = " << images << "\nrows = " << arch.rows
       << "\ncols = " << arch.cols << "\ncorpus_seed = " << corpus_seed << "\n";
    os << "\n[noise]\nkind = " << to_string(noise.kind) << "\np = " << format_number(noise.p)
       << "\nshape = " << noise.shape << "\n";
    os << "\n[network]\nhidden = " << join_sizes(arch.hidden) << "\nkernel = " << arch.kernel.rows << "x"
       << arch.kernel.cols << "\n";
    os << "\n[library]\nsets =";
    for (std::size_t i = 0; i < library.size(); ++i) os << (i ? ", " : " ") << library[i].name();
    os << "\n";
    os << "\n[spm]\ngamma = " << spm.gamma << "\nruns = " << spm.runs << "\ntop_k = " << spm.top_k
       << "\nconfinement = " << spm.confinement << "\niterations = " << spm.iterations
       << "\nwindow = " << to_string(spm.window) << "\nprobe = " << spm_probe << "\nmax_redraws = " << spm.max_redraws
       << "\n";
    opt("onn", protocol.onn_optimizer);
    opt("cnn", protocol.cnn_optimizer);
    os << "activation = " << to_string(protocol.cnn_activation) << "\n";
    os << "\n[protocol]\nplan_folds = " << protocol.plan_folds << "\nfolds = " << protocol.folds
       << "\nrestarts = " << protocol.restarts << "\nepochs = " << protocol.epochs << "\nmax_epochs = " << max_epochs
       << "\nmodels = " << (protocol.run_onn && protocol.run_cnn ? "both" : protocol.run_onn ? "onn" : "cnn") << "\n";
    os << "\n[gradcheck]\nconfigs = " << gradcheck.configs_per_set << "\nmax_extent = " << gradcheck.max_extent
       << "\nstep = " << format_number(gradcheck.step) << "\ntolerance = " << format_number(gradcheck.tolerance)
       << "\nscale_floor = " << format_number(gradcheck.scale_floor)
       << "\ntie_margin = " << format_number(gradcheck.tie_margin) << "\n";
    return os.str();
}

}  // namespace onn
