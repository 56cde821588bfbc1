#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "onn/gradcheck.hpp"
#include "onn/network.hpp"
#include "onn/noise.hpp"
#include "onn/protocol.hpp"
#include "onn/spm.hpp"

namespace onn {

/// Flat key = value text with [section] headers; '#' and ';' start comments.
/// Keys are addressed as "section.key" (keys before any header have no prefix).
class IniDocument {
public:
    static IniDocument parse(const std::string& text, const std::string& origin = "config");
    static IniDocument load(const std::filesystem::path& path);

    /// Sets "section.key"; later values win.
    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

struct ExperimentConfig {
    // [data]
    std::filesystem::path dataset;  // empty: procedural corpus
    std::size_t images = 1000;
    std::uint64_t corpus_seed = 0;
    // [noise]
    NoiseModel noise;
    // [network]
    Architecture arch;
    // [library]
    OperatorLibrary library = OperatorLibrary::default_library();
    // [spm]
    SpmConfig spm;
    std::size_t spm_probe = 30;
    // [onn], [cnn], [protocol]
    ProtocolConfig protocol;
    std::size_t max_epochs = 1000;
    // [gradcheck]
    GradcheckConfig gradcheck;
    // [run]
    std::uint64_t seed = 0;
    std::filesystem::path out = "runs/default";
    std::size_t workers = 0;  // 0: ONN_WORKERS or all cores

    /// Unknown keys, malformed values and inconsistent settings throw ConfigError.
    static ExperimentConfig from_ini(const IniDocument& doc);
    void validate() const;
    /// Canonical text form, readable by from_ini.
    std::string to_ini() const;
};

std::vector<std::string> split_list(const std::string& text);

}  // namespace onn
