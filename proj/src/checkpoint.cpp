#include "onn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace onn {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

nlohmann::json spec_to_json(const NetworkSpec& spec) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : spec.layers) {
        nlohmann::json neurons = nlohmann::json::array();
        for (const auto& n : layer.neurons) {
            if (n.operators.nodal.kind == NodalKind::Custom)
                throw std::invalid_argument("custom nodal ops cannot be serialized");
            neurons.push_back({{"operators", n.operators.name()}, {"kernel", {n.kernel.rows, n.kernel.cols}}});
        }
        layers.push_back({{"inputs", layer.input_count}, {"neurons", neurons}});
    }
    return {{"input_shape", {spec.input_rows, spec.input_cols}}, {"layers", layers}};
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
    NetworkSpec spec;
    spec.input_rows = j.at("input_shape").at(0).get<std::size_t>();
    spec.input_cols = j.at("input_shape").at(1).get<std::size_t>();
    for (const auto& jl : j.at("layers")) {
        LayerSpec layer;
        layer.input_count = jl.at("inputs").get<std::size_t>();
        for (const auto& jn : jl.at("neurons")) {
            NeuronSpec n;
            n.operators = parse_operator_set(jn.at("operators").get<std::string>());
            n.kernel = {jn.at("kernel").at(0).get<std::size_t>(), jn.at("kernel").at(1).get<std::size_t>()};
            layer.neurons.push_back(n);
        }
        spec.layers.push_back(std::move(layer));
    }
    spec.validate();
    return spec;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string base64_encode(std::span<const unsigned char> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    const std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        const unsigned v = bytes[i] << 16;
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw std::invalid_argument("base64: length is not a multiple of 4");
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int d[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + static_cast<std::size_t>(k)];
            if (c == '=' && i + 4 == text.size() && k >= 2) {
                d[k] = 0;
                ++pad;
                continue;
            }
            if (pad > 0 || (d[k] = decode_char(c)) < 0) throw std::invalid_argument("base64: invalid character");
        }
        const unsigned v = (static_cast<unsigned>(d[0]) << 18) | (static_cast<unsigned>(d[1]) << 12) |
                           (static_cast<unsigned>(d[2]) << 6) | static_cast<unsigned>(d[3]);
        out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
        if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
        if (pad < 1) out.push_back(static_cast<unsigned char>(v & 0xFF));
    }
    return out;
}

std::string encode_doubles(std::span<const double> values) {
    std::vector<unsigned char> bytes(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(values[i]);
        for (int k = 0; k < 8; ++k) bytes[i * 8 + static_cast<std::size_t>(k)] = static_cast<unsigned char>(bits >> (8 * k));
    }
    return base64_encode(bytes);
}

std::vector<double> decode_doubles(std::string_view text) {
    const auto bytes = base64_decode(text);
    if (bytes.size() % 8 != 0) throw std::invalid_argument("encoded doubles: byte count is not a multiple of 8");
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[i * 8 + static_cast<std::size_t>(k)]) << (8 * k);
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

std::string checkpoint_to_string(const NetworkSpec& spec, const Parameters& params) {
    Parameters layout(spec);
    if (!layout.same_layout(params)) throw std::invalid_argument("checkpoint: parameters do not match spec");
    nlohmann::json j;
    j["format"] = "onn-checkpoint";
    j["format_version"] = kCheckpointVersion;
    j["network"] = spec_to_json(spec);
    j["parameter_count"] = params.size();
    j["encoding"] = "base64-f64le";
    j["parameters"] = encode_doubles(params.values());
    return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "onn-checkpoint") throw std::invalid_argument("not an onn checkpoint");
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion)
        throw std::invalid_argument("unsupported checkpoint version " + std::to_string(version));
    Checkpoint cp{spec_from_json(j.at("network")), {}};
    cp.params = Parameters(cp.spec);
    const auto values = decode_doubles(j.at("parameters").get<std::string>());
    if (values.size() != cp.params.size() || j.at("parameter_count").get<std::size_t>() != values.size())
        throw std::invalid_argument("checkpoint parameter count does not match network");
    auto dst = cp.params.mutable_values();
    std::copy(values.begin(), values.end(), dst.begin());
    return cp;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec, const Parameters& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << checkpoint_to_string(spec, params);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_string(read_file(path)); }

std::string assignment_to_string(const Assignment& assignment) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : assignment) {
        nlohmann::json names = nlohmann::json::array();
        for (const auto& set : layer) names.push_back(set.name());
        layers.push_back(names);
    }
    nlohmann::json j{{"format", "onn-assignment"}, {"format_version", 1}, {"hidden_layers", layers}};
    return j.dump(2) + "\n";
}

Assignment assignment_from_string(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "onn-assignment") throw std::invalid_argument("not an onn assignment file");
    Assignment out;
    for (const auto& layer : j.at("hidden_layers")) {
        out.emplace_back();
        for (const auto& name : layer) out.back().push_back(parse_operator_set(name.get<std::string>()));
    }
    return out;
}

}  // namespace onn
