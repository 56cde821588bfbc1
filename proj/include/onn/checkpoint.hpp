#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "onn/network.hpp"

namespace onn {

inline constexpr int kCheckpointVersion = 1;

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(std::string_view text);

/// Little-endian IEEE-754 doubles, base64-encoded.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(std::string_view text);

struct Checkpoint {
    NetworkSpec spec;
    Parameters params;
};

std::string checkpoint_to_string(const NetworkSpec& spec, const Parameters& params);
Checkpoint checkpoint_from_string(const std::string& text);
void save_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec, const Parameters& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string assignment_to_string(const Assignment& assignment);
Assignment assignment_from_string(const std::string& text);

}  // namespace onn
