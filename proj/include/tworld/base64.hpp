#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tworld {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Strict decoder: rejects bad characters, bad padding and bad lengths.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// f32 payloads as little-endian bytes.
std::string encode_floats(std::span<const float> values);
std::vector<float> decode_floats(std::string_view text);

}  // namespace tworld
