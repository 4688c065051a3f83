#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "checknet/numerics.hpp"

namespace checknet {

std::string base64_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Shortest round-trip decimal form; keeps text outputs reproducible.
std::string format_double(double v);

// Doubles travel as base64-encoded little-endian IEEE-754, so weight blobs
// round-trip bit-exactly.
std::string doubles_to_b64(std::span<const double> values);
std::vector<double> doubles_from_b64(const std::string& text, std::size_t expected);

nlohmann::json matrix_to_json(const DenseMatrix& m);
DenseMatrix matrix_from_json(const nlohmann::json& j);

nlohmann::json vector_to_json(std::span<const double> v);
std::vector<double> vector_from_json(const nlohmann::json& j);

nlohmann::json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);

nlohmann::json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace checknet
