#include "checknet/serialize.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>

#include "checknet/errors.hpp"

namespace checknet {

namespace {
constexpr char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
}  // namespace

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string base64_encode(std::span<const std::uint8_t> data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= data.size(); i += 3) {
        std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back(kB64Chars[(v >> 6) & 63]);
        out.push_back(kB64Chars[v & 63]);
    }
    std::size_t rem = data.size() - i;
    if (rem == 1) {
        std::uint32_t v = data[i] << 16;
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rem == 2) {
        std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back(kB64Chars[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw IoError("base64: length not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            char c = text[i + k];
            if (c == '=') {
                if (i + 4 != text.size() || k < 2) throw IoError("base64: misplaced padding");
                vals[k] = 0;
                ++pad;
            } else {
                vals[k] = b64_value(c);
                if (vals[k] < 0) throw IoError("base64: invalid character");
                if (pad > 0) throw IoError("base64: data after padding");
            }
        }
        std::uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    return out;
}

std::string doubles_to_b64(std::span<const double> values) {
    static_assert(std::endian::native == std::endian::little,
                  "blob format is little-endian; byte swap needed on this platform");
    std::vector<std::uint8_t> bytes(values.size() * sizeof(double));
    std::memcpy(bytes.data(), values.data(), bytes.size());
    return base64_encode(bytes);
}

std::vector<double> doubles_from_b64(const std::string& text, std::size_t expected) {
    auto bytes = base64_decode(text);
    if (bytes.size() != expected * sizeof(double))
        throw IoError("blob: decoded size does not match declared shape");
    std::vector<double> values(expected);
    std::memcpy(values.data(), bytes.data(), bytes.size());
    return values;
}

nlohmann::json matrix_to_json(const DenseMatrix& m) {
    return {{"rows", m.rows}, {"cols", m.cols}, {"data", doubles_to_b64(m.a)}};
}

DenseMatrix matrix_from_json(const nlohmann::json& j) {
    DenseMatrix m;
    m.rows = j.at("rows").get<std::size_t>();
    m.cols = j.at("cols").get<std::size_t>();
    m.a = doubles_from_b64(j.at("data").get<std::string>(), m.rows * m.cols);
    return m;
}

nlohmann::json vector_to_json(std::span<const double> v) {
    return {{"len", v.size()}, {"data", doubles_to_b64(v)}};
}

std::vector<double> vector_from_json(const nlohmann::json& j) {
    std::size_t len = j.at("len").get<std::size_t>();
    return doubles_from_b64(j.at("data").get<std::string>(), len);
}

nlohmann::json mlp_to_json(const Mlp& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : net.layers)
        layers.push_back({{"w", matrix_to_json(layer.w)}, {"b", vector_to_json(layer.b)}});
    return {{"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
    Mlp net;
    for (const auto& lj : j.at("layers")) {
        MlpLayer layer;
        layer.w = matrix_from_json(lj.at("w"));
        layer.b = vector_from_json(lj.at("b"));
        if (layer.b.size() != layer.w.rows) throw IoError("mlp: bias/weight shape mismatch");
        net.layers.push_back(std::move(layer));
    }
    return net;
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt file " + path + ": " + e.what());
    }
    return j;
}

void save_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace checknet
