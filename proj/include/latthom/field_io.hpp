#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "latthom/lattice.hpp"

namespace latthom {

// Field files: one-line JSON header {"d":..., "n":..., "kind":"node"|"edge"}
// followed by the values as little-endian 64-bit floats in row-major order.

namespace detail {

inline void write_doubles_le(std::ostream& os, const std::vector<double>& values) {
    static_assert(sizeof(double) == 8);
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * 8));
    } else {
        for (double v : values) {
            std::uint64_t u;
            std::memcpy(&u, &v, 8);
            char b[8];
            for (int i = 0; i < 8; ++i) b[i] = char((u >> (8 * i)) & 0xff);
            os.write(b, 8);
        }
    }
}

inline void read_doubles_le(std::istream& is, std::vector<double>& values) {
    if constexpr (std::endian::native == std::endian::little) {
        is.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(values.size() * 8));
    } else {
        for (double& v : values) {
            char b[8];
            is.read(b, 8);
            std::uint64_t u = 0;
            for (int i = 0; i < 8; ++i) u |= std::uint64_t(std::uint8_t(b[i])) << (8 * i);
            std::memcpy(&v, &u, 8);
        }
    }
    if (!is) throw std::runtime_error("field file: truncated payload");
}

inline nlohmann::json read_header(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("field file: missing header");
    return nlohmann::json::parse(line);
}

}  // namespace detail

inline void write_field(const std::string& path, const NodeField& u) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    nlohmann::json h{{"d", u.lattice->dim()}, {"n", u.lattice->side()}, {"kind", "node"}};
    os << h.dump() << '\n';
    detail::write_doubles_le(os, u.values);
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline void write_field(const std::string& path, const EdgeField& a) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    nlohmann::json h{{"d", a.lattice->dim()}, {"n", a.lattice->side()}, {"kind", "edge"}};
    os << h.dump() << '\n';
    detail::write_doubles_le(os, a.values);
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline NodeField read_node_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    nlohmann::json h = detail::read_header(is);
    if (h.at("kind") != "node") throw std::runtime_error("field file: expected node kind");
    NodeField u(make_lattice(h.at("d").get<int>(), h.at("n").get<int>()));
    detail::read_doubles_le(is, u.values);
    return u;
}

inline EdgeField read_edge_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    nlohmann::json h = detail::read_header(is);
    if (h.at("kind") != "edge") throw std::runtime_error("field file: expected edge kind");
    EdgeField a(make_lattice(h.at("d").get<int>(), h.at("n").get<int>()));
    detail::read_doubles_le(is, a.values);
    return a;
}

}  // namespace latthom
