#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "qlb/error.hpp"
#include "qlb/grid.hpp"
#include "qlb/kernels.hpp"
#include "qlb/serialize.hpp"

namespace qlb {

// Binary container: 8-byte magic, u32 version, u64 header length, JSON
// header, raw little-endian f64 payload.  The header carries section
// descriptors and an FNV-1a 64 checksum of the payload bytes, so any
// truncation or bit corruption is detected on load.

inline constexpr char k_container_magic[8] = {'Q', 'L', 'B', 'C', 'N', 'T', 'R', '\n'};
inline constexpr std::uint32_t k_container_version = 1;

namespace detail {

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& buf, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(buf, v);
}

inline std::uint32_t get_u32(const std::string& buf, std::size_t& pos) {
    QLB_REQUIRE(pos + 4 <= buf.size(), "container truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

inline std::uint64_t get_u64(const std::string& buf, std::size_t& pos) {
    QLB_REQUIRE(pos + 8 <= buf.size(), "container truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

inline double get_f64(const std::string& buf, std::size_t& pos) {
    const std::uint64_t v = get_u64(buf, pos);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

inline std::string checksum_string(const std::string& payload) {
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(payload)));
    return std::string("fnv1a64:") + hex;
}

inline void write_container(const std::string& path, const Json& header_meta,
                            const std::string& payload) {
    Json header = header_meta;
    header["checksum"] = checksum_string(payload);
    const std::string header_text = header.dump();
    std::string out;
    out.append(k_container_magic, 8);
    put_u32(out, k_container_version);
    put_u64(out, header_text.size());
    out += header_text;
    out += payload;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path);
}

struct Container {
    Json header;
    std::string payload;
};

inline Container read_container(const std::string& path, const std::string& expected_type) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    QLB_REQUIRE(bytes.size() >= 20, "container too short");
    if (std::memcmp(bytes.data(), k_container_magic, 8) != 0)
        throw IoError("bad container magic: " + path);
    std::size_t pos = 8;
    const std::uint32_t version = get_u32(bytes, pos);
    if (version != k_container_version)
        throw IoError("unsupported container version in " + path);
    const std::uint64_t header_len = get_u64(bytes, pos);
    if (pos + header_len > bytes.size()) throw IoError("container header truncated: " + path);
    Container c;
    try {
        c.header = Json::parse(bytes.substr(pos, header_len));
    } catch (const std::exception& e) {
        throw IoError(std::string("container header is not valid JSON: ") + e.what());
    }
    c.payload = bytes.substr(pos + header_len);
    const std::string type = c.header.value("type", "");
    if (type != expected_type)
        throw IoError("container type is '" + type + "', expected '" + expected_type + "'");
    const std::string stored = c.header.value("checksum", "");
    const std::string actual = checksum_string(c.payload);
    if (stored != actual)
        throw IoError("checksum mismatch in " + path + " (stored " + stored + ", computed " +
                      actual + ")");
    return c;
}

} // namespace detail

/// Write a kernel table.  Payload layout: the m_in block in (P, Q)
/// row-major order as re/im pairs, then self terms, out rates, and
/// escape rates per node.
inline void save_table(const KernelTable& table, const std::string& path) {
    const std::size_t np = table.grid.size();
    const std::size_t nq = table.lattice.size();
    std::string payload;
    payload.reserve((2 * np * nq + 2 * np + 2 * np) * 8);
    for (std::size_t pi = 0; pi < np; ++pi)
        for (std::size_t qi = 0; qi < nq; ++qi) {
            const std::size_t k = table.entry_index(qi, pi);
            detail::put_f64(payload, table.re[k]);
            detail::put_f64(payload, table.real_valued ? 0.0 : table.im[k]);
        }
    for (std::size_t pi = 0; pi < np; ++pi) {
        detail::put_f64(payload, table.self_re[pi]);
        detail::put_f64(payload, table.real_valued ? 0.0 : table.self_im[pi]);
    }
    for (std::size_t pi = 0; pi < np; ++pi) detail::put_f64(payload, table.out_rate[pi]);
    for (std::size_t pi = 0; pi < np; ++pi) detail::put_f64(payload, table.escape_rate[pi]);

    Json header;
    header["format"] = "qlb-container";
    header["version"] = k_container_version;
    header["type"] = "kernel_table";
    header["grid"] = to_json(table.grid);
    header["delta"] = to_json(table.delta);
    header["q_max"] = table.q_max;
    header["quadrature"] = to_json(table.quad);
    header["gas"] = to_json(table.gas);
    header["tracer"] = to_json(table.tracer);
    header["model"] = to_json(table.model);
    header["lattice_size"] = nq;
    header["real_valued"] = table.real_valued;
    header["sections"] = Json::array({
        Json{{"name", "m_in"}, {"dtype", "c128"}, {"count", np * nq}},
        Json{{"name", "self"}, {"dtype", "c128"}, {"count", np}},
        Json{{"name", "out_rate"}, {"dtype", "f64"}, {"count", np}},
        Json{{"name", "escape_rate"}, {"dtype", "f64"}, {"count", np}},
    });
    detail::write_container(path, header, payload);
}

/// Read a kernel table written by save_table, re-deriving the transfer
/// lattice and validating the payload against the header.
inline KernelTable load_table(const std::string& path) {
    const detail::Container c = detail::read_container(path, "kernel_table");
    KernelTable table;
    try {
        table.grid = grid_from_json(c.header.at("grid"));
        table.delta = offset_from_json(c.header.at("delta"));
        table.q_max = c.header.at("q_max").get<double>();
        table.quad = quadrature_from_json(c.header.at("quadrature"));
        table.gas = gas_from_json(c.header.at("gas"));
        table.tracer = tracer_from_json(c.header.at("tracer"));
        table.model = model_from_json(c.header.at("model"));
        table.real_valued = c.header.at("real_valued").get<bool>();
    } catch (const Json::exception& e) {
        throw IoError(std::string("kernel table header incomplete: ") + e.what());
    }
    table.lattice = table.grid.transfer_lattice(table.q_max);
    const std::size_t np = table.grid.size();
    const std::size_t nq = table.lattice.size();
    if (c.header.at("lattice_size").get<std::size_t>() != nq)
        throw IoError("kernel table lattice size does not match its grid and q_max");
    const std::size_t expected_bytes = (2 * np * nq + 2 * np + 2 * np) * 8;
    if (c.payload.size() != expected_bytes)
        throw IoError("kernel table payload has wrong size");

    table.re.assign(nq * np, 0.0);
    if (!table.real_valued) table.im.assign(nq * np, 0.0);
    table.self_re.assign(np, 0.0);
    if (!table.real_valued) table.self_im.assign(np, 0.0);
    table.out_rate.assign(np, 0.0);
    table.escape_rate.assign(np, 0.0);

    std::size_t pos = 0;
    for (std::size_t pi = 0; pi < np; ++pi)
        for (std::size_t qi = 0; qi < nq; ++qi) {
            const double re = detail::get_f64(c.payload, pos);
            const double im = detail::get_f64(c.payload, pos);
            const std::size_t k = table.entry_index(qi, pi);
            table.re[k] = re;
            if (!table.real_valued) {
                table.im[k] = im;
            } else if (im != 0.0) {
                throw IoError("kernel table flagged real has nonzero imaginary entries");
            }
        }
    for (std::size_t pi = 0; pi < np; ++pi) {
        const double re = detail::get_f64(c.payload, pos);
        const double im = detail::get_f64(c.payload, pos);
        table.self_re[pi] = re;
        if (!table.real_valued) table.self_im[pi] = im;
    }
    for (std::size_t pi = 0; pi < np; ++pi) table.out_rate[pi] = detail::get_f64(c.payload, pos);
    for (std::size_t pi = 0; pi < np; ++pi)
        table.escape_rate[pi] = detail::get_f64(c.payload, pos);
    return table;
}

/// Write one sector state (field over the grid plus its time stamp).
inline void save_state(const SectorState& state, const std::string& path) {
    std::string payload;
    payload.reserve(state.field.size() * 16);
    for (const Complex& v : state.field) {
        detail::put_f64(payload, v.real());
        detail::put_f64(payload, v.imag());
    }
    Json header;
    header["format"] = "qlb-container";
    header["version"] = k_container_version;
    header["type"] = "sector_state";
    header["grid"] = to_json(state.grid);
    header["delta"] = to_json(state.delta);
    header["time"] = state.time;
    header["sections"] =
        Json::array({Json{{"name", "field"}, {"dtype", "c128"}, {"count", state.field.size()}}});
    detail::write_container(path, header, payload);
}

inline SectorState load_state(const std::string& path) {
    const detail::Container c = detail::read_container(path, "sector_state");
    SectorState state;
    try {
        state.grid = grid_from_json(c.header.at("grid"));
        state.delta = offset_from_json(c.header.at("delta"));
        state.time = c.header.at("time").get<double>();
    } catch (const Json::exception& e) {
        throw IoError(std::string("sector state header incomplete: ") + e.what());
    }
    const std::size_t np = state.grid.size();
    if (c.payload.size() != np * 16) throw IoError("sector state payload has wrong size");
    state.field.resize(np);
    std::size_t pos = 0;
    for (std::size_t p = 0; p < np; ++p) {
        const double re = detail::get_f64(c.payload, pos);
        const double im = detail::get_f64(c.payload, pos);
        state.field[p] = Complex(re, im);
    }
    return state;
}

/// True if `path` holds a loadable kernel table whose metadata matches
/// the given build inputs exactly; used to skip redundant tabulation.
inline bool table_file_matches(const std::string& path, const MomentumGrid& grid,
                               const Offset& delta, const GasSpec& gas, const TracerSpec& tracer,
                               const ScatteringModel& model, const QuadratureSpec& quad,
                               double q_max) {
    try {
        const KernelTable t = load_table(path);
        return t.grid == grid && t.delta == delta && t.q_max == q_max && t.quad == quad &&
               to_json(t.gas) == to_json(gas) && to_json(t.tracer) == to_json(tracer) &&
               to_json(t.model) == to_json(model);
    } catch (const Error&) {
        return false;
    }
}

} // namespace qlb
