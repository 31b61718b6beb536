#pragma once
// JSON serialization: scenario files (versioned, "schema": 1), covariance
// and precoder exports, and likelihood surfaces. Validation failures throw
// std::invalid_argument whose message starts with the JSON-pointer path of
// the offending field.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "disac/comms.hpp"
#include "disac/covariance.hpp"
#include "disac/designs.hpp"
#include "disac/mle.hpp"
#include "disac/scenario.hpp"

namespace disac {

inline constexpr int scenario_schema_version = 1;

namespace json_detail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument((path.empty() ? "/" : path) + ": " + what);
}

/// JSON-pointer token escaping (RFC 6901: ~ -> ~0, / -> ~1).
inline std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
        if (c == '~')
            out += "~0";
        else if (c == '/')
            out += "~1";
        else
            out += c;
    }
    return out;
}

inline std::string join(const std::string& path, const std::string& key) {
    return path + "/" + escape(key);
}

inline const json& expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    return j;
}

inline const json& expect_array(const json& j, const std::string& path, std::size_t min_size = 0) {
    if (!j.is_array()) fail(path, "expected an array");
    if (j.size() < min_size)
        fail(path, "expected at least " + std::to_string(min_size) + " entries");
    return j;
}

inline void reject_unknown(const json& j, const std::string& path,
                           std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || item.key() == a;
        if (!ok) fail(join(path, item.key()), "unknown field");
    }
}

inline double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

inline int get_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int>();
}

inline std::uint64_t get_seed(const json& j, const std::string& path) {
    if (!j.is_number_unsigned() && !j.is_number_integer()) fail(path, "expected an integer seed");
    if (j.is_number_integer() && j.get<std::int64_t>() < 0) fail(path, "seed must be >= 0");
    return j.get<std::uint64_t>();
}

/// Optional scalar fields: present -> type-checked overwrite, absent -> keep.
inline void read_number(const json& parent, const std::string& path, const char* key,
                        double& out) {
    if (parent.contains(key)) out = get_number(parent.at(key), join(path, key));
}

inline void read_int(const json& parent, const std::string& path, const char* key, int& out) {
    if (parent.contains(key)) out = get_int(parent.at(key), join(path, key));
}

inline cxd get_complex(const json& j, const std::string& path) {
    expect_array(j, path);
    if (j.size() != 2) fail(path, "expected a [re, im] pair");
    return {get_number(j.at(0), path + "/0"), get_number(j.at(1), path + "/1")};
}

inline json put_complex(cxd v) { return json::array({v.real(), v.imag()}); }

inline Eigen::Vector2d get_point(const json& j, const std::string& path) {
    expect_array(j, path);
    if (j.size() != 2) fail(path, "expected an [x, y] pair");
    return {get_number(j.at(0), path + "/0"), get_number(j.at(1), path + "/1")};
}

inline std::vector<Eigen::Vector2d> get_points(const json& j, const std::string& path,
                                               std::size_t min_size) {
    expect_array(j, path, min_size);
    std::vector<Eigen::Vector2d> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(get_point(j.at(i), path + "/" + std::to_string(i)));
    return out;
}

inline json put_points(const std::vector<Eigen::Vector2d>& pts) {
    json a = json::array();
    for (const auto& p : pts) a.push_back(json::array({p.x(), p.y()}));
    return a;
}

inline MatrixXcd get_cmatrix(const json& j, const std::string& path, Eigen::Index rows,
                             Eigen::Index cols) {
    expect_array(j, path);
    if (rows >= 0 && static_cast<Eigen::Index>(j.size()) != rows)
        fail(path, "expected " + std::to_string(rows) + " rows");
    const Eigen::Index r = static_cast<Eigen::Index>(j.size());
    Eigen::Index c = cols;
    MatrixXcd m;
    for (Eigen::Index i = 0; i < r; ++i) {
        const std::string rp = path + "/" + std::to_string(i);
        const json& row = expect_array(j.at(i), rp);
        if (c < 0) c = static_cast<Eigen::Index>(row.size());
        if (static_cast<Eigen::Index>(row.size()) != c)
            fail(rp, "expected " + std::to_string(c) + " columns");
        if (m.size() == 0) m.resize(r, c);
        for (Eigen::Index q = 0; q < c; ++q)
            m(i, q) = get_complex(row.at(q), rp + "/" + std::to_string(q));
    }
    if (m.size() == 0) m.resize(r, std::max<Eigen::Index>(c, 0));
    return m;
}

inline json put_cmatrix(const MatrixXcd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index q = 0; q < m.cols(); ++q) row.push_back(put_complex(m(i, q)));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json put_cvector(const VectorXcd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(put_complex(v[i]));
    return a;
}

inline VectorXcd get_cvector(const json& j, const std::string& path, Eigen::Index size) {
    expect_array(j, path);
    if (size >= 0 && static_cast<Eigen::Index>(j.size()) != size)
        fail(path, "expected " + std::to_string(size) + " entries");
    VectorXcd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = get_complex(j.at(i), path + "/" + std::to_string(i));
    return v;
}

}  // namespace json_detail

inline nlohmann::json scenario_to_json(const Scenario& s) {
    using nlohmann::json;
    json j;
    j["schema"] = scenario_schema_version;
    j["ofdm"] = {{"tx_antennas", s.ofdm.tx_antennas},
                 {"rx_antennas", s.ofdm.rx_antennas},
                 {"subcarriers", s.ofdm.subcarriers},
                 {"symbols", s.ofdm.symbols},
                 {"bandwidth_hz", s.ofdm.bandwidth_hz},
                 {"wavelength_m", s.ofdm.wavelength_m},
                 {"antenna_spacing_m", s.ofdm.antenna_spacing_m}};
    j["power"] = {{"per_antenna_power", s.power.per_antenna_power},
                  {"comm_noise", s.power.comm_noise},
                  {"sense_noise", s.power.sense_noise},
                  {"sinr_threshold_db", s.power.sinr_threshold_db}};
    json g;
    g["nodes"] = json_detail::put_points(s.geometry.nodes);
    g["targets"] = json_detail::put_points(s.geometry.targets);
    g["users"] = json_detail::put_points(s.geometry.users);
    if (!s.geometry.node_orientations_rad.empty())
        g["node_orientations_rad"] = s.geometry.node_orientations_rad;
    j["geometry"] = std::move(g);
    json amps = nlohmann::json::array();
    for (const auto& a : s.amplitudes) amps.push_back(json_detail::put_cmatrix(a));
    j["amplitudes"] = std::move(amps);
    return j;
}

/// Parses and validates a scenario document. All ofdm/power fields are
/// optional (defaults apply); geometry and amplitudes are required.
/// Amplitudes are either the explicit [node][node][target] tensor of
/// [re, im] pairs or {"average_power_db": v, "seed": s} for a random draw.
inline Scenario scenario_from_json(const nlohmann::json& j) {
    namespace jd = json_detail;
    jd::expect_object(j, "");
    jd::reject_unknown(j, "", {"schema", "ofdm", "power", "geometry", "amplitudes"});
    if (!j.contains("schema")) jd::fail("/schema", "missing required field");
    if (jd::get_int(j.at("schema"), "/schema") != scenario_schema_version)
        jd::fail("/schema", "unsupported version (expected " +
                                std::to_string(scenario_schema_version) + ")");

    Scenario s;
    if (j.contains("ofdm")) {
        const auto& o = jd::expect_object(j.at("ofdm"), "/ofdm");
        jd::reject_unknown(o, "/ofdm",
                           {"tx_antennas", "rx_antennas", "subcarriers", "symbols",
                            "bandwidth_hz", "wavelength_m", "antenna_spacing_m"});
        jd::read_int(o, "/ofdm", "tx_antennas", s.ofdm.tx_antennas);
        jd::read_int(o, "/ofdm", "rx_antennas", s.ofdm.rx_antennas);
        jd::read_int(o, "/ofdm", "subcarriers", s.ofdm.subcarriers);
        jd::read_int(o, "/ofdm", "symbols", s.ofdm.symbols);
        jd::read_number(o, "/ofdm", "bandwidth_hz", s.ofdm.bandwidth_hz);
        jd::read_number(o, "/ofdm", "wavelength_m", s.ofdm.wavelength_m);
        jd::read_number(o, "/ofdm", "antenna_spacing_m", s.ofdm.antenna_spacing_m);
    }
    if (j.contains("power")) {
        const auto& p = jd::expect_object(j.at("power"), "/power");
        jd::reject_unknown(
            p, "/power", {"per_antenna_power", "comm_noise", "sense_noise", "sinr_threshold_db"});
        jd::read_number(p, "/power", "per_antenna_power", s.power.per_antenna_power);
        jd::read_number(p, "/power", "comm_noise", s.power.comm_noise);
        jd::read_number(p, "/power", "sense_noise", s.power.sense_noise);
        jd::read_number(p, "/power", "sinr_threshold_db", s.power.sinr_threshold_db);
    }

    if (!j.contains("geometry")) jd::fail("/geometry", "missing required field");
    const auto& g = jd::expect_object(j.at("geometry"), "/geometry");
    jd::reject_unknown(g, "/geometry", {"nodes", "targets", "users", "node_orientations_rad"});
    if (!g.contains("nodes")) jd::fail("/geometry/nodes", "missing required field");
    if (!g.contains("targets")) jd::fail("/geometry/targets", "missing required field");
    s.geometry.nodes = jd::get_points(g.at("nodes"), "/geometry/nodes", 1);
    s.geometry.targets = jd::get_points(g.at("targets"), "/geometry/targets", 1);
    if (g.contains("users")) s.geometry.users = jd::get_points(g.at("users"), "/geometry/users", 0);
    if (g.contains("node_orientations_rad")) {
        const auto& o = jd::expect_array(g.at("node_orientations_rad"),
                                         "/geometry/node_orientations_rad");
        for (std::size_t i = 0; i < o.size(); ++i)
            s.geometry.node_orientations_rad.push_back(jd::get_number(
                o.at(i), "/geometry/node_orientations_rad/" + std::to_string(i)));
    }

    if (!j.contains("amplitudes")) jd::fail("/amplitudes", "missing required field");
    const auto& a = j.at("amplitudes");
    const int n = s.nodes(), k = s.targets();
    if (a.is_object()) {
        jd::reject_unknown(a, "/amplitudes", {"average_power_db", "seed"});
        if (!a.contains("average_power_db"))
            jd::fail("/amplitudes/average_power_db", "missing required field");
        if (!a.contains("seed")) jd::fail("/amplitudes/seed", "missing required field");
        const double db = jd::get_number(a.at("average_power_db"), "/amplitudes/average_power_db");
        const std::uint64_t seed = jd::get_seed(a.at("seed"), "/amplitudes/seed");
        s.amplitudes = random_amplitudes(n, k, db, seed);
    } else if (a.is_array()) {
        if (static_cast<int>(a.size()) != n)
            jd::fail("/amplitudes", "expected one matrix per receiving node (" +
                                        std::to_string(n) + ")");
        s.amplitudes.reserve(a.size());
        for (int i = 0; i < n; ++i)
            s.amplitudes.push_back(
                jd::get_cmatrix(a.at(i), "/amplitudes/" + std::to_string(i), n, k));
    } else {
        jd::fail("/amplitudes", "expected an array or {average_power_db, seed}");
    }

    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        jd::fail("", e.what());
    }
    return s;
}

inline nlohmann::json covariances_to_json(const CovarianceSet& cov) {
    using nlohmann::json;
    json j;
    j["nodes"] = cov.nodes();
    j["tx_antennas"] = cov.tx_antennas();
    j["subcarriers"] = cov.subcarriers();
    j["users"] = cov.users();
    json aug = json::array();
    for (int l = 0; l < cov.subcarriers(); ++l)
        aug.push_back(json_detail::put_cmatrix(cov.augmented(l)));
    j["augmented"] = std::move(aug);
    json comm = json::array();
    for (int n = 0; n < cov.nodes(); ++n) {
        json per_u = json::array();
        for (int u = 0; u < cov.users(); ++u) {
            json per_l = json::array();
            for (int l = 0; l < cov.subcarriers(); ++l)
                per_l.push_back(json_detail::put_cmatrix(cov.comm(n, u, l)));
            per_u.push_back(std::move(per_l));
        }
        comm.push_back(std::move(per_u));
    }
    j["comm"] = std::move(comm);
    return j;
}

/// Precoder export: complex entries as [re, im], indexed by family, node,
/// user (communication beams) or sensing factor, and subcarrier.
inline nlohmann::json precoders_to_json(const PrecoderSet& p, DesignFamily family) {
    using nlohmann::json;
    json j;
    j["family"] = to_string(family);
    j["nodes"] = p.nodes;
    j["users"] = p.users;
    j["subcarriers"] = p.subcarriers;
    j["tx_antennas"] = p.tx_antennas;
    json comm = json::array();
    for (int n = 0; n < p.nodes; ++n) {
        json per_u = json::array();
        for (int u = 0; u < p.users; ++u) {
            json per_l = json::array();
            for (int l = 0; l < p.subcarriers; ++l)
                per_l.push_back(json_detail::put_cvector(p.w_comm(n, u, l)));
            per_u.push_back(std::move(per_l));
        }
        comm.push_back(std::move(per_u));
    }
    j["comm"] = std::move(comm);
    json sense = json::array();
    for (int n = 0; n < p.nodes; ++n) {
        json per_l = json::array();
        for (int l = 0; l < p.subcarriers; ++l)
            per_l.push_back(json_detail::put_cmatrix(p.w_sense(n, l)));
        sense.push_back(std::move(per_l));
    }
    j["sense"] = std::move(sense);
    return j;
}

inline PrecoderSet precoders_from_json(const nlohmann::json& j) {
    namespace jd = json_detail;
    jd::expect_object(j, "");
    jd::reject_unknown(j, "",
                       {"family", "nodes", "users", "subcarriers", "tx_antennas", "comm", "sense"});
    for (const char* key : {"nodes", "users", "subcarriers", "tx_antennas", "comm", "sense"})
        if (!j.contains(key)) jd::fail(jd::join("", key), "missing required field");
    const int n = jd::get_int(j.at("nodes"), "/nodes");
    const int u = jd::get_int(j.at("users"), "/users");
    const int l = jd::get_int(j.at("subcarriers"), "/subcarriers");
    const int m = jd::get_int(j.at("tx_antennas"), "/tx_antennas");
    if (n < 1 || u < 0 || l < 1 || m < 1) jd::fail("", "non-positive dimension");
    PrecoderSet p(n, u, l, m);
    const auto& comm = jd::expect_array(j.at("comm"), "/comm", n);
    for (int i = 0; i < n; ++i) {
        const std::string np = "/comm/" + std::to_string(i);
        const auto& per_u = jd::expect_array(comm.at(i), np, u);
        for (int q = 0; q < u; ++q) {
            const std::string up = np + "/" + std::to_string(q);
            const auto& per_l = jd::expect_array(per_u.at(q), up, l);
            for (int s = 0; s < l; ++s)
                p.w_comm(i, q, s) =
                    jd::get_cvector(per_l.at(s), up + "/" + std::to_string(s), m);
        }
    }
    const auto& sense = jd::expect_array(j.at("sense"), "/sense", n);
    for (int i = 0; i < n; ++i) {
        const std::string np = "/sense/" + std::to_string(i);
        const auto& per_l = jd::expect_array(sense.at(i), np, l);
        for (int s = 0; s < l; ++s) {
            MatrixXcd w = jd::get_cmatrix(per_l.at(s), np + "/" + std::to_string(s), -1, -1);
            if (w.rows() != 0 && w.rows() != m)
                jd::fail(np + "/" + std::to_string(s),
                         "expected " + std::to_string(m) + " rows");
            if (w.rows() == 0) w.resize(m, 0);
            p.w_sense(i, s) = std::move(w);
        }
    }
    return p;
}

/// Coarse likelihood surface and estimates from a localization run. The
/// surface grid is row-major with x fastest: index = iy * nx + ix.
inline nlohmann::json surface_to_json(const MleResult& r) {
    using nlohmann::json;
    json j;
    j["positions"] = json::array();
    for (const auto& p : r.positions) j["positions"].push_back(json::array({p.x(), p.y()}));
    j["nll"] = r.nll;
    if (!r.coarse_nll.empty()) {
        j["grid"] = {{"nx", r.grid_nx},
                     {"ny", r.grid_ny},
                     {"x0_m", r.grid_x0},
                     {"y0_m", r.grid_y0},
                     {"cell_m", r.grid_cell}};
        j["coarse_nll"] = r.coarse_nll;
    }
    return j;
}

}  // namespace disac
