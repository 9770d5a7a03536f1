#pragma once

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iosfwd>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mft/numerics.hpp"

namespace mft::io {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_profile_csv(std::ostream& os, const Profile& f) {
    os << "x,value\n";
    for (std::size_t i = 0; i < f.size(); ++i) os << fmt17(f.grid().x(i)) << ',' << fmt17(f[i]) << '\n';
}

inline void write_path_csv(std::ostream& os, const Path& p) {
    os << "t,x,value\n";
    for (std::size_t k = 0; k < p.size(); ++k) {
        for (std::size_t i = 0; i < p.grid.size(); ++i) {
            os << fmt17(p.times[k]) << ',' << fmt17(p.grid.x(i)) << ',' << fmt17(p.frames[k][i]) << '\n';
        }
    }
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& field, int line) {
    const std::string t = trim(field);
    if (t.empty()) throw ValidationError("line " + std::to_string(line) + ": empty field");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
        throw ValidationError("line " + std::to_string(line) + ": cannot parse number '" + t + "'");
    }
    return v;
}

}  // namespace detail

/// Raw `x,value` rows of a profile CSV; errors cite the offending line.
struct ProfileRows {
    std::vector<double> x;
    std::vector<double> value;
};

inline ProfileRows read_profile_rows(std::istream& is) {
    ProfileRows rows;
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (!header) {
            if (t != "x,value") {
                throw ValidationError("line " + std::to_string(lineno) + ": expected header 'x,value'");
            }
            header = true;
            continue;
        }
        const auto comma = t.find(',');
        if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos) {
            throw ValidationError("line " + std::to_string(lineno) + ": expected two comma-separated fields");
        }
        const double x = detail::parse_real(t.substr(0, comma), lineno);
        const double v = detail::parse_real(t.substr(comma + 1), lineno);
        if (!rows.x.empty() && !(x > rows.x.back())) {
            throw ValidationError("line " + std::to_string(lineno) + ": x not strictly increasing");
        }
        rows.x.push_back(x);
        rows.value.push_back(v);
    }
    if (!header) throw ValidationError("line 1: missing header 'x,value'");
    if (rows.x.size() < 3) throw ValidationError("profile csv: need at least 3 rows");
    if (std::abs(rows.x.front()) > 1e-12 || std::abs(rows.x.back() - 1.0) > 1e-12) {
        throw ValidationError("profile csv: x must span [0,1]");
    }
    return rows;
}

/// Samples the CSV profile onto `grid`, interpolating linearly when the nodes differ.
inline Profile read_profile_csv(std::istream& is, const Grid& grid) {
    const ProfileRows rows = read_profile_rows(is);
    std::vector<double> v(grid.size());
    const bool same = rows.x.size() == grid.size();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (same && std::abs(rows.x[i] - grid.x(i)) < 1e-12) {
            v[i] = rows.value[i];
        } else {
            v[i] = interpolate(rows.x, rows.value, grid.x(i));
        }
    }
    return Profile(grid, std::move(v));
}

inline Profile read_profile_csv(const std::string& path, const Grid& grid) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return read_profile_csv(in, grid);
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << content;
    if (!out) throw ValidationError("write failed for '" + path + "'");
}

}  // namespace mft::io
