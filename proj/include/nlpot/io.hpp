#pragma once

// Text formats used by the command-line tool.
//
// Config:  `key = value` per line, `#` starts a comment.
// Measure: one record per line,
//   atom    x_1 .. x_N mass
//   uniform lo_1 .. lo_N hi_1 .. hi_N rho
//   density lo_1 .. lo_N hi_1 .. hi_N n_1 .. n_N file.csv   (cell values, axis 0 fastest)
//   label   name

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlpot/field.hpp"
#include "nlpot/measure.hpp"
#include "nlpot/report.hpp"

namespace nlpot::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Raised for malformed input; maps to exit status 2.
struct ConfigError : InvalidArgument {
    using InvalidArgument::InvalidArgument;
};

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

inline double parse_double(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError(what + ": '" + text + "' is not a number");
    }
    if (used != text.size()) throw ConfigError(what + ": '" + text + "' is not a number");
    return v;
}

inline long long parse_int(const std::string& text, const std::string& what) {
    const double v = parse_double(text, what);
    if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError(what + ": '" + text + "' is not an integer");
    return static_cast<long long>(v);
}

class Config {
public:
    Config() = default;

    static Config parse(std::istream& in, const std::string& source = "config") {
        Config c;
        std::string line;
        int lineNo = 0;
        while (std::getline(in, line)) {
            ++lineNo;
            if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(source + ":" + std::to_string(lineNo) + ": expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineNo) + ": empty key");
            if (c.values_.count(key)) throw ConfigError(source + ":" + std::to_string(lineNo) + ": duplicate key '" + key + "'");
            c.values_[key] = value;
        }
        return c;
    }

    static Config load(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path.string());
        Config c = parse(in, path.string());
        c.dir_ = path.parent_path();
        return c;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string str(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
        return it->second;
    }
    std::string str(const std::string& key, const std::string& fallback) const { return has(key) ? str(key) : fallback; }

    double num(const std::string& key) const { return parse_double(str(key), key); }
    double num(const std::string& key, double fallback) const { return has(key) ? num(key) : fallback; }
    long long integer(const std::string& key) const { return parse_int(str(key), key); }
    long long integer(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }

    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = str(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError(key + ": expected true or false, got '" + v + "'");
    }

    std::vector<double> list(const std::string& key) const {
        std::string v = str(key);
        for (auto& ch : v)
            if (ch == ',') ch = ' ';
        std::vector<double> out;
        for (const auto& w : split_ws(v)) out.push_back(parse_double(w, key));
        if (out.empty()) throw ConfigError(key + ": empty list");
        return out;
    }

    /// Paths in a config are relative to the config file.
    fs::path path(const std::string& key) const {
        fs::path p = str(key);
        return p.is_absolute() ? p : dir_ / p;
    }

    /// Keys that were set, for echoing into summaries.
    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    fs::path dir_;
};

inline std::vector<double> read_values(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::vector<double> out;
    std::string line;
    while (std::getline(in, line)) {
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        for (auto& ch : line)
            if (ch == ',' || ch == ';') ch = ' ';
        for (const auto& w : split_ws(line)) out.push_back(parse_double(w, path.string()));
    }
    return out;
}

inline RadonMeasure parse_measure(std::istream& in, int dim, const fs::path& baseDir = {},
                                  const std::string& source = "measure") {
    std::vector<Atom> atoms;
    std::vector<GridDensity> layers;
    std::string label = "measure";
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        const auto w = split_ws(line);
        if (w.empty()) continue;
        const std::string where = source + ":" + std::to_string(lineNo);
        auto numbers = [&](std::size_t from, std::size_t count) {
            if (w.size() < from + count) throw ConfigError(where + ": too few fields for '" + w[0] + "'");
            std::vector<double> v;
            for (std::size_t k = from; k < from + count; ++k) v.push_back(parse_double(w[k], where));
            return v;
        };
        auto box_at = [&](const std::vector<double>& v) {
            Point lo(dim), hi(dim);
            for (int a = 0; a < dim; ++a) {
                lo[a] = v[a];
                hi[a] = v[dim + a];
            }
            return Box(lo, hi);
        };
        try {
            if (w[0] == "atom") {
                if (w.size() != static_cast<std::size_t>(dim) + 2) throw ConfigError(where + ": atom needs N coordinates and a mass");
                const auto v = numbers(1, dim + 1);
                Point x(dim);
                for (int a = 0; a < dim; ++a) x[a] = v[a];
                atoms.push_back({x, v[dim]});
            } else if (w[0] == "uniform") {
                if (w.size() != static_cast<std::size_t>(2 * dim) + 2) throw ConfigError(where + ": uniform needs lo, hi and rho");
                const auto v = numbers(1, 2 * dim + 1);
                layers.push_back(GridDensity(Grid::uniform(box_at(v), 1), {v[2 * dim]}));
            } else if (w[0] == "density") {
                if (w.size() != static_cast<std::size_t>(3 * dim) + 2) throw ConfigError(where + ": density needs lo, hi, cells and a file");
                const auto v = numbers(1, 3 * dim);
                Index cells{};
                for (int a = 0; a < dim; ++a) {
                    const double c = v[2 * dim + a];
                    if (c < 1 || c != std::floor(c)) throw ConfigError(where + ": cell counts must be positive integers");
                    cells[a] = static_cast<int>(c);
                }
                fs::path file = w.back();
                if (!file.is_absolute()) file = baseDir / file;
                Grid g(box_at(v), cells);
                auto values = read_values(file);
                if (values.size() != g.cell_count())
                    throw ConfigError(where + ": " + file.string() + " has " + std::to_string(values.size()) +
                                      " values, expected " + std::to_string(g.cell_count()));
                layers.push_back(GridDensity(g, std::move(values)));
            } else if (w[0] == "label") {
                label = w.size() > 1 ? w[1] : label;
            } else {
                throw ConfigError(where + ": unknown record '" + w[0] + "'");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const InvalidArgument& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    return RadonMeasure(dim, std::move(atoms), std::move(layers), label);
}

inline RadonMeasure load_measure(const fs::path& path, int dim) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open measure file " + path.string());
    return parse_measure(in, dim, path.parent_path(), path.string());
}

/// %.17g, with `inf`, `-inf` and `nan` spelled out.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// JSON has no infinities: non-finite values become the strings above.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(format_number(v)); }

inline void write_field_csv(const ScalarField& f, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    const int n = f.grid.dim();
    for (int a = 0; a < n; ++a) out << "i" << a << ",";
    for (int a = 0; a < n; ++a) out << "x" << a << ",";
    out << "value\n";
    for (std::size_t k = 0; k < f.size(); ++k) {
        const Index i = f.grid.node_index(k);
        const Point x = f.grid.node(i);
        for (int a = 0; a < n; ++a) out << i[a] << ",";
        for (int a = 0; a < n; ++a) out << format_number(x[a]) << ",";
        out << format_number(f[k]) << "\n";
    }
}

/// Reads back a field written by write_field_csv on the given grid.
inline ScalarField read_field_csv(const fs::path& path, const Grid& g) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    ScalarField f(g);
    std::string line;
    std::getline(in, line);
    const int n = g.dim();
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        if (cols.size() != static_cast<std::size_t>(2 * n + 1)) throw ConfigError(path.string() + ": bad row");
        Index i{};
        for (int a = 0; a < n; ++a) i[a] = static_cast<int>(parse_int(cols[a], path.string()));
        const std::string& v = cols.back();
        f[g.node_linear(i)] = v == "inf" ? kInf : v == "-inf" ? -kInf : parse_double(v, path.string());
        ++rows;
    }
    if (rows != g.node_count()) throw ConfigError(path.string() + ": wrong number of rows");
    return f;
}

inline json to_json(const VerificationReport& r) {
    json computed = json::object();
    for (const auto& v : r.computed) computed[v.name] = number(v.value);
    return json{{"lemma", r.lemmaName},     {"inputs", r.inputs},        {"computed", computed},
                {"bound_name", r.boundName}, {"bound", number(r.bound)}, {"tolerance", number(r.tolerance)},
                {"passed", r.passed},        {"margin", number(r.margin)}, {"notes", r.notes}};
}

inline void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

}  // namespace nlpot::io
