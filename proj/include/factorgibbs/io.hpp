#pragma once

/*
 * File formats.
 *
 * System JSON:
 *   {
 *     "alphabet": 3 | ["a","b","c"],        // size, or per-symbol names
 *     "transitions": [[1,1,0], ...],        // 0/1 matrix, row = from, col = to
 *     "labels": ["r","r","b"]               // optional one-block factor map
 *   }
 * Image symbols are numbered by first appearance of their label.
 *
 * Potential JSON:
 *   { "layers": [ { "depth": 2, "values": [ ... ] | "table": {"01": v, ...} } ] }
 * A "values" array lists one number per admissible word of that depth in
 * lexicographic order; a "table" object keys them by the word spelled with
 * the domain symbol names (concatenated when every name is one character,
 * comma-separated otherwise) and must cover the admissible words exactly.
 *
 * Doubles in CSV output are printed with %.17g (shortest form that exactly
 * round-trips is used for JSON by the serializer itself).
 */

#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "factorgibbs/potential.hpp"
#include "factorgibbs/sft.hpp"
#include "factorgibbs/version.hpp"

namespace factorgibbs {

using ordered_json = nlohmann::ordered_json;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ── words as text ──────────────────────────────────────────────────────────

inline bool single_char_names(const std::vector<std::string>& names) {
    for (const auto& n : names)
        if (n.size() != 1) return false;
    return true;
}

inline std::string format_word(const Word& w, const std::vector<std::string>& names) {
    const bool tight = single_char_names(names);
    std::string out;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!tight && i > 0) out += ',';
        if (w[i] < 0 || w[i] >= static_cast<int>(names.size()))
            throw std::invalid_argument("format_word: symbol out of range");
        out += names[static_cast<std::size_t>(w[i])];
    }
    return out;
}

inline Word parse_word(const std::string& text, const std::vector<std::string>& names) {
    auto lookup = [&](const std::string& tok) {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == tok) return static_cast<int>(i);
        throw ParseError("unknown symbol '" + tok + "' in word '" + text + "'");
    };
    Word w;
    if (single_char_names(names) && text.find(',') == std::string::npos) {
        for (char c : text) w.push_back(lookup(std::string(1, c)));
    } else {
        std::stringstream ss(text);
        std::string tok;
        while (std::getline(ss, tok, ',')) w.push_back(lookup(tok));
    }
    if (w.empty()) throw ParseError("empty word");
    return w;
}

inline std::vector<std::string> default_names(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(std::to_string(i));
    return out;
}

// ── loaders ────────────────────────────────────────────────────────────────

struct SystemInput {
    Sft sft;
    FactorMap fmap;
    std::vector<std::string> symbol_names;
    std::vector<std::string> image_names;
    bool has_factor = false;
};

inline ordered_json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return j;
}

inline SystemInput load_system(const ordered_json& j) {
    if (!j.is_object()) throw ParseError("system: expected an object");
    if (!j.contains("transitions")) throw ParseError("system: missing 'transitions'");
    std::vector<std::string> names;
    if (j.contains("alphabet")) {
        const auto& a = j.at("alphabet");
        if (a.is_number_integer()) {
            int n = a.get<int>();
            if (n < 1) throw ParseError("system: alphabet size must be >= 1");
            names = default_names(n);
        } else if (a.is_array()) {
            for (const auto& e : a) {
                if (!e.is_string()) throw ParseError("system: alphabet names must be strings");
                names.push_back(e.get<std::string>());
            }
        } else {
            throw ParseError("system: 'alphabet' must be a size or an array of names");
        }
    }
    const auto& t = j.at("transitions");
    if (!t.is_array() || t.empty()) throw ParseError("system: 'transitions' must be a matrix");
    if (names.empty()) names = default_names(static_cast<int>(t.size()));
    if (names.size() != t.size())
        throw ParseError("system: alphabet and transition matrix sizes differ");
    std::vector<std::vector<int>> rows;
    for (const auto& row : t) {
        if (!row.is_array() || row.size() != t.size())
            throw ParseError("system: 'transitions' must be square");
        std::vector<int> r;
        for (const auto& e : row) {
            if (!e.is_number_integer()) throw ParseError("system: transitions must be 0/1");
            int v = e.get<int>();
            if (v != 0 && v != 1) throw ParseError("system: transitions must be 0/1");
            r.push_back(v);
        }
        rows.push_back(std::move(r));
    }
    Sft sft(rows);

    std::vector<std::string> image_names;
    std::vector<int> labels;
    bool has_factor = j.contains("labels");
    if (has_factor) {
        const auto& l = j.at("labels");
        if (!l.is_array() || l.size() != names.size())
            throw ParseError("system: 'labels' needs one entry per symbol");
        for (const auto& e : l) {
            std::string name = e.is_string() ? e.get<std::string>() : e.dump();
            int id = -1;
            for (std::size_t k = 0; k < image_names.size(); ++k)
                if (image_names[k] == name) id = static_cast<int>(k);
            if (id < 0) {
                id = static_cast<int>(image_names.size());
                image_names.push_back(name);
            }
            labels.push_back(id);
        }
    } else {
        for (std::size_t i = 0; i < names.size(); ++i) labels.push_back(static_cast<int>(i));
        image_names = names;
    }
    FactorMap fmap(labels, static_cast<int>(image_names.size()));
    return {std::move(sft), std::move(fmap), std::move(names), std::move(image_names),
            has_factor};
}

inline Potential load_potential(const Sft& sft, const std::vector<std::string>& names,
                                const ordered_json& j) {
    if (!j.is_object() || !j.contains("layers"))
        throw ParseError("potential: expected an object with 'layers'");
    const auto& ls = j.at("layers");
    if (!ls.is_array() || ls.empty()) throw ParseError("potential: 'layers' must be nonempty");
    std::vector<PotentialLayer> layers;
    for (const auto& l : ls) {
        if (!l.is_object() || !l.contains("depth"))
            throw ParseError("potential: each layer needs a 'depth'");
        PotentialLayer layer;
        layer.depth = l.at("depth").get<int>();
        if (layer.depth < 1) throw ParseError("potential: layer depth must be >= 1");
        WordIndex ix(sft, layer.depth);
        if (l.contains("values")) {
            const auto& v = l.at("values");
            if (!v.is_array() || static_cast<int>(v.size()) != ix.size())
                throw ParseError("potential: depth " + std::to_string(layer.depth) + " needs " +
                                 std::to_string(ix.size()) + " values in lexicographic order");
            for (const auto& e : v) {
                if (!e.is_number()) throw ParseError("potential: values must be numbers");
                layer.values.push_back(e.get<double>());
            }
        } else if (l.contains("table")) {
            const auto& tbl = l.at("table");
            if (!tbl.is_object()) throw ParseError("potential: 'table' must be an object");
            layer.values.assign(static_cast<std::size_t>(ix.size()),
                                std::numeric_limits<double>::quiet_NaN());
            int filled = 0;
            for (auto it = tbl.begin(); it != tbl.end(); ++it) {
                Word w = parse_word(it.key(), names);
                if (static_cast<int>(w.size()) != layer.depth)
                    throw ParseError("potential: key '" + it.key() + "' is not a depth-" +
                                     std::to_string(layer.depth) + " word");
                if (!is_admissible(sft, w))
                    throw ParseError("potential: key '" + it.key() + "' is inadmissible");
                layer.values[static_cast<std::size_t>(ix.rank(w))] = it.value().get<double>();
                ++filled;
            }
            if (filled != ix.size())
                throw ParseError("potential: table covers " + std::to_string(filled) + " of " +
                                 std::to_string(ix.size()) + " admissible words");
        } else {
            throw ParseError("potential: each layer needs 'values' or 'table'");
        }
        layers.push_back(std::move(layer));
    }
    return Potential(sft, std::move(layers));
}

// ── emitters ───────────────────────────────────────────────────────────────

inline ordered_json result_envelope(const std::string& command) {
    ordered_json j;
    j["version"] = version();
    j["command"] = command;
    j["options"] = ordered_json::object();
    return j;
}

inline ordered_json word_json(const Word& w, const std::vector<std::string>& names) {
    return format_word(w, names);
}

template <typename Vec>
ordered_json vector_json(const Vec& v) {
    ordered_json a = ordered_json::array();
    for (int i = 0; i < static_cast<int>(v.size()); ++i) a.push_back(static_cast<double>(v[i]));
    return a;
}

inline ordered_json matrix_json(const Eigen::MatrixXd& m) {
    ordered_json rows = ordered_json::array();
    for (int r = 0; r < m.rows(); ++r) {
        ordered_json row = ordered_json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

// One CSV cell: doubles through %.17g, strings quoted when they need it.
inline std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void write_csv(std::ostream& os, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    for (std::size_t i = 0; i < header.size(); ++i)
        os << (i ? "," : "") << csv_cell(header[i]);
    os << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << (i ? "," : "") << csv_cell(row[i]);
        os << "\n";
    }
}

} // namespace factorgibbs
