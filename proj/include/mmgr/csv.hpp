#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mmgr/error.hpp"
#include "mmgr/fusion.hpp"
#include "mmgr/metrics.hpp"
#include "mmgr/tensor.hpp"

namespace mmgr {

// All CSVs use '\n' line endings, '.' decimals, no locale.

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string format_score(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace detail

// --- score CSV: header "id,c0,...,c{l-1}" -------------------------------------

template <typename T>
void write_score_csv(const std::filesystem::path& path, const StreamScore<T>& s) {
    s.check();
    if (s.scores.empty()) throw ParameterError("write_score_csv: no scores");
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    const std::size_t l = s.scores[0].size();
    f << "id";
    for (std::size_t c = 0; c < l; ++c) f << ",c" << c;
    f << "\n";
    for (std::size_t i = 0; i < s.ids.size(); ++i) {
        f << s.ids[i];
        for (std::size_t c = 0; c < l; ++c)
            f << "," << detail::format_score((double)s.scores[i][c]);
        f << "\n";
    }
}

template <typename T>
StreamScore<T> read_score_csv(const std::filesystem::path& path, const std::string& tag = "") {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw NotFoundError("score CSV not found: " + path.string());
    StreamScore<T> s;
    s.tag = tag.empty() ? path.stem().string() : tag;
    std::string line;
    if (!std::getline(f, line)) throw FormatError(path.string() + ": empty file");
    auto header = detail::split_csv_row(line);
    if (header.size() < 2 || header[0] != "id")
        throw FormatError(path.string() + ": bad score header");
    const std::size_t l = header.size() - 1;
    for (std::size_t c = 0; c < l; ++c)
        if (header[c + 1] != "c" + std::to_string(c))
            throw FormatError(path.string() + ": bad score header column '" + header[c + 1] + "'");
    while (std::getline(f, line)) {
        if (line.empty() || line == "\r") continue;
        auto row = detail::split_csv_row(line);
        if (row.size() != l + 1)
            throw FormatError(path.string() + ": row has " + std::to_string(row.size()) +
                              " fields, expected " + std::to_string(l + 1));
        s.ids.push_back(row[0]);
        Tensor<T> vec({l});
        for (std::size_t c = 0; c < l; ++c) {
            try {
                vec[c] = (T)std::stod(row[c + 1]);
            } catch (...) {
                throw FormatError(path.string() + ": bad number '" + row[c + 1] + "'");
            }
        }
        s.scores.push_back(std::move(vec));
    }
    if (s.ids.empty()) throw FormatError(path.string() + ": no data rows");
    return s;
}

// --- label CSV: header "id,label" (manifests, truths, predictions) -------------

inline void write_label_csv(const std::filesystem::path& path,
                            const std::vector<std::pair<std::string, int>>& rows) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << "id,label\n";
    for (const auto& [id, label] : rows) f << id << "," << label << "\n";
}

inline std::vector<std::pair<std::string, int>> read_label_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw NotFoundError("label CSV not found: " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw FormatError(path.string() + ": empty file");
    auto header = detail::split_csv_row(line);
    if (header.size() != 2 || header[0] != "id" || header[1] != "label")
        throw FormatError(path.string() + ": bad label header");
    std::vector<std::pair<std::string, int>> rows;
    while (std::getline(f, line)) {
        if (line.empty() || line == "\r") continue;
        auto row = detail::split_csv_row(line);
        if (row.size() != 2) throw FormatError(path.string() + ": bad row '" + line + "'");
        try {
            rows.emplace_back(row[0], std::stoi(row[1]));
        } catch (...) {
            throw FormatError(path.string() + ": bad label '" + row[1] + "'");
        }
    }
    if (rows.empty()) throw FormatError(path.string() + ": no data rows");
    return rows;
}

// --- confusion CSV --------------------------------------------------------------

inline void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& m,
                                bool normalized = false) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    const auto norm = normalized ? m.row_normalized() : std::vector<double>{};
    for (int t = 0; t < m.classes; ++t) {
        for (int p = 0; p < m.classes; ++p) {
            if (p) f << ",";
            if (normalized)
                f << detail::format_score(norm[(std::size_t)(t * m.classes + p)]);
            else
                f << m.at(t, p);
        }
        f << "\n";
    }
}

} // namespace mmgr
