#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "tgcn/graph.hpp"

// Temporal edge-list text format:
//
//   <src> <dst> <weight> <timestamp>
//
// Fields are separated by runs of spaces or tabs, '#' starts a comment,
// blank lines are skipped. Node labels map to dense indices in order of
// first appearance; distinct timestamps map to slices in ascending order.

namespace tgcn {

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (pos < line.size()) {
        while (pos < line.size() && is_space(line[pos])) ++pos;
        if (pos == line.size()) break;
        std::size_t end = pos;
        while (end < line.size() && !is_space(line[end])) ++end;
        out.push_back(line.substr(pos, end - pos));
        pos = end;
    }
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_u64(std::string_view s, std::uint64_t& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

// 17 significant digits: reads back to the identical double
inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

inline dynamic_graph load_edge_list(std::istream& in) {
    struct raw_record {
        std::size_t src;
        std::size_t dst;
        double weight;
        std::uint64_t timestamp;
    };
    std::vector<std::string> labels;
    std::unordered_map<std::string, std::size_t> index_of;
    std::vector<raw_record> records;
    std::set<std::tuple<std::size_t, std::size_t, std::uint64_t>> seen;

    auto intern = [&](std::string_view label) {
        auto [it, inserted] = index_of.try_emplace(std::string(label), labels.size());
        if (inserted) labels.emplace_back(label);
        return it->second;
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        const auto fields = detail::split_fields(view);
        if (fields.empty()) continue;
        if (fields.size() != 4)
            throw parse_error(line_no, "expected 4 fields <src> <dst> <weight> <timestamp>, got " +
                                           std::to_string(fields.size()));
        raw_record rec{};
        if (!detail::parse_double(fields[2], rec.weight))
            throw parse_error(line_no, "weight '" + std::string(fields[2]) + "' is not a finite real number");
        if (!detail::parse_u64(fields[3], rec.timestamp))
            throw parse_error(line_no,
                              "timestamp '" + std::string(fields[3]) + "' is not a non-negative integer");
        rec.src = intern(fields[0]);
        rec.dst = intern(fields[1]);
        if (!seen.emplace(rec.src, rec.dst, rec.timestamp).second)
            throw data_error("duplicate record (" + std::string(fields[0]) + ", " + std::string(fields[1]) + ", " +
                             std::string(fields[3]) + ") at line " + std::to_string(line_no));
        records.push_back(rec);
    }
    if (records.empty()) throw data_error("edge list contains no records");

    std::vector<std::uint64_t> timestamps;
    timestamps.reserve(records.size());
    for (const auto& r : records) timestamps.push_back(r.timestamp);
    std::sort(timestamps.begin(), timestamps.end());
    timestamps.erase(std::unique(timestamps.begin(), timestamps.end()), timestamps.end());

    std::vector<observed_entry> entries;
    entries.reserve(records.size());
    for (const auto& r : records) {
        const auto slice = static_cast<std::size_t>(
            std::lower_bound(timestamps.begin(), timestamps.end(), r.timestamp) - timestamps.begin());
        entries.push_back({r.src, r.dst, slice, r.weight});
    }
    return dynamic_graph(std::move(labels), std::move(timestamps), std::move(entries));
}

inline dynamic_graph load_edge_list_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open edge list '" + path + "'");
    return load_edge_list(in);
}

// Writes every observed entry ordered by (slice, src index, dst index),
// weights with 17 significant digits.
inline void write_edge_list(const dynamic_graph& g, std::ostream& out) {
    std::vector<observed_entry> entries = g.observed();
    std::sort(entries.begin(), entries.end(), [](const observed_entry& a, const observed_entry& b) {
        return std::tie(a.slice, a.src, a.dst) < std::tie(b.slice, b.src, b.dst);
    });
    for (const auto& e : entries)
        out << g.labels()[e.src] << ' ' << g.labels()[e.dst] << ' ' << detail::format_real(e.weight) << ' '
            << g.timestamps()[e.slice] << '\n';
}

inline void write_edge_list_file(const dynamic_graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write edge list '" + path + "'");
    write_edge_list(g, out);
    if (!out) throw data_error("failed writing edge list '" + path + "'");
}

// Label-level view of a graph: (timestamp, src label, dst label) -> weight.
// Two graphs carrying the same records compare equal here even when their
// dense node numbering differs.
inline std::map<std::tuple<std::uint64_t, std::string, std::string>, double> labelled_records(
    const dynamic_graph& g) {
    std::map<std::tuple<std::uint64_t, std::string, std::string>, double> out;
    for (const auto& e : g.observed())
        out.emplace(std::make_tuple(g.timestamps()[e.slice], g.labels()[e.src], g.labels()[e.dst]), e.weight);
    return out;
}

}  // namespace tgcn
