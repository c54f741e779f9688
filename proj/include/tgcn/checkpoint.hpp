#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tgcn/edge_list.hpp"
#include "tgcn/model.hpp"

// Line-oriented checkpoint:
//
//   TGCN-CKPT v1
//   L=<L> b=<b> T=<T> N=<N> widths=<D0,..,DL> act=<name>
//   <name> <d1>x<d2>[x<d3>]
//   <values, row-major, 17 significant digits>
//   ...
//
// Blocks appear in canonical order W_n, W_1 .. W_L, W_c, z, v, mixing.
// Vectors are written as 1xD; the mixing band as T x b including the
// zero padding ahead of the first rows.

namespace tgcn {

inline constexpr const char* checkpoint_magic = "TGCN-CKPT v1";

struct checkpoint {
    model_config config;
    model_parameters params;
};

namespace detail {

inline std::vector<std::size_t> block_dims(const std::string& name, const model_parameters& p) {
    if (name == "W_n") return {p.embedding.rows(), p.embedding.cols()};
    if (name == "W_c") return {p.head.weight.rows(), p.head.weight.cols()};
    if (name == "z") return {1, p.head.bias.size()};
    if (name == "v") return {1, p.head.regressor.size()};
    if (name == "mixing") return {p.mixing.order(), p.mixing.window()};
    const auto l = std::stoul(name.substr(2)) - 1;
    const auto& w = p.layers[l];
    return {w.rows(), w.cols(), w.slices()};
}

inline std::string dims_string(const std::vector<std::size_t>& dims) {
    std::string s;
    for (std::size_t k = 0; k < dims.size(); ++k) s += (k ? "x" : "") + std::to_string(dims[k]);
    return s;
}

}  // namespace detail

inline void save_checkpoint(const model_parameters& params, const model_config& cfg, std::ostream& out) {
    out << checkpoint_magic << '\n';
    out << "L=" << params.layers.size() << " b=" << params.mixing.window() << " T=" << params.slice_count()
        << " N=" << params.node_count() << " widths=";
    out << params.embedding.rows();
    for (const auto& w : params.layers) out << ',' << w.cols();
    out << " act=" << to_string(cfg.hidden) << '\n';
    params.for_each_block([&](const std::string& name, std::span<const double> v) {
        out << name << ' ' << detail::dims_string(detail::block_dims(name, params)) << '\n';
        for (std::size_t k = 0; k < v.size(); ++k) out << (k ? " " : "") << detail::format_real(v[k]);
        out << '\n';
    });
}

inline void save_checkpoint(const model_parameters& params, const model_config& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw format_error("cannot write checkpoint '" + path + "'");
    save_checkpoint(params, cfg, out);
    if (!out) throw format_error("failed writing checkpoint '" + path + "'");
}

inline checkpoint load_checkpoint(std::istream& in) {
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) throw format_error(std::string("checkpoint truncated: missing ") + what);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next_line("header") != checkpoint_magic)
        throw format_error("not a checkpoint: expected header '" + std::string(checkpoint_magic) + "'");

    std::map<std::string, std::string> summary;
    {
        std::istringstream fields(next_line("config summary"));
        std::string token;
        while (fields >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos) throw format_error("malformed config summary token '" + token + "'");
            summary[token.substr(0, eq)] = token.substr(eq + 1);
        }
    }
    for (const char* key : {"L", "b", "T", "N", "widths", "act"})
        if (!summary.count(key)) throw format_error(std::string("config summary lacks ") + key);

    auto to_size = [](const std::string& s, const char* what) {
        std::uint64_t v = 0;
        if (!detail::parse_u64(s, v) || v == 0) throw format_error(std::string("bad ") + what + " '" + s + "'");
        return static_cast<std::size_t>(v);
    };
    const std::size_t layers = to_size(summary["L"], "layer count");
    const std::size_t window = to_size(summary["b"], "window");
    const std::size_t slices = to_size(summary["T"], "slice count");
    const std::size_t nodes = to_size(summary["N"], "node count");

    checkpoint ck;
    {
        std::string w = summary["widths"];
        std::size_t pos = 0;
        ck.config.widths.clear();
        while (pos <= w.size()) {
            const auto comma = std::min(w.find(',', pos), w.size());
            ck.config.widths.push_back(to_size(w.substr(pos, comma - pos), "width"));
            pos = comma + 1;
        }
    }
    if (ck.config.widths.size() != layers + 1) throw format_error("widths list does not match L");
    if (window > slices) throw format_error("window exceeds slice count");
    ck.config.window = window;
    try {
        ck.config.hidden = parse_activation(summary["act"]);
    } catch (const argument_error& e) {
        throw format_error(e.what());
    }

    // shapes implied by the summary; the weight tensors' third extent (T or
    // 1 for tied weights) is taken from the block header
    auto& p = ck.params;
    const std::size_t dl = ck.config.widths.back();
    p.embedding = matrix(ck.config.widths.front(), nodes);
    p.head.weight = matrix(2 * dl, dl);
    p.head.bias.assign(dl, 0.0);
    p.head.regressor.assign(dl, 0.0);
    p.mixing = mixing_matrix(slices, window);

    auto read_header = [&](const std::string& expected) {
        std::istringstream h(next_line("block header"));
        std::string name, dims;
        if (!(h >> name >> dims) || name != expected)
            throw format_error("expected block '" + expected + "', found '" + line + "'");
        std::vector<std::size_t> out;
        std::size_t pos = 0;
        while (pos <= dims.size()) {
            const auto x = std::min(dims.find('x', pos), dims.size());
            out.push_back(to_size(dims.substr(pos, x - pos), "dimension"));
            pos = x + 1;
        }
        return out;
    };
    auto read_values = [&](const std::string& name, std::span<double> dst) {
        next_line("block values");
        const auto fields = detail::split_fields(line);
        if (fields.size() != dst.size())
            throw format_error("block " + name + " holds " + std::to_string(fields.size()) + " values, expected " +
                               std::to_string(dst.size()));
        for (std::size_t k = 0; k < dst.size(); ++k)
            if (!detail::parse_double(fields[k], dst[k]))
                throw format_error("block " + name + " has a malformed value '" + std::string(fields[k]) + "'");
    };

    auto expect_dims = [&](const std::string& name, const std::vector<std::size_t>& got,
                           const std::vector<std::size_t>& want) {
        if (got != want)
            throw format_error("block " + name + " has shape " + detail::dims_string(got) + ", expected " +
                               detail::dims_string(want));
    };

    expect_dims("W_n", read_header("W_n"), {p.embedding.rows(), p.embedding.cols()});
    read_values("W_n", p.embedding.values());
    for (std::size_t l = 0; l < layers; ++l) {
        const std::string name = "W_" + std::to_string(l + 1);
        const auto dims = read_header(name);
        const std::size_t depth = dims.size() == 3 ? dims[2] : 0;
        if (depth != slices && depth != 1)
            throw format_error("block " + name + " has shape " + detail::dims_string(dims) +
                               ", expected third extent " + std::to_string(slices) + " or 1");
        expect_dims(name, dims, {ck.config.widths[l], ck.config.widths[l + 1], depth});
        p.layers.emplace_back(dims[0], dims[1], dims[2]);
        read_values(name, p.layers.back().values());
    }
    ck.config.tied = slices > 1 && !p.layers.empty() && p.layers.front().slices() == 1;
    for (const auto& w : p.layers)
        if ((w.slices() == 1) != ck.config.tied && slices > 1)
            throw format_error("layer weights mix tied and untied temporal extents");

    expect_dims("W_c", read_header("W_c"), {2 * dl, dl});
    read_values("W_c", p.head.weight.values());
    expect_dims("z", read_header("z"), {1, dl});
    read_values("z", p.head.bias);
    expect_dims("v", read_header("v"), {1, dl});
    read_values("v", p.head.regressor);
    expect_dims("mixing", read_header("mixing"), {slices, window});
    read_values("mixing", p.mixing.raw.band_values());

    while (std::getline(in, line))
        if (line.find_first_not_of(" \t\r") != std::string::npos)
            throw format_error("unexpected trailing content in checkpoint");
    return ck;
}

inline checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open checkpoint '" + path + "'");
    return load_checkpoint(in);
}

}  // namespace tgcn
