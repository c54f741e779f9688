#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <ostream>
#include <sstream>
#include <string>

#include "tgcn/checkpoint.hpp"
#include "tgcn/edge_list.hpp"
#include "tgcn/eval.hpp"
#include "tgcn/split.hpp"
#include "tgcn/synth.hpp"
#include "tgcn/training.hpp"

// Experiment configuration and the command implementations behind the
// `tgcn` executable. Commands write to the given streams and return the
// process exit code.
//
// Config files are flat `key = value` lines grouped under [data], [model],
// [train], [output] and [gradcheck] sections; '#' starts a comment.

namespace tgcn {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int data = 2;
inline constexpr int numerical = 3;
}  // namespace exit_code

struct experiment_config {
    std::optional<std::filesystem::path> data_path;
    synth_params synth;
    std::uint64_t split_seed = 0;
    train_config train;
    std::filesystem::path output_dir;
    double gradcheck_epsilon = 1e-5;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

class config_reader {
public:
    explicit config_reader(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string text(const std::string& key, const std::string& fallback) {
        used_.insert(key);
        return has(key) ? values_.at(key) : fallback;
    }

    std::string required_text(const std::string& key) {
        if (!has(key)) throw argument_error("config: missing required key '" + key + "'");
        return text(key, "");
    }

    std::uint64_t seed(const std::string& key) {
        std::uint64_t v = 0;
        const auto s = required_text(key);
        if (!parse_u64(s, v)) throw argument_error("config: '" + key + "' must be a non-negative integer");
        return v;
    }

    std::size_t count(const std::string& key, std::size_t fallback) {
        if (!has(key)) return used_.insert(key), fallback;
        std::uint64_t v = 0;
        if (!parse_u64(text(key, ""), v)) throw argument_error("config: '" + key + "' must be a non-negative integer");
        return static_cast<std::size_t>(v);
    }

    double real(const std::string& key, double fallback) {
        if (!has(key)) return used_.insert(key), fallback;
        double v = 0;
        if (!parse_double(text(key, ""), v)) throw argument_error("config: '" + key + "' must be a real number");
        return v;
    }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return used_.insert(key), fallback;
        const auto s = text(key, "");
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw argument_error("config: '" + key + "' must be true or false");
    }

    void reject_unknown() const {
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) throw argument_error("config: unknown key '" + k + "'");
    }

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> used_;
};

inline std::vector<std::size_t> parse_widths(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::uint64_t v = 0;
        if (!parse_u64(trim(item), v) || v == 0)
            throw argument_error("config: widths must be a comma-separated list of positive integers");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

}  // namespace detail

// Relative paths resolve against base_dir (the config file's directory).
inline experiment_config parse_experiment_config(std::istream& in, const std::filesystem::path& base_dir,
                                                 bool require_seeds = true) {
    std::map<std::string, std::string> values;
    std::string section;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        auto line = detail::trim(std::string_view(raw).substr(0, raw.find('#')));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw parse_error(line_no, "unterminated section header");
            section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw parse_error(line_no, "expected key = value");
        if (section.empty()) throw parse_error(line_no, "key outside of any section");
        const auto key = section + "." + detail::trim(std::string_view(line).substr(0, eq));
        if (!values.emplace(key, detail::trim(std::string_view(line).substr(eq + 1))).second)
            throw parse_error(line_no, "duplicate key '" + key + "'");
    }

    detail::config_reader r(std::move(values));
    experiment_config c;
    auto seed = [&](const std::string& key) -> std::uint64_t {
        if (require_seeds || r.has(key)) return r.seed(key);
        return 0;
    };

    if (r.has("data.path")) {
        c.data_path = base_dir / r.text("data.path", "");
    } else {
        c.synth.nodes = r.count("data.synth_nodes", c.synth.nodes);
        c.synth.slices = r.count("data.synth_slices", c.synth.slices);
        c.synth.density = r.real("data.synth_density", c.synth.density);
        c.synth.weight_lo = r.real("data.synth_weight_lo", c.synth.weight_lo);
        c.synth.weight_hi = r.real("data.synth_weight_hi", c.synth.weight_hi);
        c.synth.persistence = r.real("data.synth_persistence", c.synth.persistence);
        const auto dyn = r.text("data.synth_dynamics", "smooth");
        if (dyn == "smooth") c.synth.dynamics = synth_dynamics::smooth;
        else if (dyn == "lagged") c.synth.dynamics = synth_dynamics::lagged;
        else throw argument_error("config: synth_dynamics must be smooth or lagged");
        c.synth.seed = seed("data.synth_seed");
    }
    c.split_seed = seed("data.split_seed");

    auto& m = c.train.model;
    m.widths = detail::parse_widths(r.text("model.widths", "16,16,16"));
    m.window = r.count("model.window", m.window);
    m.hidden = parse_activation(r.text("model.activation", "tanh"));
    m.tied = r.flag("model.tied", m.tied);
    m.init_seed = seed("model.init_seed");

    auto& t = c.train;
    t.epochs = r.count("train.epochs", t.epochs);
    t.learning_rate = r.real("train.learning_rate", t.learning_rate);
    t.optimizer = parse_optimizer(r.text("train.optimizer", "adam"));
    t.huber_delta = r.real("train.delta", t.huber_delta);
    t.seed = seed("train.seed");
    t.patience = r.count("train.patience", t.patience);
    t.weight_decay = r.real("train.weight_decay", t.weight_decay);
    t.batch_size = r.count("train.batch_size", t.batch_size);
    t.validate();

    c.output_dir = base_dir / r.text("output.dir", "out");
    c.gradcheck_epsilon = r.real("gradcheck.epsilon", c.gradcheck_epsilon);
    r.reject_unknown();
    return c;
}

inline experiment_config load_experiment_config(const std::filesystem::path& path, bool require_seeds = true) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open config '" + path.string() + "'");
    return parse_experiment_config(in, path.parent_path(), require_seeds);
}

// Canonical key = value echo of a configuration, used as the run manifest.
inline std::string describe(const experiment_config& c) {
    std::ostringstream o;
    o << "[data]\n";
    if (c.data_path) {
        o << "path = " << c.data_path->string() << '\n';
    } else {
        o << "synth_nodes = " << c.synth.nodes << "\nsynth_slices = " << c.synth.slices
          << "\nsynth_density = " << detail::format_real(c.synth.density)
          << "\nsynth_weight_lo = " << detail::format_real(c.synth.weight_lo)
          << "\nsynth_weight_hi = " << detail::format_real(c.synth.weight_hi) << "\nsynth_dynamics = "
          << (c.synth.dynamics == synth_dynamics::smooth ? "smooth" : "lagged")
          << "\nsynth_persistence = " << detail::format_real(c.synth.persistence)
          << "\nsynth_seed = " << c.synth.seed << '\n';
    }
    o << "split_seed = " << c.split_seed << "\nsplit_ratio = 6:1:3\n";
    const auto& m = c.train.model;
    o << "\n[model]\nwidths = ";
    for (std::size_t k = 0; k < m.widths.size(); ++k) o << (k ? "," : "") << m.widths[k];
    o << "\nwindow = " << m.window << "\nactivation = " << to_string(m.hidden)
      << "\ntied = " << (m.tied ? "true" : "false") << "\ninit_seed = " << m.init_seed << '\n';
    const auto& t = c.train;
    o << "\n[train]\nepochs = " << t.epochs << "\nlearning_rate = " << detail::format_real(t.learning_rate)
      << "\noptimizer = " << to_string(t.optimizer) << "\ndelta = " << detail::format_real(t.huber_delta)
      << "\nseed = " << t.seed << "\npatience = " << t.patience
      << "\nweight_decay = " << detail::format_real(t.weight_decay) << "\nbatch_size = " << t.batch_size << '\n';
    return o.str();
}

inline dynamic_graph load_experiment_data(const experiment_config& c) {
    if (c.data_path) {
        if (!std::filesystem::exists(*c.data_path))
            throw data_error("data file '" + c.data_path->string() + "' does not exist");
        return load_edge_list_file(c.data_path->string());
    }
    return synth_generate(c.synth);
}

// Runs fn and maps library errors to exit codes with a diagnostic on err.
template <typename Fn>
int run_command(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const argument_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::usage;
    } catch (const numerical_error& e) {
        err << "numerical error: " << e.what() << '\n';
        return exit_code::numerical;
    } catch (const singular_matrix_error& e) {
        err << "numerical error: " << e.what() << '\n';
        return exit_code::numerical;
    } catch (const error& e) {
        err << "data error: " << e.what() << '\n';
        return exit_code::data;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return exit_code::data;
    }
}

// Writes model.ckpt, metrics.csv and manifest.txt into the output
// directory and prints the test-split report row.
inline int cmd_train(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
    return run_command(err, [&] {
        const auto cfg = load_experiment_config(config_path);
        const auto graph = load_experiment_data(cfg);
        const auto splits = split(graph, cfg.split_seed);
        const auto result = train(graph, splits, cfg.train);

        std::filesystem::create_directories(cfg.output_dir);
        save_checkpoint(result.params, cfg.train.model, (cfg.output_dir / "model.ckpt").string());
        {
            std::ofstream csv(cfg.output_dir / "metrics.csv");
            if (!csv) throw data_error("cannot write " + (cfg.output_dir / "metrics.csv").string());
            write_metrics_csv(result.log, csv);
        }
        {
            std::ofstream manifest(cfg.output_dir / "manifest.txt");
            if (!manifest) throw data_error("cannot write " + (cfg.output_dir / "manifest.txt").string());
            manifest << describe(cfg) << "\n[result]\nbest_epoch = " << result.best_epoch
                     << "\nnodes = " << graph.node_count() << "\nslices = " << graph.slice_count()
                     << "\nobserved = " << graph.observed().size() << '\n';
        }
        const auto report = evaluate(result.params, graph, splits, split_tag::test, cfg.train.model);
        out << "split,count,mae,rmse\n" << to_csv_row(report) << '\n';
        return exit_code::ok;
    });
}

namespace detail {

inline void check_compatible(const checkpoint& ck, const dynamic_graph& g) {
    if (ck.params.node_count() != g.node_count() || ck.params.slice_count() != g.slice_count())
        throw data_error("checkpoint expects " + std::to_string(ck.params.node_count()) + " nodes and " +
                         std::to_string(ck.params.slice_count()) + " slices, data has " +
                         std::to_string(g.node_count()) + " and " + std::to_string(g.slice_count()));
}

inline checkpoint open_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw data_error("checkpoint '" + path.string() + "' does not exist");
    return load_checkpoint(path.string());
}

inline dynamic_graph open_data(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw data_error("data file '" + path.string() + "' does not exist");
    return load_edge_list_file(path.string());
}

}  // namespace detail

inline int cmd_evaluate(const std::filesystem::path& ckpt_path, const std::filesystem::path& data_path,
                        std::uint64_t split_seed, std::ostream& out, std::ostream& err) {
    return run_command(err, [&] {
        const auto ck = detail::open_checkpoint(ckpt_path);
        const auto graph = detail::open_data(data_path);
        detail::check_compatible(ck, graph);
        const auto splits = split(graph, split_seed);
        out << to_csv_row(evaluate(ck.params, graph, splits, split_tag::test, ck.config)) << '\n';
        return exit_code::ok;
    });
}

inline int cmd_predict(const std::filesystem::path& ckpt_path, const std::filesystem::path& data_path,
                       std::size_t i, std::size_t j, std::size_t t, std::ostream& out, std::ostream& err) {
    return run_command(err, [&] {
        const auto ck = detail::open_checkpoint(ckpt_path);
        const auto graph = detail::open_data(data_path);
        detail::check_compatible(ck, graph);
        const auto f = forward(ck.params, normalize_adjacency(graph.adjacency()), ck.config);
        out << detail::format_real(predict_edge(f, i, j, t, ck.params.head)) << '\n';
        return exit_code::ok;
    });
}

inline int cmd_synth(const synth_params& params, const std::filesystem::path& out_path, std::ostream& out,
                     std::ostream& err) {
    return run_command(err, [&] {
        const auto graph = synth_generate(params);
        if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
        write_edge_list_file(graph, out_path.string());
        out << "wrote " << graph.observed().size() << " records (" << graph.node_count() << " nodes, "
            << graph.slice_count() << " slices) to " << out_path.string() << '\n';
        return exit_code::ok;
    });
}

// Default gradient-check instance: 6 nodes, 4 slices, two layers, window 2.
inline experiment_config default_gradcheck_config() {
    experiment_config c;
    c.synth.nodes = 6;
    c.synth.slices = 4;
    c.synth.density = 0.15;
    c.synth.seed = 11;
    c.split_seed = 5;
    c.train.model.widths = {4, 3, 3};
    c.train.model.window = 2;
    c.train.model.init_seed = 3;
    return c;
}

inline constexpr double gradcheck_tolerance = 1e-4;

// Prints the worst relative error against central differences over the
// training entries; exit 0 iff it is below 1e-4.
inline int cmd_gradcheck(const std::optional<std::filesystem::path>& config_path, std::optional<double> epsilon,
                         std::ostream& out, std::ostream& err) {
    return run_command(err, [&] {
        auto cfg = config_path ? load_experiment_config(*config_path, false) : default_gradcheck_config();
        if (epsilon) cfg.gradcheck_epsilon = *epsilon;
        const auto graph = load_experiment_data(cfg);
        const auto splits = split(graph, cfg.split_seed);
        const auto batch = split_entries(graph, splits, split_tag::train);
        const auto params = init_parameters(cfg.train.model, graph.node_count(), graph.slice_count());
        const auto report = finite_difference_check(params, normalize_adjacency(graph.adjacency()), batch,
                                                    cfg.train.model, cfg.train.huber_delta, cfg.gradcheck_epsilon);
        out << "coordinates=" << report.coordinates << " max_relative_error="
            << detail::format_real(report.max_relative_error) << " worst=" << report.worst_parameter << '\n';
        return report.max_relative_error < gradcheck_tolerance ? exit_code::ok : exit_code::numerical;
    });
}

}  // namespace tgcn
