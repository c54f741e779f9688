#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tgcn/experiment.hpp"

using namespace tgcn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::path(testing::TempDir()) / ("tgcn_experiment_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

const char* small_config = R"([data]
synth_nodes = 8
synth_slices = 3
synth_density = 0.2
synth_seed = 4
split_seed = 1

[model]
widths = 3,3
window = 2
init_seed = 2

[train]
epochs = 10
seed = 3
)";

struct run_output {
    int code;
    std::string out;
    std::string err;
};

template <typename Fn>
run_output capture(Fn&& fn) {
    std::ostringstream out, err;
    const int code = fn(out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST(Config, ParsesKeysAndDefaults) {
    std::istringstream in(std::string(small_config) + "\n[output]\ndir = runs/a  # comment\n");
    const auto c = parse_experiment_config(in, "/base");
    EXPECT_FALSE(c.data_path.has_value());
    EXPECT_EQ(c.synth.nodes, 8u);
    EXPECT_EQ(c.split_seed, 1u);
    EXPECT_EQ(c.train.model.widths, (std::vector<std::size_t>{3, 3}));
    EXPECT_EQ(c.train.epochs, 10u);
    EXPECT_EQ(c.train.learning_rate, 1e-2);
    EXPECT_EQ(c.train.optimizer, optimizer_kind::adam);
    EXPECT_EQ(c.output_dir, fs::path("/base/runs/a"));
}

TEST(Config, Rejections) {
    auto parse = [](const std::string& text, bool seeds = true) {
        std::istringstream in(text);
        return parse_experiment_config(in, ".", seeds);
    };
    EXPECT_THROW(parse(std::string(small_config) + "bogus = 1\n"), argument_error);
    EXPECT_THROW(parse("[train]\nepochs = 3\n"), argument_error);  // seeds missing
    EXPECT_NO_THROW(parse("[train]\nepochs = 3\n", false));
    EXPECT_THROW(parse("epochs = 3\n", false), parse_error);
    EXPECT_THROW(parse("[train]\nepochs\n", false), parse_error);
    EXPECT_THROW(parse("[train]\nepochs = 3\nepochs = 4\n", false), parse_error);
    EXPECT_THROW(parse("[train]\nepochs = -3\n", false), argument_error);
    EXPECT_THROW(parse("[train]\noptimizer = lbfgs\n", false), argument_error);
}

TEST(Train, WritesArtifactsAndIsReproducible) {
    const auto dir = scratch("train");
    write(dir / "run.ini", small_config);
    const auto first = capture([&](auto& o, auto& e) { return cmd_train(dir / "run.ini", o, e); });
    ASSERT_EQ(first.code, exit_code::ok) << first.err;
    EXPECT_EQ(first.out.rfind("split,count,mae,rmse\ntest,", 0), 0u);
    for (const char* f : {"model.ckpt", "metrics.csv", "manifest.txt"}) EXPECT_TRUE(fs::exists(dir / "out" / f));
    const auto csv = slurp(dir / "out" / "metrics.csv");
    const auto ckpt = slurp(dir / "out" / "model.ckpt");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 12);
    EXPECT_NE(slurp(dir / "out" / "manifest.txt").find("split_seed = 1"), std::string::npos);

    const auto second = capture([&](auto& o, auto& e) { return cmd_train(dir / "run.ini", o, e); });
    EXPECT_EQ(second.out, first.out);
    EXPECT_EQ(slurp(dir / "out" / "metrics.csv"), csv);
    EXPECT_EQ(slurp(dir / "out" / "model.ckpt"), ckpt);
}

TEST(Train, MissingDataFileIsADataError) {
    const auto dir = scratch("missing");
    write(dir / "run.ini", "[data]\npath = nowhere.txt\nsplit_seed = 1\n[model]\ninit_seed = 1\n[train]\nseed = 1\n");
    const auto r = capture([&](auto& o, auto& e) { return cmd_train(dir / "run.ini", o, e); });
    EXPECT_EQ(r.code, exit_code::data);
    EXPECT_NE(r.err.find((dir / "nowhere.txt").string()), std::string::npos) << r.err;
    const auto none = capture([&](auto& o, auto& e) { return cmd_train(dir / "absent.ini", o, e); });
    EXPECT_EQ(none.code, exit_code::data);
}

TEST(Train, BadWindowIsAUsageError) {
    const auto dir = scratch("window");
    write(dir / "run.ini", std::string(small_config) + "\n");
    auto text = slurp(dir / "run.ini");
    text.replace(text.find("window = 2"), 10, "window = 9");
    write(dir / "run.ini", text);
    const auto r = capture([&](auto& o, auto& e) { return cmd_train(dir / "run.ini", o, e); });
    EXPECT_EQ(r.code, exit_code::usage);
}

TEST(EvaluateAndPredict, AgreeWithLibrary) {
    const auto dir = scratch("eval");
    ASSERT_EQ(capture([&](auto& o, auto& e) {
                  return cmd_synth({.nodes = 8, .slices = 3, .density = 0.2, .seed = 4}, dir / "g.txt", o, e);
              }).code,
              exit_code::ok);
    const auto graph = load_edge_list_file((dir / "g.txt").string());
    const model_config cfg{.widths = {3, 3}, .window = 2, .init_seed = 2};
    auto params = init_parameters(cfg, graph.node_count(), graph.slice_count());
    save_checkpoint(params, cfg, (dir / "m.ckpt").string());

    const auto ev = capture([&](auto& o, auto& e) { return cmd_evaluate(dir / "m.ckpt", dir / "g.txt", 7, o, e); });
    ASSERT_EQ(ev.code, exit_code::ok) << ev.err;
    EXPECT_EQ(ev.out, to_csv_row(evaluate(params, graph, split(graph, 7), split_tag::test, cfg)) + "\n");

    const auto f = forward(params, normalize_adjacency(graph.adjacency()), cfg);
    const auto pr = capture([&](auto& o, auto& e) { return cmd_predict(dir / "m.ckpt", dir / "g.txt", 1, 2, 0, o, e); });
    ASSERT_EQ(pr.code, exit_code::ok) << pr.err;
    EXPECT_EQ(std::stod(pr.out), predict_edge(f, 1, 2, 0, params.head));

    std::fill(params.head.regressor.begin(), params.head.regressor.end(), 0.0);
    save_checkpoint(params, cfg, (dir / "zero.ckpt").string());
    const auto zero =
        capture([&](auto& o, auto& e) { return cmd_predict(dir / "zero.ckpt", dir / "g.txt", 3, 4, 2, o, e); });
    EXPECT_EQ(zero.out, "0\n");

    const auto out_of_range =
        capture([&](auto& o, auto& e) { return cmd_predict(dir / "m.ckpt", dir / "g.txt", 8, 0, 0, o, e); });
    EXPECT_EQ(out_of_range.code, exit_code::usage);
    EXPECT_FALSE(out_of_range.err.empty());

    const auto missing =
        capture([&](auto& o, auto& e) { return cmd_evaluate(dir / "none.ckpt", dir / "g.txt", 7, o, e); });
    EXPECT_EQ(missing.code, exit_code::data);
    EXPECT_NE(missing.err.find("none.ckpt"), std::string::npos);
}

TEST(EvaluateAndPredict, IncompatibleCheckpoint) {
    const auto dir = scratch("incompatible");
    capture([&](auto& o, auto& e) { return cmd_synth({.nodes = 8, .slices = 3, .density = 0.2}, dir / "g.txt", o, e); });
    const model_config cfg{.widths = {3, 3}, .window = 1};
    save_checkpoint(init_parameters(cfg, 9, 3), cfg, (dir / "m.ckpt").string());
    const auto r = capture([&](auto& o, auto& e) { return cmd_evaluate(dir / "m.ckpt", dir / "g.txt", 1, o, e); });
    EXPECT_EQ(r.code, exit_code::data);
}

TEST(Synth, WritesLoadableFile) {
    const auto dir = scratch("synth");
    const synth_params p{.nodes = 10, .slices = 4, .density = 0.1, .seed = 6};
    const auto r = capture([&](auto& o, auto& e) { return cmd_synth(p, dir / "sub" / "g.txt", o, e); });
    ASSERT_EQ(r.code, exit_code::ok) << r.err;
    EXPECT_EQ(labelled_records(load_edge_list_file((dir / "sub" / "g.txt").string())),
              labelled_records(synth_generate(p)));
    EXPECT_EQ(capture([&](auto& o, auto& e) { return cmd_synth({.nodes = 1}, dir / "x.txt", o, e); }).code,
              exit_code::usage);
}

TEST(Gradcheck, DefaultInstancePasses) {
    const auto r = capture([](auto& o, auto& e) { return cmd_gradcheck(std::nullopt, std::nullopt, o, e); });
    EXPECT_EQ(r.code, exit_code::ok) << r.out << r.err;
    EXPECT_EQ(r.out.rfind("coordinates=", 0), 0u);
    EXPECT_NE(r.out.find(" worst="), std::string::npos);
    EXPECT_EQ(r.out.find("worst=\n"), std::string::npos);
}

TEST(Gradcheck, ZeroStepIsAUsageError) {
    const auto r = capture([](auto& o, auto& e) { return cmd_gradcheck(std::nullopt, 0.0, o, e); });
    EXPECT_EQ(r.code, exit_code::usage);
}

TEST(Gradcheck, ConfigFileWithoutSeeds) {
    const auto dir = scratch("gradcheck");
    write(dir / "gc.ini", "[data]\nsynth_nodes = 5\nsynth_slices = 3\nsynth_density = 0.4\n[model]\nwidths = 2,2\n");
    const auto r = capture([&](auto& o, auto& e) { return cmd_gradcheck(dir / "gc.ini", std::nullopt, o, e); });
    EXPECT_EQ(r.code, exit_code::ok) << r.out << r.err;
}
