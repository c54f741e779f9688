#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tgcn/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Tensor graph convolutional network for dynamic link-weight estimation"};
    app.require_subcommand(1);

    std::string train_config;
    auto* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("--config", train_config, "experiment config")->required();

    std::string ckpt, data;
    std::uint64_t seed = 0;
    auto* evaluate = app.add_subcommand("evaluate", "report test-split MAE/RMSE of a checkpoint");
    evaluate->add_option("--ckpt", ckpt, "checkpoint file")->required();
    evaluate->add_option("--data", data, "edge-list file")->required();
    evaluate->add_option("--seed", seed, "split seed")->required();

    std::string edge;
    auto* predict = app.add_subcommand("predict", "predict one link weight");
    predict->add_option("--ckpt", ckpt, "checkpoint file")->required();
    predict->add_option("--data", data, "edge-list file")->required();
    predict->add_option("--edge", edge, "dense indices i,j,t")->required();

    tgcn::synth_params synth;
    std::string synth_out, dynamics = "smooth";
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic edge list");
    synth_cmd->add_option("--nodes", synth.nodes, "node count")->required();
    synth_cmd->add_option("--slices", synth.slices, "snapshot count")->required();
    synth_cmd->add_option("--density", synth.density, "links per slice as a fraction of N^2")->required();
    synth_cmd->add_option("--seed", synth.seed, "generator seed")->required();
    synth_cmd->add_option("--out", synth_out, "output file")->required();
    synth_cmd->add_option("--lo", synth.weight_lo, "lowest weight");
    synth_cmd->add_option("--hi", synth.weight_hi, "highest weight");
    synth_cmd->add_option("--dynamics", dynamics, "smooth or lagged")->check(CLI::IsMember({"smooth", "lagged"}));
    synth_cmd->add_option("--persistence", synth.persistence, "lagged: probability a node keeps its active/idle state");

    std::string gc_config;
    std::optional<double> epsilon;
    auto* gradcheck = app.add_subcommand("gradcheck", "compare gradients with central differences");
    gradcheck->add_option("--config", gc_config, "experiment config (default: built-in small instance)");
    gradcheck->add_option("--epsilon", epsilon, "finite-difference step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? tgcn::exit_code::ok : tgcn::exit_code::usage;
    }

    if (*train) return tgcn::cmd_train(train_config, std::cout, std::cerr);
    if (*evaluate) return tgcn::cmd_evaluate(ckpt, data, seed, std::cout, std::cerr);
    if (*predict) {
        std::size_t idx[3];
        std::size_t pos = 0;
        for (int k = 0; k < 3; ++k) {
            const auto comma = k < 2 ? edge.find(',', pos) : edge.size();
            std::uint64_t v = 0;
            if (comma == std::string::npos || !tgcn::detail::parse_u64(edge.substr(pos, comma - pos), v)) {
                std::cerr << "error: --edge expects i,j,t\n";
                return tgcn::exit_code::usage;
            }
            idx[k] = static_cast<std::size_t>(v);
            pos = comma + 1;
        }
        return tgcn::cmd_predict(ckpt, data, idx[0], idx[1], idx[2], std::cout, std::cerr);
    }
    if (*synth_cmd) {
        synth.dynamics = dynamics == "lagged" ? tgcn::synth_dynamics::lagged : tgcn::synth_dynamics::smooth;
        return tgcn::cmd_synth(synth, synth_out, std::cout, std::cerr);
    }
    std::optional<std::filesystem::path> path;
    if (!gc_config.empty()) path = gc_config;
    return tgcn::cmd_gradcheck(path, epsilon, std::cout, std::cerr);
}
