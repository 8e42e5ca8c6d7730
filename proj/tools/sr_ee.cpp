// SPDX-License-Identifier: Apache-2.0
//
// sr-ee individual|asymptotic|pareto --config <file> [--seed S] [--out DIR] [--alpha-grid a,b,...]
//
// Exit codes: 0 success, 2 config error, 3 solver failure, 1 output error.

#include <sree/experiment.hpp>

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char **argv)
{
    CLI::App app{"Energy-efficiency region of a RIS-assisted MISO symbiotic radio link"};
    app.set_version_flag("--version", std::string(sree::code_version));
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::vector<double> alpha_grid;

    for (const char *name : {"individual", "asymptotic", "pareto"})
    {
        CLI::App *sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--out", out_dir, "override the output directory");
        if (std::string(name) == "pareto")
            sub->add_option("--alpha-grid", alpha_grid, "override the alpha grid")->delimiter(',');
    }

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string kind = app.get_subcommands().front()->get_name();

    sree::ExperimentConfig cfg;
    try
    {
        sree::CliOverrides ov{seed, out_dir, std::nullopt};
        if (!alpha_grid.empty())
            ov.alpha_grid = alpha_grid;
        cfg = sree::load_config(config_path, kind, ov);
    }
    catch (const sree::ConfigError &e)
    {
        std::cerr << "sr-ee: " << config_path << ": " << e.what() << "\n";
        return 2;
    }

    sree::Report rep;
    try
    {
        rep = sree::run_experiment(cfg, sree::default_threads());
    }
    catch (const std::exception &e)
    {
        std::cerr << "sr-ee: solver failure: " << e.what() << "\n";
        return 3;
    }
    for (const auto &f : rep.failures)
        std::cerr << "sr-ee: " << f << "\n";

    try
    {
        for (const auto &p : sree::write_report(rep, cfg))
            std::cout << p.string() << "\n";
    }
    catch (const std::exception &e)
    {
        std::cerr << "sr-ee: " << e.what() << "\n";
        return 1;
    }
    if (rep.fatal)
    {
        std::cerr << "sr-ee: no usable results\n";
        return 3;
    }
    return 0;
}
