// Command-line front end: run | campaign | check.

#include "indilab/commands.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <map>

int main(int argc, char **argv) {
    using namespace indilab;

    CLI::App app{"INDI vs NDI+NDO simulation laboratory for a tilted hexarotor"};
    app.require_subcommand(1);

    CommandOptions opt;
    std::string config, out_dir;
    std::uint64_t seed = 0;
    unsigned jobs = 0;
    const std::map<std::string, ControllerMode> modes{
        {"indi", ControllerMode::Indi}, {"ndo", ControllerMode::Ndo}, {"both", ControllerMode::Both}};

    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--config", config, "Campaign config JSON (built-in defaults if omitted)")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
        sub->add_option("--jobs", jobs, "Parallel runs (0 = all cores)");
    };

    CLI::App *run = app.add_subcommand("run", "Simulate one scenario");
    add_common(run);
    run->add_option("--scenario", opt.scenario, "Scenario name")->capture_default_str();
    std::string controller = "both";
    run->add_option("--controller", controller, "indi, ndo or both")
        ->check(CLI::IsMember({"indi", "ndo", "both"}))
        ->capture_default_str();
    run->add_option("--seed", seed, "Seed override");

    CLI::App *campaign = app.add_subcommand("campaign", "Run every scenario with Monte Carlo repetitions");
    add_common(campaign);

    CLI::App *check = app.add_subcommand("check", "Validate the config and report allocation properties");
    check->add_option("--config", config, "Campaign config JSON (built-in defaults if omitted)")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    opt.controller = modes.at(controller);
    if (!config.empty()) opt.config_path = config;
    if (!out_dir.empty()) opt.out_dir = out_dir;
    if (run->count("--seed") > 0) opt.seed = seed;
    if (app.got_subcommand(run) ? run->count("--jobs") > 0 : campaign->count("--jobs") > 0) opt.jobs = jobs;

    try {
        if (app.got_subcommand(run)) return cmd_run(opt, std::cout, std::cerr);
        if (app.got_subcommand(campaign)) return cmd_campaign(opt, std::cout, std::cerr);
        return cmd_check(opt, std::cout, std::cerr);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
}
