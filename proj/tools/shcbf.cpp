// shcbf: simulate, sweep, constants and compare sample-and-hold safety filters.

#include "shcbf/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace shcbf;
    CLI::App app{"Sample-and-hold control barrier function simulator"};
    app.require_subcommand(1);

    cli::Options opt;
    auto common = [&](CLI::App* sub) {
        sub->add_option("config", opt.config, "JSON run configuration")->required();
        sub->add_option("--set", opt.overrides, "Override a config field, section.key=value")->take_all();
        sub->add_option("--plot-script", opt.plot_script, "Write a gnuplot script plotting h over the trace(s)");
    };

    auto* simulate = app.add_subcommand("simulate", "Run one scenario, write trace and summary");
    common(simulate);
    auto* sweep = app.add_subcommand("sweep", "Run the scenario periodically at each frequency");
    common(sweep);
    sweep->add_option("--frequencies", opt.frequencies, "Sampling frequencies in Hz (comma separated)")
        ->delimiter(',');
    auto* constants = app.add_subcommand("constants", "Estimate bounds and sampling times");
    common(constants);
    constants->add_option("--out", opt.constants_out, "Write the constants as key=value lines");
    auto* compare = app.add_subcommand("compare", "Periodic sampling at T_s* against event triggering");
    common(compare);
    compare->add_option("--max-steps", opt.max_compare_steps, "Substep limit per run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::exit_error;
    }

    return cli::guarded(
        [&] {
            if (*simulate) return cli::simulate(opt, std::cout);
            if (*sweep) return cli::sweep(opt, std::cout);
            if (*constants) return cli::constants(opt, std::cout);
            return cli::compare(opt, std::cout);
        },
        std::cerr);
}
