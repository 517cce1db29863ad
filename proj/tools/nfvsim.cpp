#include "nfvsim/experiment.hpp"
#include "nfvsim/scenario.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <memory>

using namespace nfvsim;

namespace
{
    constexpr int exit_ok = 0;
    constexpr int exit_runtime = 1;
    constexpr int exit_config = 2;

    struct RunArgs
    {
        std::string scenario;
        bool no_autoscale = false;
        std::optional<std::uint64_t> seed;
        std::string out = "report";
        std::string event_log;
        std::string flow_log;
        std::vector<std::string> sets;
    };

    std::vector<Override> collect_overrides(const RunArgs &a)
    {
        std::vector<Override> out;
        for (const auto &s : a.sets)
        {
            out.push_back(parse_override(s));
        }
        if (a.seed)
        {
            out.push_back({"seed", std::to_string(*a.seed)});
        }
        if (a.no_autoscale)
        {
            out.push_back({"autoscale.enabled", "false"});
        }
        return out;
    }

    void print_diagnostics(const ScenarioError &e)
    {
        for (const auto &d : e.diagnostics())
        {
            std::cerr << "error: " << (d.path.empty() ? "/" : d.path) << ": " << d.message << '\n';
        }
    }

    std::unique_ptr<std::ofstream> open_log(const std::string &path)
    {
        if (path.empty())
        {
            return nullptr;
        }
        auto out = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
        if (!*out)
        {
            throw IoError("cannot write '" + path + "'");
        }
        return out;
    }

    int cmd_run(const RunArgs &a)
    {
        const auto sc = load_scenario(a.scenario, collect_overrides(a));
        auto event_log = open_log(a.event_log);
        auto flow_log = open_log(a.flow_log);
        if (flow_log)
        {
            *flow_log << "flow_id,src,dst,bytes,start_s,end_s,mean_rate_bps,path\n";
        }
        RunOptions opt;
        opt.event_log = event_log.get();
        opt.flow_log = flow_log.get();
        const auto result = run_experiment(sc, opt);
        write_outputs(result, a.out);

        const auto &r = result.report;
        fmt::print("completed  {}  (incomplete {}, rejected {})\n", r.completed, r.incomplete, r.rejected);
        fmt::print("mean cpu   {:.1f} ms\n", r.mean_cpu_s * 1e3);
        fmt::print("mean net   {:.1f} ms\n", r.mean_net_s * 1e3);
        fmt::print("mean queue {:.1f} ms\n", r.mean_queue_s * 1e3);
        fmt::print("mean resp  {:.1f} ms\n", r.mean_response_s * 1e3);
        fmt::print("energy     {:.4g} J\n", r.total_energy_j);
        fmt::print("vnf vms    {}\n", r.vnf_vm_count_final);
        fmt::print("chain violations {} of {}\n", result.chain_violations, result.chained_requests);
        fmt::print("wall time  {:.1f} s\n", result.wall_seconds);
        fmt::print("reports in {}\n", a.out);
        if (event_log && !event_log->flush())
        {
            throw IoError("event log write failed");
        }
        if (flow_log && !flow_log->flush())
        {
            throw IoError("flow log write failed");
        }
        return exit_ok;
    }

    int cmd_validate(const RunArgs &a)
    {
        const auto diags = validate_scenario_file(a.scenario, collect_overrides(a));
        if (diags.empty())
        {
            std::cout << "OK\n";
            return exit_ok;
        }
        print_diagnostics(ScenarioError(diags));
        return exit_config;
    }

    int cmd_compare(const std::string &baseline, const std::string &variant, const std::string &csv)
    {
        const auto result = compare_reports(baseline, variant);
        std::cout << format_comparison(result);
        if (!csv.empty())
        {
            write_comparison_csv(result, csv);
        }
        return exit_ok;
    }

    int cmd_sweep(const RunArgs &a, const std::vector<std::string> &params, unsigned jobs)
    {
        std::vector<SweepAxis> axes;
        for (const auto &p : params)
        {
            axes.push_back(parse_sweep_axis(p));
        }
        const auto base = collect_overrides(a);
        // Fail early on a broken base scenario rather than once per cell.
        load_scenario(a.scenario, base);
        const auto cells = run_sweep(a.scenario, base, axes, a.out, jobs);
        int status = exit_ok;
        for (const auto &c : cells)
        {
            if (c.status != 0)
            {
                std::cerr << c.out_dir.string() << ": " << c.error << '\n';
            }
            status = std::max(status, c.status);
        }
        fmt::print("{} cells, index in {}\n", cells.size(), (std::filesystem::path(a.out) / "sweep.csv").string());
        return status;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"Discrete-event simulator for SDN/NFV data centers"};
    app.require_subcommand(1);

    RunArgs args;
    const auto add_scenario_opts = [&](CLI::App *sub, bool with_outputs) {
        sub->add_option("scenario", args.scenario, "Scenario YAML file")->required();
        sub->add_option("--set", args.sets, "Override a scenario field: key=value (dotted path)");
        sub->add_option("--seed", args.seed, "Override the scenario seed");
        sub->add_flag("--no-autoscale", args.no_autoscale, "Disable VNF auto-scaling");
        if (with_outputs)
        {
            sub->add_option("--out", args.out, "Output directory")->capture_default_str();
        }
    };

    auto *run = app.add_subcommand("run", "Run a scenario and write reports");
    add_scenario_opts(run, true);
    run->add_option("--event-log", args.event_log, "Write the event log (time, seq, kind, entity)");
    run->add_option("--flow-log", args.flow_log, "Write the flow log CSV");

    auto *validate = app.add_subcommand("validate", "Check a scenario without running it");
    add_scenario_opts(validate, false);

    std::string baseline;
    std::string variant;
    std::string csv;
    auto *compare = app.add_subcommand("compare", "Compare two reports (baseline first)");
    compare->add_option("baseline", baseline, "Baseline report directory or summary.csv")->required();
    compare->add_option("variant", variant, "Variant report directory or summary.csv")->required();
    compare->add_option("--csv", csv, "Also write the comparison as CSV");

    std::vector<std::string> params;
    unsigned jobs = 1;
    auto *sweep = app.add_subcommand("sweep", "Run a cartesian parameter grid");
    add_scenario_opts(sweep, true);
    sweep->add_option("--param", params, "Axis as key=v1,v2,...")->required();
    sweep->add_option("--jobs", jobs, "Concurrent runs")->capture_default_str();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try
    {
        if (*run)
        {
            return cmd_run(args);
        }
        if (*validate)
        {
            return cmd_validate(args);
        }
        if (*compare)
        {
            return cmd_compare(baseline, variant, csv);
        }
        if (*sweep)
        {
            return cmd_sweep(args, params, jobs);
        }
    }
    catch (const ScenarioError &e)
    {
        print_diagnostics(e);
        return exit_config;
    }
    catch (const ConfigError &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_ok;
}
