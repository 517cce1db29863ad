#pragma once

#include "nfvsim/metrics.hpp"
#include "nfvsim/placement.hpp"
#include "nfvsim/scenario.hpp"
#include "nfvsim/sfc.hpp"

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace nfvsim
{
    struct RunOptions
    {
        std::ostream *event_log = nullptr;
        std::ostream *flow_log = nullptr;
    };

    struct ScaleEvent
    {
        SimTime time = 0.0;
        std::string type;
        /// "scale-out", "scale-out-failed", "activate", "scale-in", "remove".
        std::string action;
        std::string instance;
        std::string host;
        double utilization = 0.0;
    };

    struct RunResult
    {
        Report report;
        DeploymentDescriptor descriptor;
        std::vector<PlacementDecision> placements;
        PlacementKind placement_kind = PlacementKind::FirstFit;
        std::vector<ScaleEvent> scaling;

        std::size_t submitted = 0;
        std::size_t chained_requests = 0;
        std::size_t chain_violations = 0;
        std::uint64_t events_processed = 0;
        SimTime final_clock = 0.0;
        double max_link_overload = 0.0;
        bool rules_consistent = true;
        std::size_t migrations_completed = 0;
        std::size_t migrations_rejected = 0;
        std::size_t flows_rerouted = 0;
        /// Wall-clock seconds; never written to report files.
        double wall_seconds = 0.0;
    };

    /// Runs to t_end, then drains in-flight work.
    RunResult run_experiment(const Scenario &scenario, const RunOptions &options = {});

    /// requests.csv, energy.csv, summary.csv, descriptor.json, placement.csv, scaling.csv.
    void write_outputs(const RunResult &result, const std::filesystem::path &dir);

    // -- comparison -----------------------------------------------------------

    struct ComparisonRow
    {
        std::string metric;
        double baseline = 0.0;
        double variant = 0.0;
        /// (baseline - variant) / baseline * 100; positive means the variant reduced the metric.
        double percent = 0.0;
    };

    struct ComparisonResult
    {
        std::vector<ComparisonRow> rows;
        const ComparisonRow *find(std::string_view metric) const;
    };

    double relative_change_percent(double baseline, double variant);

    /// Numeric, non-config rows present in both summaries. Throws ConfigError
    /// when the metric sets differ.
    ComparisonResult compare_summaries(const std::vector<std::pair<std::string, std::string>> &baseline,
                                       const std::vector<std::pair<std::string, std::string>> &variant);
    /// Accepts report directories or summary.csv paths.
    ComparisonResult compare_reports(const std::filesystem::path &baseline, const std::filesystem::path &variant);

    std::string format_comparison(const ComparisonResult &result);
    void write_comparison_csv(const ComparisonResult &result, const std::filesystem::path &file);

    // -- sweep ------------------------------------------------------------------

    struct SweepAxis
    {
        std::string key;
        std::vector<std::string> values;
    };

    /// "key=v1,v2,v3".
    SweepAxis parse_sweep_axis(std::string_view text);

    struct SweepCell
    {
        std::size_t index = 0;
        std::vector<Override> overrides;
        std::filesystem::path out_dir;
        /// 0 success, 1 runtime failure, 2 configuration error.
        int status = 0;
        std::string error;
        double mean_response_s = 0.0;
        double mean_net_s = 0.0;
        int vnf_vm_count_final = 0;
    };

    /// Cartesian grid over the axes; one output directory per cell plus an index
    /// file sweep.csv under out_root. Runs up to `jobs` cells concurrently.
    std::vector<SweepCell> run_sweep(const std::filesystem::path &scenario, std::span<const Override> base,
                                     std::span<const SweepAxis> axes, const std::filesystem::path &out_root,
                                     unsigned jobs);
}
