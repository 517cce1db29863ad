#pragma once

#include "nfvsim/compute.hpp"
#include "nfvsim/placement.hpp"
#include "nfvsim/sfc.hpp"
#include "nfvsim/topology.hpp"
#include "nfvsim/workload.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nfvsim
{
    struct Diagnostic
    {
        /// JSON-pointer style location, e.g. "/chains/0/chain/2".
        std::string path;
        std::string message;
    };

    class ScenarioError : public ConfigError
    {
    public:
        explicit ScenarioError(std::vector<Diagnostic> diagnostics);
        const std::vector<Diagnostic> &diagnostics() const noexcept { return diagnostics_; }

    private:
        std::vector<Diagnostic> diagnostics_;
    };

    struct HostClass
    {
        std::string name;
        int cores = 8;
        double mips_per_core = 25000.0;
        double ram_mib = 65536.0;
        PowerModel power;
        /// Explicit host ids; when empty the class applies to `dc` (or every host).
        std::vector<std::string> hosts;
        std::string dc;
    };

    struct VmGroup
    {
        std::string name;
        double mips = 0.0;
        int cores = 1;
        double ram_mib = 1024.0;
        std::vector<std::string> ids;
    };

    struct MigrationSpec
    {
        double at_s = 0.0;
        std::string vm;
        std::string to_host;
    };

    struct Scenario
    {
        std::uint64_t seed = 0;
        double t_end_s = 600.0;

        Topology topology;
        std::vector<HostSpec> hosts;
        SwitchPowerModel switch_power;

        std::vector<VmGroup> vm_groups;
        std::vector<VnfType> vnf_types;
        std::map<std::string, int> initial_instances;
        std::vector<VnfChainPolicy> chains;

        AutoScaleConfig autoscale;
        PlacementPolicy placement;
        /// Max-min weight per priority class; unlisted classes weigh 1.
        std::map<int, double> class_weights{{1, 4.0}, {2, 2.0}, {3, 1.0}};
        double migration_bandwidth_bps = 1e9;

        std::optional<GeneratorConfig> generator;
        std::optional<std::filesystem::path> trace;
        std::vector<Request> trace_requests;
        AdmissionConfig admission;
        std::vector<MigrationSpec> migrations;

        /// Resolved configuration as (dotted key, value), for report echo.
        std::vector<std::pair<std::string, std::string>> echo;

        double class_weight(int priority_class) const;
        std::vector<std::string> vm_ids() const;
    };

    /// "key=value" override; key is a dotted path ("autoscale.enabled",
    /// "vnf_types.0.per_request_mi"), value is parsed as a YAML scalar.
    struct Override
    {
        std::string key;
        std::string value;
    };

    Override parse_override(std::string_view text);

    /// Parses and validates. Throws ScenarioError carrying every problem found.
    Scenario load_scenario_text(std::string_view yaml, const std::filesystem::path &base_dir = ".",
                                std::span<const Override> overrides = {});
    Scenario load_scenario(const std::filesystem::path &file, std::span<const Override> overrides = {});

    /// Diagnostics only; empty means valid.
    std::vector<Diagnostic> validate_scenario_file(const std::filesystem::path &file,
                                                   std::span<const Override> overrides = {});
}
