#pragma once

#include "nfvsim/compute.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nfvsim
{
    enum class PlacementKind : std::uint8_t
    {
        FirstFit,
        BestFitMostFull,
        NetworkAware,
    };

    std::string_view to_string(PlacementKind kind) noexcept;
    std::optional<PlacementKind> parse_placement_kind(std::string_view s) noexcept;

    struct PlacementPolicy
    {
        PlacementKind kind = PlacementKind::FirstFit;
        /// Communication weight between two VMs; lookups try both orders.
        std::map<std::pair<std::string, std::string>, double> affinity;
        /// Offline variant: process VMs by decreasing mips instead of given order.
        bool sort_decreasing = false;

        double affinity_between(const std::string &a, const std::string &b) const;
    };

    struct PlacementDecision
    {
        std::string vm;
        std::string host;
        double score = 0.0;
    };

    struct PlacementResult
    {
        std::map<std::string, std::string> assignments;
        std::vector<PlacementDecision> decisions;
        std::vector<std::string> failures;
        /// Hosts holding at least one VM afterwards, counting prior residents.
        int hosts_used = 0;
        std::vector<HostState> hosts;
    };

    /// Hop distance between two hosts.
    using HostDistance = std::function<int(const std::string &, const std::string &)>;

    /// Online greedy placement over a host snapshot. VMs already resident on the
    /// snapshot count as placed partners for the network-aware score.
    PlacementResult place(std::span<const VmSpec> vms, std::vector<HostState> hosts, const PlacementPolicy &policy,
                          const HostDistance &distance = {});

    struct Move
    {
        std::string vm;
        std::string from;
        std::string to;
    };

    /// Repeatedly empties the least-utilized host onto the fullest hosts that can
    /// take its VMs, until no host can be emptied.
    std::vector<Move> consolidate(std::vector<HostState> hosts, const std::map<std::string, VmSpec> &vms);

    int hosts_in_use(std::span<const HostState> hosts) noexcept;

    /// Rows: vm_id,host_id,policy,score (with header).
    void write_placement_log(const std::filesystem::path &file, std::span<const PlacementDecision> decisions,
                             PlacementKind kind);
}
