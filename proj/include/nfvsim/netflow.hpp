#pragma once

#include "nfvsim/kernel.hpp"
#include "nfvsim/topology.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nfvsim
{
    class RoutingError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct FlowDemand
    {
        double weight = 1.0;
        std::span<const DirectedLink> links;
    };

    /// Weighted max-min fair rates by progressive filling. Every flow must cross
    /// at least one link; capacities are indexed by DirectedLink.
    std::vector<double> allocate_rates(std::span<const FlowDemand> flows, std::span<const double> capacities);

    struct TransferSpec
    {
        NodeIndex src_host = 0;
        NodeIndex dst_host = 0;
        std::string src_vm;
        std::string dst_vm;
        double bytes = 0.0;
        double weight = 1.0;
    };

    struct FlowRecord
    {
        std::uint64_t id = 0;
        std::string src;
        std::string dst;
        double bytes = 0.0;
        SimTime start = 0.0;
        SimTime end = 0.0;
        double mean_rate_bps = 0.0;
        std::string path;
    };

    struct Flow
    {
        std::uint64_t id = 0;
        NodeIndex src = 0;
        NodeIndex dst = 0;
        std::string src_vm;
        std::string dst_vm;
        double bytes_total = 0.0;
        double bytes_remaining = 0.0;
        double bytes_delivered = 0.0;
        double weight = 1.0;
        Path path;
        double rate = 0.0;
        SimTime start_time = 0.0;
        SimTime last_update = 0.0;
        EventHandle completion;
        std::function<void(const FlowRecord &)> on_delivered;
    };

    /// Per-switch rules: flow id -> next hop. Indexed by NodeIndex.
    using ForwardingTable = std::vector<std::map<std::uint64_t, NodeIndex>>;

    // SDN controller plus fluid data plane. Rates are recomputed over all active
    // flows on every arrival, completion and reroute; flows whose rate changes
    // get their completion event rescheduled from the bytes still outstanding.
    class NetworkController
    {
    public:
        using DeliveryCallback = std::function<void(const FlowRecord &)>;
        using VmLocator = std::function<NodeIndex(const std::string &vm)>;

        NetworkController(Simulator &sim, const Topology &topo, std::uint64_t ecmp_salt);

        /// Picks one of the equal-cost shortest paths by hashing (flow id, salt).
        const Path &route_flow(std::uint64_t flow_id, NodeIndex src, NodeIndex dst);

        /// Registers the flow and schedules its delivery. Same-host transfers
        /// complete at the current time without touching the network.
        std::uint64_t start_transfer(const TransferSpec &spec, DeliveryCallback on_delivered);

        /// Re-routes flows that traverse `node` or whose endpoint VM moved, as
        /// reported by `locate`. Returns the number of flows re-routed.
        std::size_t reroute_flows_for(NodeIndex node, const VmLocator &locate);

        const std::map<std::uint64_t, Flow> &active() const noexcept { return active_; }
        const ForwardingTable &forwarding() const noexcept { return rules_; }
        const std::vector<std::vector<std::uint64_t>> &link_loads() const noexcept { return loads_; }

        /// Rules equal exactly the union of the active flows' paths.
        bool rules_consistent() const;
        /// Largest (load - capacity) / capacity over directed links.
        double max_relative_overload() const;
        /// Largest |delivered - total| / total seen at a completion.
        double max_conservation_error() const noexcept { return max_conservation_error_; }

        std::uint64_t flows_started() const noexcept { return next_id_; }
        std::uint64_t flows_completed() const noexcept { return completed_; }

        /// Called when an undirected link gains its first flow (true) or loses its last (false).
        void set_link_activity_listener(std::function<void(LinkIndex, bool)> fn) { on_link_activity_ = std::move(fn); }
        /// CSV rows: flow_id,src,dst,bytes,start_s,end_s,mean_rate_bps,path (no header).
        void set_flow_log(std::ostream *out) noexcept { flow_log_ = out; }

    private:
        void install(Flow &flow);
        void uninstall(Flow &flow);
        void advance(Flow &flow, SimTime now);
        void reallocate();
        void on_transmitted(std::uint64_t id);
        void finish(Flow flow);
        void deliver(FlowRecord record, const DeliveryCallback &cb);

        Simulator &sim_;
        const Topology &topo_;
        std::uint64_t salt_;
        std::vector<double> capacities_;
        std::map<std::pair<NodeIndex, NodeIndex>, std::vector<Path>> path_cache_;
        std::map<std::uint64_t, Flow> active_;
        ForwardingTable rules_;
        std::vector<std::vector<std::uint64_t>> loads_;
        std::vector<std::size_t> link_flows_;
        std::function<void(LinkIndex, bool)> on_link_activity_;
        std::ostream *flow_log_ = nullptr;
        std::uint64_t next_id_ = 0;
        std::uint64_t completed_ = 0;
        double max_conservation_error_ = 0.0;
    };
}
