#pragma once

#include "nfvsim/kernel.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nfvsim
{
    using NodeIndex = std::size_t;
    using LinkIndex = std::size_t;
    /// Directed link id: 2 * link for a->b, 2 * link + 1 for b->a.
    using DirectedLink = std::size_t;

    enum class NodeKind : std::uint8_t
    {
        Host,
        EdgeSwitch,
        AggregationSwitch,
        CoreSwitch,
        Gateway,
    };

    std::string_view to_string(NodeKind kind) noexcept;
    std::optional<NodeKind> parse_node_kind(std::string_view text) noexcept;
    inline bool is_switch(NodeKind kind) noexcept { return kind != NodeKind::Host; }

    struct Node
    {
        std::string id;
        NodeKind kind = NodeKind::Host;
        std::string dc;
        int pod = -1;
    };

    struct Link
    {
        NodeIndex a = 0;
        NodeIndex b = 0;
        double capacity_bps = 0.0;
        double latency_s = 0.0;
    };

    struct Adjacent
    {
        NodeIndex node;
        LinkIndex link;
    };

    /// A node path with its directed links and summed propagation latency.
    struct Path
    {
        std::vector<NodeIndex> nodes;
        std::vector<DirectedLink> links;
        double latency_s = 0.0;

        std::size_t hops() const noexcept { return links.size(); }
    };

    class Topology
    {
    public:
        NodeIndex add_node(Node node);
        LinkIndex add_link(std::string_view a, std::string_view b, double capacity_bps, double latency_s);

        /// Checks structural invariants: hosts attach only to edge switches,
        /// every data center is connected.
        void validate() const;

        std::size_t node_count() const noexcept { return nodes_.size(); }
        std::size_t link_count() const noexcept { return links_.size(); }
        std::size_t directed_link_count() const noexcept { return 2 * links_.size(); }

        const std::vector<Node> &nodes() const noexcept { return nodes_; }
        const std::vector<Link> &links() const noexcept { return links_; }
        const Node &node(NodeIndex i) const { return nodes_.at(i); }
        const Link &link(LinkIndex i) const { return links_.at(i); }
        std::span<const Adjacent> neighbors(NodeIndex i) const { return adjacency_.at(i); }

        std::optional<NodeIndex> find(std::string_view id) const;
        /// Throws ConfigError for unknown ids.
        NodeIndex index_of(std::string_view id) const;

        std::vector<NodeIndex> nodes_of_kind(NodeKind kind) const;
        std::vector<std::string> datacenters() const;

        DirectedLink directed(LinkIndex link, NodeIndex from) const;
        NodeIndex head(DirectedLink dl) const;
        double capacity(DirectedLink dl) const { return links_[dl / 2].capacity_bps; }
        std::vector<double> directed_capacities() const;

        /// Unweighted BFS hop distances from src; unreachable nodes get SIZE_MAX.
        /// Hosts other than src are never used as transit nodes.
        std::vector<std::size_t> hop_distances(NodeIndex src) const;

    private:
        std::vector<Node> nodes_;
        std::vector<Link> links_;
        std::vector<std::vector<Adjacent>> adjacency_;
        std::unordered_map<std::string, NodeIndex> index_;
    };

    struct FatTreeParams
    {
        int k = 8;
        double host_link_bps = 1e9;
        double switch_link_bps = 10e9;
        double latency_s = 0.0;
        std::string dc = "dc0";
    };

    /// Canonical k-pod fat-tree: k^3/4 hosts, k^2/2 edge and aggregation switches,
    /// (k/2)^2 core switches. Node ids are "<dc>-host-NNNN", "<dc>-edge-NNNN", etc.
    Topology build_fat_tree(const FatTreeParams &params);

    /// Merges b into a, creating a "<dc>-gw" gateway for each data center that
    /// lacks one (wired to all of its core switches) and a WAN link from b's
    /// gateway to every gateway of a.
    Topology connect_clouds(const Topology &a, const Topology &b, double wan_capacity_bps, double wan_latency_s);

    /// All minimum-hop paths, sorted lexicographically by node-id sequence.
    std::vector<Path> equal_cost_paths(const Topology &topo, NodeIndex src, NodeIndex dst);

    /// Id-based front end of equal_cost_paths.
    std::vector<std::vector<std::string>> equal_cost_shortest_paths(const Topology &topo, std::string_view src,
                                                                    std::string_view dst);

    /// "a>b>c" rendering used in flow logs.
    std::string format_path(const Topology &topo, const Path &path);
}
