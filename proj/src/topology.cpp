#include "nfvsim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fmt/format.h>
#include <limits>
#include <set>

namespace nfvsim
{
    namespace
    {
        constexpr std::size_t Unreachable = std::numeric_limits<std::size_t>::max();

        std::string numbered(std::string_view dc, std::string_view role, std::size_t n)
        {
            return fmt::format("{}-{}-{:04}", dc, role, n);
        }
    }

    std::string_view to_string(NodeKind kind) noexcept
    {
        switch (kind)
        {
        case NodeKind::Host:
            return "host";
        case NodeKind::EdgeSwitch:
            return "edge-switch";
        case NodeKind::AggregationSwitch:
            return "aggregation-switch";
        case NodeKind::CoreSwitch:
            return "core-switch";
        case NodeKind::Gateway:
            return "gateway";
        }
        return "unknown";
    }

    std::optional<NodeKind> parse_node_kind(std::string_view text) noexcept
    {
        for (auto kind : {NodeKind::Host, NodeKind::EdgeSwitch, NodeKind::AggregationSwitch, NodeKind::CoreSwitch,
                          NodeKind::Gateway})
        {
            if (to_string(kind) == text)
            {
                return kind;
            }
        }
        return std::nullopt;
    }

    NodeIndex Topology::add_node(Node node)
    {
        if (node.id.empty())
        {
            throw ConfigError("topology: empty node id");
        }
        if (index_.contains(node.id))
        {
            throw ConfigError("topology: duplicate node id '" + node.id + "'");
        }
        const NodeIndex i = nodes_.size();
        index_.emplace(node.id, i);
        nodes_.push_back(std::move(node));
        adjacency_.emplace_back();
        return i;
    }

    LinkIndex Topology::add_link(std::string_view a, std::string_view b, double capacity_bps, double latency_s)
    {
        const NodeIndex ia = index_of(a);
        const NodeIndex ib = index_of(b);
        if (ia == ib)
        {
            throw ConfigError(fmt::format("topology: self-loop on '{}'", a));
        }
        if (!(capacity_bps > 0.0) || !std::isfinite(capacity_bps))
        {
            throw ConfigError(fmt::format("topology: link {}-{} needs positive capacity", a, b));
        }
        if (!(latency_s >= 0.0) || !std::isfinite(latency_s))
        {
            throw ConfigError(fmt::format("topology: link {}-{} has negative latency", a, b));
        }
        for (const auto &adj : adjacency_[ia])
        {
            if (adj.node == ib)
            {
                throw ConfigError(fmt::format("topology: parallel link {}-{}", a, b));
            }
        }
        const LinkIndex li = links_.size();
        links_.push_back(Link{ia, ib, capacity_bps, latency_s});
        adjacency_[ia].push_back(Adjacent{ib, li});
        adjacency_[ib].push_back(Adjacent{ia, li});
        return li;
    }

    std::optional<NodeIndex> Topology::find(std::string_view id) const
    {
        const auto it = index_.find(std::string(id));
        if (it == index_.end())
        {
            return std::nullopt;
        }
        return it->second;
    }

    NodeIndex Topology::index_of(std::string_view id) const
    {
        if (auto i = find(id))
        {
            return *i;
        }
        throw ConfigError(fmt::format("topology: unknown node '{}'", id));
    }

    std::vector<NodeIndex> Topology::nodes_of_kind(NodeKind kind) const
    {
        std::vector<NodeIndex> out;
        for (NodeIndex i = 0; i < nodes_.size(); ++i)
        {
            if (nodes_[i].kind == kind)
            {
                out.push_back(i);
            }
        }
        std::sort(out.begin(), out.end(), [&](NodeIndex x, NodeIndex y) { return nodes_[x].id < nodes_[y].id; });
        return out;
    }

    std::vector<std::string> Topology::datacenters() const
    {
        std::set<std::string> dcs;
        for (const auto &n : nodes_)
        {
            dcs.insert(n.dc);
        }
        return {dcs.begin(), dcs.end()};
    }

    DirectedLink Topology::directed(LinkIndex link, NodeIndex from) const
    {
        const auto &l = links_.at(link);
        if (l.a == from)
        {
            return 2 * link;
        }
        if (l.b == from)
        {
            return 2 * link + 1;
        }
        throw std::logic_error("directed: node is not an endpoint of the link");
    }

    NodeIndex Topology::head(DirectedLink dl) const
    {
        const auto &l = links_.at(dl / 2);
        return (dl % 2 == 0) ? l.b : l.a;
    }

    std::vector<double> Topology::directed_capacities() const
    {
        std::vector<double> caps(directed_link_count());
        for (std::size_t i = 0; i < links_.size(); ++i)
        {
            caps[2 * i] = links_[i].capacity_bps;
            caps[2 * i + 1] = links_[i].capacity_bps;
        }
        return caps;
    }

    std::vector<std::size_t> Topology::hop_distances(NodeIndex src) const
    {
        std::vector<std::size_t> dist(nodes_.size(), Unreachable);
        std::deque<NodeIndex> frontier{src};
        dist.at(src) = 0;
        while (!frontier.empty())
        {
            const NodeIndex u = frontier.front();
            frontier.pop_front();
            if (u != src && nodes_[u].kind == NodeKind::Host)
            {
                continue;
            }
            for (const auto &adj : adjacency_[u])
            {
                if (dist[adj.node] == Unreachable)
                {
                    dist[adj.node] = dist[u] + 1;
                    frontier.push_back(adj.node);
                }
            }
        }
        return dist;
    }

    void Topology::validate() const
    {
        for (NodeIndex i = 0; i < nodes_.size(); ++i)
        {
            const auto &n = nodes_[i];
            for (const auto &adj : adjacency_[i])
            {
                const auto &m = nodes_[adj.node];
                if (n.kind == NodeKind::Host && m.kind != NodeKind::EdgeSwitch)
                {
                    throw ConfigError(fmt::format("topology: host '{}' attaches to non-edge node '{}'", n.id, m.id));
                }
            }
            if (n.kind == NodeKind::Host && adjacency_[i].empty())
            {
                throw ConfigError(fmt::format("topology: host '{}' is not attached", n.id));
            }
        }
        // Connectivity within each data center, ignoring inter-DC links.
        for (const auto &dc : datacenters())
        {
            std::vector<NodeIndex> members;
            for (NodeIndex i = 0; i < nodes_.size(); ++i)
            {
                if (nodes_[i].dc == dc)
                {
                    members.push_back(i);
                }
            }
            std::vector<bool> seen(nodes_.size(), false);
            std::deque<NodeIndex> frontier{members.front()};
            seen[members.front()] = true;
            std::size_t reached = 1;
            while (!frontier.empty())
            {
                const NodeIndex u = frontier.front();
                frontier.pop_front();
                for (const auto &adj : adjacency_[u])
                {
                    if (!seen[adj.node] && nodes_[adj.node].dc == dc)
                    {
                        seen[adj.node] = true;
                        ++reached;
                        frontier.push_back(adj.node);
                    }
                }
            }
            if (reached != members.size())
            {
                throw ConfigError(fmt::format("topology: data center '{}' is not connected", dc));
            }
        }
    }

    Topology build_fat_tree(const FatTreeParams &p)
    {
        if (p.k < 2 || p.k % 2 != 0)
        {
            throw ConfigError(fmt::format("fat_tree: k must be an even integer >= 2 (got {})", p.k));
        }
        const std::size_t k = static_cast<std::size_t>(p.k);
        const std::size_t half = k / 2;
        Topology t;

        for (std::size_t c = 0; c < half * half; ++c)
        {
            t.add_node(Node{numbered(p.dc, "core", c), NodeKind::CoreSwitch, p.dc, -1});
        }
        for (std::size_t pod = 0; pod < k; ++pod)
        {
            const int pod_i = static_cast<int>(pod);
            for (std::size_t j = 0; j < half; ++j)
            {
                t.add_node(Node{numbered(p.dc, "agg", pod * half + j), NodeKind::AggregationSwitch, p.dc, pod_i});
            }
            for (std::size_t e = 0; e < half; ++e)
            {
                t.add_node(Node{numbered(p.dc, "edge", pod * half + e), NodeKind::EdgeSwitch, p.dc, pod_i});
                for (std::size_t h = 0; h < half; ++h)
                {
                    t.add_node(Node{numbered(p.dc, "host", (pod * half + e) * half + h), NodeKind::Host, p.dc, pod_i});
                }
            }
        }

        for (std::size_t pod = 0; pod < k; ++pod)
        {
            for (std::size_t e = 0; e < half; ++e)
            {
                const auto edge = numbered(p.dc, "edge", pod * half + e);
                for (std::size_t h = 0; h < half; ++h)
                {
                    t.add_link(numbered(p.dc, "host", (pod * half + e) * half + h), edge, p.host_link_bps,
                               p.latency_s);
                }
                for (std::size_t j = 0; j < half; ++j)
                {
                    t.add_link(edge, numbered(p.dc, "agg", pod * half + j), p.switch_link_bps, p.latency_s);
                }
            }
            // Aggregation switch j of every pod reaches core group j.
            for (std::size_t j = 0; j < half; ++j)
            {
                const auto agg = numbered(p.dc, "agg", pod * half + j);
                for (std::size_t c = 0; c < half; ++c)
                {
                    t.add_link(agg, numbered(p.dc, "core", j * half + c), p.switch_link_bps, p.latency_s);
                }
            }
        }
        return t;
    }

    namespace
    {
        std::string ensure_gateway(Topology &t, const std::string &dc)
        {
            for (const auto &n : t.nodes())
            {
                if (n.kind == NodeKind::Gateway && n.dc == dc)
                {
                    return n.id;
                }
            }
            std::vector<std::string> cores;
            for (const auto &n : t.nodes())
            {
                if (n.kind == NodeKind::CoreSwitch && n.dc == dc)
                {
                    cores.push_back(n.id);
                }
            }
            if (cores.empty())
            {
                throw ConfigError(fmt::format("connect_clouds: data center '{}' has no core switches", dc));
            }
            const std::string gw = dc + "-gw";
            t.add_node(Node{gw, NodeKind::Gateway, dc, -1});
            double cap = 0.0;
            for (const auto &l : t.links())
            {
                cap = std::max(cap, l.capacity_bps);
            }
            for (const auto &c : cores)
            {
                const auto ci = t.index_of(c);
                const auto &adj = t.neighbors(ci);
                const double lat = adj.empty() ? 0.0 : t.link(adj.front().link).latency_s;
                t.add_link(gw, c, cap, lat);
            }
            return gw;
        }

        void copy_into(Topology &dst, const Topology &src)
        {
            for (const auto &n : src.nodes())
            {
                dst.add_node(n);
            }
            for (const auto &l : src.links())
            {
                dst.add_link(src.node(l.a).id, src.node(l.b).id, l.capacity_bps, l.latency_s);
            }
        }
    }

    Topology connect_clouds(const Topology &a, const Topology &b, double wan_capacity_bps, double wan_latency_s)
    {
        const auto dcs_a = a.datacenters();
        const auto dcs_b = b.datacenters();
        if (dcs_b.size() != 1)
        {
            throw ConfigError("connect_clouds: the joined topology must hold exactly one data center");
        }
        for (const auto &dc : dcs_a)
        {
            if (dc == dcs_b.front())
            {
                throw ConfigError(fmt::format("connect_clouds: data center '{}' appears on both sides", dc));
            }
        }
        Topology merged;
        copy_into(merged, a);
        copy_into(merged, b);

        std::vector<std::string> gws_a;
        for (const auto &dc : dcs_a)
        {
            gws_a.push_back(ensure_gateway(merged, dc));
        }
        const auto gw_b = ensure_gateway(merged, dcs_b.front());
        for (const auto &gw : gws_a)
        {
            merged.add_link(gw, gw_b, wan_capacity_bps, wan_latency_s);
        }
        return merged;
    }

    std::vector<Path> equal_cost_paths(const Topology &topo, NodeIndex src, NodeIndex dst)
    {
        if (src >= topo.node_count() || dst >= topo.node_count())
        {
            throw ConfigError("equal_cost_paths: unknown node");
        }
        if (src == dst)
        {
            throw ConfigError("equal_cost_paths: source equals destination");
        }
        // Distances towards dst; a node n lies on a shortest path iff dist[n] == dist[prev] - 1.
        const auto dist = topo.hop_distances(dst);
        std::vector<Path> out;
        if (dist[src] == Unreachable)
        {
            return out;
        }

        Path current;
        current.nodes.push_back(src);
        auto extend = [&](auto &&self, NodeIndex u) -> void {
            if (u == dst)
            {
                out.push_back(current);
                return;
            }
            for (const auto &adj : topo.neighbors(u))
            {
                if (dist[adj.node] + 1 != dist[u])
                {
                    continue;
                }
                if (adj.node != dst && topo.node(adj.node).kind == NodeKind::Host)
                {
                    continue;
                }
                current.nodes.push_back(adj.node);
                current.links.push_back(topo.directed(adj.link, u));
                current.latency_s += topo.link(adj.link).latency_s;
                self(self, adj.node);
                current.latency_s -= topo.link(adj.link).latency_s;
                current.links.pop_back();
                current.nodes.pop_back();
            }
        };
        extend(extend, src);

        // Recompute latency exactly per path (undo arithmetic above may drift).
        for (auto &p : out)
        {
            p.latency_s = 0.0;
            for (const auto dl : p.links)
            {
                p.latency_s += topo.link(dl / 2).latency_s;
            }
        }
        std::sort(out.begin(), out.end(), [&](const Path &x, const Path &y) {
            return std::lexicographical_compare(
                x.nodes.begin(), x.nodes.end(), y.nodes.begin(), y.nodes.end(),
                [&](NodeIndex p, NodeIndex q) { return topo.node(p).id < topo.node(q).id; });
        });
        return out;
    }

    std::vector<std::vector<std::string>> equal_cost_shortest_paths(const Topology &topo, std::string_view src,
                                                                    std::string_view dst)
    {
        std::vector<std::vector<std::string>> out;
        for (const auto &p : equal_cost_paths(topo, topo.index_of(src), topo.index_of(dst)))
        {
            std::vector<std::string> ids;
            ids.reserve(p.nodes.size());
            for (const auto n : p.nodes)
            {
                ids.push_back(topo.node(n).id);
            }
            out.push_back(std::move(ids));
        }
        return out;
    }

    std::string format_path(const Topology &topo, const Path &path)
    {
        std::string s;
        for (std::size_t i = 0; i < path.nodes.size(); ++i)
        {
            if (i > 0)
            {
                s += '>';
            }
            s += topo.node(path.nodes[i]).id;
        }
        return s;
    }
}
