#pragma once

// Reference implementations used only by tests. Each one is written without
// reusing the library routine it checks.

#include "nfvsim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace oracle
{
    // All minimum-hop paths by iterative deepening over simple paths. Hosts other
    // than the endpoints are never entered.
    inline std::vector<std::vector<std::string>> min_hop_paths(const nfvsim::Topology &t, const std::string &src,
                                                               const std::string &dst)
    {
        const auto s = t.index_of(src);
        const auto d = t.index_of(dst);
        std::vector<std::vector<std::string>> found;
        std::vector<nfvsim::NodeIndex> stack{s};
        std::vector<bool> on_path(t.node_count(), false);
        on_path[s] = true;

        const auto dfs = [&](auto &self, std::size_t depth_left) -> void {
            const auto cur = stack.back();
            if (depth_left == 0)
            {
                if (cur == d)
                {
                    std::vector<std::string> ids;
                    for (const auto n : stack)
                    {
                        ids.push_back(t.node(n).id);
                    }
                    found.push_back(std::move(ids));
                }
                return;
            }
            for (const auto &adj : t.neighbors(cur))
            {
                const auto nxt = adj.node;
                if (on_path[nxt])
                {
                    continue;
                }
                if (nxt != d && t.node(nxt).kind == nfvsim::NodeKind::Host)
                {
                    continue;
                }
                on_path[nxt] = true;
                stack.push_back(nxt);
                self(self, depth_left - 1);
                stack.pop_back();
                on_path[nxt] = false;
            }
        };
        for (std::size_t depth = 1; depth < t.node_count() && found.empty(); ++depth)
        {
            dfs(dfs, depth);
        }
        std::sort(found.begin(), found.end());
        return found;
    }

    // Hop distance matrix by Floyd-Warshall; hosts are only endpoints.
    inline std::vector<std::vector<std::size_t>> all_pairs_hops(const nfvsim::Topology &t)
    {
        const auto n = t.node_count();
        constexpr auto inf = std::numeric_limits<std::size_t>::max() / 4;
        std::vector<std::vector<std::size_t>> dist(n, std::vector<std::size_t>(n, inf));
        for (std::size_t i = 0; i < n; ++i)
        {
            dist[i][i] = 0;
            for (const auto &adj : t.neighbors(i))
            {
                dist[i][adj.node] = 1;
            }
        }
        for (std::size_t k = 0; k < n; ++k)
        {
            if (t.node(k).kind == nfvsim::NodeKind::Host)
            {
                continue;
            }
            for (std::size_t i = 0; i < n; ++i)
            {
                for (std::size_t j = 0; j < n; ++j)
                {
                    dist[i][j] = std::min(dist[i][j], dist[i][k] + dist[k][j]);
                }
            }
        }
        return dist;
    }

    struct Demand
    {
        double weight;
        std::vector<std::size_t> links;
    };

    // Progressive filling driven by bisection on the common fill level instead of
    // a closed-form bottleneck computation.
    inline std::vector<double> water_fill(const std::vector<Demand> &flows, const std::vector<double> &caps)
    {
        const auto n = flows.size();
        std::vector<double> rate(n, 0.0);
        std::vector<bool> frozen(n, false);
        double base_level = 0.0;
        const auto load_at = [&](double level, std::size_t link) {
            double load = 0.0;
            for (std::size_t f = 0; f < n; ++f)
            {
                if (std::find(flows[f].links.begin(), flows[f].links.end(), link) == flows[f].links.end())
                {
                    continue;
                }
                load += frozen[f] ? rate[f] : flows[f].weight * level;
            }
            return load;
        };
        const auto feasible = [&](double level) {
            for (std::size_t l = 0; l < caps.size(); ++l)
            {
                if (load_at(level, l) > caps[l])
                {
                    return false;
                }
            }
            return true;
        };
        while (std::find(frozen.begin(), frozen.end(), false) != frozen.end())
        {
            double lo = base_level;
            double hi = std::max(1.0, 2.0 * base_level);
            while (feasible(hi))
            {
                lo = hi;
                hi *= 2.0;
            }
            for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it)
            {
                const double mid = 0.5 * (lo + hi);
                (feasible(mid) ? lo : hi) = mid;
            }
            const double level = lo;
            // Links within numerical reach of capacity are saturated.
            std::vector<bool> tight(caps.size(), false);
            for (std::size_t l = 0; l < caps.size(); ++l)
            {
                bool has_open = false;
                for (std::size_t f = 0; f < n; ++f)
                {
                    if (!frozen[f] &&
                        std::find(flows[f].links.begin(), flows[f].links.end(), l) != flows[f].links.end())
                    {
                        has_open = true;
                    }
                }
                tight[l] = has_open && load_at(level, l) >= caps[l] * (1.0 - 1e-12) - 1e-12;
            }
            bool froze = false;
            for (std::size_t f = 0; f < n; ++f)
            {
                if (frozen[f])
                {
                    continue;
                }
                for (const auto l : flows[f].links)
                {
                    if (tight[l])
                    {
                        rate[f] = flows[f].weight * level;
                        frozen[f] = true;
                        froze = true;
                        break;
                    }
                }
            }
            if (!froze)
            {
                break;
            }
            base_level = level;
        }
        return rate;
    }

    // Fewest hosts holding every VM, by branch and bound. nullopt if infeasible.
    inline std::optional<int> min_hosts(const std::vector<double> &vm_mips, const std::vector<double> &vm_ram,
                                        const std::vector<double> &host_mips, const std::vector<double> &host_ram)
    {
        const auto nv = vm_mips.size();
        const auto nh = host_mips.size();
        std::vector<double> free_m = host_mips;
        std::vector<double> free_r = host_ram;
        std::vector<int> count(nh, 0);
        int best = std::numeric_limits<int>::max();
        const auto rec = [&](auto &self, std::size_t v, int used) -> void {
            if (used >= best)
            {
                return;
            }
            if (v == nv)
            {
                best = used;
                return;
            }
            for (std::size_t h = 0; h < nh; ++h)
            {
                if (free_m[h] + 1e-9 < vm_mips[v] || free_r[h] + 1e-9 < vm_ram[v])
                {
                    continue;
                }
                free_m[h] -= vm_mips[v];
                free_r[h] -= vm_ram[v];
                const int add = count[h]++ == 0 ? 1 : 0;
                self(self, v + 1, used + add);
                --count[h];
                free_m[h] += vm_mips[v];
                free_r[h] += vm_ram[v];
            }
        };
        rec(rec, 0, 0);
        if (best == std::numeric_limits<int>::max())
        {
            return std::nullopt;
        }
        return best;
    }

    // Processor sharing on one link of capacity `cap` bits/s with equal weights:
    // finish time of each job (start time, size in bits).
    inline std::vector<double> fluid_single_link(const std::vector<double> &start, const std::vector<double> &bits,
                                                 double cap)
    {
        const auto n = start.size();
        std::vector<double> left = bits;
        std::vector<double> done(n, -1.0);
        double t = *std::min_element(start.begin(), start.end());
        while (std::any_of(done.begin(), done.end(), [](double d) { return d < 0.0; }))
        {
            std::vector<std::size_t> act;
            double next_arrival = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < n; ++i)
            {
                if (done[i] >= 0.0)
                {
                    continue;
                }
                if (start[i] <= t)
                {
                    act.push_back(i);
                }
                else
                {
                    next_arrival = std::min(next_arrival, start[i]);
                }
            }
            if (act.empty())
            {
                t = next_arrival;
                continue;
            }
            const double share = cap / static_cast<double>(act.size());
            std::vector<double> eta;
            double first_finish = std::numeric_limits<double>::infinity();
            for (const auto i : act)
            {
                eta.push_back(t + left[i] / share);
                first_finish = std::min(first_finish, eta.back());
            }
            const double until = std::min(first_finish, next_arrival);
            for (std::size_t k = 0; k < act.size(); ++k)
            {
                const auto i = act[k];
                if (until == first_finish && eta[k] == first_finish)
                {
                    left[i] = 0.0;
                    done[i] = until;
                }
                else
                {
                    left[i] -= share * (until - t);
                }
            }
            t = until;
        }
        return done;
    }
}
