#include "nfvsim/netflow.hpp"

#include "nfvsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace nfvsim
{
    namespace
    {
        // Links whose fill level is within this relative distance of the minimum
        // saturate in the same round.
        constexpr double LevelTie = 1e-12;
        // Rate changes below this relative size leave the completion event alone.
        constexpr double RateTolerance = 1e-12;

        bool same_rate(double a, double b)
        {
            return std::abs(a - b) <= RateTolerance * std::max(std::abs(a), std::abs(b));
        }
    }

    std::vector<double> allocate_rates(std::span<const FlowDemand> flows, std::span<const double> capacities)
    {
        const std::size_t n = flows.size();
        std::vector<double> rates(n, 0.0);
        if (n == 0)
        {
            return rates;
        }

        // Compact the links actually used.
        std::vector<int> local(capacities.size(), -1);
        std::vector<DirectedLink> used;
        for (std::size_t f = 0; f < n; ++f)
        {
            if (flows[f].links.empty())
            {
                throw std::invalid_argument("allocate_rates: flow without links");
            }
            if (!(flows[f].weight > 0.0))
            {
                throw std::invalid_argument("allocate_rates: weights must be positive");
            }
            for (const auto dl : flows[f].links)
            {
                if (dl >= capacities.size())
                {
                    throw std::out_of_range("allocate_rates: link id out of range");
                }
                if (local[dl] < 0)
                {
                    local[dl] = static_cast<int>(used.size());
                    used.push_back(dl);
                }
            }
        }
        const std::size_t m = used.size();
        std::vector<double> frozen_load(m, 0.0);
        std::vector<double> open_weight(m, 0.0);
        std::vector<std::size_t> open_count(m, 0);
        std::vector<std::vector<std::size_t>> members(m);
        for (std::size_t f = 0; f < n; ++f)
        {
            for (const auto dl : flows[f].links)
            {
                const auto l = static_cast<std::size_t>(local[dl]);
                open_weight[l] += flows[f].weight;
                ++open_count[l];
                members[l].push_back(f);
            }
        }

        std::vector<bool> frozen(n, false);
        std::size_t remaining = n;
        std::vector<double> level(m, 0.0);
        std::vector<std::size_t> saturated;
        while (remaining > 0)
        {
            double min_level = std::numeric_limits<double>::infinity();
            for (std::size_t l = 0; l < m; ++l)
            {
                if (open_count[l] == 0)
                {
                    continue;
                }
                level[l] = std::max(0.0, capacities[used[l]] - frozen_load[l]) / open_weight[l];
                min_level = std::min(min_level, level[l]);
            }
            saturated.clear();
            for (std::size_t l = 0; l < m; ++l)
            {
                if (open_count[l] > 0 && level[l] <= min_level * (1.0 + LevelTie))
                {
                    saturated.push_back(l);
                }
            }
            for (const auto l : saturated)
            {
                for (const auto f : members[l])
                {
                    if (frozen[f])
                    {
                        continue;
                    }
                    frozen[f] = true;
                    --remaining;
                    rates[f] = flows[f].weight * min_level;
                    for (const auto dl : flows[f].links)
                    {
                        const auto k = static_cast<std::size_t>(local[dl]);
                        frozen_load[k] += rates[f];
                        open_weight[k] -= flows[f].weight;
                        --open_count[k];
                    }
                }
            }
        }
        return rates;
    }

    NetworkController::NetworkController(Simulator &sim, const Topology &topo, std::uint64_t ecmp_salt)
        : sim_(sim), topo_(topo), salt_(ecmp_salt), capacities_(topo.directed_capacities()),
          rules_(topo.node_count()), loads_(topo.directed_link_count()), link_flows_(topo.link_count(), 0)
    {
    }

    const Path &NetworkController::route_flow(std::uint64_t flow_id, NodeIndex src, NodeIndex dst)
    {
        auto it = path_cache_.find({src, dst});
        if (it == path_cache_.end())
        {
            it = path_cache_.emplace(std::pair{src, dst}, equal_cost_paths(topo_, src, dst)).first;
        }
        const auto &candidates = it->second;
        if (candidates.empty())
        {
            throw RoutingError(
                fmt::format("no route from '{}' to '{}'", topo_.node(src).id, topo_.node(dst).id));
        }
        const auto h = splitmix64(splitmix64(flow_id) ^ salt_);
        return candidates[h % candidates.size()];
    }

    void NetworkController::install(Flow &flow)
    {
        const auto &nodes = flow.path.nodes;
        for (std::size_t i = 1; i + 1 < nodes.size(); ++i)
        {
            rules_[nodes[i]][flow.id] = nodes[i + 1];
        }
        for (const auto dl : flow.path.links)
        {
            loads_[dl].push_back(flow.id);
            if (link_flows_[dl / 2]++ == 0 && on_link_activity_)
            {
                on_link_activity_(dl / 2, true);
            }
        }
    }

    void NetworkController::uninstall(Flow &flow)
    {
        const auto &nodes = flow.path.nodes;
        for (std::size_t i = 1; i + 1 < nodes.size(); ++i)
        {
            rules_[nodes[i]].erase(flow.id);
        }
        for (const auto dl : flow.path.links)
        {
            auto &ids = loads_[dl];
            ids.erase(std::find(ids.begin(), ids.end(), flow.id));
            if (--link_flows_[dl / 2] == 0 && on_link_activity_)
            {
                on_link_activity_(dl / 2, false);
            }
        }
    }

    void NetworkController::advance(Flow &flow, SimTime now)
    {
        const double sent = flow.rate * (now - flow.last_update) / 8.0;
        flow.bytes_delivered += sent;
        flow.bytes_remaining = std::max(0.0, flow.bytes_remaining - sent);
        flow.last_update = now;
    }

    void NetworkController::reallocate()
    {
        const SimTime now = sim_.now();
        std::vector<FlowDemand> demands;
        demands.reserve(active_.size());
        for (const auto &[id, f] : active_)
        {
            demands.push_back(FlowDemand{f.weight, f.path.links});
        }
        const auto rates = allocate_rates(demands, capacities_);
        std::size_t i = 0;
        for (auto &[id, f] : active_)
        {
            const double r = rates[i++];
            if (f.rate > 0.0 && same_rate(r, f.rate))
            {
                continue;
            }
            advance(f, now);
            f.rate = r;
            sim_.cancel(f.completion);
            const auto fid = id;
            f.completion = sim_.schedule(now + f.bytes_remaining * 8.0 / r, EventKind::TransferEpochEnd,
                                         fmt::format("flow-{}", fid), [this, fid] { on_transmitted(fid); });
        }
    }

    std::uint64_t NetworkController::start_transfer(const TransferSpec &spec, DeliveryCallback on_delivered)
    {
        if (!(spec.bytes > 0.0) || !std::isfinite(spec.bytes))
        {
            throw ConfigError("start_transfer: bytes must be positive");
        }
        if (!(spec.weight > 0.0))
        {
            throw ConfigError("start_transfer: priority weight must be positive");
        }
        const std::uint64_t id = next_id_++;
        const SimTime now = sim_.now();

        if (spec.src_host == spec.dst_host)
        {
            FlowRecord rec{id, topo_.node(spec.src_host).id, topo_.node(spec.dst_host).id, spec.bytes, now, now,
                           0.0, topo_.node(spec.src_host).id};
            sim_.schedule(now, EventKind::TransferEpochEnd, fmt::format("flow-{}", id),
                          [this, rec = std::move(rec), cb = std::move(on_delivered)]() mutable {
                              ++completed_;
                              deliver(std::move(rec), cb);
                          });
            return id;
        }

        Flow f;
        f.id = id;
        f.src = spec.src_host;
        f.dst = spec.dst_host;
        f.src_vm = spec.src_vm;
        f.dst_vm = spec.dst_vm;
        f.bytes_total = spec.bytes;
        f.bytes_remaining = spec.bytes;
        f.weight = spec.weight;
        f.path = route_flow(id, spec.src_host, spec.dst_host);
        f.start_time = now;
        f.last_update = now;
        f.on_delivered = std::move(on_delivered);
        auto &slot = active_.emplace(id, std::move(f)).first->second;
        install(slot);
        reallocate();
        return id;
    }

    void NetworkController::on_transmitted(std::uint64_t id)
    {
        auto it = active_.find(id);
        if (it == active_.end())
        {
            return;
        }
        Flow flow = std::move(it->second);
        active_.erase(it);
        advance(flow, sim_.now());
        uninstall(flow);
        reallocate();
        finish(std::move(flow));
    }

    void NetworkController::finish(Flow flow)
    {
        const SimTime now = sim_.now();
        const double err = std::abs(flow.bytes_delivered - flow.bytes_total) / flow.bytes_total;
        max_conservation_error_ = std::max(max_conservation_error_, err);
        flow.bytes_remaining = 0.0;
        ++completed_;

        const SimTime end = now + flow.path.latency_s;
        const double duration = now - flow.start_time;
        FlowRecord rec{flow.id,
                       topo_.node(flow.src).id,
                       topo_.node(flow.dst).id,
                       flow.bytes_total,
                       flow.start_time,
                       end,
                       duration > 0.0 ? flow.bytes_total * 8.0 / duration : 0.0,
                       format_path(topo_, flow.path)};
        sim_.schedule(end, EventKind::TransferEpochEnd, fmt::format("flow-{}", flow.id),
                      [this, rec = std::move(rec), cb = std::move(flow.on_delivered)]() mutable {
                          deliver(std::move(rec), cb);
                      });
    }

    void NetworkController::deliver(FlowRecord record, const DeliveryCallback &cb)
    {
        if (flow_log_ != nullptr)
        {
            *flow_log_ << record.id << ',' << record.src << ',' << record.dst << ',' << format_value(record.bytes)
                       << ',' << format_value(record.start) << ',' << format_value(record.end) << ','
                       << format_value(record.mean_rate_bps) << ',' << record.path << '\n';
        }
        if (cb)
        {
            cb(record);
        }
    }

    std::size_t NetworkController::reroute_flows_for(NodeIndex node, const VmLocator &locate)
    {
        const SimTime now = sim_.now();
        std::vector<std::uint64_t> affected;
        for (auto &[id, f] : active_)
        {
            const NodeIndex src = f.src_vm.empty() ? f.src : locate(f.src_vm);
            const NodeIndex dst = f.dst_vm.empty() ? f.dst : locate(f.dst_vm);
            const bool moved = src != f.src || dst != f.dst;
            const bool through = std::find(f.path.nodes.begin(), f.path.nodes.end(), node) != f.path.nodes.end();
            if (moved || through)
            {
                affected.push_back(id);
            }
        }
        for (const auto id : affected)
        {
            auto &f = active_.at(id);
            advance(f, now);
            uninstall(f);
            sim_.cancel(f.completion);
            f.src = f.src_vm.empty() ? f.src : locate(f.src_vm);
            f.dst = f.dst_vm.empty() ? f.dst : locate(f.dst_vm);
            if (f.src == f.dst)
            {
                // Endpoints now share a host: the remainder is a local copy.
                Flow local = std::move(f);
                active_.erase(id);
                local.bytes_delivered = local.bytes_total;
                local.path = Path{{local.src}, {}, 0.0};
                finish(std::move(local));
                continue;
            }
            f.path = route_flow(id, f.src, f.dst);
            install(f);
            f.rate = 0.0;
        }
        if (!affected.empty())
        {
            reallocate();
        }
        return affected.size();
    }

    bool NetworkController::rules_consistent() const
    {
        ForwardingTable expected(topo_.node_count());
        for (const auto &[id, f] : active_)
        {
            for (std::size_t i = 1; i + 1 < f.path.nodes.size(); ++i)
            {
                expected[f.path.nodes[i]][id] = f.path.nodes[i + 1];
            }
        }
        return expected == rules_;
    }

    double NetworkController::max_relative_overload() const
    {
        std::vector<double> load(capacities_.size(), 0.0);
        for (const auto &[id, f] : active_)
        {
            for (const auto dl : f.path.links)
            {
                load[dl] += f.rate;
            }
        }
        double worst = -1.0;
        for (std::size_t dl = 0; dl < load.size(); ++dl)
        {
            worst = std::max(worst, (load[dl] - capacities_[dl]) / capacities_[dl]);
        }
        return worst;
    }
}
