#include "nfvsim/placement.hpp"

#include "nfvsim/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

namespace nfvsim
{
    std::string_view to_string(PlacementKind kind) noexcept
    {
        switch (kind)
        {
        case PlacementKind::FirstFit:
            return "first-fit";
        case PlacementKind::BestFitMostFull:
            return "best-fit-most-full";
        case PlacementKind::NetworkAware:
            return "network-aware";
        }
        return "first-fit";
    }

    std::optional<PlacementKind> parse_placement_kind(std::string_view s) noexcept
    {
        for (const auto k : {PlacementKind::FirstFit, PlacementKind::BestFitMostFull, PlacementKind::NetworkAware})
        {
            if (to_string(k) == s)
            {
                return k;
            }
        }
        return std::nullopt;
    }

    double PlacementPolicy::affinity_between(const std::string &a, const std::string &b) const
    {
        double w = 0.0;
        if (const auto it = affinity.find({a, b}); it != affinity.end())
        {
            w += it->second;
        }
        if (a != b)
        {
            if (const auto it = affinity.find({b, a}); it != affinity.end())
            {
                w += it->second;
            }
        }
        return w;
    }

    int hosts_in_use(std::span<const HostState> hosts) noexcept
    {
        return static_cast<int>(
            std::count_if(hosts.begin(), hosts.end(), [](const HostState &h) { return !h.resident.empty(); }));
    }

    PlacementResult place(std::span<const VmSpec> vms, std::vector<HostState> hosts, const PlacementPolicy &policy,
                          const HostDistance &distance)
    {
        std::sort(hosts.begin(), hosts.end(),
                  [](const HostState &a, const HostState &b) { return a.spec.id < b.spec.id; });

        std::vector<const VmSpec *> order;
        order.reserve(vms.size());
        for (const auto &vm : vms)
        {
            order.push_back(&vm);
        }
        if (policy.sort_decreasing)
        {
            std::stable_sort(order.begin(), order.end(),
                             [](const VmSpec *a, const VmSpec *b) { return a->mips > b->mips; });
        }

        // VM -> host index, seeded with residents already on the snapshot.
        std::map<std::string, std::size_t> located;
        for (std::size_t h = 0; h < hosts.size(); ++h)
        {
            for (const auto &vm : hosts[h].resident)
            {
                located.emplace(vm, h);
            }
        }

        PlacementResult result;
        for (const auto *vm : order)
        {
            std::optional<std::size_t> chosen;
            double chosen_score = 0.0;
            double chosen_left = 0.0;
            for (std::size_t h = 0; h < hosts.size(); ++h)
            {
                if (!hosts[h].fits(*vm))
                {
                    continue;
                }
                const double left = hosts[h].free_mips() - vm->mips;
                if (policy.kind == PlacementKind::FirstFit)
                {
                    chosen = h;
                    chosen_score = left;
                    break;
                }
                double score = left;
                if (policy.kind == PlacementKind::NetworkAware)
                {
                    score = 0.0;
                    for (const auto &[other, oh] : located)
                    {
                        const double w = policy.affinity_between(vm->id, other);
                        if (w == 0.0 || oh == h)
                        {
                            continue;
                        }
                        const int hops = distance ? distance(hosts[h].spec.id, hosts[oh].spec.id) : 1;
                        score += w * hops;
                    }
                }
                bool better = !chosen.has_value() || score < chosen_score;
                if (!better && policy.kind == PlacementKind::NetworkAware && score == chosen_score)
                {
                    better = left < chosen_left;
                }
                if (better)
                {
                    chosen = h;
                    chosen_score = score;
                    chosen_left = left;
                }
            }
            if (!chosen)
            {
                result.failures.push_back(vm->id);
                continue;
            }
            hosts[*chosen] = allocate_vm(std::move(hosts[*chosen]), *vm);
            located[vm->id] = *chosen;
            result.assignments[vm->id] = hosts[*chosen].spec.id;
            result.decisions.push_back({vm->id, hosts[*chosen].spec.id, chosen_score});
        }
        result.hosts_used = hosts_in_use(hosts);
        result.hosts = std::move(hosts);
        return result;
    }

    std::vector<Move> consolidate(std::vector<HostState> hosts, const std::map<std::string, VmSpec> &vms)
    {
        std::sort(hosts.begin(), hosts.end(),
                  [](const HostState &a, const HostState &b) { return a.spec.id < b.spec.id; });
        const auto spec_of = [&](const std::string &id) -> const VmSpec & {
            const auto it = vms.find(id);
            if (it == vms.end())
            {
                throw ConfigError("consolidate: unknown VM '" + id + "'");
            }
            return it->second;
        };

        std::vector<Move> plan;
        while (true)
        {
            std::vector<std::size_t> used;
            for (std::size_t h = 0; h < hosts.size(); ++h)
            {
                if (!hosts[h].resident.empty())
                {
                    used.push_back(h);
                }
            }
            std::stable_sort(used.begin(), used.end(), [&](std::size_t a, std::size_t b) {
                return hosts[a].utilization() < hosts[b].utilization();
            });

            bool emptied = false;
            for (const auto src : used)
            {
                auto trial = hosts;
                std::vector<Move> moves;
                bool ok = true;
                for (const auto &vm_id : hosts[src].resident)
                {
                    const auto &vm = spec_of(vm_id);
                    // Fullest feasible target among the other hosts in use.
                    std::optional<std::size_t> target;
                    for (const auto dst : used)
                    {
                        if (dst == src || !trial[dst].fits(vm))
                        {
                            continue;
                        }
                        if (!target || trial[dst].free_mips() < trial[*target].free_mips())
                        {
                            target = dst;
                        }
                    }
                    if (!target)
                    {
                        ok = false;
                        break;
                    }
                    trial[src] = release_vm(std::move(trial[src]), vm);
                    trial[*target] = allocate_vm(std::move(trial[*target]), vm);
                    moves.push_back({vm_id, hosts[src].spec.id, hosts[*target].spec.id});
                }
                if (ok)
                {
                    hosts = std::move(trial);
                    plan.insert(plan.end(), moves.begin(), moves.end());
                    emptied = true;
                    break;
                }
            }
            if (!emptied)
            {
                return plan;
            }
        }
    }

    void write_placement_log(const std::filesystem::path &file, std::span<const PlacementDecision> decisions,
                             PlacementKind kind)
    {
        std::ofstream out(file, std::ios::binary | std::ios::trunc);
        if (!out)
        {
            throw IoError("cannot write '" + file.string() + "'");
        }
        out << "vm_id,host_id,policy,score\n";
        for (const auto &d : decisions)
        {
            out << d.vm << ',' << d.host << ',' << to_string(kind) << ',' << format_value(d.score) << '\n';
        }
        if (!out.flush())
        {
            throw IoError("write failed for '" + file.string() + "'");
        }
    }
}
