#include "nfvsim/compute.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace nfvsim
{
    namespace
    {
        // Slack for accumulated floating-point capacity sums.
        constexpr double CapacityEps = 1e-9;
    }

    bool HostState::fits(const VmSpec &vm) const noexcept
    {
        return vm.mips <= free_mips() + CapacityEps * spec.total_mips() &&
               vm.ram_mib <= free_ram() + CapacityEps * spec.ram_mib;
    }

    double HostState::utilization() const noexcept
    {
        const double total = spec.total_mips();
        return total > 0.0 ? std::clamp(allocated_mips / total, 0.0, 1.0) : 0.0;
    }

    HostState allocate_vm(HostState host, const VmSpec &vm)
    {
        if (!(vm.mips > 0.0) || !(vm.ram_mib >= 0.0))
        {
            throw ConfigError(fmt::format("vm '{}': mips must be positive", vm.id));
        }
        if (!host.fits(vm))
        {
            throw PlacementFailure(fmt::format("host '{}' cannot hold vm '{}' ({} MIPS free, {} requested)",
                                               host.spec.id, vm.id, host.free_mips(), vm.mips));
        }
        host.allocated_mips += vm.mips;
        host.allocated_ram += vm.ram_mib;
        host.resident.push_back(vm.id);
        return host;
    }

    HostState release_vm(HostState host, const VmSpec &vm)
    {
        const auto it = std::find(host.resident.begin(), host.resident.end(), vm.id);
        if (it == host.resident.end())
        {
            throw std::logic_error(fmt::format("vm '{}' is not resident on '{}'", vm.id, host.spec.id));
        }
        host.resident.erase(it);
        host.allocated_mips = std::max(0.0, host.allocated_mips - vm.mips);
        host.allocated_ram = std::max(0.0, host.allocated_ram - vm.ram_mib);
        if (host.resident.empty())
        {
            host.allocated_mips = 0.0;
            host.allocated_ram = 0.0;
        }
        return host;
    }

    double host_power(const PowerModel &model, double utilization)
    {
        const double u = std::clamp(utilization, 0.0, 1.0);
        return model.idle_watts + (model.max_watts - model.idle_watts) * u;
    }

    double switch_power(const SwitchPowerModel &model, int active_ports)
    {
        return model.static_watts + model.per_active_port_watts * std::max(0, active_ports);
    }

    double migration_downtime(double ram_mib, double bandwidth_bps)
    {
        if (!(bandwidth_bps > 0.0))
        {
            throw ConfigError("migration bandwidth must be positive");
        }
        return ram_mib * 1048576.0 * 8.0 / bandwidth_bps;
    }

    // -- EnergyMeter --------------------------------------------------------

    std::size_t EnergyMeter::add_node(std::string id, std::string kind, SimTime start, double watts)
    {
        NodeEnergy n;
        n.id = std::move(id);
        n.kind = std::move(kind);
        n.start = start;
        n.last_change = start;
        n.watts = watts;
        if (keep_history_)
        {
            n.history.push_back(Segment{start, watts, 0.0});
        }
        nodes_.push_back(std::move(n));
        return nodes_.size() - 1;
    }

    void EnergyMeter::set_power(std::size_t node, SimTime t, double watts)
    {
        auto &n = nodes_.at(node);
        if (t < n.last_change)
        {
            throw std::logic_error("EnergyMeter: power change goes back in time");
        }
        if (watts == n.watts)
        {
            return;
        }
        n.accumulated += n.watts * (t - n.last_change);
        n.last_change = t;
        n.watts = watts;
        if (keep_history_)
        {
            n.history.push_back(Segment{t, watts, n.accumulated});
        }
    }

    double EnergyMeter::energy_until(std::size_t node, SimTime t) const
    {
        const auto &n = nodes_.at(node);
        if (t < n.last_change)
        {
            if (!keep_history_)
            {
                throw std::logic_error("EnergyMeter: query before last change needs history");
            }
            if (t <= n.start)
            {
                return 0.0;
            }
            auto it = std::upper_bound(n.history.begin(), n.history.end(), t,
                                       [](SimTime v, const Segment &s) { return v < s.start; });
            --it;
            return it->energy_before + it->watts * (t - it->start);
        }
        return n.accumulated + n.watts * (t - n.last_change);
    }

    double EnergyMeter::accumulate_energy(std::size_t node, SimTime from, SimTime to) const
    {
        if (to < from)
        {
            throw std::invalid_argument("accumulate_energy: interval end precedes start");
        }
        return energy_until(node, to) - energy_until(node, from);
    }

    // -- BusyLedger ---------------------------------------------------------

    void BusyLedger::add(SimTime start, SimTime end)
    {
        if (end <= start)
        {
            return;
        }
        if (!intervals_.empty() && start <= intervals_.back().second)
        {
            intervals_.back().second = std::max(intervals_.back().second, end);
            return;
        }
        intervals_.emplace_back(start, end);
    }

    double BusyLedger::busy_time(SimTime from, SimTime to) const
    {
        double sum = 0.0;
        for (const auto &[s, e] : intervals_)
        {
            if (s >= to)
            {
                break;
            }
            const double lo = std::max(s, from);
            const double hi = std::min(e, to);
            if (hi > lo)
            {
                sum += hi - lo;
            }
        }
        return sum;
    }

    double BusyLedger::total() const noexcept
    {
        double sum = forgotten_;
        for (const auto &[s, e] : intervals_)
        {
            sum += e - s;
        }
        return sum;
    }

    void BusyLedger::shift_after(SimTime t, double delta)
    {
        std::deque<std::pair<SimTime, SimTime>> out;
        for (const auto &[s, e] : intervals_)
        {
            if (e <= t)
            {
                out.emplace_back(s, e);
            }
            else if (s >= t)
            {
                out.emplace_back(s + delta, e + delta);
            }
            else
            {
                out.emplace_back(s, t);
                out.emplace_back(t + delta, e + delta);
            }
        }
        intervals_ = std::move(out);
    }

    void BusyLedger::forget_before(SimTime t)
    {
        while (!intervals_.empty() && intervals_.front().second <= t)
        {
            forgotten_ += intervals_.front().second - intervals_.front().first;
            intervals_.pop_front();
        }
    }

    // -- Cluster ------------------------------------------------------------

    void Cluster::add_host(HostSpec spec)
    {
        if (spec.cores <= 0 || !(spec.mips_per_core > 0.0) || !(spec.ram_mib > 0.0))
        {
            throw ConfigError(fmt::format("host '{}': resources must be positive", spec.id));
        }
        if (!(spec.power.max_watts >= spec.power.idle_watts) || !(spec.power.idle_watts >= 0.0))
        {
            throw ConfigError(fmt::format("host '{}': need max_watts >= idle_watts >= 0", spec.id));
        }
        auto id = spec.id;
        if (!hosts_.emplace(id, HostState{std::move(spec), 0.0, 0.0, {}}).second)
        {
            throw ConfigError(fmt::format("duplicate host '{}'", id));
        }
    }

    const HostState &Cluster::host(std::string_view id) const
    {
        const auto it = hosts_.find(id);
        if (it == hosts_.end())
        {
            throw ConfigError(fmt::format("unknown host '{}'", id));
        }
        return it->second;
    }

    HostState &Cluster::host_mut(std::string_view id)
    {
        return const_cast<HostState &>(std::as_const(*this).host(id));
    }

    std::vector<HostState> Cluster::snapshot() const
    {
        std::vector<HostState> out;
        out.reserve(hosts_.size());
        for (const auto &[id, h] : hosts_)
        {
            out.push_back(h);
        }
        return out;
    }

    const VmRuntime &Cluster::vm(std::string_view vm_id) const
    {
        const auto it = vms_.find(vm_id);
        if (it == vms_.end())
        {
            throw ConfigError(fmt::format("unknown vm '{}'", vm_id));
        }
        return it->second;
    }

    VmRuntime &Cluster::vm_mut(std::string_view vm_id)
    {
        return const_cast<VmRuntime &>(std::as_const(*this).vm(vm_id));
    }

    void Cluster::place_vm(const VmSpec &spec, std::string_view host_id)
    {
        if (vms_.contains(spec.id))
        {
            throw ConfigError(fmt::format("duplicate vm '{}'", spec.id));
        }
        auto &h = host_mut(host_id);
        h = allocate_vm(h, spec);
        VmRuntime rt;
        rt.spec = spec;
        rt.host = std::string(host_id);
        vms_.emplace(spec.id, std::move(rt));
    }

    void Cluster::remove_vm(std::string_view vm_id)
    {
        auto &rt = vm_mut(vm_id);
        if (rt.migrating_to)
        {
            throw std::logic_error(fmt::format("vm '{}' is migrating", vm_id));
        }
        auto &h = host_mut(rt.host);
        h = release_vm(h, rt.spec);
        vms_.erase(vms_.find(vm_id));
    }

    TaskTiming Cluster::execute_task(const CpuTask &task)
    {
        if (!(task.length_mi > 0.0))
        {
            throw ConfigError(fmt::format("task on vm '{}': length must be positive", task.vm));
        }
        auto &rt = vm_mut(task.vm);
        const SimTime now = task.enqueue_time;
        while (!rt.pending.empty() && rt.pending.front().second <= now)
        {
            rt.pending.pop_front();
        }
        TaskTiming t;
        t.token = next_token_++;
        t.service_s = task.length_mi / rt.spec.mips;
        t.start = std::max(now, rt.busy_until);
        t.completion = t.start + t.service_s;
        t.wait_s = t.start - now;
        rt.busy_until = t.completion;
        rt.service_total += t.service_s;
        rt.ledger.add(t.start, t.completion);
        rt.pending.emplace_back(t.token, t.completion);
        return t;
    }

    double Cluster::busy_time(std::string_view vm_id, SimTime from, SimTime to) const
    {
        return vm(vm_id).ledger.busy_time(from, to);
    }

    void Cluster::forget_busy_before(SimTime t)
    {
        for (auto &[id, rt] : vms_)
        {
            rt.ledger.forget_before(t);
        }
    }

    MigrationTicket Cluster::begin_migration(std::string_view vm_id, std::string_view dst_host, SimTime now,
                                             double bandwidth_bps)
    {
        auto &rt = vm_mut(vm_id);
        MigrationTicket ticket;
        ticket.vm = std::string(vm_id);
        ticket.from = rt.host;
        ticket.to = std::string(dst_host);
        ticket.completes_at = now;
        if (rt.migrating_to)
        {
            throw PlacementFailure(fmt::format("vm '{}' is already migrating", vm_id));
        }
        if (rt.host == dst_host)
        {
            return ticket;
        }
        auto &dst = host_mut(dst_host);
        dst = allocate_vm(dst, rt.spec);

        ticket.downtime_s = migration_downtime(rt.spec.ram_mib, bandwidth_bps);
        ticket.completes_at = now + ticket.downtime_s;
        rt.migrating_to = ticket.to;

        while (!rt.pending.empty() && rt.pending.front().second <= now)
        {
            rt.pending.pop_front();
        }
        for (auto &[token, completion] : rt.pending)
        {
            completion += ticket.downtime_s;
            ticket.shifted.emplace_back(token, completion);
        }
        rt.ledger.shift_after(now, ticket.downtime_s);
        rt.busy_until = std::max(rt.busy_until, now) + ticket.downtime_s;
        return ticket;
    }

    void Cluster::finish_migration(const MigrationTicket &ticket)
    {
        if (ticket.from == ticket.to)
        {
            return;
        }
        auto &rt = vm_mut(ticket.vm);
        auto &src = host_mut(ticket.from);
        src = release_vm(src, rt.spec);
        rt.host = ticket.to;
        rt.migrating_to.reset();
    }

    void Cluster::check_capacity() const
    {
        for (const auto &[id, h] : hosts_)
        {
            if (h.allocated_mips > h.spec.total_mips() * (1.0 + CapacityEps) ||
                h.allocated_ram > h.spec.ram_mib * (1.0 + CapacityEps))
            {
                throw std::logic_error(fmt::format("host '{}' is overcommitted", id));
            }
        }
    }
}
