#pragma once

#include "nfvsim/kernel.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nfvsim
{
    struct PowerModel
    {
        double idle_watts = 120.0;
        double max_watts = 250.0;
    };

    struct SwitchPowerModel
    {
        double static_watts = 100.0;
        double per_active_port_watts = 1.0;
    };

    struct HostSpec
    {
        std::string id;
        int cores = 1;
        double mips_per_core = 1000.0;
        double ram_mib = 1024.0;
        PowerModel power;

        double total_mips() const noexcept { return cores * mips_per_core; }
    };

    enum class VmRole : std::uint8_t
    {
        Application,
        Vnf,
    };

    struct VmSpec
    {
        std::string id;
        double mips = 0.0;
        int cores = 1;
        double ram_mib = 0.0;
        VmRole role = VmRole::Application;
    };

    struct CpuTask
    {
        std::string vm;
        double length_mi = 0.0;
        SimTime enqueue_time = 0.0;
    };

    /// Host capacity bookkeeping. allocated_mips <= total_mips and
    /// allocated_ram <= ram hold after every mutation.
    struct HostState
    {
        HostSpec spec;
        double allocated_mips = 0.0;
        double allocated_ram = 0.0;
        std::vector<std::string> resident;

        double free_mips() const noexcept { return spec.total_mips() - allocated_mips; }
        double free_ram() const noexcept { return spec.ram_mib - allocated_ram; }
        bool fits(const VmSpec &vm) const noexcept;
        double utilization() const noexcept;
    };

    class PlacementFailure : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Throws PlacementFailure when the host lacks free mips or ram.
    HostState allocate_vm(HostState host, const VmSpec &vm);
    HostState release_vm(HostState host, const VmSpec &vm);

    /// Linear in utilization between idle and max.
    double host_power(const PowerModel &model, double utilization);
    double switch_power(const SwitchPowerModel &model, int active_ports);

    /// Downtime for a stop-and-copy of the VM's memory.
    double migration_downtime(double ram_mib, double bandwidth_bps);

    // Piecewise-constant power integration per node.
    class EnergyMeter
    {
    public:
        explicit EnergyMeter(bool keep_history = false) : keep_history_(keep_history) {}

        std::size_t add_node(std::string id, std::string kind, SimTime start, double watts);
        void set_power(std::size_t node, SimTime t, double watts);

        double power(std::size_t node) const { return nodes_.at(node).watts; }
        /// Energy over [start, t].
        double energy_until(std::size_t node, SimTime t) const;
        /// Energy over [from, to]. Needs history unless from is the node's start time.
        double accumulate_energy(std::size_t node, SimTime from, SimTime to) const;

        std::size_t size() const noexcept { return nodes_.size(); }
        const std::string &id(std::size_t node) const { return nodes_.at(node).id; }
        const std::string &kind(std::size_t node) const { return nodes_.at(node).kind; }

    private:
        struct Segment
        {
            SimTime start;
            double watts;
            double energy_before;
        };
        struct NodeEnergy
        {
            std::string id;
            std::string kind;
            SimTime start = 0.0;
            SimTime last_change = 0.0;
            double watts = 0.0;
            double accumulated = 0.0;
            std::vector<Segment> history;
        };

        bool keep_history_;
        std::vector<NodeEnergy> nodes_;
    };

    struct TaskTiming
    {
        std::uint64_t token = 0;
        SimTime start = 0.0;
        SimTime completion = 0.0;
        double service_s = 0.0;
        double wait_s = 0.0;
    };

    // Merged busy intervals of one VM, for windowed utilization queries.
    class BusyLedger
    {
    public:
        void add(SimTime start, SimTime end);
        double busy_time(SimTime from, SimTime to) const;
        /// Total busy time ever recorded (including forgotten intervals).
        double total() const noexcept;
        /// Shifts the portion of every interval after t by delta.
        void shift_after(SimTime t, double delta);
        void forget_before(SimTime t);

    private:
        std::deque<std::pair<SimTime, SimTime>> intervals_;
        double forgotten_ = 0.0;
    };

    struct VmRuntime
    {
        VmSpec spec;
        std::string host;
        SimTime busy_until = 0.0;
        BusyLedger ledger;
        double service_total = 0.0;
        std::deque<std::pair<std::uint64_t, SimTime>> pending;
        std::optional<std::string> migrating_to;
    };

    struct MigrationTicket
    {
        std::string vm;
        std::string from;
        std::string to;
        double downtime_s = 0.0;
        SimTime completes_at = 0.0;
        /// In-flight tasks pushed back by the downtime: (token, new completion).
        std::vector<std::pair<std::uint64_t, SimTime>> shifted;
    };

    // Hosts and VMs of one run. VM CPU is reserved; tasks on one VM run FIFO.
    class Cluster
    {
    public:
        void add_host(HostSpec spec);

        const HostState &host(std::string_view id) const;
        const std::map<std::string, HostState, std::less<>> &hosts() const noexcept { return hosts_; }
        std::vector<HostState> snapshot() const;

        void place_vm(const VmSpec &vm, std::string_view host_id);
        void remove_vm(std::string_view vm_id);

        bool has_vm(std::string_view vm_id) const { return vms_.contains(vm_id); }
        const VmRuntime &vm(std::string_view vm_id) const;
        const std::string &host_of(std::string_view vm_id) const { return vm(vm_id).host; }
        const std::map<std::string, VmRuntime, std::less<>> &vms() const noexcept { return vms_; }

        /// FIFO execution: completion = max(enqueue, previous completion) + length / mips.
        TaskTiming execute_task(const CpuTask &task);

        double busy_time(std::string_view vm_id, SimTime from, SimTime to) const;
        void forget_busy_before(SimTime t);

        /// Same-host migrations return a zero-downtime ticket and change nothing.
        /// Throws PlacementFailure if the destination cannot hold the VM.
        MigrationTicket begin_migration(std::string_view vm_id, std::string_view dst_host, SimTime now,
                                        double bandwidth_bps);
        void finish_migration(const MigrationTicket &ticket);

        void check_capacity() const;

    private:
        VmRuntime &vm_mut(std::string_view vm_id);
        HostState &host_mut(std::string_view id);

        std::map<std::string, HostState, std::less<>> hosts_;
        std::map<std::string, VmRuntime, std::less<>> vms_;
        std::uint64_t next_token_ = 1;
    };
}
