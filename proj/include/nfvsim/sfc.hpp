#pragma once

#include "nfvsim/compute.hpp"
#include "nfvsim/kernel.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nfvsim
{
    struct ScalingSettings
    {
        double threshold = 0.70;
        double window_s = 30.0;
        double cooldown_s = 30.0;
        int max_instances = 8;

        bool operator==(const ScalingSettings &) const = default;
    };

    struct AutoScaleConfig
    {
        bool enabled = true;
        ScalingSettings defaults;
        double startup_delay_s = 0.0;
        bool scale_in_enabled = false;
        double scale_in_low_water = 0.2;
    };

    /// Throws ConfigError unless 0 < threshold <= 1, window > 0, cooldown >= 0, max_instances >= 1.
    void validate_scaling(const ScalingSettings &s);

    struct VnfType
    {
        std::string name;
        double per_request_mi = 0.0;
        VmSpec instance_spec;
        std::string image;
        ScalingSettings scaling;
    };

    enum class InstanceStatus : std::uint8_t
    {
        Starting,
        Active,
        Draining,
    };

    std::string_view to_string(InstanceStatus s) noexcept;
    std::optional<InstanceStatus> parse_instance_status(std::string_view s) noexcept;

    struct VnfInstance
    {
        std::string id;
        std::string name;
        std::string type;
        std::string vm;
        std::string host;
        std::string address;
        std::string image;
        InstanceStatus status = InstanceStatus::Starting;
        std::uint64_t ordinal = 0;
        int outstanding = 0;
    };

    struct VnfChainPolicy
    {
        std::string name;
        std::string src_selector;
        std::string dst_selector;
        std::vector<std::string> chain;
    };

    // -- Deployment descriptor ---------------------------------------------

    struct DeploymentDescriptor
    {
        struct TypeEntry
        {
            std::string name;
            double per_request_mi = 0.0;
            double mips = 0.0;
            std::string image;
            ScalingSettings scaling;

            bool operator==(const TypeEntry &) const = default;
        };
        struct InstanceEntry
        {
            std::string name;
            std::string id;
            std::string address;
            std::string status;
            std::string image;
            std::string type;
            std::string host;

            bool operator==(const InstanceEntry &) const = default;
        };

        std::vector<TypeEntry> types;
        std::vector<InstanceEntry> instances;

        bool operator==(const DeploymentDescriptor &) const = default;
    };

    /// Parse failure; `where` is a line number or a JSON-pointer to the field.
    class DescriptorError : public std::runtime_error
    {
    public:
        DescriptorError(std::string where, const std::string &what)
            : std::runtime_error(where + ": " + what), where_(std::move(where))
        {
        }
        const std::string &where() const noexcept { return where_; }

    private:
        std::string where_;
    };

    std::string save_descriptor(const DeploymentDescriptor &d);
    void save_descriptor(const DeploymentDescriptor &d, const std::filesystem::path &file);
    DeploymentDescriptor parse_descriptor(std::string_view text);
    DeploymentDescriptor load_descriptor(const std::filesystem::path &file);

    // -- Monitoring and scaling ------------------------------------------

    /// busy / window, clamped to [0, 1].
    double measure_utilization(double busy_time_s, double window_s);

    struct InstanceLoad
    {
        std::string instance;
        std::string type;
        InstanceStatus status = InstanceStatus::Active;
        double utilization = 0.0;
    };

    struct ScaleAction
    {
        enum class Kind : std::uint8_t
        {
            ScaleOut,
            ScaleIn,
        };
        Kind kind = Kind::ScaleOut;
        std::string type;
        /// Instance to drain for ScaleIn; empty for ScaleOut.
        std::string instance;
        double utilization = 0.0;
    };

    /// One monitoring round. A type scales out when any of its instances is at or
    /// above its threshold, the type is past its cooldown, and fewer than
    /// max_instances non-draining instances exist.
    std::vector<ScaleAction> autoscale_tick(const AutoScaleConfig &config, std::span<const VnfType> types,
                                            std::span<const InstanceLoad> loads,
                                            const std::map<std::string, SimTime> &last_action, SimTime now);

    // -- Chain state -------------------------------------------------------

    struct ChainSelection
    {
        const VnfChainPolicy *policy = nullptr;
        /// Instance ids in chain order; empty when no policy matches.
        std::vector<std::string> waypoints;
        /// A required type has no active instance; the caller must hold the request.
        bool hold = false;
    };

    class SfcManager
    {
    public:
        void add_type(VnfType type);
        void add_policy(VnfChainPolicy policy);
        void set_vm_group(const std::string &vm, const std::string &group);

        const VnfType &type(std::string_view name) const;
        const std::vector<VnfType> &types() const noexcept { return types_; }
        const std::vector<VnfChainPolicy> &policies() const noexcept { return policies_; }

        /// New instance in Starting state; ids are "<type>-<n>".
        VnfInstance &create_instance(std::string_view type_name, std::string_view host);
        /// Recreates an instance with a given id (descriptor restore).
        VnfInstance &restore_instance(const DeploymentDescriptor::InstanceEntry &entry);
        void set_status(std::string_view id, InstanceStatus status);
        void remove_instance(std::string_view id);

        const VnfInstance &instance(std::string_view id) const;
        VnfInstance *find_instance(std::string_view id);
        const std::vector<VnfInstance> &instances() const noexcept { return instances_; }
        const VnfInstance *instance_for_vm(std::string_view vm) const;

        /// Non-draining instances per type (every type listed).
        std::map<std::string, int> instance_counts() const;

        const VnfChainPolicy *match(std::string_view src_vm, std::string_view dst_vm) const;

        /// Selects the least-loaded active instance per chain type (ties go to the
        /// oldest instance) and counts the request as outstanding on each.
        ChainSelection enforce_chain(std::string_view src_vm, std::string_view dst_vm);
        void release(std::string_view instance_id);

        DeploymentDescriptor descriptor() const;

    private:
        std::vector<VnfType> types_;
        std::vector<VnfChainPolicy> policies_;
        std::map<std::string, std::string, std::less<>> vm_group_;
        std::vector<VnfInstance> instances_;
        std::map<std::string, int, std::less<>> next_index_;
        std::uint64_t next_ordinal_ = 0;
    };

    /// "10.1.x.y" address derived from the creation ordinal.
    std::string instance_address(std::uint64_t ordinal);
}
