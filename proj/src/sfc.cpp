#include "nfvsim/sfc.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

namespace nfvsim
{
    using ojson = nlohmann::ordered_json;

    void validate_scaling(const ScalingSettings &s)
    {
        if (!(s.threshold > 0.0 && s.threshold <= 1.0))
        {
            throw ConfigError(fmt::format("scaling threshold must be in (0, 1] (got {})", s.threshold));
        }
        if (!(s.window_s > 0.0))
        {
            throw ConfigError("scaling window must be positive");
        }
        if (!(s.cooldown_s >= 0.0))
        {
            throw ConfigError("scaling cooldown must be non-negative");
        }
        if (s.max_instances < 1)
        {
            throw ConfigError("max_instances must be at least 1");
        }
    }

    std::string_view to_string(InstanceStatus s) noexcept
    {
        switch (s)
        {
        case InstanceStatus::Starting:
            return "starting";
        case InstanceStatus::Active:
            return "active";
        case InstanceStatus::Draining:
            return "draining";
        }
        return "unknown";
    }

    std::optional<InstanceStatus> parse_instance_status(std::string_view s) noexcept
    {
        for (auto st : {InstanceStatus::Starting, InstanceStatus::Active, InstanceStatus::Draining})
        {
            if (to_string(st) == s)
            {
                return st;
            }
        }
        return std::nullopt;
    }

    std::string instance_address(std::uint64_t ordinal)
    {
        return fmt::format("10.1.{}.{}", ordinal / 254, ordinal % 254 + 1);
    }

    // -- descriptor I/O ---------------------------------------------------

    std::string save_descriptor(const DeploymentDescriptor &d)
    {
        ojson root;
        root["types"] = ojson::array();
        for (const auto &t : d.types)
        {
            ojson jt;
            jt["name"] = t.name;
            jt["per_request_mi"] = t.per_request_mi;
            jt["mips"] = t.mips;
            jt["image"] = t.image;
            jt["scaling"] = ojson{{"threshold", t.scaling.threshold},
                                  {"window_s", t.scaling.window_s},
                                  {"cooldown_s", t.scaling.cooldown_s},
                                  {"max_instances", t.scaling.max_instances}};
            root["types"].push_back(std::move(jt));
        }
        root["instances"] = ojson::array();
        for (const auto &i : d.instances)
        {
            root["instances"].push_back(ojson{{"name", i.name},
                                              {"id", i.id},
                                              {"address", i.address},
                                              {"status", i.status},
                                              {"image", i.image},
                                              {"type", i.type},
                                              {"host", i.host}});
        }
        return root.dump(2) + "\n";
    }

    void save_descriptor(const DeploymentDescriptor &d, const std::filesystem::path &file)
    {
        std::ofstream out(file, std::ios::binary | std::ios::trunc);
        out << save_descriptor(d);
        if (!out)
        {
            throw std::runtime_error("cannot write descriptor '" + file.string() + "'");
        }
    }

    namespace
    {
        const ojson &field(const ojson &obj, const std::string &ptr, const char *key)
        {
            if (!obj.is_object())
            {
                throw DescriptorError(ptr, "expected an object");
            }
            const auto it = obj.find(key);
            if (it == obj.end())
            {
                throw DescriptorError(ptr + "/" + key, fmt::format("missing field \"{}\"", key));
            }
            return *it;
        }

        std::string get_string(const ojson &obj, const std::string &ptr, const char *key)
        {
            const auto &v = field(obj, ptr, key);
            if (!v.is_string())
            {
                throw DescriptorError(ptr + "/" + key, fmt::format("field \"{}\" must be a string", key));
            }
            return v.get<std::string>();
        }

        double get_number(const ojson &obj, const std::string &ptr, const char *key)
        {
            const auto &v = field(obj, ptr, key);
            if (!v.is_number())
            {
                throw DescriptorError(ptr + "/" + key, fmt::format("field \"{}\" must be a number", key));
            }
            return v.get<double>();
        }

        std::string line_of(std::string_view text, std::size_t byte)
        {
            const auto upto = text.substr(0, std::min(byte, text.size()));
            return fmt::format("line {}", 1 + std::count(upto.begin(), upto.end(), '\n'));
        }
    }

    DeploymentDescriptor parse_descriptor(std::string_view text)
    {
        ojson root;
        try
        {
            root = ojson::parse(text.begin(), text.end());
        }
        catch (const nlohmann::json::parse_error &e)
        {
            throw DescriptorError(line_of(text, e.byte == 0 ? 0 : e.byte - 1), "malformed JSON");
        }

        DeploymentDescriptor d;
        const auto &types = field(root, "", "types");
        if (!types.is_array())
        {
            throw DescriptorError("/types", "must be an array");
        }
        for (std::size_t i = 0; i < types.size(); ++i)
        {
            const auto ptr = fmt::format("/types/{}", i);
            const auto &jt = types[i];
            DeploymentDescriptor::TypeEntry t;
            t.name = get_string(jt, ptr, "name");
            t.per_request_mi = get_number(jt, ptr, "per_request_mi");
            t.mips = get_number(jt, ptr, "mips");
            t.image = get_string(jt, ptr, "image");
            const auto &js = field(jt, ptr, "scaling");
            const auto sp = ptr + "/scaling";
            t.scaling.threshold = get_number(js, sp, "threshold");
            t.scaling.window_s = get_number(js, sp, "window_s");
            t.scaling.cooldown_s = get_number(js, sp, "cooldown_s");
            const double max_inst = get_number(js, sp, "max_instances");
            if (max_inst != std::floor(max_inst))
            {
                throw DescriptorError(sp + "/max_instances", "must be an integer");
            }
            t.scaling.max_instances = static_cast<int>(max_inst);
            try
            {
                validate_scaling(t.scaling);
            }
            catch (const ConfigError &e)
            {
                throw DescriptorError(sp, e.what());
            }
            if (!(t.per_request_mi > 0.0))
            {
                throw DescriptorError(ptr + "/per_request_mi", "must be positive");
            }
            d.types.push_back(std::move(t));
        }

        const auto &instances = field(root, "", "instances");
        if (!instances.is_array())
        {
            throw DescriptorError("/instances", "must be an array");
        }
        for (std::size_t i = 0; i < instances.size(); ++i)
        {
            const auto ptr = fmt::format("/instances/{}", i);
            const auto &ji = instances[i];
            DeploymentDescriptor::InstanceEntry e;
            e.name = get_string(ji, ptr, "name");
            e.id = get_string(ji, ptr, "id");
            e.address = get_string(ji, ptr, "address");
            e.status = get_string(ji, ptr, "status");
            e.image = get_string(ji, ptr, "image");
            e.type = get_string(ji, ptr, "type");
            e.host = get_string(ji, ptr, "host");
            if (!parse_instance_status(e.status))
            {
                throw DescriptorError(ptr + "/status", "unknown status '" + e.status + "'");
            }
            const bool known = std::any_of(d.types.begin(), d.types.end(),
                                           [&](const auto &t) { return t.name == e.type; });
            if (!known)
            {
                throw DescriptorError(ptr + "/type", "unknown VNF type '" + e.type + "'");
            }
            d.instances.push_back(std::move(e));
        }
        return d;
    }

    DeploymentDescriptor load_descriptor(const std::filesystem::path &file)
    {
        std::ifstream in(file, std::ios::binary);
        if (!in)
        {
            throw DescriptorError(file.string(), "cannot open");
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_descriptor(buf.str());
    }

    // -- scaling ------------------------------------------------------------

    double measure_utilization(double busy_time_s, double window_s)
    {
        if (!(window_s > 0.0))
        {
            throw ConfigError("measure_utilization: window must be positive");
        }
        return std::clamp(busy_time_s / window_s, 0.0, 1.0);
    }

    std::vector<ScaleAction> autoscale_tick(const AutoScaleConfig &config, std::span<const VnfType> types,
                                            std::span<const InstanceLoad> loads,
                                            const std::map<std::string, SimTime> &last_action, SimTime now)
    {
        std::vector<ScaleAction> actions;
        if (!config.enabled)
        {
            return actions;
        }
        for (const auto &type : types)
        {
            const auto &s = type.scaling;
            if (const auto it = last_action.find(type.name); it != last_action.end() && now - it->second < s.cooldown_s)
            {
                continue;
            }
            int live = 0;
            int active = 0;
            double hottest = -1.0;
            double coolest = 2.0;
            std::string youngest_active;
            for (const auto &l : loads)
            {
                if (l.type != type.name || l.status == InstanceStatus::Draining)
                {
                    continue;
                }
                ++live;
                if (l.status != InstanceStatus::Active)
                {
                    continue;
                }
                ++active;
                hottest = std::max(hottest, l.utilization);
                coolest = std::min(coolest, l.utilization);
                youngest_active = l.instance;
            }
            if (active > 0 && hottest >= s.threshold)
            {
                if (live < s.max_instances)
                {
                    actions.push_back(ScaleAction{ScaleAction::Kind::ScaleOut, type.name, {}, hottest});
                }
            }
            else if (config.scale_in_enabled && active > 1 && live == active && hottest < config.scale_in_low_water)
            {
                actions.push_back(ScaleAction{ScaleAction::Kind::ScaleIn, type.name, youngest_active, coolest});
            }
        }
        return actions;
    }

    // -- SfcManager -------------------------------------------------------

    void SfcManager::add_type(VnfType type)
    {
        if (type.name.empty())
        {
            throw ConfigError("VNF type needs a name");
        }
        if (!(type.per_request_mi > 0.0))
        {
            throw ConfigError(fmt::format("VNF type '{}': per_request_mi must be positive", type.name));
        }
        if (type.instance_spec.role != VmRole::Vnf)
        {
            throw ConfigError(fmt::format("VNF type '{}': instance spec must have the vnf role", type.name));
        }
        validate_scaling(type.scaling);
        for (const auto &t : types_)
        {
            if (t.name == type.name)
            {
                throw ConfigError(fmt::format("duplicate VNF type '{}'", type.name));
            }
        }
        next_index_.emplace(type.name, 0);
        types_.push_back(std::move(type));
    }

    void SfcManager::add_policy(VnfChainPolicy policy)
    {
        if (policy.chain.empty())
        {
            throw ConfigError(fmt::format("chain policy '{}' is empty", policy.name));
        }
        for (const auto &t : policy.chain)
        {
            type(t);
        }
        for (const auto &p : policies_)
        {
            if (p.src_selector == policy.src_selector && p.dst_selector == policy.dst_selector)
            {
                throw ConfigError(fmt::format("chain policies '{}' and '{}' match the same traffic", p.name,
                                              policy.name));
            }
        }
        policies_.push_back(std::move(policy));
    }

    void SfcManager::set_vm_group(const std::string &vm, const std::string &group)
    {
        vm_group_[vm] = group;
    }

    const VnfType &SfcManager::type(std::string_view name) const
    {
        for (const auto &t : types_)
        {
            if (t.name == name)
            {
                return t;
            }
        }
        throw ConfigError(fmt::format("unknown VNF type '{}'", name));
    }

    VnfInstance &SfcManager::create_instance(std::string_view type_name, std::string_view host)
    {
        const auto &t = type(type_name);
        auto &n = next_index_.find(type_name)->second;
        VnfInstance inst;
        inst.id = fmt::format("{}-{}", t.name, n++);
        inst.name = "vnf-" + inst.id;
        inst.type = t.name;
        inst.vm = inst.name;
        inst.host = std::string(host);
        inst.ordinal = next_ordinal_++;
        inst.address = instance_address(inst.ordinal);
        inst.image = t.image;
        inst.status = InstanceStatus::Starting;
        instances_.push_back(std::move(inst));
        return instances_.back();
    }

    VnfInstance &SfcManager::restore_instance(const DeploymentDescriptor::InstanceEntry &entry)
    {
        const auto &t = type(entry.type);
        if (find_instance(entry.id) != nullptr)
        {
            throw ConfigError(fmt::format("duplicate VNF instance '{}'", entry.id));
        }
        const auto status = parse_instance_status(entry.status);
        if (!status)
        {
            throw ConfigError(fmt::format("instance '{}': unknown status '{}'", entry.id, entry.status));
        }
        VnfInstance inst;
        inst.id = entry.id;
        inst.name = entry.name;
        inst.type = t.name;
        inst.vm = entry.name;
        inst.host = entry.host;
        inst.address = entry.address;
        inst.image = entry.image;
        inst.status = *status;
        inst.ordinal = next_ordinal_++;

        // Keep generated ids clear of restored ones.
        auto &n = next_index_.find(entry.type)->second;
        const auto prefix = t.name + "-";
        if (entry.id.starts_with(prefix))
        {
            int idx = 0;
            const auto *first = entry.id.data() + prefix.size();
            const auto *last = entry.id.data() + entry.id.size();
            if (auto [p, ec] = std::from_chars(first, last, idx); ec == std::errc{} && p == last)
            {
                n = std::max(n, idx + 1);
            }
        }
        instances_.push_back(std::move(inst));
        return instances_.back();
    }

    VnfInstance *SfcManager::find_instance(std::string_view id)
    {
        for (auto &i : instances_)
        {
            if (i.id == id)
            {
                return &i;
            }
        }
        return nullptr;
    }

    const VnfInstance &SfcManager::instance(std::string_view id) const
    {
        for (const auto &i : instances_)
        {
            if (i.id == id)
            {
                return i;
            }
        }
        throw ConfigError(fmt::format("unknown VNF instance '{}'", id));
    }

    const VnfInstance *SfcManager::instance_for_vm(std::string_view vm) const
    {
        for (const auto &i : instances_)
        {
            if (i.vm == vm)
            {
                return &i;
            }
        }
        return nullptr;
    }

    void SfcManager::set_status(std::string_view id, InstanceStatus status)
    {
        auto *inst = find_instance(id);
        if (inst == nullptr)
        {
            throw ConfigError(fmt::format("unknown VNF instance '{}'", id));
        }
        inst->status = status;
    }

    void SfcManager::remove_instance(std::string_view id)
    {
        const auto it =
            std::find_if(instances_.begin(), instances_.end(), [&](const VnfInstance &i) { return i.id == id; });
        if (it == instances_.end())
        {
            throw ConfigError(fmt::format("unknown VNF instance '{}'", id));
        }
        instances_.erase(it);
    }

    std::map<std::string, int> SfcManager::instance_counts() const
    {
        std::map<std::string, int> counts;
        for (const auto &t : types_)
        {
            counts[t.name] = 0;
        }
        for (const auto &i : instances_)
        {
            if (i.status != InstanceStatus::Draining)
            {
                ++counts[i.type];
            }
        }
        return counts;
    }

    const VnfChainPolicy *SfcManager::match(std::string_view src_vm, std::string_view dst_vm) const
    {
        const auto src = vm_group_.find(src_vm);
        const auto dst = vm_group_.find(dst_vm);
        if (src == vm_group_.end() || dst == vm_group_.end())
        {
            return nullptr;
        }
        for (const auto &p : policies_)
        {
            if (p.src_selector == src->second && p.dst_selector == dst->second)
            {
                return &p;
            }
        }
        return nullptr;
    }

    ChainSelection SfcManager::enforce_chain(std::string_view src_vm, std::string_view dst_vm)
    {
        ChainSelection sel;
        sel.policy = match(src_vm, dst_vm);
        if (sel.policy == nullptr)
        {
            return sel;
        }
        std::vector<VnfInstance *> picks;
        for (const auto &type_name : sel.policy->chain)
        {
            VnfInstance *best = nullptr;
            for (auto &i : instances_)
            {
                if (i.type != type_name || i.status != InstanceStatus::Active)
                {
                    continue;
                }
                if (best == nullptr || i.outstanding < best->outstanding ||
                    (i.outstanding == best->outstanding && i.ordinal < best->ordinal))
                {
                    best = &i;
                }
            }
            if (best == nullptr)
            {
                sel.hold = true;
                return sel;
            }
            picks.push_back(best);
        }
        for (auto *p : picks)
        {
            ++p->outstanding;
            sel.waypoints.push_back(p->id);
        }
        return sel;
    }

    void SfcManager::release(std::string_view instance_id)
    {
        auto *inst = find_instance(instance_id);
        if (inst == nullptr || inst->outstanding <= 0)
        {
            throw std::logic_error(fmt::format("release: instance '{}' has no outstanding requests", instance_id));
        }
        --inst->outstanding;
    }

    DeploymentDescriptor SfcManager::descriptor() const
    {
        DeploymentDescriptor d;
        for (const auto &t : types_)
        {
            d.types.push_back({t.name, t.per_request_mi, t.instance_spec.mips, t.image, t.scaling});
        }
        for (const auto &i : instances_)
        {
            d.instances.push_back(
                {i.name, i.id, i.address, std::string(to_string(i.status)), i.image, i.type, i.host});
        }
        return d;
    }
}
