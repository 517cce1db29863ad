#include "nfvsim/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <set>
#include <sstream>

namespace nfvsim
{
    namespace
    {
        std::string join_messages(const std::vector<Diagnostic> &diags)
        {
            std::string out;
            for (const auto &d : diags)
            {
                if (!out.empty())
                {
                    out += '\n';
                }
                out += (d.path.empty() ? std::string("/") : d.path) + ": " + d.message;
            }
            return out;
        }
    }

    ScenarioError::ScenarioError(std::vector<Diagnostic> diagnostics)
        : ConfigError(join_messages(diagnostics)), diagnostics_(std::move(diagnostics))
    {
    }

    double Scenario::class_weight(int priority_class) const
    {
        const auto it = class_weights.find(priority_class);
        return it == class_weights.end() ? 1.0 : it->second;
    }

    std::vector<std::string> Scenario::vm_ids() const
    {
        std::vector<std::string> ids;
        for (const auto &g : vm_groups)
        {
            ids.insert(ids.end(), g.ids.begin(), g.ids.end());
        }
        return ids;
    }

    Override parse_override(std::string_view text)
    {
        const auto eq = text.find('=');
        if (eq == std::string_view::npos || eq == 0)
        {
            throw ConfigError(fmt::format("override '{}' is not key=value", text));
        }
        return {std::string(text.substr(0, eq)), std::string(text.substr(eq + 1))};
    }

    namespace
    {
        // Typed accessors that record a diagnostic instead of throwing, so one
        // pass reports every problem in the file.
        class Reader
        {
        public:
            std::vector<Diagnostic> diags;

            void error(const std::string &path, std::string message)
            {
                diags.push_back({path, std::move(message)});
            }

            bool is_map(const YAML::Node &n, const std::string &path)
            {
                if (!n.IsMap())
                {
                    error(path, "expected a mapping");
                    return false;
                }
                return true;
            }

            bool is_seq(const YAML::Node &n, const std::string &path)
            {
                if (!n.IsSequence())
                {
                    error(path, "expected a list");
                    return false;
                }
                return true;
            }

            void check_keys(const YAML::Node &n, const std::string &path, std::initializer_list<const char *> allowed)
            {
                if (!n.IsMap())
                {
                    return;
                }
                for (const auto &kv : n)
                {
                    const auto key = kv.first.as<std::string>("");
                    const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                                [&](const char *a) { return key == a; });
                    if (!ok)
                    {
                        error(path + "/" + key, "unknown field");
                    }
                }
            }

            template <typename T>
            std::optional<T> scalar(const YAML::Node &n, const std::string &path)
            {
                if (!n.IsScalar())
                {
                    error(path, "expected a scalar value");
                    return std::nullopt;
                }
                try
                {
                    return n.as<T>();
                }
                catch (const YAML::Exception &)
                {
                    error(path, fmt::format("cannot interpret '{}' as {}", n.Scalar(), type_name<T>()));
                    return std::nullopt;
                }
            }

            template <typename T>
            T field(const YAML::Node &parent, const char *key, const std::string &path, T fallback,
                    bool required = false)
            {
                const auto n = parent[key];
                const auto p = path + "/" + key;
                if (!n.IsDefined() || n.IsNull())
                {
                    if (required)
                    {
                        error(p, "required field is missing");
                    }
                    return fallback;
                }
                if constexpr (std::is_floating_point_v<T>)
                {
                    auto v = scalar<T>(n, p);
                    if (v && !std::isfinite(*v))
                    {
                        error(p, "must be finite");
                        return fallback;
                    }
                    return v.value_or(fallback);
                }
                else
                {
                    return scalar<T>(n, p).value_or(fallback);
                }
            }

            double positive(const YAML::Node &parent, const char *key, const std::string &path, double fallback,
                            bool required = false)
            {
                const double v = field<double>(parent, key, path, fallback, required);
                if (!(v > 0.0))
                {
                    error(path + "/" + key, "must be positive");
                }
                return v;
            }

            double non_negative(const YAML::Node &parent, const char *key, const std::string &path, double fallback)
            {
                const double v = field<double>(parent, key, path, fallback);
                if (!(v >= 0.0))
                {
                    error(path + "/" + key, "must be non-negative");
                }
                return v;
            }

        private:
            template <typename T>
            static const char *type_name()
            {
                if constexpr (std::is_same_v<T, bool>)
                {
                    return "a boolean";
                }
                else if constexpr (std::is_integral_v<T>)
                {
                    return "an integer";
                }
                else if constexpr (std::is_floating_point_v<T>)
                {
                    return "a number";
                }
                else
                {
                    return "a string";
                }
            }
        };

        std::string idx(const std::string &path, std::size_t i)
        {
            return path + "/" + std::to_string(i);
        }

        std::string num(double v)
        {
            return fmt::format("{}", v);
        }

        // -- topology -------------------------------------------------------

        FatTreeParams read_fat_tree(Reader &r, const YAML::Node &n, const std::string &path)
        {
            FatTreeParams p;
            if (!r.is_map(n, path))
            {
                return p;
            }
            r.check_keys(n, path, {"k", "host_link_bps", "switch_link_bps", "latency_s", "dc"});
            p.k = r.field<int>(n, "k", path, 8, true);
            if (p.k < 2 || p.k % 2 != 0)
            {
                r.error(path + "/k", "must be an even integer >= 2");
            }
            p.host_link_bps = r.positive(n, "host_link_bps", path, p.host_link_bps);
            p.switch_link_bps = r.positive(n, "switch_link_bps", path, p.switch_link_bps);
            p.latency_s = r.non_negative(n, "latency_s", path, p.latency_s);
            p.dc = r.field<std::string>(n, "dc", path, p.dc);
            return p;
        }

        void read_topology(Reader &r, const YAML::Node &n, Scenario &s)
        {
            const std::string path = "/topology";
            if (!n.IsDefined())
            {
                r.error(path, "required field is missing");
                return;
            }
            if (!r.is_map(n, path))
            {
                return;
            }
            r.check_keys(n, path, {"fat_tree", "clouds", "wan", "nodes", "links"});
            const int forms = int(n["fat_tree"].IsDefined()) + int(n["clouds"].IsDefined()) +
                              int(n["nodes"].IsDefined());
            if (forms != 1)
            {
                r.error(path, "give exactly one of fat_tree, clouds, or nodes/links");
                return;
            }
            const auto before = r.diags.size();
            try
            {
                if (n["fat_tree"].IsDefined())
                {
                    const auto p = read_fat_tree(r, n["fat_tree"], path + "/fat_tree");
                    if (r.diags.size() == before)
                    {
                        s.topology = build_fat_tree(p);
                        s.echo.emplace_back("topology.form", "fat_tree");
                        s.echo.emplace_back("topology.k", std::to_string(p.k));
                        s.echo.emplace_back("topology.host_link_bps", num(p.host_link_bps));
                        s.echo.emplace_back("topology.switch_link_bps", num(p.switch_link_bps));
                        s.echo.emplace_back("topology.latency_s", num(p.latency_s));
                    }
                }
                else if (n["clouds"].IsDefined())
                {
                    const auto clouds = n["clouds"];
                    const auto wan = n["wan"];
                    double wan_bps = 10e9;
                    double wan_lat = 0.05;
                    if (wan.IsDefined() && r.is_map(wan, path + "/wan"))
                    {
                        r.check_keys(wan, path + "/wan", {"capacity_bps", "latency_s"});
                        wan_bps = r.positive(wan, "capacity_bps", path + "/wan", wan_bps);
                        wan_lat = r.non_negative(wan, "latency_s", path + "/wan", wan_lat);
                    }
                    std::vector<FatTreeParams> trees;
                    if (r.is_seq(clouds, path + "/clouds"))
                    {
                        if (clouds.size() < 2)
                        {
                            r.error(path + "/clouds", "needs at least two data centers");
                        }
                        for (std::size_t i = 0; i < clouds.size(); ++i)
                        {
                            const auto cp = idx(path + "/clouds", i);
                            const auto c = clouds[i];
                            if (r.is_map(c, cp))
                            {
                                r.check_keys(c, cp, {"fat_tree"});
                                trees.push_back(read_fat_tree(r, c["fat_tree"], cp + "/fat_tree"));
                            }
                        }
                    }
                    if (r.diags.size() == before && !trees.empty())
                    {
                        Topology t = build_fat_tree(trees.front());
                        for (std::size_t i = 1; i < trees.size(); ++i)
                        {
                            t = connect_clouds(t, build_fat_tree(trees[i]), wan_bps, wan_lat);
                        }
                        s.topology = std::move(t);
                        s.echo.emplace_back("topology.form", "clouds");
                        s.echo.emplace_back("topology.clouds", std::to_string(trees.size()));
                        s.echo.emplace_back("topology.wan_capacity_bps", num(wan_bps));
                        s.echo.emplace_back("topology.wan_latency_s", num(wan_lat));
                    }
                }
                else
                {
                    const auto nodes = n["nodes"];
                    const auto links = n["links"];
                    Topology t;
                    if (r.is_seq(nodes, path + "/nodes"))
                    {
                        for (std::size_t i = 0; i < nodes.size(); ++i)
                        {
                            const auto np = idx(path + "/nodes", i);
                            if (!r.is_map(nodes[i], np))
                            {
                                continue;
                            }
                            r.check_keys(nodes[i], np, {"id", "kind", "dc"});
                            Node node;
                            node.id = r.field<std::string>(nodes[i], "id", np, "", true);
                            const auto kind = r.field<std::string>(nodes[i], "kind", np, "", true);
                            node.dc = r.field<std::string>(nodes[i], "dc", np, "dc0");
                            if (const auto k = parse_node_kind(kind))
                            {
                                node.kind = *k;
                            }
                            else if (!kind.empty())
                            {
                                r.error(np + "/kind", fmt::format("unknown node kind '{}'", kind));
                            }
                            if (node.id.empty())
                            {
                                continue;
                            }
                            if (t.find(node.id))
                            {
                                r.error(np + "/id", fmt::format("duplicate node id '{}'", node.id));
                                continue;
                            }
                            t.add_node(std::move(node));
                        }
                    }
                    if (r.is_seq(links, path + "/links"))
                    {
                        for (std::size_t i = 0; i < links.size(); ++i)
                        {
                            const auto lp = idx(path + "/links", i);
                            if (!r.is_map(links[i], lp))
                            {
                                continue;
                            }
                            r.check_keys(links[i], lp, {"a", "b", "capacity_bps", "latency_s"});
                            const auto a = r.field<std::string>(links[i], "a", lp, "", true);
                            const auto b = r.field<std::string>(links[i], "b", lp, "", true);
                            const double cap = r.positive(links[i], "capacity_bps", lp, 1.0, true);
                            const double lat = r.non_negative(links[i], "latency_s", lp, 0.0);
                            try
                            {
                                if (!a.empty() && !b.empty() && cap > 0.0 && lat >= 0.0)
                                {
                                    t.add_link(a, b, cap, lat);
                                }
                            }
                            catch (const ConfigError &e)
                            {
                                r.error(lp, e.what());
                            }
                        }
                    }
                    if (r.diags.size() == before)
                    {
                        t.validate();
                        s.topology = std::move(t);
                        s.echo.emplace_back("topology.form", "explicit");
                    }
                }
            }
            catch (const ConfigError &e)
            {
                r.error(path, e.what());
            }
            s.echo.emplace_back("topology.nodes", std::to_string(s.topology.node_count()));
            s.echo.emplace_back("topology.links", std::to_string(s.topology.link_count()));
        }

        // -- hosts ------------------------------------------------------------

        void read_hosts(Reader &r, const YAML::Node &root, Scenario &s)
        {
            const std::string path = "/host_classes";
            const auto n = root["host_classes"];
            std::vector<HostClass> classes;
            if (!n.IsDefined())
            {
                r.error(path, "required field is missing");
                return;
            }
            if (!r.is_seq(n, path))
            {
                return;
            }
            for (std::size_t i = 0; i < n.size(); ++i)
            {
                const auto p = idx(path, i);
                const auto c = n[i];
                if (!r.is_map(c, p))
                {
                    continue;
                }
                r.check_keys(c, p,
                             {"name", "cores", "mips_per_core", "ram_mib", "idle_watts", "max_watts", "hosts", "dc"});
                HostClass hc;
                hc.name = r.field<std::string>(c, "name", p, fmt::format("class{}", i));
                hc.cores = r.field<int>(c, "cores", p, hc.cores);
                if (hc.cores < 1)
                {
                    r.error(p + "/cores", "must be at least 1");
                }
                hc.mips_per_core = r.positive(c, "mips_per_core", p, hc.mips_per_core);
                hc.ram_mib = r.positive(c, "ram_mib", p, hc.ram_mib);
                hc.power.idle_watts = r.non_negative(c, "idle_watts", p, hc.power.idle_watts);
                hc.power.max_watts = r.non_negative(c, "max_watts", p, hc.power.max_watts);
                if (hc.power.max_watts < hc.power.idle_watts)
                {
                    r.error(p + "/max_watts", "must be >= idle_watts");
                }
                hc.dc = r.field<std::string>(c, "dc", p, "");
                if (const auto hs = c["hosts"]; hs.IsDefined() && r.is_seq(hs, p + "/hosts"))
                {
                    for (std::size_t j = 0; j < hs.size(); ++j)
                    {
                        const auto id = r.scalar<std::string>(hs[j], idx(p + "/hosts", j));
                        if (!id)
                        {
                            continue;
                        }
                        const auto ni = s.topology.find(*id);
                        if (!ni || s.topology.node(*ni).kind != NodeKind::Host)
                        {
                            r.error(idx(p + "/hosts", j), fmt::format("'{}' is not a host of the topology", *id));
                        }
                        hc.hosts.push_back(*id);
                    }
                }
                classes.push_back(std::move(hc));
            }
            if (classes.empty())
            {
                r.error(path, "at least one host class is required");
                return;
            }
            for (const auto h : s.topology.nodes_of_kind(NodeKind::Host))
            {
                const auto &node = s.topology.node(h);
                const HostClass *match = nullptr;
                for (const auto &hc : classes)
                {
                    const bool hit = !hc.hosts.empty()
                                         ? std::find(hc.hosts.begin(), hc.hosts.end(), node.id) != hc.hosts.end()
                                         : (hc.dc.empty() || hc.dc == node.dc);
                    if (hit)
                    {
                        match = &hc;
                        break;
                    }
                }
                if (match == nullptr)
                {
                    r.error(path, fmt::format("host '{}' matches no host class", node.id));
                    continue;
                }
                s.hosts.push_back({node.id, match->cores, match->mips_per_core, match->ram_mib, match->power});
            }
            for (std::size_t i = 0; i < classes.size(); ++i)
            {
                const auto &hc = classes[i];
                const auto key = "host_classes." + hc.name;
                s.echo.emplace_back(key + ".cores", std::to_string(hc.cores));
                s.echo.emplace_back(key + ".mips_per_core", num(hc.mips_per_core));
                s.echo.emplace_back(key + ".ram_mib", num(hc.ram_mib));
                s.echo.emplace_back(key + ".idle_watts", num(hc.power.idle_watts));
                s.echo.emplace_back(key + ".max_watts", num(hc.power.max_watts));
            }
            s.echo.emplace_back("hosts", std::to_string(s.hosts.size()));

            if (const auto sp = root["switch_power"]; sp.IsDefined() && r.is_map(sp, "/switch_power"))
            {
                r.check_keys(sp, "/switch_power", {"static_watts", "per_active_port_watts"});
                s.switch_power.static_watts =
                    r.non_negative(sp, "static_watts", "/switch_power", s.switch_power.static_watts);
                s.switch_power.per_active_port_watts =
                    r.non_negative(sp, "per_active_port_watts", "/switch_power", s.switch_power.per_active_port_watts);
            }
            s.echo.emplace_back("switch_power.static_watts", num(s.switch_power.static_watts));
            s.echo.emplace_back("switch_power.per_active_port_watts", num(s.switch_power.per_active_port_watts));
        }

        // -- VMs and VNFs -------------------------------------------------------

        void read_vms(Reader &r, const YAML::Node &n, Scenario &s)
        {
            const std::string path = "/vms";
            if (!n.IsDefined())
            {
                r.error(path, "required field is missing");
                return;
            }
            if (!r.is_seq(n, path))
            {
                return;
            }
            std::set<std::string> seen;
            for (std::size_t i = 0; i < n.size(); ++i)
            {
                const auto p = idx(path, i);
                const auto g = n[i];
                if (!r.is_map(g, p))
                {
                    continue;
                }
                r.check_keys(g, p, {"group", "count", "mips", "cores", "ram_mib", "ids"});
                VmGroup vg;
                vg.name = r.field<std::string>(g, "group", p, "", true);
                vg.mips = r.positive(g, "mips", p, 1.0, true);
                vg.cores = r.field<int>(g, "cores", p, vg.cores);
                vg.ram_mib = r.non_negative(g, "ram_mib", p, vg.ram_mib);
                if (vg.cores < 1)
                {
                    r.error(p + "/cores", "must be at least 1");
                }
                if (const auto ids = g["ids"]; ids.IsDefined())
                {
                    if (g["count"].IsDefined())
                    {
                        r.error(p, "give either count or ids, not both");
                    }
                    if (r.is_seq(ids, p + "/ids"))
                    {
                        for (std::size_t j = 0; j < ids.size(); ++j)
                        {
                            if (const auto id = r.scalar<std::string>(ids[j], idx(p + "/ids", j)))
                            {
                                vg.ids.push_back(*id);
                            }
                        }
                    }
                }
                else
                {
                    const int count = r.field<int>(g, "count", p, 0, true);
                    if (count < 1 && g["count"].IsDefined())
                    {
                        r.error(p + "/count", "must be at least 1");
                    }
                    for (int j = 0; j < count; ++j)
                    {
                        vg.ids.push_back(fmt::format("{}-{:02}", vg.name, j));
                    }
                }
                for (std::size_t j = 0; j < vg.ids.size(); ++j)
                {
                    if (!seen.insert(vg.ids[j]).second || vg.ids[j].starts_with("vnf-"))
                    {
                        r.error(p, fmt::format("VM id '{}' is duplicated or reserved", vg.ids[j]));
                    }
                }
                if (std::any_of(s.vm_groups.begin(), s.vm_groups.end(),
                                [&](const VmGroup &o) { return o.name == vg.name; }))
                {
                    r.error(p + "/group", fmt::format("duplicate group '{}'", vg.name));
                }
                const auto key = "vms." + vg.name;
                s.echo.emplace_back(key + ".count", std::to_string(vg.ids.size()));
                s.echo.emplace_back(key + ".mips", num(vg.mips));
                s.echo.emplace_back(key + ".cores", std::to_string(vg.cores));
                s.echo.emplace_back(key + ".ram_mib", num(vg.ram_mib));
                s.vm_groups.push_back(std::move(vg));
            }
        }

        // Field-level version of validate_scaling, so each problem gets its own path.
        void check_scaling(Reader &r, const std::string &path, const ScalingSettings &s)
        {
            if (!(s.threshold > 0.0 && s.threshold <= 1.0))
            {
                r.error(path + "/threshold", "must be in (0, 1]");
            }
            if (!(s.window_s > 0.0))
            {
                r.error(path + "/window_s", "must be positive");
            }
            if (!(s.cooldown_s >= 0.0))
            {
                r.error(path + "/cooldown_s", "must be non-negative");
            }
            if (s.max_instances < 1)
            {
                r.error(path + "/max_instances", "must be at least 1");
            }
        }

        ScalingSettings read_scaling(Reader &r, const YAML::Node &n, const std::string &path, ScalingSettings base)
        {
            if (!n.IsDefined() || !r.is_map(n, path))
            {
                return base;
            }
            r.check_keys(n, path, {"threshold", "window_s", "cooldown_s", "max_instances"});
            base.threshold = r.field<double>(n, "threshold", path, base.threshold);
            base.window_s = r.field<double>(n, "window_s", path, base.window_s);
            base.cooldown_s = r.field<double>(n, "cooldown_s", path, base.cooldown_s);
            base.max_instances = r.field<int>(n, "max_instances", path, base.max_instances);
            check_scaling(r, path, base);
            return base;
        }

        void read_autoscale(Reader &r, const YAML::Node &n, Scenario &s)
        {
            const std::string path = "/autoscale";
            auto &a = s.autoscale;
            if (n.IsDefined() && r.is_map(n, path))
            {
                r.check_keys(n, path,
                             {"enabled", "threshold", "window_s", "cooldown_s", "max_instances", "startup_delay_s",
                              "scale_in"});
                a.enabled = r.field<bool>(n, "enabled", path, a.enabled);
                a.defaults.threshold = r.field<double>(n, "threshold", path, a.defaults.threshold);
                a.defaults.window_s = r.field<double>(n, "window_s", path, a.defaults.window_s);
                a.defaults.cooldown_s = r.field<double>(n, "cooldown_s", path, a.defaults.cooldown_s);
                a.defaults.max_instances = r.field<int>(n, "max_instances", path, a.defaults.max_instances);
                a.startup_delay_s = r.non_negative(n, "startup_delay_s", path, a.startup_delay_s);
                check_scaling(r, path, a.defaults);
                if (const auto si = n["scale_in"]; si.IsDefined() && r.is_map(si, path + "/scale_in"))
                {
                    r.check_keys(si, path + "/scale_in", {"enabled", "low_water"});
                    a.scale_in_enabled = r.field<bool>(si, "enabled", path + "/scale_in", a.scale_in_enabled);
                    a.scale_in_low_water = r.field<double>(si, "low_water", path + "/scale_in", a.scale_in_low_water);
                    if (!(a.scale_in_low_water >= 0.0 && a.scale_in_low_water < 1.0))
                    {
                        r.error(path + "/scale_in/low_water", "must be in [0, 1)");
                    }
                }
            }
            s.echo.emplace_back("autoscale.enabled", a.enabled ? "true" : "false");
            s.echo.emplace_back("autoscale.threshold", num(a.defaults.threshold));
            s.echo.emplace_back("autoscale.window_s", num(a.defaults.window_s));
            s.echo.emplace_back("autoscale.cooldown_s", num(a.defaults.cooldown_s));
            s.echo.emplace_back("autoscale.max_instances", std::to_string(a.defaults.max_instances));
            s.echo.emplace_back("autoscale.startup_delay_s", num(a.startup_delay_s));
            s.echo.emplace_back("autoscale.scale_in.enabled", a.scale_in_enabled ? "true" : "false");
            s.echo.emplace_back("autoscale.scale_in.low_water", num(a.scale_in_low_water));
        }

        void read_vnf_types(Reader &r, const YAML::Node &n, Scenario &s)
        {
            const std::string path = "/vnf_types";
            if (!n.IsDefined())
            {
                return;
            }
            if (!r.is_seq(n, path))
            {
                return;
            }
            for (std::size_t i = 0; i < n.size(); ++i)
            {
                const auto p = idx(path, i);
                const auto v = n[i];
                if (!r.is_map(v, p))
                {
                    continue;
                }
                r.check_keys(v, p,
                             {"name", "per_request_mi", "mips", "cores", "ram_mib", "image", "initial_instances",
                              "scaling"});
                VnfType t;
                t.name = r.field<std::string>(v, "name", p, "", true);
                t.per_request_mi = r.positive(v, "per_request_mi", p, 1.0, true);
                t.instance_spec.mips = r.positive(v, "mips", p, 1.0, true);
                t.instance_spec.cores = r.field<int>(v, "cores", p, 1);
                t.instance_spec.ram_mib = r.non_negative(v, "ram_mib", p, 1024.0);
                t.instance_spec.role = VmRole::Vnf;
                t.image = r.field<std::string>(v, "image", p, "", true);
                t.scaling = read_scaling(r, v["scaling"], p + "/scaling", s.autoscale.defaults);
                const int initial = r.field<int>(v, "initial_instances", p, 1);
                if (initial < 0)
                {
                    r.error(p + "/initial_instances", "must be non-negative");
                }
                if (initial > t.scaling.max_instances)
                {
                    r.error(p + "/initial_instances", "exceeds max_instances");
                }
                if (std::any_of(s.vnf_types.begin(), s.vnf_types.end(),
                                [&](const VnfType &o) { return o.name == t.name; }))
                {
                    r.error(p + "/name", fmt::format("duplicate VNF type '{}'", t.name));
                    continue;
                }
                const auto key = "vnf_types." + t.name;
                s.echo.emplace_back(key + ".per_request_mi", num(t.per_request_mi));
                s.echo.emplace_back(key + ".mips", num(t.instance_spec.mips));
                s.echo.emplace_back(key + ".cores", std::to_string(t.instance_spec.cores));
                s.echo.emplace_back(key + ".ram_mib", num(t.instance_spec.ram_mib));
                s.echo.emplace_back(key + ".image", t.image);
                s.echo.emplace_back(key + ".initial_instances", std::to_string(initial));
                s.echo.emplace_back(key + ".threshold", num(t.scaling.threshold));
                s.echo.emplace_back(key + ".window_s", num(t.scaling.window_s));
                s.echo.emplace_back(key + ".cooldown_s", num(t.scaling.cooldown_s));
                s.echo.emplace_back(key + ".max_instances", std::to_string(t.scaling.max_instances));
                s.initial_instances[t.name] = initial;
                s.vnf_types.push_back(std::move(t));
            }
        }

        void read_chains(Reader &r, const YAML::Node &n, Scenario &s)
        {
            const std::string path = "/chains";
            if (!n.IsDefined() || !r.is_seq(n, path))
            {
                return;
            }
            const auto group_known = [&](const std::string &g) {
                return std::any_of(s.vm_groups.begin(), s.vm_groups.end(),
                                   [&](const VmGroup &vg) { return vg.name == g; });
            };
            std::set<std::pair<std::string, std::string>> selectors;
            for (std::size_t i = 0; i < n.size(); ++i)
            {
                const auto p = idx(path, i);
                const auto c = n[i];
                if (!r.is_map(c, p))
                {
                    continue;
                }
                r.check_keys(c, p, {"name", "src", "dst", "chain"});
                VnfChainPolicy pol;
                pol.name = r.field<std::string>(c, "name", p, fmt::format("chain{}", i));
                pol.src_selector = r.field<std::string>(c, "src", p, "", true);
                pol.dst_selector = r.field<std::string>(c, "dst", p, "", true);
                for (const auto *which : {"src", "dst"})
                {
                    const auto &g = std::string(which) == "src" ? pol.src_selector : pol.dst_selector;
                    if (!g.empty() && !group_known(g))
                    {
                        r.error(p + "/" + which, fmt::format("unknown VM group '{}'", g));
                    }
                }
                if (!selectors.insert({pol.src_selector, pol.dst_selector}).second)
                {
                    r.error(p, "another chain already matches the same src/dst groups");
                }
                const auto chain = c["chain"];
                if (!chain.IsDefined())
                {
                    r.error(p + "/chain", "required field is missing");
                }
                else if (r.is_seq(chain, p + "/chain"))
                {
                    if (chain.size() == 0)
                    {
                        r.error(p + "/chain", "must list at least one VNF type");
                    }
                    for (std::size_t j = 0; j < chain.size(); ++j)
                    {
                        const auto t = r.scalar<std::string>(chain[j], idx(p + "/chain", j));
                        if (!t)
                        {
                            continue;
                        }
                        if (std::none_of(s.vnf_types.begin(), s.vnf_types.end(),
                                         [&](const VnfType &v) { return v.name == *t; }))
                        {
                            r.error(idx(p + "/chain", j), fmt::format("unknown VNF type '{}'", *t));
                        }
                        pol.chain.push_back(*t);
                    }
                }
                std::string rendered;
                for (const auto &t : pol.chain)
                {
                    rendered += (rendered.empty() ? "" : ">") + t;
                }
                s.echo.emplace_back("chains." + pol.name,
                                    fmt::format("{}->{} via {}", pol.src_selector, pol.dst_selector, rendered));
                s.chains.push_back(std::move(pol));
            }
        }

        void read_placement(Reader &r, const YAML::Node &n, Scenario &s)
        {
            const std::string path = "/placement";
            if (n.IsDefined() && r.is_map(n, path))
            {
                r.check_keys(n, path, {"policy", "sort_decreasing", "affinity"});
                const auto name = r.field<std::string>(n, "policy", path, "first-fit");
                if (const auto k = parse_placement_kind(name))
                {
                    s.placement.kind = *k;
                }
                else
                {
                    r.error(path + "/policy",
                            fmt::format("unknown policy '{}' (first-fit, best-fit-most-full, network-aware)", name));
                }
                s.placement.sort_decreasing = r.field<bool>(n, "sort_decreasing", path, false);
                if (const auto aff = n["affinity"]; aff.IsDefined() && r.is_seq(aff, path + "/affinity"))
                {
                    for (std::size_t i = 0; i < aff.size(); ++i)
                    {
                        const auto p = idx(path + "/affinity", i);
                        if (!r.is_map(aff[i], p))
                        {
                            continue;
                        }
                        r.check_keys(aff[i], p, {"a", "b", "weight"});
                        const auto a = r.field<std::string>(aff[i], "a", p, "", true);
                        const auto b = r.field<std::string>(aff[i], "b", p, "", true);
                        const double w = r.positive(aff[i], "weight", p, 1.0);
                        s.placement.affinity[{a, b}] += w;
                    }
                }
            }
            s.echo.emplace_back("placement.policy", std::string(to_string(s.placement.kind)));
            s.echo.emplace_back("placement.sort_decreasing", s.placement.sort_decreasing ? "true" : "false");
            s.echo.emplace_back("placement.affinity_pairs", std::to_string(s.placement.affinity.size()));
        }

        void read_network(Reader &r, const YAML::Node &n, Scenario &s)
        {
            const std::string path = "/network";
            if (n.IsDefined() && r.is_map(n, path))
            {
                r.check_keys(n, path, {"class_weights", "migration_bandwidth_bps"});
                s.migration_bandwidth_bps =
                    r.positive(n, "migration_bandwidth_bps", path, s.migration_bandwidth_bps);
                if (const auto cw = n["class_weights"]; cw.IsDefined() && r.is_map(cw, path + "/class_weights"))
                {
                    s.class_weights.clear();
                    for (const auto &kv : cw)
                    {
                        const auto key = kv.first.as<std::string>("");
                        const auto p = path + "/class_weights/" + key;
                        const auto cls = r.scalar<int>(kv.first, p);
                        const auto w = r.scalar<double>(kv.second, p);
                        if (!cls || !w)
                        {
                            continue;
                        }
                        if (*cls < 1 || !(*w > 0.0))
                        {
                            r.error(p, "classes are >= 1 and weights positive");
                            continue;
                        }
                        s.class_weights[*cls] = *w;
                    }
                }
            }
            for (const auto &[cls, w] : s.class_weights)
            {
                s.echo.emplace_back(fmt::format("network.class_weight.{}", cls), num(w));
            }
            s.echo.emplace_back("network.migration_bandwidth_bps", num(s.migration_bandwidth_bps));
        }

        Distribution read_distribution(Reader &r, const YAML::Node &n, const std::string &path, Distribution fallback)
        {
            if (!n.IsDefined())
            {
                return fallback;
            }
            Distribution d;
            if (n.IsScalar())
            {
                d = Distribution::fixed(r.scalar<double>(n, path).value_or(fallback.a));
            }
            else if (n.IsMap() && n.size() == 1)
            {
                const auto kind = n.begin()->first.as<std::string>("");
                const auto body = n.begin()->second;
                const auto p = path + "/" + kind;
                if (kind == "fixed")
                {
                    d = Distribution::fixed(r.scalar<double>(body, p).value_or(1.0));
                }
                else if (kind == "uniform" && r.is_map(body, p))
                {
                    r.check_keys(body, p, {"min", "max"});
                    d = {Distribution::Kind::Uniform, r.field<double>(body, "min", p, 0.0, true),
                         r.field<double>(body, "max", p, 0.0, true)};
                }
                else if (kind == "exponential" && r.is_map(body, p))
                {
                    r.check_keys(body, p, {"mean"});
                    d = {Distribution::Kind::Exponential, r.field<double>(body, "mean", p, 0.0, true), 0.0};
                }
                else if (kind == "lognormal" && r.is_map(body, p))
                {
                    r.check_keys(body, p, {"median", "sigma"});
                    d = Distribution::lognormal(r.field<double>(body, "median", p, 0.0, true),
                                                r.field<double>(body, "sigma", p, 0.0, true));
                }
                else if (kind != "uniform" && kind != "exponential" && kind != "lognormal")
                {
                    r.error(path, fmt::format("unknown distribution '{}'", kind));
                    return fallback;
                }
                else
                {
                    return fallback;
                }
            }
            else
            {
                r.error(path, "expected a number or {fixed|uniform|exponential|lognormal: ...}");
                return fallback;
            }
            try
            {
                d.validate("distribution");
            }
            catch (const ConfigError &e)
            {
                r.error(path, e.what());
            }
            return d;
        }

        std::string describe(const Distribution &d)
        {
            switch (d.kind)
            {
            case Distribution::Kind::Fixed:
                return fmt::format("fixed({})", d.a);
            case Distribution::Kind::Uniform:
                return fmt::format("uniform({};{})", d.a, d.b);
            case Distribution::Kind::Exponential:
                return fmt::format("exponential(mean={})", d.a);
            case Distribution::Kind::Lognormal:
                return fmt::format("lognormal(median={};sigma={})", d.a, d.b);
            }
            return "";
        }

        void read_workload(Reader &r, const YAML::Node &n, const std::filesystem::path &base_dir, Scenario &s)
        {
            const std::string path = "/workload";
            if (!n.IsDefined())
            {
                r.error(path, "required field is missing");
                return;
            }
            if (!r.is_map(n, path))
            {
                return;
            }
            r.check_keys(n, path, {"generator", "trace"});
            const bool has_gen = n["generator"].IsDefined();
            const bool has_trace = n["trace"].IsDefined();
            if (has_gen == has_trace)
            {
                r.error(path, "give exactly one workload source: generator or trace");
                return;
            }
            const auto ids = s.vm_ids();
            const std::set<std::string> known(ids.begin(), ids.end());
            if (has_trace)
            {
                const auto file = r.field<std::string>(n, "trace", path, "", true);
                if (file.empty())
                {
                    return;
                }
                const auto full = std::filesystem::path(file).is_absolute() ? std::filesystem::path(file)
                                                                            : base_dir / file;
                try
                {
                    s.trace_requests = parse_trace_file(full, &known);
                    s.trace = full;
                }
                catch (const std::exception &e)
                {
                    r.error(path + "/trace", e.what());
                }
                s.echo.emplace_back("workload.source", "trace");
                s.echo.emplace_back("workload.trace", file);
                return;
            }

            const auto g = n["generator"];
            const std::string p = path + "/generator";
            if (!r.is_map(g, p))
            {
                return;
            }
            r.check_keys(g, p,
                         {"duration_s", "rate_per_s", "src_group", "dst_group", "pairs", "cpu_mi", "bytes",
                          "priority_mix"});
            GeneratorConfig gc;
            gc.duration_s = r.non_negative(g, "duration_s", p, gc.duration_s);
            gc.rate_per_s = r.positive(g, "rate_per_s", p, gc.rate_per_s);
            gc.cpu_mi = read_distribution(r, g["cpu_mi"], p + "/cpu_mi", gc.cpu_mi);
            gc.bytes = read_distribution(r, g["bytes"], p + "/bytes", gc.bytes);

            std::string pair_desc;
            if (const auto pairs = g["pairs"]; pairs.IsDefined())
            {
                if (g["src_group"].IsDefined() || g["dst_group"].IsDefined())
                {
                    r.error(p, "give either pairs or src_group/dst_group");
                }
                if (r.is_seq(pairs, p + "/pairs"))
                {
                    for (std::size_t i = 0; i < pairs.size(); ++i)
                    {
                        const auto pp = idx(p + "/pairs", i);
                        if (!pairs[i].IsSequence() || pairs[i].size() != 2)
                        {
                            r.error(pp, "expected [src_vm, dst_vm]");
                            continue;
                        }
                        const auto a = r.scalar<std::string>(pairs[i][0], pp + "/0");
                        const auto b = r.scalar<std::string>(pairs[i][1], pp + "/1");
                        if (!a || !b)
                        {
                            continue;
                        }
                        for (const auto &[vm, sub] : {std::pair{*a, "/0"}, std::pair{*b, "/1"}})
                        {
                            if (!known.contains(vm))
                            {
                                r.error(pp + sub, fmt::format("unknown VM '{}'", vm));
                            }
                        }
                        gc.vm_pairs.emplace_back(*a, *b);
                    }
                }
                pair_desc = fmt::format("{} explicit", gc.vm_pairs.size());
            }
            else
            {
                const auto src = r.field<std::string>(g, "src_group", p, "", true);
                const auto dst = r.field<std::string>(g, "dst_group", p, src);
                const VmGroup *sg = nullptr;
                const VmGroup *dg = nullptr;
                for (const auto &vg : s.vm_groups)
                {
                    if (vg.name == src)
                    {
                        sg = &vg;
                    }
                    if (vg.name == dst)
                    {
                        dg = &vg;
                    }
                }
                if (!src.empty() && sg == nullptr)
                {
                    r.error(p + "/src_group", fmt::format("unknown VM group '{}'", src));
                }
                if (!dst.empty() && dg == nullptr)
                {
                    r.error(p + "/dst_group", fmt::format("unknown VM group '{}'", dst));
                }
                if (sg != nullptr && dg != nullptr)
                {
                    for (const auto &a : sg->ids)
                    {
                        for (const auto &b : dg->ids)
                        {
                            if (a != b)
                            {
                                gc.vm_pairs.emplace_back(a, b);
                            }
                        }
                    }
                }
                pair_desc = fmt::format("{}->{} ({} ordered pairs)", src, dst, gc.vm_pairs.size());
            }
            if (gc.vm_pairs.empty() && gc.duration_s > 0.0)
            {
                r.error(p, "no VM pairs to generate traffic between");
            }

            if (const auto pm = g["priority_mix"]; pm.IsDefined() && r.is_map(pm, p + "/priority_mix"))
            {
                gc.priority_mix.clear();
                double total = 0.0;
                for (const auto &kv : pm)
                {
                    const auto pp = p + "/priority_mix/" + kv.first.as<std::string>("");
                    const auto cls = r.scalar<int>(kv.first, pp);
                    const auto prob = r.scalar<double>(kv.second, pp);
                    if (!cls || !prob)
                    {
                        continue;
                    }
                    if (*cls < 1 || !(*prob >= 0.0))
                    {
                        r.error(pp, "classes are >= 1 and probabilities non-negative");
                        continue;
                    }
                    gc.priority_mix[*cls] = *prob;
                    total += *prob;
                }
                if (std::abs(total - 1.0) > 1e-9)
                {
                    r.error(p + "/priority_mix", fmt::format("probabilities sum to {}, not 1", total));
                }
            }

            s.echo.emplace_back("workload.source", "generator");
            s.echo.emplace_back("workload.duration_s", num(gc.duration_s));
            s.echo.emplace_back("workload.rate_per_s", num(gc.rate_per_s));
            s.echo.emplace_back("workload.pairs", pair_desc);
            s.echo.emplace_back("workload.cpu_mi", describe(gc.cpu_mi));
            s.echo.emplace_back("workload.bytes", describe(gc.bytes));
            std::string mix;
            for (const auto &[cls, prob] : gc.priority_mix)
            {
                mix += fmt::format("{}{}:{}", mix.empty() ? "" : ";", cls, prob);
            }
            s.echo.emplace_back("workload.priority_mix", mix);
            s.generator = std::move(gc);
        }

        void read_admission(Reader &r, const YAML::Node &n, Scenario &s)
        {
            const std::string path = "/admission";
            auto &a = s.admission;
            if (n.IsDefined() && r.is_map(n, path))
            {
                r.check_keys(n, path, {"enabled", "capacity", "queue_bound", "aging_per_s"});
                a.enabled = r.field<bool>(n, "enabled", path, a.enabled);
                const auto cap = r.field<long long>(n, "capacity", path, static_cast<long long>(a.capacity));
                const auto bound = r.field<long long>(n, "queue_bound", path, static_cast<long long>(a.queue_bound));
                if (cap < 1)
                {
                    r.error(path + "/capacity", "must be at least 1");
                }
                if (bound < 0)
                {
                    r.error(path + "/queue_bound", "must be non-negative");
                }
                a.capacity = static_cast<std::size_t>(std::max(1LL, cap));
                a.queue_bound = static_cast<std::size_t>(std::max(0LL, bound));
                a.aging_per_s = r.non_negative(n, "aging_per_s", path, a.aging_per_s);
            }
            s.echo.emplace_back("admission.enabled", a.enabled ? "true" : "false");
            s.echo.emplace_back("admission.capacity", std::to_string(a.capacity));
            s.echo.emplace_back("admission.queue_bound", std::to_string(a.queue_bound));
            s.echo.emplace_back("admission.aging_per_s", num(a.aging_per_s));
        }

        void read_migrations(Reader &r, const YAML::Node &n, Scenario &s)
        {
            const std::string path = "/migrations";
            if (!n.IsDefined() || !r.is_seq(n, path))
            {
                return;
            }
            const auto ids = s.vm_ids();
            std::set<std::string> known(ids.begin(), ids.end());
            for (const auto &[type, count] : s.initial_instances)
            {
                for (int i = 0; i < count; ++i)
                {
                    known.insert(fmt::format("vnf-{}-{}", type, i));
                }
            }
            for (std::size_t i = 0; i < n.size(); ++i)
            {
                const auto p = idx(path, i);
                if (!r.is_map(n[i], p))
                {
                    continue;
                }
                r.check_keys(n[i], p, {"at_s", "vm", "to_host"});
                MigrationSpec m;
                m.at_s = r.non_negative(n[i], "at_s", p, 0.0);
                m.vm = r.field<std::string>(n[i], "vm", p, "", true);
                m.to_host = r.field<std::string>(n[i], "to_host", p, "", true);
                if (!m.vm.empty() && !known.contains(m.vm))
                {
                    r.error(p + "/vm", fmt::format("unknown VM '{}'", m.vm));
                }
                const auto h = s.topology.find(m.to_host);
                if (!m.to_host.empty() && (!h || s.topology.node(*h).kind != NodeKind::Host))
                {
                    r.error(p + "/to_host", fmt::format("'{}' is not a host", m.to_host));
                }
                s.migrations.push_back(std::move(m));
            }
            s.echo.emplace_back("migrations", std::to_string(s.migrations.size()));
        }

        void apply_override(YAML::Node root, const Override &o, std::vector<Diagnostic> &diags)
        {
            std::vector<std::string> parts;
            std::stringstream ss(o.key);
            for (std::string part; std::getline(ss, part, '.');)
            {
                parts.push_back(part);
            }
            const auto where = "--set " + o.key;
            if (parts.empty() || std::any_of(parts.begin(), parts.end(), [](const auto &p) { return p.empty(); }))
            {
                diags.push_back({where, "malformed key"});
                return;
            }
            YAML::Node value;
            try
            {
                value = YAML::Load(o.value);
            }
            catch (const YAML::Exception &e)
            {
                diags.push_back({where, std::string("bad value: ") + e.what()});
                return;
            }
            YAML::Node cur = root;
            for (std::size_t i = 0; i < parts.size(); ++i)
            {
                const bool last = i + 1 == parts.size();
                if (cur.IsSequence())
                {
                    std::size_t k = 0;
                    try
                    {
                        k = std::stoul(parts[i]);
                    }
                    catch (const std::exception &)
                    {
                        diags.push_back({where, fmt::format("'{}' indexes a list", parts[i])});
                        return;
                    }
                    if (k >= cur.size())
                    {
                        diags.push_back({where, fmt::format("index {} out of range", k)});
                        return;
                    }
                    if (last)
                    {
                        cur[k] = value;
                        return;
                    }
                    cur.reset(cur[k]);
                }
                else if (cur.IsScalar())
                {
                    diags.push_back({where, fmt::format("'{}' is not a mapping", parts[i - 1])});
                    return;
                }
                else
                {
                    if (last)
                    {
                        cur[parts[i]] = value;
                        return;
                    }
                    cur.reset(cur[parts[i]]);
                }
            }
        }
    }

    Scenario load_scenario_text(std::string_view yaml, const std::filesystem::path &base_dir,
                                std::span<const Override> overrides)
    {
        YAML::Node root;
        try
        {
            root = YAML::Load(std::string(yaml));
        }
        catch (const YAML::ParserException &e)
        {
            throw ScenarioError(std::vector<Diagnostic>{{"", fmt::format("YAML parse error at line {}: {}", e.mark.line + 1, e.msg)}});
        }
        if (!root.IsDefined() || root.IsNull())
        {
            throw ScenarioError(std::vector<Diagnostic>{{"", "empty scenario"}});
        }
        if (!root.IsMap())
        {
            throw ScenarioError(std::vector<Diagnostic>{{"", "top level must be a mapping"}});
        }

        std::vector<Diagnostic> override_diags;
        for (const auto &o : overrides)
        {
            apply_override(root, o, override_diags);
        }
        if (!override_diags.empty())
        {
            throw ScenarioError(std::move(override_diags));
        }

        Reader r;
        Scenario s;
        r.check_keys(root, "",
                     {"name", "description", "seed", "t_end_s", "topology", "host_classes", "switch_power", "vms",
                      "vnf_types", "chains", "autoscale", "placement", "network", "workload", "admission",
                      "migrations"});
        if (!root["seed"].IsDefined())
        {
            r.error("/seed", "required field is missing (seeds are mandatory)");
        }
        else
        {
            s.seed = r.scalar<std::uint64_t>(root["seed"], "/seed").value_or(0);
        }
        s.t_end_s = r.positive(root, "t_end_s", "", s.t_end_s);
        s.echo.emplace_back("seed", std::to_string(s.seed));
        s.echo.emplace_back("t_end_s", num(s.t_end_s));

        read_topology(r, root["topology"], s);
        read_hosts(r, root, s);
        read_vms(r, root["vms"], s);
        read_autoscale(r, root["autoscale"], s);
        read_vnf_types(r, root["vnf_types"], s);
        read_chains(r, root["chains"], s);
        read_placement(r, root["placement"], s);
        read_network(r, root["network"], s);
        read_workload(r, root["workload"], base_dir, s);
        read_admission(r, root["admission"], s);
        read_migrations(r, root["migrations"], s);

        if (!r.diags.empty())
        {
            throw ScenarioError(std::move(r.diags));
        }
        return s;
    }

    Scenario load_scenario(const std::filesystem::path &file, std::span<const Override> overrides)
    {
        std::ifstream in(file, std::ios::binary);
        if (!in)
        {
            throw ScenarioError(std::vector<Diagnostic>{{"", "cannot open '" + file.string() + "'"}});
        }
        std::stringstream buf;
        buf << in.rdbuf();
        return load_scenario_text(buf.str(), file.parent_path().empty() ? "." : file.parent_path(), overrides);
    }

    std::vector<Diagnostic> validate_scenario_file(const std::filesystem::path &file,
                                                   std::span<const Override> overrides)
    {
        try
        {
            load_scenario(file, overrides);
        }
        catch (const ScenarioError &e)
        {
            return e.diagnostics();
        }
        return {};
    }
}
