#include "nfvsim/experiment.hpp"
#include "nfvsim/netflow.hpp"
#include "nfvsim/scenario.hpp"
#include "nfvsim/topology.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace nfvsim;

namespace
{
    std::vector<Override> to_overrides(const std::map<std::string, std::string> &kv)
    {
        std::vector<Override> out;
        for (const auto &[k, v] : kv)
        {
            out.push_back({k, v});
        }
        return out;
    }

    py::dict summary_of(const RunResult &r)
    {
        const auto &rep = r.report;
        py::dict d;
        d["completed"] = rep.completed;
        d["incomplete"] = rep.incomplete;
        d["rejected"] = rep.rejected;
        d["mean_cpu_s"] = rep.mean_cpu_s;
        d["mean_net_s"] = rep.mean_net_s;
        d["mean_queue_s"] = rep.mean_queue_s;
        d["mean_response_s"] = rep.mean_response_s;
        d["total_energy_j"] = rep.total_energy_j;
        d["vnf_instances"] = rep.vnf_instances;
        d["vnf_vm_count_final"] = rep.vnf_vm_count_final;
        d["submitted"] = r.submitted;
        d["chained_requests"] = r.chained_requests;
        d["chain_violations"] = r.chain_violations;
        d["events_processed"] = r.events_processed;
        d["final_clock_s"] = r.final_clock;
        return d;
    }
}

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Discrete-event simulator for SDN/NFV data centers";

    const auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<RoutingError>(m, "RoutingError", PyExc_RuntimeError);

    // Registered last so it wins over the ConfigError translator (newest first).
    static py::exception<ScenarioError> scenario_error(m, "ScenarioError", config_error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try
        {
            if (p)
            {
                std::rethrow_exception(p);
            }
        }
        catch (const ScenarioError &e)
        {
            std::ostringstream msg;
            for (const auto &d : e.diagnostics())
            {
                msg << (d.path.empty() ? "/" : d.path) << ": " << d.message << '\n';
            }
            py::set_error(scenario_error, msg.str().c_str());
        }
    });

    py::class_<Scenario>(m, "Scenario")
        .def_readonly("seed", &Scenario::seed)
        .def_readonly("t_end_s", &Scenario::t_end_s)
        .def_property_readonly("host_count", [](const Scenario &s) { return s.hosts.size(); })
        .def_property_readonly("vm_ids", &Scenario::vm_ids)
        .def_property_readonly("config", [](const Scenario &s) { return s.echo; });

    m.def(
        "load_scenario",
        [](const std::filesystem::path &file, const std::map<std::string, std::string> &overrides) {
            return load_scenario(file, to_overrides(overrides));
        },
        py::arg("file"), py::arg("overrides") = std::map<std::string, std::string>{});
    m.def(
        "load_scenario_text",
        [](const std::string &yaml, const std::filesystem::path &base_dir,
           const std::map<std::string, std::string> &overrides) {
            return load_scenario_text(yaml, base_dir, to_overrides(overrides));
        },
        py::arg("yaml"), py::arg("base_dir") = std::filesystem::path("."),
        py::arg("overrides") = std::map<std::string, std::string>{});
    m.def(
        "validate_scenario",
        [](const std::filesystem::path &file, const std::map<std::string, std::string> &overrides) {
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto &d : validate_scenario_file(file, to_overrides(overrides)))
            {
                out.emplace_back(d.path, d.message);
            }
            return out;
        },
        py::arg("file"), py::arg("overrides") = std::map<std::string, std::string>{},
        "List of (path, message); empty when the scenario is valid.");

    // The simulation releases the GIL; it touches no Python objects.
    m.def(
        "run",
        [](const Scenario &sc, std::optional<std::filesystem::path> out) {
            RunResult r;
            {
                py::gil_scoped_release release;
                r = run_experiment(sc);
                if (out)
                {
                    write_outputs(r, *out);
                }
            }
            return summary_of(r);
        },
        py::arg("scenario"), py::arg("out") = py::none(),
        "Run a scenario. Returns summary metrics; writes the report files when `out` is given.");

    m.def(
        "compare",
        [](const std::filesystem::path &baseline, const std::filesystem::path &variant) {
            const auto c = compare_reports(baseline, variant);
            std::vector<std::tuple<std::string, double, double, double>> rows;
            for (const auto &row : c.rows)
            {
                rows.emplace_back(row.metric, row.baseline, row.variant, row.percent);
            }
            return rows;
        },
        py::arg("baseline"), py::arg("variant"), "Rows of (metric, baseline, variant, percent reduction).");

    m.def("relative_change_percent", &relative_change_percent, py::arg("baseline"), py::arg("variant"));

    m.def(
        "fat_tree_counts",
        [](int k) {
            const auto t = build_fat_tree({.k = k});
            py::dict d;
            d["host"] = t.nodes_of_kind(NodeKind::Host).size();
            d["edge"] = t.nodes_of_kind(NodeKind::EdgeSwitch).size();
            d["aggregation"] = t.nodes_of_kind(NodeKind::AggregationSwitch).size();
            d["core"] = t.nodes_of_kind(NodeKind::CoreSwitch).size();
            d["links"] = t.link_count();
            return d;
        },
        py::arg("k"));
    m.def(
        "fat_tree_paths",
        [](int k, const std::string &src, const std::string &dst) {
            return equal_cost_shortest_paths(build_fat_tree({.k = k}), src, dst);
        },
        py::arg("k"), py::arg("src"), py::arg("dst"), "All minimum-hop paths between two node ids.");

    m.def(
        "allocate_rates",
        [](const std::vector<std::pair<double, std::vector<DirectedLink>>> &flows, const std::vector<double> &caps) {
            std::vector<FlowDemand> demands;
            for (const auto &[w, links] : flows)
            {
                demands.push_back({w, links});
            }
            return allocate_rates(demands, caps);
        },
        py::arg("flows"), py::arg("capacities"),
        "Weighted max-min fair rates. Each flow is (weight, [link indices]).");
}
