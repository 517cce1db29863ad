#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nfvsim/experiment.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nfvsim;

namespace
{
    // Two hosts behind one edge switch; each host fits exactly one VM.
    const char *const line_yaml = R"(
seed: 3
t_end_s: 10
topology:
  nodes:
    - {id: h1, kind: host}
    - {id: h2, kind: host}
    - {id: e1, kind: edge-switch}
  links:
    - {a: h1, b: e1, capacity_bps: 1.0e9, latency_s: 0.001}
    - {a: e1, b: h2, capacity_bps: 1.0e10, latency_s: 0.002}
host_classes:
  - {name: std, cores: 1, mips_per_core: 1000, ram_mib: 4096}
vms:
  - {group: g, ids: [x, y], mips: 1000, ram_mib: 1024}
workload:
  generator: {duration_s: 0, rate_per_s: 1, pairs: [[x, y]], cpu_mi: 1, bytes: 1}
)";

    const char *const chain_yaml = R"(
seed: 11
t_end_s: 60
topology:
  fat_tree: {k: 4, latency_s: 1.0e-6}
host_classes:
  - {name: std, cores: 4, mips_per_core: 25000, ram_mib: 65536}
vms:
  - {group: app, count: 6, mips: 50000, cores: 2, ram_mib: 4096}
vnf_types:
  - {name: fw, per_request_mi: 400, mips: 100000, image: "img/fw:1"}
  - {name: ids, per_request_mi: 300, mips: 100000, image: "img/ids:1"}
  - {name: nat, per_request_mi: 200, mips: 100000, image: "img/nat:1"}
  - {name: lb, per_request_mi: 100, mips: 100000, image: "img/lb:1"}
chains:
  - {name: c, src: app, dst: app, chain: [fw, ids, nat, lb]}
autoscale: {enabled: true, threshold: 0.7, window_s: 10, cooldown_s: 10, max_instances: 3}
workload:
  generator:
    duration_s: 50
    rate_per_s: 200
    src_group: app
    cpu_mi: 500
    bytes: {lognormal: {median: 200000, sigma: 1.0}}
)";

    Scenario with_trace(const std::string &yaml, const std::vector<Request> &reqs, std::vector<Override> ov = {})
    {
        auto s = load_scenario_text(yaml, ".", ov);
        s.generator.reset();
        s.trace_requests = reqs;
        return s;
    }

    std::string slurp(const std::filesystem::path &p)
    {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    double extra(const Report &r, const std::string &key)
    {
        for (const auto &[k, v] : r.extra)
        {
            if (k == key)
            {
                return v;
            }
        }
        FAIL("missing summary row " << key);
        return 0.0;
    }

    std::filesystem::path scratch(const std::string &name)
    {
        const auto dir = std::filesystem::temp_directory_path() / ("nfvsim-exp-" + name);
        std::filesystem::remove_all(dir);
        return dir;
    }
}

TEST_CASE("one uncontended request decomposes into cpu plus network time")
{
    const std::vector<Request> reqs{{"r1", 1.0, 1, {CpuSegment{"x", 100.0}, NetSegment{"x", "y", 125e6}}}};
    const auto r = run_experiment(with_trace(line_yaml, reqs));
    REQUIRE(r.report.completed == 1);
    const auto &rec = r.report.records.front();
    CHECK(rec.cpu_s == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(rec.net_s == doctest::Approx(1.0 + 0.003).epsilon(1e-12));
    CHECK(std::abs(rec.queue_s) <= 1e-9);
    CHECK(rec.response_s() == doctest::Approx(rec.cpu_s + rec.net_s).epsilon(1e-12));
    CHECK(rec.finish_s == doctest::Approx(2.103).epsilon(1e-12));
    CHECK(r.chained_requests == 0);
}

TEST_CASE("same-VM transfer costs no network time")
{
    const std::vector<Request> reqs{{"r1", 0.0, 1, {CpuSegment{"x", 100.0}, NetSegment{"x", "x", 1e9}}}};
    const auto r = run_experiment(with_trace(line_yaml, reqs));
    REQUIRE(r.report.completed == 1);
    CHECK(r.report.records[0].net_s == 0.0);
}

TEST_CASE("FIFO queueing shows up as queue time")
{
    const std::vector<Request> reqs{{"a", 0.0, 1, {CpuSegment{"x", 500.0}}}, {"b", 0.0, 1, {CpuSegment{"x", 500.0}}}};
    const auto r = run_experiment(with_trace(line_yaml, reqs));
    REQUIRE(r.report.completed == 2);
    CHECK(r.report.records[1].queue_s == doctest::Approx(0.5));
    CHECK(r.report.records[1].response_s() == doctest::Approx(1.0));
}

TEST_CASE("priority classes share a bottleneck by weight")
{
    // Class 1 weighs 4 and class 3 weighs 1: the class-1 transfer gets 0.8 Gbit/s.
    const std::vector<Request> reqs{{"hi", 0.0, 1, {NetSegment{"x", "y", 100e6}}},
                                    {"lo", 0.0, 3, {NetSegment{"x", "y", 100e6}}}};
    const auto r = run_experiment(with_trace(line_yaml, reqs));
    REQUIRE(r.report.completed == 2);
    CHECK(r.report.records[0].net_s == doctest::Approx(1.0 + 0.003).epsilon(1e-9));
    CHECK(r.report.records[1].net_s == doctest::Approx(1.6 + 0.003).epsilon(1e-9));
}

TEST_CASE("chained run")
{
    const auto s = load_scenario_text(chain_yaml);
    const auto r = run_experiment(s);
    const auto &rep = r.report;
    CHECK(rep.completed == r.submitted);
    CHECK(rep.incomplete == 0);
    CHECK(r.chained_requests == rep.completed);
    CHECK(r.chain_violations == 0);
    CHECK(r.rules_consistent);
    CHECK(r.max_link_overload <= 1e-9);
    // A chain of 4 turns each request into 5 transfers.
    CHECK(extra(rep, "flows_started") == 5.0 * static_cast<double>(rep.completed));
    CHECK(extra(rep, "max_byte_conservation_error") <= 1e-9);

    bool identity = true;
    bool cpu_exact = true;
    for (const auto &x : rep.records)
    {
        identity = identity && std::abs(x.response_s() - (x.cpu_s + x.net_s + x.queue_s)) <= 1e-9;
        // App CPU plus the four VNF costs.
        cpu_exact = cpu_exact && std::abs(x.cpu_s - (500.0 / 50000 + 1000.0 / 100000)) <= 1e-12;
    }
    CHECK(identity);
    CHECK(cpu_exact);

    // fw alone needs 200 * 400 / 100000 = 0.8 of one instance, so it must scale.
    CHECK(rep.vnf_instances.at("fw") >= 2);
    for (const auto &[type, n] : rep.vnf_instances)
    {
        CHECK(n <= 3);
    }
    std::map<std::string, double> last;
    bool cooldown_ok = true;
    for (const auto &e : r.scaling)
    {
        if (e.action != "scale-out")
        {
            continue;
        }
        if (const auto it = last.find(e.type); it != last.end())
        {
            cooldown_ok = cooldown_ok && e.time - it->second >= 10.0 - 1e-9;
        }
        last[e.type] = e.time;
        CHECK(e.utilization >= 0.7);
    }
    CHECK(cooldown_ok);
    CHECK(r.descriptor.instances.size() == static_cast<std::size_t>(rep.vnf_vm_count_final));
    CHECK(rep.total_energy_j == doctest::Approx(extra(rep, "host_energy_j") + extra(rep, "switch_energy_j")).epsilon(1e-9));
}

TEST_CASE("disabled autoscaling keeps every type at its initial count")
{
    const auto s = load_scenario_text(chain_yaml, ".", std::vector<Override>{{"autoscale.enabled", "false"}});
    const auto r = run_experiment(s);
    CHECK(r.scaling.empty());
    CHECK(r.report.vnf_vm_count_final == 4);
    CHECK(r.chain_violations == 0);
}

TEST_CASE("same seed, same bytes; different seed, different requests")
{
    const auto s = load_scenario_text(chain_yaml);
    const auto a = scratch("a");
    const auto b = scratch("b");
    const auto c = scratch("c");
    std::ostringstream log_a;
    std::ostringstream log_b;
    write_outputs(run_experiment(s, {&log_a, nullptr}), a);
    write_outputs(run_experiment(s, {&log_b, nullptr}), b);
    for (const auto *f : {"requests.csv", "energy.csv", "summary.csv", "descriptor.json", "placement.csv", "scaling.csv"})
    {
        CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
    }
    CHECK(log_a.str() == log_b.str());
    CHECK_FALSE(log_a.str().empty());
    const auto other = load_scenario_text(chain_yaml, ".", std::vector<Override>{{"seed", "12"}});
    write_outputs(run_experiment(other), c);
    CHECK(slurp(a / "requests.csv") != slurp(c / "requests.csv"));
    CHECK(load_descriptor(a / "descriptor.json") == run_experiment(s).descriptor);
    for (const auto &d : {a, b, c})
    {
        std::filesystem::remove_all(d);
    }
}

TEST_CASE("scheduled migration moves the VM and reroutes its flows")
{
    // x moves next to y while x->y is in flight; the rest becomes a local copy.
    const std::vector<Request> reqs{{"r1", 0.0, 1, {NetSegment{"x", "y", 250e6}}}};
    auto yaml = std::string(line_yaml);
    const std::string one_class = "  - {name: std, cores: 1, mips_per_core: 1000, ram_mib: 4096}\n";
    yaml.replace(yaml.find(one_class), one_class.size(),
                 "  - {name: small, cores: 1, mips_per_core: 1000, ram_mib: 4096, hosts: [h1]}\n"
                 "  - {name: big, cores: 2, mips_per_core: 1000, ram_mib: 4096, hosts: [h2]}\n");
    yaml += "network: {migration_bandwidth_bps: 1.0e15}\nmigrations:\n  - {at_s: 0.5, vm: x, to_host: h2}\n";
    const auto r = run_experiment(with_trace(yaml, reqs));
    CHECK(r.migrations_completed == 1);
    CHECK(r.migrations_rejected == 0);
    CHECK(r.flows_rerouted == 1);
    CHECK(r.rules_consistent);
    REQUIRE(r.report.completed == 1);
    const double downtime = migration_downtime(1024.0, 1e15);
    CHECK(r.report.records[0].net_s == doctest::Approx(0.5 + downtime).epsilon(1e-9));
    CHECK(extra(r.report, "max_byte_conservation_error") <= 1e-9);
}

TEST_CASE("migration onto a full host is rejected")
{
    const std::vector<Request> reqs{{"r1", 0.0, 1, {CpuSegment{"x", 10.0}}}};
    auto yaml = std::string(line_yaml) + "migrations:\n  - {at_s: 0.5, vm: y, to_host: h1}\n";
    const auto r = run_experiment(with_trace(yaml, reqs));
    CHECK(r.migrations_completed == 0);
    CHECK(r.migrations_rejected == 1);
}

TEST_CASE("admission control gates concurrency")
{
    std::vector<Request> reqs;
    for (int i = 0; i < 20; ++i)
    {
        reqs.push_back({fmt::format("r{}", i), 0.01 * i, 1 + i % 3, {CpuSegment{"x", 100.0}}});
    }
    auto s = with_trace(line_yaml, reqs, {{"admission.enabled", "true"}, {"admission.capacity", "1"}});
    CHECK(s.admission.enabled);
    const auto r = run_experiment(s);
    CHECK(r.report.completed == 20);
    CHECK(extra(r.report, "admission_max_wait_s") > 0.0);
    bool identity = true;
    for (const auto &x : r.report.records)
    {
        identity = identity && std::abs(x.response_s() - (x.cpu_s + x.net_s + x.queue_s)) <= 1e-9;
    }
    CHECK(identity);

    SUBCASE("a tight queue bound rejects")
    {
        auto t = with_trace(line_yaml, reqs,
                            {{"admission.enabled", "true"}, {"admission.capacity", "1"}, {"admission.queue_bound", "2"}});
        const auto rr = run_experiment(t);
        CHECK(rr.report.rejected > 0);
        CHECK(rr.report.completed + rr.report.rejected == 20);
    }
}

TEST_CASE("comparison")
{
    CHECK(fmt::format("{:.1f}", relative_change_percent(1579.0, 1226.0)) == "22.4");
    CHECK(fmt::format("{:.1f}", relative_change_percent(6454.0, 5018.0)) == "22.2");
    CHECK(relative_change_percent(0.0, 0.0) == 0.0);
    CHECK(std::isnan(relative_change_percent(0.0, 1.0)));

    const std::vector<std::pair<std::string, std::string>> base{
        {"mean_net_s", "1.579"}, {"mean_response_s", "6.454"}, {"config.seed", "1"}};
    const std::vector<std::pair<std::string, std::string>> var{
        {"mean_net_s", "1.226"}, {"mean_response_s", "5.018"}, {"config.seed", "2"}};
    const auto c = compare_summaries(base, var);
    REQUIRE(c.find("mean_net_s") != nullptr);
    CHECK(c.find("config.seed") == nullptr);
    CHECK(fmt::format("{:.1f}", c.find("mean_net_s")->percent) == "22.4");
    CHECK(format_comparison(c).find("22.4") != std::string::npos);
    CHECK(format_comparison(c).find("22.2") != std::string::npos);
    CHECK_THROWS_AS(compare_summaries(base, {{"mean_net_s", "1"}}), ConfigError);

    const auto dir = scratch("cmp");
    std::filesystem::create_directories(dir);
    write_comparison_csv(c, dir / "c.csv");
    CHECK(slurp(dir / "c.csv").starts_with("metric,baseline,variant,percent_change\n"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("sweep")
{
    const auto axis = parse_sweep_axis("autoscale.threshold=0.5,0.9");
    CHECK(axis.key == "autoscale.threshold");
    CHECK(axis.values == std::vector<std::string>{"0.5", "0.9"});
    CHECK_THROWS_AS(parse_sweep_axis("novalues"), ConfigError);

    const auto dir = scratch("sweep");
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "s.yaml") << chain_yaml;
    const std::vector<SweepAxis> axes{axis, parse_sweep_axis("workload.generator.duration_s=5,10")};
    const auto cells = run_sweep(dir / "s.yaml", {}, axes, dir / "out", 2);
    REQUIRE(cells.size() == 4);
    for (const auto &c : cells)
    {
        CHECK(c.status == 0);
        CHECK(std::filesystem::exists(c.out_dir / "summary.csv"));
    }
    CHECK(std::filesystem::exists(dir / "out" / "sweep.csv"));

    const std::vector<SweepAxis> bad{parse_sweep_axis("autoscale.threshold=0.5,7")};
    const auto cells2 = run_sweep(dir / "s.yaml", {}, bad, dir / "out2", 1);
    REQUIRE(cells2.size() == 2);
    CHECK(cells2[0].status == 0);
    CHECK(cells2[1].status == 2);
    std::filesystem::remove_all(dir);
}
