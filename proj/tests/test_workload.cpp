#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nfvsim/workload.hpp"

#include <cmath>
#include <sstream>

using namespace nfvsim;

namespace
{
    GeneratorConfig reference_like(double duration, double rate)
    {
        GeneratorConfig g;
        g.duration_s = duration;
        g.rate_per_s = rate;
        g.vm_pairs = {{"a", "b"}, {"b", "a"}, {"a", "c"}};
        return g;
    }

    std::vector<Request> parse(const std::string &text, const std::set<std::string> *vms = nullptr)
    {
        std::istringstream in(text);
        return parse_trace(in, vms);
    }

    std::size_t error_line(const std::string &text, const std::set<std::string> *vms = nullptr)
    {
        try
        {
            parse(text, vms);
        }
        catch (const TraceError &e)
        {
            return e.line();
        }
        return 0;
    }
}

TEST_CASE("generator")
{
    SUBCASE("600 s at 150/s is 90,000 requests within three sigma")
    {
        RngStream rng(20180215, "workload");
        const auto reqs = generate(reference_like(600.0, 150.0), rng);
        CHECK(std::abs(static_cast<double>(reqs.size()) - 90000.0) <= 900.0);
        bool sorted = true;
        bool in_range = true;
        bool shape = true;
        for (std::size_t i = 0; i < reqs.size(); ++i)
        {
            sorted = sorted && (i == 0 || reqs[i - 1].submit_time <= reqs[i].submit_time);
            in_range = in_range && reqs[i].submit_time >= 0.0 && reqs[i].submit_time <= 600.0;
            const auto *cpu = std::get_if<CpuSegment>(&reqs[i].segments.at(0));
            const auto *net = std::get_if<NetSegment>(&reqs[i].segments.at(1));
            shape = shape && reqs[i].segments.size() == 2 && cpu && net && cpu->vm == net->src_vm &&
                    cpu->length_mi == 2700.0 && net->bytes > 0.0;
        }
        CHECK(sorted);
        CHECK(in_range);
        CHECK(shape);
    }
    SUBCASE("duration 0 gives nothing")
    {
        RngStream rng(1, "workload");
        CHECK(generate(reference_like(0.0, 150.0), rng).empty());
    }
    SUBCASE("same seed, same requests; other seed, other requests")
    {
        RngStream r1(9, "workload");
        RngStream r2(9, "workload");
        RngStream r3(10, "workload");
        const auto a = generate(reference_like(20.0, 50.0), r1);
        CHECK(a == generate(reference_like(20.0, 50.0), r2));
        CHECK(a != generate(reference_like(20.0, 50.0), r3));
    }
    SUBCASE("invalid parameters")
    {
        RngStream rng(1, "workload");
        auto g = reference_like(10.0, 0.0);
        CHECK_THROWS_AS(generate(g, rng), ConfigError);
        g = reference_like(10.0, 1.0);
        g.priority_mix = {{1, 0.5}, {2, 0.4}};
        CHECK_THROWS_AS(generate(g, rng), ConfigError);
        g = reference_like(10.0, 1.0);
        g.bytes = Distribution::lognormal(-1.0, 1.0);
        CHECK_THROWS_AS(generate(g, rng), ConfigError);
        g = reference_like(10.0, 1.0);
        g.vm_pairs.clear();
        CHECK_THROWS_AS(generate(g, rng), ConfigError);
    }
    SUBCASE("priority mix proportions")
    {
        RngStream rng(3, "workload");
        auto g = reference_like(100.0, 200.0);
        g.priority_mix = {{1, 0.2}, {2, 0.3}, {3, 0.5}};
        const auto reqs = generate(g, rng);
        std::map<int, double> n;
        for (const auto &r : reqs)
        {
            n[r.priority_class] += 1.0;
        }
        const double total = static_cast<double>(reqs.size());
        CHECK(n[1] / total == doctest::Approx(0.2).epsilon(0.1));
        CHECK(n[2] / total == doctest::Approx(0.3).epsilon(0.1));
        CHECK(n[3] / total == doctest::Approx(0.5).epsilon(0.1));
    }
}

TEST_CASE("property: mean arrival count over 100 seeds is within 1% of rate x duration")
{
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed)
    {
        RngStream rng(seed, "workload");
        total += static_cast<double>(generate(reference_like(100.0, 100.0), rng).size());
    }
    CHECK(std::abs(total / 100.0 - 10000.0) <= 100.0);
}

TEST_CASE("distributions")
{
    RngStream rng(5, "d");
    const Distribution u{Distribution::Kind::Uniform, 2.0, 4.0};
    const Distribution e{Distribution::Kind::Exponential, 3.0, 0.0};
    const auto ln = Distribution::lognormal(1e6, 1.0);
    CHECK(u.mean() == 3.0);
    CHECK(e.mean() == 3.0);
    CHECK(ln.mean() == doctest::Approx(1e6 * std::exp(0.5)));
    double su = 0.0;
    double se = 0.0;
    bool bounded = true;
    const int n = 200000;
    for (int i = 0; i < n; ++i)
    {
        const double x = u.sample(rng);
        bounded = bounded && x >= 2.0 && x <= 4.0;
        su += x;
        se += e.sample(rng);
    }
    CHECK(bounded);
    CHECK(su / n == doctest::Approx(3.0).epsilon(0.01));
    CHECK(se / n == doctest::Approx(3.0).epsilon(0.02));
    CHECK_THROWS_AS((Distribution{Distribution::Kind::Uniform, 4.0, 2.0}.validate("x")), ConfigError);
    CHECK_THROWS_AS((Distribution{Distribution::Kind::Exponential, 0.0, 0.0}.validate("x")), ConfigError);
    CHECK_THROWS_AS(Distribution::fixed(0.0).validate("x"), ConfigError);
}

TEST_CASE("trace parsing")
{
    SUBCASE("header only")
    {
        CHECK(parse("submit_s,request_id,priority_class,n_segments\n").empty());
    }
    SUBCASE("compact row")
    {
        const auto r = parse("0.5,req1,1,vmA,2700,vmB,1500000\n");
        REQUIRE(r.size() == 1);
        CHECK(r[0].id == "req1");
        CHECK(r[0].submit_time == 0.5);
        CHECK(r[0].priority_class == 1);
        REQUIRE(r[0].segments.size() == 2);
        CHECK(std::get<CpuSegment>(r[0].segments[0]) == CpuSegment{"vmA", 2700.0});
        CHECK(std::get<NetSegment>(r[0].segments[1]) == NetSegment{"vmA", "vmB", 1500000.0});
    }
    SUBCASE("flat segment-count row")
    {
        const auto r = parse("submit_s,request_id,priority_class,n_segments,seg1_kind\n"
                             "1.25,r9,2,3,C,vmA,100,,N,vmA,vmB,2000,C,vmB,50,\n");
        REQUIRE(r.size() == 1);
        CHECK(r[0].priority_class == 2);
        REQUIRE(r[0].segments.size() == 3);
        CHECK(std::get<CpuSegment>(r[0].segments[2]) == CpuSegment{"vmB", 50.0});
    }
    SUBCASE("errors name the line")
    {
        CHECK(error_line("0.5,req1,1,vmA,2700,vmB,-1\n") == 1);
        CHECK(error_line("submit_s,request_id,priority_class,n_segments\n0.5,r,1,vmA,0,vmB,10\n") == 2);
        CHECK(error_line("0.5,r,1,vmA,10,vmB,10\n0.4,s,1,vmA,10,vmB,10\n") == 2);
        CHECK(error_line("0.5,r,0,vmA,10,vmB,10\n") == 1);
        CHECK(error_line("0.5,r,1\n") == 1);
        CHECK(error_line("0.5,r,1,1,X,vmA,10,\n") == 1);
        CHECK(error_line("abc,r,1,vmA,10,vmB,10\n") == 1);
        const std::set<std::string> vms{"vmA"};
        CHECK(error_line("0.5,r,1,vmA,10,vmB,10\n", &vms) == 1);
    }
}

TEST_CASE("property: trace write then parse is the identity")
{
    RngStream rng(77, "workload");
    auto g = reference_like(30.0, 20.0);
    g.priority_mix = {{1, 0.5}, {3, 0.5}};
    g.cpu_mi = {Distribution::Kind::Uniform, 100.0, 5000.0};
    auto reqs = generate(g, rng);
    // Mix in a request with an unusual segment layout.
    reqs.push_back({"odd", 31.0, 2, {NetSegment{"a", "b", 1.0 / 3.0}, CpuSegment{"b", 1e-7}, NetSegment{"b", "c", 5e12}}});
    std::ostringstream out;
    write_trace(out, reqs);
    CHECK(parse(out.str()) == reqs);
}

TEST_CASE("admission control")
{
    SUBCASE("capacity 1, nothing running: admitted")
    {
        AdmissionController a({true, 1, 10, 0.01});
        CHECK(a.admit("r", 1, 0.0) == AdmissionDecision::Admitted);
        CHECK(a.in_flight() == 1);
    }
    SUBCASE("class 1 leaves the queue before class 2 at equal wait")
    {
        AdmissionController a({true, 1, 10, 0.01});
        a.admit("busy", 1, 0.0);
        CHECK(a.admit("c2", 2, 0.0) == AdmissionDecision::Queued);
        CHECK(a.admit("c1", 1, 0.0) == AdmissionDecision::Queued);
        CHECK(a.on_complete(0.0) == "c1");
        CHECK(a.on_complete(0.0) == "c2");
        CHECK(a.on_complete(0.0) == std::nullopt);
    }
    SUBCASE("class 2 after 150 s at 0.01/s beats a fresh class 1")
    {
        AdmissionController a({true, 1, 10, 0.01});
        a.admit("busy", 1, 0.0);
        a.admit("old", 2, 0.0);
        a.admit("fresh", 1, 150.0);
        CHECK(a.effective_priority(2, 0.0, 150.0) == doctest::Approx(0.5));
        CHECK(a.on_complete(150.0) == "old");
        CHECK(a.max_wait() == doctest::Approx(150.0));
    }
    SUBCASE("queue bound rejects")
    {
        AdmissionController a({true, 1, 2, 0.01});
        a.admit("busy", 1, 0.0);
        CHECK(a.admit("q1", 1, 0.0) == AdmissionDecision::Queued);
        CHECK(a.admit("q2", 1, 0.0) == AdmissionDecision::Queued);
        CHECK(a.admit("q3", 1, 0.0) == AdmissionDecision::Rejected);
        CHECK(a.queued() == 2);
    }
    SUBCASE("bad config")
    {
        CHECK_THROWS_AS(AdmissionController({true, 0, 2, 0.01}), ConfigError);
        CHECK_THROWS_AS(AdmissionController({true, 1, 2, -1.0}), ConfigError);
    }
}

TEST_CASE("property: with aging no queued request starves")
{
    // A steady stream of class-1 arrivals competes with a few class-3 requests.
    AdmissionController a({true, 4, 100000, 0.05});
    std::set<std::string> waiting;
    double t = 0.0;
    for (int i = 0; i < 8; ++i)
    {
        a.admit("init" + std::to_string(i), 1, t);
    }
    for (int i = 0; i < 5; ++i)
    {
        const auto id = "low" + std::to_string(i);
        if (a.admit(id, 3, t) == AdmissionDecision::Queued)
        {
            waiting.insert(id);
        }
    }
    for (int i = 0; i < 4000 && !waiting.empty(); ++i)
    {
        t += 0.1;
        a.admit("hi" + std::to_string(i), 1, t);
        if (const auto next = a.on_complete(t))
        {
            waiting.erase(*next);
        }
    }
    CHECK(waiting.empty());
    CHECK(a.max_wait() < 400.0);
}
