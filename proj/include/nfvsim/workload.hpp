#pragma once

#include "nfvsim/kernel.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace nfvsim
{
    struct CpuSegment
    {
        std::string vm;
        double length_mi = 0.0;

        bool operator==(const CpuSegment &) const = default;
    };

    struct NetSegment
    {
        std::string src_vm;
        std::string dst_vm;
        double bytes = 0.0;

        bool operator==(const NetSegment &) const = default;
    };

    using Segment = std::variant<CpuSegment, NetSegment>;

    struct Request
    {
        std::string id;
        SimTime submit_time = 0.0;
        int priority_class = 1;
        std::vector<Segment> segments;

        bool operator==(const Request &) const = default;
    };

    struct Distribution
    {
        enum class Kind : std::uint8_t
        {
            Fixed,
            Uniform,
            Exponential,
            Lognormal,
        };
        Kind kind = Kind::Fixed;
        /// fixed: value; uniform: [a, b]; exponential: mean a; lognormal: median a, sigma b.
        double a = 0.0;
        double b = 0.0;

        static Distribution fixed(double v) { return {Kind::Fixed, v, 0.0}; }
        static Distribution lognormal(double median, double sigma) { return {Kind::Lognormal, median, sigma}; }

        void validate(const std::string &what) const;
        double sample(RngStream &rng) const;
        double mean() const;
    };

    struct GeneratorConfig
    {
        double duration_s = 600.0;
        double rate_per_s = 150.0;
        std::vector<std::pair<std::string, std::string>> vm_pairs;
        Distribution cpu_mi = Distribution::fixed(2700.0);
        Distribution bytes = Distribution::lognormal(1e6, 1.0);
        std::map<int, double> priority_mix{{1, 1.0}};
    };

    /// Poisson arrivals over [0, duration]; each request is a CPU segment on the
    /// source VM followed by a transfer to the destination VM.
    std::vector<Request> generate(const GeneratorConfig &config, RngStream &rng);

    class TraceError : public std::runtime_error
    {
    public:
        TraceError(std::size_t line, const std::string &what)
            : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
        {
        }
        std::size_t line() const noexcept { return line_; }

    private:
        std::size_t line_;
    };

    /// Parses the trace CSV. When known_vms is given, unknown VM ids are errors.
    std::vector<Request> parse_trace(std::istream &in, const std::set<std::string> *known_vms = nullptr);
    std::vector<Request> parse_trace_file(const std::filesystem::path &file,
                                          const std::set<std::string> *known_vms = nullptr);
    /// Writes the canonical flat form (with header); values use shortest round-trip text.
    void write_trace(std::ostream &out, const std::vector<Request> &requests);

    // -- admission ----------------------------------------------------------

    struct AdmissionConfig
    {
        bool enabled = false;
        std::size_t capacity = 1000;
        std::size_t queue_bound = 100000;
        double aging_per_s = 0.01;
    };

    enum class AdmissionDecision : std::uint8_t
    {
        Admitted,
        Queued,
        Rejected,
    };

    // Concurrency gate with per-class FIFO queues. The effective priority of a
    // waiting request is class - aging * wait (lower is served first), so a long
    // wait eventually overtakes any fresher higher-class request.
    class AdmissionController
    {
    public:
        explicit AdmissionController(AdmissionConfig config);

        AdmissionDecision admit(const std::string &request_id, int priority_class, SimTime now);
        /// Frees a slot and returns the request admitted in its place, if any.
        std::optional<std::string> on_complete(SimTime now);

        double effective_priority(int priority_class, SimTime enqueued, SimTime now) const noexcept;

        std::size_t in_flight() const noexcept { return in_flight_; }
        std::size_t queued() const noexcept;
        double max_wait() const noexcept { return max_wait_; }

    private:
        struct Waiting
        {
            std::string id;
            SimTime enqueued;
            std::uint64_t seq;
        };

        AdmissionConfig config_;
        std::map<int, std::deque<Waiting>> queues_;
        std::size_t in_flight_ = 0;
        std::uint64_t seq_ = 0;
        double max_wait_ = 0.0;
    };
}
