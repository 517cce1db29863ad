#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace nfvsim
{
    /// Simulated seconds.
    using SimTime = double;

    /// Raised for invalid scenario or API configuration (exit code 2 at the CLI).
    class ConfigError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    enum class EventKind : std::uint8_t
    {
        TaskComplete,
        TransferEpochEnd,
        MonitorTick,
        RequestArrival,
        ScaleAction,
        MigrationComplete,
    };

    std::string_view to_string(EventKind kind) noexcept;

    struct EventHandle
    {
        SimTime time = 0.0;
        std::uint64_t seq = 0;
        bool valid = false;
    };

    struct RunSummary
    {
        std::uint64_t events_processed = 0;
        SimTime clock = 0.0;
    };

    // Single-threaded event engine. Events are ordered by (time, seq) where seq
    // is the scheduling counter, so simultaneous events fire in scheduling order.
    class Simulator
    {
    public:
        using Action = std::function<void()>;

        Simulator() = default;
        Simulator(const Simulator &) = delete;
        Simulator &operator=(const Simulator &) = delete;

        EventHandle schedule(SimTime time, EventKind kind, std::string entity, Action action);
        EventHandle schedule_in(SimTime delay, EventKind kind, std::string entity, Action action)
        {
            return schedule(now_ + delay, kind, std::move(entity), std::move(action));
        }

        /// Returns true iff the event was still pending.
        bool cancel(const EventHandle &handle);

        /// Processes every event with time <= t_end, then advances the clock to t_end.
        RunSummary run_until(SimTime t_end);

        /// Processes events until the queue is empty.
        RunSummary drain();

        SimTime now() const noexcept { return now_; }
        std::size_t pending() const noexcept { return queue_.size(); }
        std::uint64_t events_processed() const noexcept { return processed_; }

        /// Tab-separated log: time, seq, kind, entity. Pass nullptr to disable.
        void set_event_log(std::ostream *out) noexcept { log_ = out; }

    private:
        struct Entry
        {
            EventKind kind;
            std::string entity;
            Action action;
        };
        using Key = std::pair<SimTime, std::uint64_t>;

        void fire(std::map<Key, Entry>::iterator it);

        std::map<Key, Entry> queue_;
        SimTime now_ = 0.0;
        std::uint64_t next_seq_ = 0;
        std::uint64_t processed_ = 0;
        std::ostream *log_ = nullptr;
    };

    // Named random stream. The engine seed is derived from (scenario seed, stream id)
    // so that adding a consumer never shifts another consumer's draws. Variates are
    // produced from raw 64-bit engine output, not from <random> distributions, whose
    // algorithms are implementation-defined.
    class RngStream
    {
    public:
        RngStream(std::uint64_t scenario_seed, std::string_view stream_id);

        static std::uint64_t derive_seed(std::uint64_t scenario_seed, std::string_view stream_id) noexcept;

        std::uint64_t next_u64();
        /// Uniform in [0, 1).
        double uniform();
        /// Uniform in (0, 1).
        double uniform_open();
        double exponential(double rate);
        double standard_normal();
        double lognormal(double median, double sigma);

        std::uint64_t draws() const noexcept { return draws_; }
        const std::string &id() const noexcept { return id_; }

    private:
        std::string id_;
        std::mt19937_64 engine_;
        std::uint64_t draws_ = 0;
    };

    std::uint64_t splitmix64(std::uint64_t x) noexcept;
}
