#include "nfvsim/kernel.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace nfvsim
{
    std::string_view to_string(EventKind kind) noexcept
    {
        switch (kind)
        {
        case EventKind::TaskComplete:
            return "task-complete";
        case EventKind::TransferEpochEnd:
            return "transfer-epoch-end";
        case EventKind::MonitorTick:
            return "monitor-tick";
        case EventKind::RequestArrival:
            return "request-arrival";
        case EventKind::ScaleAction:
            return "scale-action";
        case EventKind::MigrationComplete:
            return "migration-complete";
        }
        return "unknown";
    }

    EventHandle Simulator::schedule(SimTime time, EventKind kind, std::string entity, Action action)
    {
        if (!std::isfinite(time))
        {
            throw ConfigError("schedule: non-finite event time");
        }
        if (time < now_)
        {
            std::ostringstream msg;
            msg << "schedule: event time " << time << " is before the clock " << now_;
            throw ConfigError(msg.str());
        }
        const Key key{time, next_seq_++};
        queue_.emplace(key, Entry{kind, std::move(entity), std::move(action)});
        return EventHandle{key.first, key.second, true};
    }

    bool Simulator::cancel(const EventHandle &handle)
    {
        if (!handle.valid)
        {
            return false;
        }
        return queue_.erase(Key{handle.time, handle.seq}) > 0;
    }

    void Simulator::fire(std::map<Key, Entry>::iterator it)
    {
        now_ = it->first.first;
        Entry entry = std::move(it->second);
        const auto seq = it->first.second;
        queue_.erase(it);
        ++processed_;
        if (log_ != nullptr)
        {
            *log_ << now_ << '\t' << seq << '\t' << to_string(entry.kind) << '\t' << entry.entity << '\n';
        }
        if (entry.action)
        {
            entry.action();
        }
    }

    RunSummary Simulator::run_until(SimTime t_end)
    {
        if (t_end < now_)
        {
            throw ConfigError("run_until: horizon is before the current clock");
        }
        const auto before = processed_;
        while (!queue_.empty() && queue_.begin()->first.first <= t_end)
        {
            fire(queue_.begin());
        }
        now_ = t_end;
        return RunSummary{processed_ - before, now_};
    }

    RunSummary Simulator::drain()
    {
        const auto before = processed_;
        while (!queue_.empty())
        {
            fire(queue_.begin());
        }
        return RunSummary{processed_ - before, now_};
    }

    std::uint64_t splitmix64(std::uint64_t x) noexcept
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t RngStream::derive_seed(std::uint64_t scenario_seed, std::string_view stream_id) noexcept
    {
        // FNV-1a over the stream label, then mixed with the scenario seed.
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const char c : stream_id)
        {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return splitmix64(scenario_seed ^ splitmix64(h));
    }

    RngStream::RngStream(std::uint64_t scenario_seed, std::string_view stream_id)
        : id_(stream_id), engine_(derive_seed(scenario_seed, stream_id))
    {
    }

    std::uint64_t RngStream::next_u64()
    {
        ++draws_;
        return engine_();
    }

    double RngStream::uniform()
    {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double RngStream::uniform_open()
    {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double RngStream::exponential(double rate)
    {
        if (!(rate > 0.0))
        {
            throw std::invalid_argument("exponential rate must be positive");
        }
        return -std::log(uniform_open()) / rate;
    }

    double RngStream::standard_normal()
    {
        // Box-Muller, one variate per pair of draws (no cached spare).
        const double u1 = uniform_open();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double RngStream::lognormal(double median, double sigma)
    {
        return median * std::exp(sigma * standard_normal());
    }
}
