#include "nfvsim/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>

namespace nfvsim
{
    void Distribution::validate(const std::string &what) const
    {
        const auto bad = [&](const char *msg) { throw ConfigError(fmt::format("{}: {}", what, msg)); };
        switch (kind)
        {
        case Kind::Fixed:
            if (!(a > 0.0) || !std::isfinite(a))
                bad("fixed value must be positive");
            break;
        case Kind::Uniform:
            if (!(a > 0.0) || !(b >= a) || !std::isfinite(b))
                bad("uniform bounds need 0 < a <= b");
            break;
        case Kind::Exponential:
            if (!(a > 0.0) || !std::isfinite(a))
                bad("exponential mean must be positive");
            break;
        case Kind::Lognormal:
            if (!(a > 0.0) || !(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b))
                bad("lognormal needs median > 0 and sigma >= 0");
            break;
        }
    }

    double Distribution::sample(RngStream &rng) const
    {
        switch (kind)
        {
        case Kind::Fixed:
            return a;
        case Kind::Uniform:
            return a + (b - a) * rng.uniform();
        case Kind::Exponential:
            return rng.exponential(1.0 / a);
        case Kind::Lognormal:
            return rng.lognormal(a, b);
        }
        return a;
    }

    double Distribution::mean() const
    {
        switch (kind)
        {
        case Kind::Fixed:
            return a;
        case Kind::Uniform:
            return 0.5 * (a + b);
        case Kind::Exponential:
            return a;
        case Kind::Lognormal:
            return a * std::exp(0.5 * b * b);
        }
        return a;
    }

    std::vector<Request> generate(const GeneratorConfig &config, RngStream &rng)
    {
        if (!(config.duration_s >= 0.0) || !std::isfinite(config.duration_s))
        {
            throw ConfigError("workload: duration must be non-negative");
        }
        if (!(config.rate_per_s > 0.0))
        {
            throw ConfigError("workload: rate must be positive");
        }
        config.cpu_mi.validate("workload cpu_mi");
        config.bytes.validate("workload bytes");
        double total_p = 0.0;
        for (const auto &[cls, p] : config.priority_mix)
        {
            if (cls < 1 || !(p >= 0.0))
            {
                throw ConfigError("workload: priority classes must be >= 1 with non-negative probability");
            }
            total_p += p;
        }
        if (std::abs(total_p - 1.0) > 1e-9)
        {
            throw ConfigError("workload: priority probabilities must sum to 1");
        }

        std::vector<Request> out;
        if (config.duration_s == 0.0)
        {
            return out;
        }
        if (config.vm_pairs.empty())
        {
            throw ConfigError("workload: no VM pairs");
        }
        const auto n_pairs = config.vm_pairs.size();
        double t = 0.0;
        std::uint64_t next_id = 0;
        while (true)
        {
            t += rng.exponential(config.rate_per_s);
            if (t > config.duration_s)
            {
                break;
            }
            const auto pick = std::min<std::size_t>(n_pairs - 1, static_cast<std::size_t>(rng.uniform() * n_pairs));
            const auto &[src, dst] = config.vm_pairs[pick];
            const double cpu = config.cpu_mi.sample(rng);
            const double bytes = config.bytes.sample(rng);
            int cls = config.priority_mix.rbegin()->first;
            if (config.priority_mix.size() > 1)
            {
                const double u = rng.uniform();
                double acc = 0.0;
                for (const auto &[c, p] : config.priority_mix)
                {
                    acc += p;
                    if (u < acc)
                    {
                        cls = c;
                        break;
                    }
                }
            }
            Request r;
            r.id = std::to_string(next_id++);
            r.submit_time = t;
            r.priority_class = cls;
            r.segments.emplace_back(CpuSegment{src, cpu});
            r.segments.emplace_back(NetSegment{src, dst, bytes});
            out.push_back(std::move(r));
        }
        return out;
    }

    // -- trace CSV ------------------------------------------------------------

    namespace
    {
        std::vector<std::string> split_csv(const std::string &line)
        {
            std::vector<std::string> fields;
            std::size_t start = 0;
            while (true)
            {
                const auto comma = line.find(',', start);
                fields.push_back(line.substr(start, comma - start));
                if (comma == std::string::npos)
                {
                    break;
                }
                start = comma + 1;
            }
            return fields;
        }

        std::string trim(std::string s)
        {
            const auto ws = " \t\r";
            s.erase(0, s.find_first_not_of(ws));
            s.erase(s.find_last_not_of(ws) + 1);
            return s;
        }

        double to_double(const std::string &text, std::size_t line, const char *what)
        {
            double v = 0.0;
            const auto *first = text.data();
            const auto *last = text.data() + text.size();
            const auto [p, ec] = std::from_chars(first, last, v);
            if (ec != std::errc{} || p != last || text.empty() || !std::isfinite(v))
            {
                throw TraceError(line, fmt::format("{} '{}' is not a number", what, text));
            }
            return v;
        }

        std::optional<long> to_integer(const std::string &text)
        {
            long v = 0;
            const auto *last = text.data() + text.size();
            const auto [p, ec] = std::from_chars(text.data(), last, v);
            if (ec != std::errc{} || p != last || text.empty())
            {
                return std::nullopt;
            }
            return v;
        }

        std::string shortest(double v)
        {
            char buf[64];
            const auto res = std::to_chars(buf, buf + sizeof buf, v);
            return std::string(buf, res.ptr);
        }
    }

    std::vector<Request> parse_trace(std::istream &in, const std::set<std::string> *known_vms)
    {
        std::vector<Request> out;
        std::string raw;
        std::size_t line_no = 0;
        while (std::getline(in, raw))
        {
            ++line_no;
            const auto line = trim(raw);
            if (line.empty())
            {
                continue;
            }
            if (line_no == 1 && line.starts_with("submit_s"))
            {
                continue;
            }
            auto f = split_csv(line);
            for (auto &x : f)
            {
                x = trim(x);
            }
            if (f.size() < 4)
            {
                throw TraceError(line_no, "expected at least 4 columns");
            }
            Request r;
            r.submit_time = to_double(f[0], line_no, "submit_s");
            if (r.submit_time < 0.0)
            {
                throw TraceError(line_no, "submit_s must be non-negative");
            }
            r.id = f[1];
            if (r.id.empty())
            {
                throw TraceError(line_no, "empty request_id");
            }
            const auto cls = to_integer(f[2]);
            if (!cls || *cls < 1)
            {
                throw TraceError(line_no, "priority_class must be an integer >= 1");
            }
            r.priority_class = static_cast<int>(*cls);

            const auto check_vm = [&](const std::string &vm) {
                if (vm.empty())
                {
                    throw TraceError(line_no, "empty VM id");
                }
                if (known_vms != nullptr && !known_vms->contains(vm))
                {
                    throw TraceError(line_no, fmt::format("unknown VM '{}'", vm));
                }
            };
            const auto positive = [&](const std::string &text, const char *what) {
                const double v = to_double(text, line_no, what);
                if (!(v > 0.0))
                {
                    throw TraceError(line_no, fmt::format("{} must be positive (got {})", what, text));
                }
                return v;
            };

            const auto n_seg = to_integer(f[3]);
            if (n_seg && *n_seg >= 1 && f.size() >= 4 + 4 * static_cast<std::size_t>(*n_seg))
            {
                for (long s = 0; s < *n_seg; ++s)
                {
                    const auto base = 4 + 4 * static_cast<std::size_t>(s);
                    const auto &kind = f[base];
                    if (kind == "C")
                    {
                        check_vm(f[base + 1]);
                        r.segments.emplace_back(CpuSegment{f[base + 1], positive(f[base + 2], "length_mi")});
                    }
                    else if (kind == "N")
                    {
                        check_vm(f[base + 1]);
                        check_vm(f[base + 2]);
                        r.segments.emplace_back(
                            NetSegment{f[base + 1], f[base + 2], positive(f[base + 3], "bytes")});
                    }
                    else
                    {
                        throw TraceError(line_no, fmt::format("segment kind '{}' is neither C nor N", kind));
                    }
                }
                for (std::size_t extra = 4 + 4 * static_cast<std::size_t>(*n_seg); extra < f.size(); ++extra)
                {
                    if (!f[extra].empty())
                    {
                        throw TraceError(line_no, "unexpected trailing columns");
                    }
                }
            }
            else if (!n_seg && f.size() == 7)
            {
                // Compact form: submit,id,class,vm,length_mi,dst_vm,bytes.
                check_vm(f[3]);
                check_vm(f[5]);
                r.segments.emplace_back(CpuSegment{f[3], positive(f[4], "length_mi")});
                r.segments.emplace_back(NetSegment{f[3], f[5], positive(f[6], "bytes")});
            }
            else
            {
                throw TraceError(line_no, "row matches neither the segment-count nor the compact layout");
            }
            if (!out.empty() && r.submit_time < out.back().submit_time)
            {
                throw TraceError(line_no, "submit times must be non-decreasing");
            }
            out.push_back(std::move(r));
        }
        return out;
    }

    std::vector<Request> parse_trace_file(const std::filesystem::path &file, const std::set<std::string> *known_vms)
    {
        std::ifstream in(file);
        if (!in)
        {
            throw ConfigError("cannot open trace '" + file.string() + "'");
        }
        return parse_trace(in, known_vms);
    }

    void write_trace(std::ostream &out, const std::vector<Request> &requests)
    {
        std::size_t max_segments = 1;
        for (const auto &r : requests)
        {
            max_segments = std::max(max_segments, r.segments.size());
        }
        out << "submit_s,request_id,priority_class,n_segments";
        for (std::size_t s = 1; s <= max_segments; ++s)
        {
            out << ",seg" << s << "_kind,seg" << s << "_a,seg" << s << "_b,seg" << s << "_c";
        }
        out << '\n';
        for (const auto &r : requests)
        {
            out << shortest(r.submit_time) << ',' << r.id << ',' << r.priority_class << ',' << r.segments.size();
            for (const auto &seg : r.segments)
            {
                if (const auto *c = std::get_if<CpuSegment>(&seg))
                {
                    out << ",C," << c->vm << ',' << shortest(c->length_mi) << ',';
                }
                else
                {
                    const auto &n = std::get<NetSegment>(seg);
                    out << ",N," << n.src_vm << ',' << n.dst_vm << ',' << shortest(n.bytes);
                }
            }
            out << '\n';
        }
    }

    // -- admission ------------------------------------------------------------

    AdmissionController::AdmissionController(AdmissionConfig config) : config_(config)
    {
        if (config_.capacity == 0)
        {
            throw ConfigError("admission capacity must be at least 1");
        }
        if (!(config_.aging_per_s >= 0.0))
        {
            throw ConfigError("admission aging must be non-negative");
        }
    }

    double AdmissionController::effective_priority(int priority_class, SimTime enqueued, SimTime now) const noexcept
    {
        return static_cast<double>(priority_class) - config_.aging_per_s * (now - enqueued);
    }

    std::size_t AdmissionController::queued() const noexcept
    {
        std::size_t n = 0;
        for (const auto &[cls, q] : queues_)
        {
            n += q.size();
        }
        return n;
    }

    AdmissionDecision AdmissionController::admit(const std::string &request_id, int priority_class, SimTime now)
    {
        if (in_flight_ < config_.capacity && queued() == 0)
        {
            ++in_flight_;
            return AdmissionDecision::Admitted;
        }
        if (queued() >= config_.queue_bound)
        {
            return AdmissionDecision::Rejected;
        }
        queues_[priority_class].push_back(Waiting{request_id, now, seq_++});
        return AdmissionDecision::Queued;
    }

    std::optional<std::string> AdmissionController::on_complete(SimTime now)
    {
        if (in_flight_ > 0)
        {
            --in_flight_;
        }
        if (in_flight_ >= config_.capacity)
        {
            return std::nullopt;
        }
        // The head of each class queue has the longest wait, hence the best
        // effective priority within that class.
        std::deque<Waiting> *best = nullptr;
        double best_priority = 0.0;
        for (auto &[cls, q] : queues_)
        {
            if (q.empty())
            {
                continue;
            }
            const double p = effective_priority(cls, q.front().enqueued, now);
            if (best == nullptr || p < best_priority || (p == best_priority && q.front().seq < best->front().seq))
            {
                best = &q;
                best_priority = p;
            }
        }
        if (best == nullptr)
        {
            return std::nullopt;
        }
        auto w = std::move(best->front());
        best->pop_front();
        max_wait_ = std::max(max_wait_, now - w.enqueued);
        ++in_flight_;
        return w.id;
    }
}
