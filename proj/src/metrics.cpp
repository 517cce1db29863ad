#include "nfvsim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

namespace nfvsim
{
    double stable_mean(std::vector<double> values)
    {
        if (values.empty())
        {
            return 0.0;
        }
        std::sort(values.begin(), values.end());
        // Neumaier summation.
        double sum = 0.0;
        double c = 0.0;
        for (const double v : values)
        {
            const double t = sum + v;
            if (std::abs(sum) >= std::abs(v))
            {
                c += (sum - t) + v;
            }
            else
            {
                c += (v - t) + sum;
            }
            sum = t;
        }
        return (sum + c) / static_cast<double>(values.size());
    }

    Report summarize(std::vector<RequestRecord> records, std::vector<EnergyRecord> energy,
                     std::map<std::string, int> vnf_instances)
    {
        Report r;
        std::vector<double> cpu, net, queue, response;
        for (const auto &rec : records)
        {
            if (rec.rejected)
            {
                ++r.rejected;
            }
            else if (!rec.completed)
            {
                ++r.incomplete;
            }
            else
            {
                ++r.completed;
                cpu.push_back(rec.cpu_s);
                net.push_back(rec.net_s);
                queue.push_back(rec.queue_s);
                response.push_back(rec.response_s());
            }
        }
        r.mean_cpu_s = stable_mean(std::move(cpu));
        r.mean_net_s = stable_mean(std::move(net));
        r.mean_queue_s = stable_mean(std::move(queue));
        r.mean_response_s = stable_mean(std::move(response));
        r.records = std::move(records);

        double total = 0.0;
        for (const auto &e : energy)
        {
            total += e.joules;
        }
        r.total_energy_j = total;
        r.energy = std::move(energy);

        for (const auto &[type, count] : vnf_instances)
        {
            r.vnf_vm_count_final += count;
        }
        r.vnf_instances = std::move(vnf_instances);
        return r;
    }

    std::string format_value(double v)
    {
        if (std::isnan(v))
        {
            return "nan";
        }
        if (std::isinf(v))
        {
            return v > 0 ? "inf" : "-inf";
        }
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
        return std::string(buf, res.ptr);
    }

    namespace
    {
        std::ofstream open_out(const std::filesystem::path &file)
        {
            std::ofstream out(file, std::ios::binary | std::ios::trunc);
            if (!out)
            {
                throw IoError("cannot write '" + file.string() + "'");
            }
            return out;
        }

        void close_checked(std::ofstream &out, const std::filesystem::path &file)
        {
            out.flush();
            if (!out)
            {
                throw IoError("write failed for '" + file.string() + "'");
            }
        }
    }

    void export_csv(const Report &report, const std::filesystem::path &dir)
    {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec || !std::filesystem::is_directory(dir))
        {
            throw IoError("cannot create output directory '" + dir.string() + "'");
        }

        {
            const auto file = dir / "requests.csv";
            auto out = open_out(file);
            out << "request_id,submit_s,finish_s,cpu_s,net_s,queue_s,response_s\n";
            for (const auto &r : report.records)
            {
                if (!r.completed)
                {
                    continue;
                }
                out << r.request_id << ',' << format_value(r.submit_s) << ',' << format_value(r.finish_s) << ','
                    << format_value(r.cpu_s) << ',' << format_value(r.net_s) << ',' << format_value(r.queue_s) << ','
                    << format_value(r.response_s()) << '\n';
            }
            close_checked(out, file);
        }
        {
            const auto file = dir / "energy.csv";
            auto out = open_out(file);
            out << "node_id,kind,joules\n";
            for (const auto &e : report.energy)
            {
                out << e.node_id << ',' << e.kind << ',' << format_value(e.joules) << '\n';
            }
            close_checked(out, file);
        }
        {
            const auto file = dir / "summary.csv";
            auto out = open_out(file);
            out << "metric,value\n";
            out << "completed_requests," << report.completed << '\n';
            out << "incomplete_requests," << report.incomplete << '\n';
            out << "rejected_requests," << report.rejected << '\n';
            out << "mean_cpu_s," << format_value(report.mean_cpu_s) << '\n';
            out << "mean_net_s," << format_value(report.mean_net_s) << '\n';
            out << "mean_queue_s," << format_value(report.mean_queue_s) << '\n';
            out << "mean_response_s," << format_value(report.mean_response_s) << '\n';
            out << "total_energy_j," << format_value(report.total_energy_j) << '\n';
            out << "vnf_vm_count_final," << report.vnf_vm_count_final << '\n';
            for (const auto &[type, count] : report.vnf_instances)
            {
                out << "vnf_count." << type << ',' << count << '\n';
            }
            for (const auto &[key, value] : report.extra)
            {
                out << key << ',' << format_value(value) << '\n';
            }
            for (const auto &[key, value] : report.config)
            {
                out << "config." << key << ',' << value << '\n';
            }
            close_checked(out, file);
        }
    }

    std::vector<std::pair<std::string, std::string>> read_summary(const std::filesystem::path &file)
    {
        std::ifstream in(file);
        if (!in)
        {
            throw IoError("cannot read '" + file.string() + "'");
        }
        std::vector<std::pair<std::string, std::string>> rows;
        std::string line;
        bool header = true;
        while (std::getline(in, line))
        {
            if (!line.empty() && line.back() == '\r')
            {
                line.pop_back();
            }
            if (header)
            {
                header = false;
                if (line != "metric,value")
                {
                    throw IoError("'" + file.string() + "' is not a summary file");
                }
                continue;
            }
            if (line.empty())
            {
                continue;
            }
            const auto comma = line.find(',');
            if (comma == std::string::npos)
            {
                throw IoError("malformed summary row '" + line + "'");
            }
            rows.emplace_back(line.substr(0, comma), line.substr(comma + 1));
        }
        return rows;
    }
}
