#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nfvsim
{
    class IoError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Timing decomposition of one request: response == cpu + net + queue.
    struct RequestRecord
    {
        std::string request_id;
        double submit_s = 0.0;
        double finish_s = 0.0;
        double cpu_s = 0.0;
        double net_s = 0.0;
        double queue_s = 0.0;
        bool completed = false;
        bool rejected = false;

        double response_s() const noexcept { return finish_s - submit_s; }
    };

    struct EnergyRecord
    {
        std::string node_id;
        std::string kind;
        double joules = 0.0;
    };

    struct Report
    {
        std::vector<RequestRecord> records;
        std::size_t completed = 0;
        std::size_t incomplete = 0;
        std::size_t rejected = 0;
        double mean_cpu_s = 0.0;
        double mean_net_s = 0.0;
        double mean_queue_s = 0.0;
        double mean_response_s = 0.0;

        std::vector<EnergyRecord> energy;
        double total_energy_j = 0.0;

        std::map<std::string, int> vnf_instances;
        int vnf_vm_count_final = 0;

        /// Additional numeric rows appended to summary.csv in insertion order.
        std::vector<std::pair<std::string, double>> extra;
        /// Resolved configuration echo ("config.<key>", value).
        std::vector<std::pair<std::string, std::string>> config;
    };

    /// Order-independent mean (values are summed in sorted order with compensation).
    double stable_mean(std::vector<double> values);

    /// Means over completed records; incomplete and rejected requests are counted only.
    Report summarize(std::vector<RequestRecord> records, std::vector<EnergyRecord> energy,
                     std::map<std::string, int> vnf_instances);

    /// Six significant digits, "C" formatting regardless of the global locale.
    std::string format_value(double v);

    /// Writes requests.csv, energy.csv and summary.csv into dir (created if needed).
    void export_csv(const Report &report, const std::filesystem::path &dir);

    /// summary.csv rows in file order.
    std::vector<std::pair<std::string, std::string>> read_summary(const std::filesystem::path &file);
}
