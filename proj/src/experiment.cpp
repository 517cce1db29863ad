#include "nfvsim/experiment.hpp"

#include "nfvsim/netflow.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <deque>
#include <fmt/format.h>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

namespace nfvsim
{
    namespace
    {
        constexpr std::size_t no_meter = static_cast<std::size_t>(-1);

        struct RequestState
        {
            const Request *request = nullptr;
            std::size_t segment = 0;
            /// Start of the interval not yet attributed to cpu, net or queue.
            SimTime mark = 0.0;
            double cpu = 0.0;
            double net = 0.0;
            double queue = 0.0;

            const VnfChainPolicy *policy = nullptr;
            std::vector<std::string> waypoints;
            std::size_t hop = 0;
            std::vector<std::string> traversed;
            bool chained = false;
            bool chain_ok = true;

            bool arrived = false;
            RequestRecord record;
        };

        struct TaskEvent
        {
            EventHandle handle;
            std::string vm;
            std::function<void()> action;
        };

        class Engine
        {
        public:
            Engine(const Scenario &sc, const RunOptions &opt)
                : sc_(sc),
                  net_(sim_, sc.topology, RngStream(sc.seed, "ecmp").next_u64()),
                  active_ports_(sc.topology.node_count(), 0),
                  switch_meter_(sc.topology.node_count(), no_meter)
            {
                sim_.set_event_log(opt.event_log);
                net_.set_flow_log(opt.flow_log);
                max_window_ = sc.autoscale.defaults.window_s;
                for (const auto &t : sc.vnf_types)
                {
                    max_window_ = std::max(max_window_, t.scaling.window_s);
                }
            }

            RunResult run()
            {
                setup_infrastructure();
                setup_vms();
                setup_workload();
                setup_monitors();
                setup_migrations();

                sim_.run_until(sc_.t_end_s);
                sim_.drain();
                return finish();
            }

        private:
            // -- setup ----------------------------------------------------------

            void setup_infrastructure()
            {
                for (const auto &h : sc_.hosts)
                {
                    cluster_.add_host(h);
                    host_meter_[h.id] = meter_.add_node(h.id, "host", 0.0, host_power(h.power, 0.0));
                }
                const auto &topo = sc_.topology;
                for (NodeIndex n = 0; n < topo.node_count(); ++n)
                {
                    const auto &node = topo.node(n);
                    if (is_switch(node.kind))
                    {
                        switch_meter_[n] = meter_.add_node(node.id, std::string(to_string(node.kind)), 0.0,
                                                           switch_power(sc_.switch_power, 0));
                    }
                }
                net_.set_link_activity_listener([this](LinkIndex link, bool active) {
                    const auto &l = sc_.topology.link(link);
                    for (const auto n : {l.a, l.b})
                    {
                        if (switch_meter_[n] == no_meter)
                        {
                            continue;
                        }
                        active_ports_[n] += active ? 1 : -1;
                        meter_.set_power(switch_meter_[n], sim_.now(),
                                         switch_power(sc_.switch_power, active_ports_[n]));
                    }
                });
                for (const auto &t : sc_.vnf_types)
                {
                    sfc_.add_type(t);
                }
                for (const auto &g : sc_.vm_groups)
                {
                    for (const auto &id : g.ids)
                    {
                        sfc_.set_vm_group(id, g.name);
                    }
                }
                for (const auto &c : sc_.chains)
                {
                    sfc_.add_policy(c);
                }
            }

            void setup_vms()
            {
                std::vector<VmSpec> vms;
                for (const auto &g : sc_.vm_groups)
                {
                    for (const auto &id : g.ids)
                    {
                        vms.push_back({id, g.mips, g.cores, g.ram_mib, VmRole::Application});
                    }
                }
                std::vector<std::string> vnf_types;
                for (const auto &t : sc_.vnf_types)
                {
                    for (int i = 0; i < sc_.initial_instances.at(t.name); ++i)
                    {
                        auto spec = t.instance_spec;
                        spec.id = fmt::format("vnf-{}-{}", t.name, i);
                        vms.push_back(spec);
                        vnf_types.push_back(t.name);
                    }
                }
                const auto result = place(vms, cluster_.snapshot(), sc_.placement, distance_fn());
                if (!result.failures.empty())
                {
                    throw std::runtime_error(
                        fmt::format("initial placement failed for VM '{}' ({} unplaceable)", result.failures.front(),
                                    result.failures.size()));
                }
                std::size_t vnf_index = 0;
                for (const auto &d : result.decisions)
                {
                    placements_.push_back(d);
                }
                for (const auto &vm : vms)
                {
                    const auto &host = result.assignments.at(vm.id);
                    cluster_.place_vm(vm, host);
                    if (vm.role == VmRole::Vnf)
                    {
                        const auto &inst = sfc_.create_instance(vnf_types[vnf_index++], host);
                        if (inst.vm != vm.id)
                        {
                            throw std::logic_error("VNF instance naming out of step with placement");
                        }
                        sfc_.set_status(inst.id, InstanceStatus::Active);
                    }
                }
                for (const auto &h : sc_.hosts)
                {
                    update_host_power(h.id);
                }
                cluster_.check_capacity();
            }

            void setup_workload()
            {
                if (sc_.generator)
                {
                    RngStream rng(sc_.seed, "workload");
                    requests_ = generate(*sc_.generator, rng);
                }
                else
                {
                    requests_ = sc_.trace_requests;
                }
                if (sc_.admission.enabled)
                {
                    admission_.emplace(sc_.admission);
                }
                states_.resize(requests_.size());
                for (std::size_t i = 0; i < requests_.size(); ++i)
                {
                    auto &st = states_[i];
                    st.request = &requests_[i];
                    st.record.request_id = requests_[i].id;
                    st.record.submit_s = requests_[i].submit_time;
                    if (requests_[i].submit_time > sc_.t_end_s)
                    {
                        continue;
                    }
                    index_.emplace(requests_[i].id, i);
                    sim_.schedule(requests_[i].submit_time, EventKind::RequestArrival, "req-" + requests_[i].id,
                                  [this, i] { on_arrival(i); });
                }
            }

            void setup_monitors()
            {
                for (std::size_t t = 0; t < sc_.vnf_types.size(); ++t)
                {
                    const double w = sc_.vnf_types[t].scaling.window_s;
                    if (w <= sc_.t_end_s)
                    {
                        sim_.schedule(w, EventKind::MonitorTick, "monitor-" + sc_.vnf_types[t].name,
                                      [this, t] { monitor(t); });
                    }
                }
            }

            void setup_migrations()
            {
                for (const auto &m : sc_.migrations)
                {
                    if (m.at_s > sc_.t_end_s)
                    {
                        continue;
                    }
                    sim_.schedule(m.at_s, EventKind::ScaleAction, "migrate-" + m.vm,
                                  [this, m] { start_migration(m); });
                }
            }

            HostDistance distance_fn()
            {
                return [this](const std::string &a, const std::string &b) {
                    const auto ia = sc_.topology.index_of(a);
                    auto it = hop_cache_.find(ia);
                    if (it == hop_cache_.end())
                    {
                        it = hop_cache_.emplace(ia, sc_.topology.hop_distances(ia)).first;
                    }
                    const auto d = it->second[sc_.topology.index_of(b)];
                    return d == static_cast<std::size_t>(-1) ? 1000000 : static_cast<int>(d);
                };
            }

            void update_host_power(const std::string &host)
            {
                const auto &h = cluster_.host(host);
                meter_.set_power(host_meter_.at(host), sim_.now(), host_power(h.spec.power, h.utilization()));
            }

            // -- request lifecycle --------------------------------------------------

            void on_arrival(std::size_t i)
            {
                auto &st = states_[i];
                st.arrived = true;
                st.mark = sim_.now();
                if (!admission_)
                {
                    advance(i);
                    return;
                }
                switch (admission_->admit(st.request->id, st.request->priority_class, sim_.now()))
                {
                case AdmissionDecision::Admitted:
                    advance(i);
                    break;
                case AdmissionDecision::Queued:
                    break;
                case AdmissionDecision::Rejected:
                    st.record.rejected = true;
                    break;
                }
            }

            void attribute_queue(RequestState &st)
            {
                st.queue += sim_.now() - st.mark;
                st.mark = sim_.now();
            }

            void advance(std::size_t i)
            {
                auto &st = states_[i];
                if (st.segment == st.request->segments.size())
                {
                    complete(i);
                    return;
                }
                const auto &seg = st.request->segments[st.segment];
                if (const auto *c = std::get_if<CpuSegment>(&seg))
                {
                    run_cpu(i, c->vm, c->length_mi, [this, i] {
                        ++states_[i].segment;
                        advance(i);
                    });
                }
                else
                {
                    start_network_segment(i);
                }
            }

            void run_cpu(std::size_t i, const std::string &vm, double mi, std::function<void()> then)
            {
                const auto timing = cluster_.execute_task({vm, mi, sim_.now()});
                const double service = timing.service_s;
                const auto token = timing.token;
                auto action = [this, i, service, token, then = std::move(then)] {
                    tasks_.erase(token);
                    auto &st = states_[i];
                    st.cpu += service;
                    st.queue += (sim_.now() - st.mark) - service;
                    st.mark = sim_.now();
                    then();
                };
                TaskEvent ev;
                ev.vm = vm;
                ev.action = action;
                ev.handle = sim_.schedule(timing.completion, EventKind::TaskComplete, vm, std::move(action));
                tasks_.emplace(token, std::move(ev));
            }

            void transfer(std::size_t i, const std::string &from_vm, const std::string &to_vm, double bytes,
                          std::function<void()> then)
            {
                TransferSpec spec;
                spec.src_host = sc_.topology.index_of(cluster_.host_of(from_vm));
                spec.dst_host = sc_.topology.index_of(cluster_.host_of(to_vm));
                spec.src_vm = from_vm;
                spec.dst_vm = to_vm;
                spec.bytes = bytes;
                spec.weight = sc_.class_weight(states_[i].request->priority_class);
                net_.start_transfer(spec, [this, i, then = std::move(then)](const FlowRecord &) {
                    auto &st = states_[i];
                    st.net += sim_.now() - st.mark;
                    st.mark = sim_.now();
                    then();
                });
            }

            void start_network_segment(std::size_t i)
            {
                auto &st = states_[i];
                const auto &seg = std::get<NetSegment>(st.request->segments[st.segment]);
                auto sel = sfc_.enforce_chain(seg.src_vm, seg.dst_vm);
                if (sel.policy == nullptr)
                {
                    transfer(i, seg.src_vm, seg.dst_vm, seg.bytes, [this, i] {
                        ++states_[i].segment;
                        advance(i);
                    });
                    return;
                }
                if (sel.hold)
                {
                    held_.push_back(i);
                    return;
                }
                begin_chain(i, sel);
            }

            void begin_chain(std::size_t i, ChainSelection &sel)
            {
                auto &st = states_[i];
                st.policy = sel.policy;
                st.waypoints = std::move(sel.waypoints);
                st.hop = 0;
                st.traversed.clear();
                st.chained = true;
                chain_step(i);
            }

            void chain_step(std::size_t i)
            {
                auto &st = states_[i];
                const auto &seg = std::get<NetSegment>(st.request->segments[st.segment]);
                const auto n = st.waypoints.size();
                const auto from = st.hop == 0 ? seg.src_vm : sfc_.instance(st.waypoints[st.hop - 1]).vm;
                if (st.hop == n)
                {
                    transfer(i, from, seg.dst_vm, seg.bytes, [this, i] {
                        auto &s = states_[i];
                        if (s.traversed != s.policy->chain)
                        {
                            s.chain_ok = false;
                        }
                        ++s.segment;
                        advance(i);
                    });
                    return;
                }
                const auto to = sfc_.instance(st.waypoints[st.hop]).vm;
                transfer(i, from, to, seg.bytes, [this, i] {
                    auto &s = states_[i];
                    const auto inst_id = s.waypoints[s.hop];
                    const auto &inst = sfc_.instance(inst_id);
                    const double mi = sfc_.type(inst.type).per_request_mi;
                    run_cpu(i, inst.vm, mi, [this, i, inst_id] {
                        auto &s2 = states_[i];
                        s2.traversed.push_back(sfc_.instance(inst_id).type);
                        sfc_.release(inst_id);
                        retire_if_drained(inst_id);
                        ++s2.hop;
                        chain_step(i);
                    });
                });
            }

            void complete(std::size_t i)
            {
                auto &st = states_[i];
                st.record.finish_s = sim_.now();
                st.record.cpu_s = st.cpu;
                st.record.net_s = st.net;
                st.record.queue_s = st.queue;
                st.record.completed = true;
                if (st.chained)
                {
                    ++chained_;
                    if (!st.chain_ok)
                    {
                        ++violations_;
                    }
                }
                if (admission_)
                {
                    if (const auto next = admission_->on_complete(sim_.now()))
                    {
                        const auto j = index_.at(*next);
                        attribute_queue(states_[j]);
                        advance(j);
                    }
                }
            }

            void retry_held()
            {
                std::deque<std::size_t> still;
                while (!held_.empty())
                {
                    const auto i = held_.front();
                    held_.pop_front();
                    auto &st = states_[i];
                    const auto &seg = std::get<NetSegment>(st.request->segments[st.segment]);
                    auto sel = sfc_.enforce_chain(seg.src_vm, seg.dst_vm);
                    if (sel.hold)
                    {
                        still.push_back(i);
                        continue;
                    }
                    attribute_queue(st);
                    begin_chain(i, sel);
                }
                held_ = std::move(still);
            }

            // -- monitoring and scaling ---------------------------------------------

            void monitor(std::size_t t)
            {
                const auto &type = sc_.vnf_types[t];
                const double window = type.scaling.window_s;
                const SimTime now = sim_.now();

                std::vector<InstanceLoad> loads;
                for (const auto &inst : sfc_.instances())
                {
                    if (inst.type != type.name || inst.status == InstanceStatus::Starting)
                    {
                        continue;
                    }
                    const double busy = cluster_.busy_time(inst.vm, now - window, now);
                    loads.push_back({inst.id, inst.type, inst.status, measure_utilization(busy, window)});
                }
                const auto actions = autoscale_tick(sc_.autoscale, std::span(&type, 1), loads, last_action_, now);
                for (const auto &a : actions)
                {
                    if (a.kind == ScaleAction::Kind::ScaleOut)
                    {
                        scale_out(type, a.utilization);
                    }
                    else
                    {
                        scale_in(a);
                    }
                }

                max_overload_ = std::max(max_overload_, net_.max_relative_overload());
                rules_ok_ = rules_ok_ && net_.rules_consistent();
                cluster_.forget_busy_before(now - max_window_);

                if (now + window <= sc_.t_end_s)
                {
                    sim_.schedule(now + window, EventKind::MonitorTick, "monitor-" + type.name,
                                  [this, t] { monitor(t); });
                }
            }

            void scale_out(const VnfType &type, double utilization)
            {
                auto probe = type.instance_spec;
                probe.id = "vnf-" + type.name + "-new";
                const auto result = place(std::span(&probe, 1), cluster_.snapshot(), sc_.placement, distance_fn());
                if (!result.failures.empty())
                {
                    scaling_.push_back({sim_.now(), type.name, "scale-out-failed", "", "", utilization});
                    return;
                }
                const auto host = result.assignments.begin()->second;
                const auto &inst = sfc_.create_instance(type.name, host);
                const auto id = inst.id;
                auto spec = type.instance_spec;
                spec.id = inst.vm;
                cluster_.place_vm(spec, host);
                update_host_power(host);
                placements_.push_back({spec.id, host, result.decisions.front().score});
                last_action_[type.name] = sim_.now();
                scaling_.push_back({sim_.now(), type.name, "scale-out", id, host, utilization});
                sim_.schedule(sim_.now() + sc_.autoscale.startup_delay_s, EventKind::ScaleAction, id, [this, id] {
                    sfc_.set_status(id, InstanceStatus::Active);
                    const auto &i = sfc_.instance(id);
                    scaling_.push_back({sim_.now(), i.type, "activate", id, i.host, 0.0});
                    retry_held();
                });
            }

            void scale_in(const ScaleAction &a)
            {
                sfc_.set_status(a.instance, InstanceStatus::Draining);
                last_action_[a.type] = sim_.now();
                const auto &inst = sfc_.instance(a.instance);
                scaling_.push_back({sim_.now(), a.type, "scale-in", a.instance, inst.host, a.utilization});
                retire_if_drained(a.instance);
            }

            void retire_if_drained(const std::string &id)
            {
                const auto *found = sfc_.find_instance(id);
                if (found == nullptr)
                {
                    return;
                }
                const auto &inst = *found;
                if (inst.status != InstanceStatus::Draining || inst.outstanding > 0)
                {
                    return;
                }
                const auto vm = inst.vm;
                const auto host = inst.host;
                const auto type = inst.type;
                // Tasks already queued on the VM keep it alive until they finish.
                const auto &rt = cluster_.vm(vm);
                if (rt.busy_until > sim_.now())
                {
                    sim_.schedule(rt.busy_until, EventKind::ScaleAction, id, [this, id] { retire_if_drained(id); });
                    return;
                }
                cluster_.remove_vm(vm);
                sfc_.remove_instance(id);
                update_host_power(host);
                scaling_.push_back({sim_.now(), type, "remove", id, host, 0.0});
            }

            // -- migrations -----------------------------------------------------------

            void start_migration(const MigrationSpec &m)
            {
                MigrationTicket ticket;
                try
                {
                    ticket = cluster_.begin_migration(m.vm, m.to_host, sim_.now(), sc_.migration_bandwidth_bps);
                }
                catch (const PlacementFailure &)
                {
                    ++migrations_rejected_;
                    return;
                }
                if (ticket.from == ticket.to)
                {
                    ++migrations_completed_;
                    return;
                }
                update_host_power(ticket.to);
                for (const auto &[token, completion] : ticket.shifted)
                {
                    auto it = tasks_.find(token);
                    if (it == tasks_.end())
                    {
                        continue;
                    }
                    sim_.cancel(it->second.handle);
                    it->second.handle =
                        sim_.schedule(completion, EventKind::TaskComplete, it->second.vm, it->second.action);
                }
                sim_.schedule(ticket.completes_at, EventKind::MigrationComplete, m.vm,
                              [this, ticket] { finish_migration(ticket); });
            }

            void finish_migration(const MigrationTicket &ticket)
            {
                cluster_.finish_migration(ticket);
                update_host_power(ticket.from);
                if (const auto *inst = sfc_.instance_for_vm(ticket.vm))
                {
                    sfc_.find_instance(inst->id)->host = ticket.to;
                }
                flows_rerouted_ += net_.reroute_flows_for(
                    sc_.topology.index_of(ticket.from),
                    [this](const std::string &vm) { return sc_.topology.index_of(cluster_.host_of(vm)); });
                ++migrations_completed_;
                cluster_.check_capacity();
            }

            // -- report -----------------------------------------------------------------

            RunResult finish()
            {
                RunResult r;
                const SimTime end = sim_.now();
                std::vector<RequestRecord> records;
                std::size_t drained = 0;
                for (auto &st : states_)
                {
                    if (!st.arrived)
                    {
                        continue;
                    }
                    if (st.record.completed && st.record.finish_s > sc_.t_end_s)
                    {
                        ++drained;
                    }
                    records.push_back(st.record);
                }
                r.submitted = records.size();

                std::vector<EnergyRecord> energy;
                double host_j = 0.0;
                double switch_j = 0.0;
                for (std::size_t n = 0; n < meter_.size(); ++n)
                {
                    const double j = meter_.energy_until(n, end);
                    (meter_.kind(n) == "host" ? host_j : switch_j) += j;
                    energy.push_back({meter_.id(n), meter_.kind(n), j});
                }

                r.report = summarize(std::move(records), std::move(energy), sfc_.instance_counts());
                int scale_outs = 0;
                int failures = 0;
                int scale_ins = 0;
                for (const auto &e : scaling_)
                {
                    scale_outs += e.action == "scale-out";
                    failures += e.action == "scale-out-failed";
                    scale_ins += e.action == "scale-in";
                }
                max_overload_ = std::max(max_overload_, net_.max_relative_overload());
                rules_ok_ = rules_ok_ && net_.rules_consistent() && net_.active().empty();

                auto &x = r.report.extra;
                x.emplace_back("submitted_requests", static_cast<double>(r.submitted));
                x.emplace_back("drained_after_t_end", static_cast<double>(drained));
                x.emplace_back("chained_requests", static_cast<double>(chained_));
                x.emplace_back("chain_violations", static_cast<double>(violations_));
                x.emplace_back("scale_out_actions", scale_outs);
                x.emplace_back("scale_out_failures", failures);
                x.emplace_back("scale_in_actions", scale_ins);
                x.emplace_back("flows_started", static_cast<double>(net_.flows_started()));
                x.emplace_back("flows_rerouted", static_cast<double>(flows_rerouted_));
                x.emplace_back("migrations_completed", static_cast<double>(migrations_completed_));
                x.emplace_back("migrations_rejected", static_cast<double>(migrations_rejected_));
                x.emplace_back("max_link_overload", max_overload_);
                x.emplace_back("max_byte_conservation_error", net_.max_conservation_error());
                x.emplace_back("host_energy_j", host_j);
                x.emplace_back("switch_energy_j", switch_j);
                x.emplace_back("final_clock_s", end);
                x.emplace_back("events_processed", static_cast<double>(sim_.events_processed()));
                if (admission_)
                {
                    x.emplace_back("admission_max_wait_s", admission_->max_wait());
                }
                r.report.config = sc_.echo;

                r.descriptor = sfc_.descriptor();
                r.placements = std::move(placements_);
                r.placement_kind = sc_.placement.kind;
                r.scaling = std::move(scaling_);
                r.chained_requests = chained_;
                r.chain_violations = violations_;
                r.events_processed = sim_.events_processed();
                r.final_clock = end;
                r.max_link_overload = max_overload_;
                r.rules_consistent = rules_ok_;
                r.migrations_completed = migrations_completed_;
                r.migrations_rejected = migrations_rejected_;
                r.flows_rerouted = flows_rerouted_;
                return r;
            }

            const Scenario &sc_;
            Simulator sim_;
            Cluster cluster_;
            NetworkController net_;
            SfcManager sfc_;
            EnergyMeter meter_;
            std::map<std::string, std::size_t> host_meter_;
            std::vector<int> active_ports_;
            std::vector<std::size_t> switch_meter_;
            std::map<NodeIndex, std::vector<std::size_t>> hop_cache_;

            std::vector<Request> requests_;
            std::vector<RequestState> states_;
            std::unordered_map<std::string, std::size_t> index_;
            std::optional<AdmissionController> admission_;
            std::deque<std::size_t> held_;
            std::map<std::uint64_t, TaskEvent> tasks_;

            std::map<std::string, SimTime> last_action_;
            std::vector<ScaleEvent> scaling_;
            std::vector<PlacementDecision> placements_;
            double max_window_ = 0.0;
            std::size_t chained_ = 0;
            std::size_t violations_ = 0;
            double max_overload_ = 0.0;
            bool rules_ok_ = true;
            std::size_t migrations_completed_ = 0;
            std::size_t migrations_rejected_ = 0;
            std::size_t flows_rerouted_ = 0;
        };

        std::ofstream open_out(const std::filesystem::path &file)
        {
            std::ofstream out(file, std::ios::binary | std::ios::trunc);
            if (!out)
            {
                throw IoError("cannot write '" + file.string() + "'");
            }
            return out;
        }
    }

    RunResult run_experiment(const Scenario &scenario, const RunOptions &options)
    {
        const auto t0 = std::chrono::steady_clock::now();
        Engine engine(scenario, options);
        auto result = engine.run();
        result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return result;
    }

    void write_outputs(const RunResult &result, const std::filesystem::path &dir)
    {
        export_csv(result.report, dir);
        try
        {
            save_descriptor(result.descriptor, dir / "descriptor.json");
        }
        catch (const std::exception &e)
        {
            throw IoError(e.what());
        }
        write_placement_log(dir / "placement.csv", result.placements, result.placement_kind);
        auto out = open_out(dir / "scaling.csv");
        out << "time_s,type,action,instance,host,utilization\n";
        for (const auto &e : result.scaling)
        {
            out << format_value(e.time) << ',' << e.type << ',' << e.action << ',' << e.instance << ',' << e.host
                << ',' << format_value(e.utilization) << '\n';
        }
        if (!out.flush())
        {
            throw IoError("write failed for scaling.csv");
        }
    }

    // -- comparison ---------------------------------------------------------------

    const ComparisonRow *ComparisonResult::find(std::string_view metric) const
    {
        for (const auto &r : rows)
        {
            if (r.metric == metric)
            {
                return &r;
            }
        }
        return nullptr;
    }

    double relative_change_percent(double baseline, double variant)
    {
        if (baseline == 0.0)
        {
            return variant == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
        }
        return (baseline - variant) / baseline * 100.0;
    }

    namespace
    {
        std::optional<double> parse_number(const std::string &s)
        {
            double v = 0.0;
            const auto *end = s.data() + s.size();
            const auto [p, ec] = std::from_chars(s.data(), end, v);
            if (ec != std::errc{} || p != end || s.empty())
            {
                return std::nullopt;
            }
            return v;
        }

        std::vector<std::pair<std::string, double>> numeric_metrics(
            const std::vector<std::pair<std::string, std::string>> &rows)
        {
            std::vector<std::pair<std::string, double>> out;
            for (const auto &[k, v] : rows)
            {
                if (k.starts_with("config."))
                {
                    continue;
                }
                if (const auto d = parse_number(v))
                {
                    out.emplace_back(k, *d);
                }
            }
            return out;
        }
    }

    ComparisonResult compare_summaries(const std::vector<std::pair<std::string, std::string>> &baseline,
                                       const std::vector<std::pair<std::string, std::string>> &variant)
    {
        const auto a = numeric_metrics(baseline);
        const auto b = numeric_metrics(variant);
        std::map<std::string, double> bmap(b.begin(), b.end());
        ComparisonResult result;
        for (const auto &[k, va] : a)
        {
            const auto it = bmap.find(k);
            if (it == bmap.end())
            {
                throw ConfigError(fmt::format("metric '{}' is missing from the variant report", k));
            }
            result.rows.push_back({k, va, it->second, relative_change_percent(va, it->second)});
            bmap.erase(it);
        }
        if (!bmap.empty())
        {
            throw ConfigError(fmt::format("metric '{}' is missing from the baseline report", bmap.begin()->first));
        }
        return result;
    }

    ComparisonResult compare_reports(const std::filesystem::path &baseline, const std::filesystem::path &variant)
    {
        const auto resolve = [](const std::filesystem::path &p) {
            return std::filesystem::is_directory(p) ? p / "summary.csv" : p;
        };
        return compare_summaries(read_summary(resolve(baseline)), read_summary(resolve(variant)));
    }

    std::string format_comparison(const ComparisonResult &result)
    {
        std::size_t width = 6;
        for (const auto &r : result.rows)
        {
            width = std::max(width, r.metric.size());
        }
        std::string out = fmt::format("{:<{}}  {:>14}  {:>14}  {:>9}\n", "metric", width, "baseline", "variant",
                                      "change%");
        for (const auto &r : result.rows)
        {
            out += fmt::format("{:<{}}  {:>14}  {:>14}  {:>9.1f}\n", r.metric, width, format_value(r.baseline),
                               format_value(r.variant), r.percent);
        }
        return out;
    }

    void write_comparison_csv(const ComparisonResult &result, const std::filesystem::path &file)
    {
        auto out = open_out(file);
        out << "metric,baseline,variant,percent_change\n";
        for (const auto &r : result.rows)
        {
            out << r.metric << ',' << format_value(r.baseline) << ',' << format_value(r.variant) << ','
                << fmt::format("{:.1f}", r.percent) << '\n';
        }
        if (!out.flush())
        {
            throw IoError("write failed for '" + file.string() + "'");
        }
    }

    // -- sweep ------------------------------------------------------------------------

    SweepAxis parse_sweep_axis(std::string_view text)
    {
        const auto o = parse_override(text);
        SweepAxis axis{o.key, {}};
        std::size_t start = 0;
        while (true)
        {
            const auto comma = o.value.find(',', start);
            auto v = o.value.substr(start, comma - start);
            if (v.empty())
            {
                throw ConfigError(fmt::format("sweep axis '{}' has an empty value", o.key));
            }
            axis.values.push_back(std::move(v));
            if (comma == std::string::npos)
            {
                break;
            }
            start = comma + 1;
        }
        return axis;
    }

    std::vector<SweepCell> run_sweep(const std::filesystem::path &scenario, std::span<const Override> base,
                                     std::span<const SweepAxis> axes, const std::filesystem::path &out_root,
                                     unsigned jobs)
    {
        std::vector<SweepCell> cells;
        std::size_t total = 1;
        for (const auto &a : axes)
        {
            if (a.values.empty())
            {
                throw ConfigError(fmt::format("sweep axis '{}' has no values", a.key));
            }
            total *= a.values.size();
        }
        for (std::size_t c = 0; c < total; ++c)
        {
            SweepCell cell;
            cell.index = c;
            cell.overrides.assign(base.begin(), base.end());
            std::size_t rest = c;
            for (auto a = axes.size(); a-- > 0;)
            {
                const auto &axis = axes[a];
                cell.overrides.push_back({axis.key, axis.values[rest % axis.values.size()]});
                rest /= axis.values.size();
            }
            cell.out_dir = out_root / fmt::format("cell-{:03}", c);
            cells.push_back(std::move(cell));
        }

        std::atomic<std::size_t> next{0};
        const auto worker = [&] {
            for (auto c = next++; c < cells.size(); c = next++)
            {
                auto &cell = cells[c];
                try
                {
                    const auto sc = load_scenario(scenario, cell.overrides);
                    const auto result = run_experiment(sc);
                    write_outputs(result, cell.out_dir);
                    cell.mean_response_s = result.report.mean_response_s;
                    cell.mean_net_s = result.report.mean_net_s;
                    cell.vnf_vm_count_final = result.report.vnf_vm_count_final;
                }
                catch (const ConfigError &e)
                {
                    cell.status = 2;
                    cell.error = e.what();
                }
                catch (const std::exception &e)
                {
                    cell.status = 1;
                    cell.error = e.what();
                }
            }
        };
        const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cells.size())));
        std::vector<std::thread> pool;
        for (unsigned t = 1; t < n; ++t)
        {
            pool.emplace_back(worker);
        }
        worker();
        for (auto &t : pool)
        {
            t.join();
        }

        std::filesystem::create_directories(out_root);
        auto out = open_out(out_root / "sweep.csv");
        out << "cell";
        for (const auto &a : axes)
        {
            out << ',' << a.key;
        }
        out << ",status,mean_response_s,mean_net_s,vnf_vm_count_final\n";
        for (const auto &cell : cells)
        {
            out << cell.out_dir.filename().string();
            for (std::size_t a = 0; a < axes.size(); ++a)
            {
                out << ',' << cell.overrides[base.size() + axes.size() - 1 - a].value;
            }
            out << ',' << cell.status << ',' << format_value(cell.mean_response_s) << ','
                << format_value(cell.mean_net_s) << ',' << cell.vnf_vm_count_final << '\n';
        }
        return cells;
    }
}
