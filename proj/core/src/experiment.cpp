#include "kgcal/experiment.hpp"

#include <ostream>

#include "kgcal/error.hpp"
#include "kgcal/parallel.hpp"
#include "kgcal/rng.hpp"

namespace kgcal {

namespace {

KnowledgeGraph load_graph(const ExperimentConfig& c, const SeedPlan& seeds) {
    switch (c.graph.source) {
        case GraphSpec::Source::Synthetic:
            return generate_synthetic(c.graph.entities, c.graph.relations, c.graph.triples, seeds.graph,
                                      SyntheticGraphOptions{c.graph.uniform_mix});
        case GraphSpec::Source::Triples:
            return load_triples(c.graph.path);
        case GraphSpec::Source::Snapshot:
            return load_snapshot(c.graph.path);
    }
    throw ConfigError("unknown graph source");
}

// Re-throws module errors with the experiment phase prepended, keeping the type.
template <typename Fn>
auto with_context(const std::string& where, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
    } catch (const WorkloadError& e) {
        throw WorkloadError(where + ": " + e.what());
    } catch (const ExecutionError& e) {
        throw ExecutionError(where + ": " + e.what());
    } catch (const CalibrationError& e) {
        throw CalibrationError(where + ": " + e.what());
    } catch (const Error& e) {
        throw Error(where + ": " + e.what());
    }
}

std::string phase(const std::string& name, TopologyId t, double incompleteness) {
    return name + " [" + std::string(to_string(t)) + ", incompleteness " + format_number(incompleteness) + "]";
}

}  // namespace

Environment::Environment(const ExperimentConfig& config) : config_(&config), seeds_(seed_plan(config)) {
    config.validate();
    graph_ = std::make_unique<KnowledgeGraph>(load_graph(config, seeds_));
    scorer_ = std::make_unique<SyntheticOracleScorer>(*graph_, config.scorer.resolved(), seeds_.scorer);
    incompleteness_ = static_cast<double>(graph_->triple_count() - graph_->observed_count()) /
                      static_cast<double>(graph_->triple_count());
}

void Environment::set_incompleteness(double fraction) {
    graph_->drop_edges(fraction, seeds_.drop);
    incompleteness_ = fraction;
}

EngineContext Environment::context(ScoreAudit* audit) const {
    EngineContext ctx;
    ctx.graph = graph_.get();
    ctx.scorer = scorer_.get();
    ctx.gate = config_->gate;
    ctx.view = View::Observed;
    ctx.runtime_top_k = config_->runtime_top_k;
    ctx.audit = audit;
    ctx.workers = config_->workers;
    return ctx;
}

Splits make_splits(const Environment& env, const ExperimentConfig& config, TopologyId topology) {
    auto all = generate_workload(env.graph(), topology, config.splits.total(), config.frontier_cap,
                                 env.seeds().workload(topology));
    // Rejection of duplicates makes late instances rarer than early ones, so
    // split a seeded permutation rather than generation order.
    Rng(derive_seed(env.seeds().workload(topology), "split")).shuffle(std::span<QueryInstance>(all));
    Splits s;
    const auto opt_end = all.begin() + static_cast<std::ptrdiff_t>(config.splits.opt);
    const auto valid_end = opt_end + static_cast<std::ptrdiff_t>(config.splits.valid);
    s.opt.assign(std::make_move_iterator(all.begin()), std::make_move_iterator(opt_end));
    s.valid.assign(std::make_move_iterator(opt_end), std::make_move_iterator(valid_end));
    s.eval.assign(std::make_move_iterator(valid_end), std::make_move_iterator(all.end()));
    return s;
}

std::vector<ResultRow> evaluate_group(const std::string& strategy, TopologyId topology, double incompleteness,
                                      double param, std::span<const QueryInstance> workload,
                                      const Executor& execute, unsigned workers) {
    std::vector<ResultRow> rows(workload.size());
    const std::string topo(to_string(topology));
    parallel_for(workload.size(), workers, [&](std::size_t i) {
        const auto result = execute(workload[i]);
        rows[i] = query_row(strategy, topo, incompleteness, param, i,
                            compare_answers(result.answers, workload[i].truth.final), result.trace);
    });
    if (!rows.empty()) rows.push_back(aggregate_rows(rows));
    return rows;
}

CalibrationTable calibrate_table(const Environment& env, const ExperimentConfig& config,
                                 const ProgressFn& progress) {
    CalibrationTable table;
    const auto ctx = env.context();
    for (const auto topology : config.topologies) {
        const auto where = phase("calibrate", topology, env.incompleteness());
        with_context(where, [&] {
            if (progress) progress(where);
            const auto splits = make_splits(env, config, topology);
            const Calibrator cal(ctx, topology, splits.opt, splits.valid, config.strategies_for(topology),
                                 {config.grid_size, config.scorer.top_k, config.seed});
            for (const double alpha : config.risk_budgets) table.insert(cal.calibrate({alpha}));
            return 0;
        });
    }
    return table;
}

std::vector<ResultRow> run_table(const CalibrationTable& table, std::span<const QueryInstance> workload,
                                 const Environment& env, unsigned workers, std::ostream* traces) {
    std::vector<ResultRow> rows;
    if (workload.empty()) return rows;
    const auto topology = workload.front().topology;
    const auto ctx = env.context();
    for (const auto* entry : table.entries()) {
        if (entry->topology != topology) continue;
        if (entry->routing_threshold != ctx.gate.routing_threshold || entry->margin != ctx.gate.margin) {
            throw ConfigError("calibration entry was built with a different gate configuration");
        }
        std::vector<std::string> lines(traces ? workload.size() : 0);
        const auto group = evaluate_group(
            "calibrated", topology, env.incompleteness(), entry->alpha, workload,
            [&](const QueryInstance& q) {
                auto result = execute_query(q, entry->thresholds, ctx);
                if (traces) lines[static_cast<std::size_t>(&q - workload.data())] =
                    trace_json(q, entry->thresholds, result, true);
                return result;
            },
            workers);
        rows.insert(rows.end(), group.begin(), group.end());
        for (const auto& l : lines) *traces << l << '\n';
    }
    if (rows.empty()) {
        throw ConfigError("calibration table has no entry for topology " + std::string(to_string(topology)));
    }
    return rows;
}

std::vector<ResultRow> run_static_baselines(const ExperimentConfig& config, std::span<const QueryInstance> workload,
                                            const Environment& env) {
    std::vector<ResultRow> rows;
    if (workload.empty()) return rows;
    const auto topology = workload.front().topology;
    const auto ctx = env.context();
    auto run = [&](const BaselineSpec& spec, double param) {
        const auto group = evaluate_group(
            spec.label(), topology, env.incompleteness(), param, workload,
            [&](const QueryInstance& q) { return run_baseline(spec, q, ctx); }, config.workers);
        rows.insert(rows.end(), group.begin(), group.end());
    };
    if (config.baselines.retrieval) run(BaselineSpec::retrieval(), 0.0);
    for (const double t : config.baselines.static_neural) run(BaselineSpec::static_neural(t), t);
    for (const double t : config.baselines.static_hybrid) run(BaselineSpec::static_hybrid(t), t);
    return rows;
}

ExperimentOutput run_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
    config.validate();
    ExperimentOutput out;
    Environment env(config);
    out.seeds = env.seeds().describe();
    ScoreAudit audit;

    for (const double fraction : config.incompleteness) {
        env.set_incompleteness(fraction);
        const auto cal_ctx = env.context(&audit);
        const auto ctx = env.context();
        CalibrationTable table;
        for (const auto topology : config.topologies) {
            const auto splits =
                with_context(phase("workload", topology, fraction), [&] { return make_splits(env, config, topology); });
            if (progress) progress(phase("calibrate", topology, fraction));
            const auto cal = with_context(phase("calibrate", topology, fraction), [&] {
                return std::make_unique<Calibrator>(cal_ctx, topology, splits.opt, splits.valid,
                                                    config.strategies_for(topology),
                                                    CalibrationSettings{config.grid_size, config.scorer.top_k,
                                                                        config.seed});
            });
            auto add = [&](std::vector<ResultRow> group) {
                for (const auto& r : group) out.rows.push_back(r);
            };
            auto tally = [&](const ExecutionResult& r) {
                std::uint64_t calls = 0;
                for (const auto& s : r.trace.slots) {
                    if (s.mode == GateMode::RetrievalOnly) calls += s.invocations;
                }
                return calls;
            };
            std::atomic<std::uint64_t> retrieval_calls{0};
            auto traced = [&](auto&& fn) {
                return [&, fn](const QueryInstance& q) {
                    auto r = fn(q);
                    retrieval_calls += tally(r);
                    return r;
                };
            };

            for (const double alpha : config.risk_budgets) {
                const auto where = phase("calibrated alpha=" + format_number(alpha), topology, fraction);
                with_context(where, [&] {
                    if (progress) progress(where);
                    auto entry = cal->calibrate({alpha});
                    if (!entry.feasible) {
                        out.warnings.push_back(where + ": no grid point meets the budget; using the most "
                                                       "permissive thresholds");
                    }
                    const auto thresholds = entry.thresholds;
                    add(evaluate_group("calibrated", topology, fraction, alpha, splits.eval,
                                       traced([&ctx, thresholds](const QueryInstance& q) {
                                           return execute_query(q, thresholds, ctx);
                                       }),
                                       config.workers));
                    table.insert(std::move(entry));
                    return 0;
                });
            }
            if (config.baselines.union_bound) {
                for (const double alpha : config.risk_budgets) {
                    const auto where = phase("union_bound alpha=" + format_number(alpha), topology, fraction);
                    with_context(where, [&] {
                        auto ub = calibrate_union_bound(cal->collection(), {alpha}, config.grid_size);
                        if (!ub.feasible()) out.warnings.push_back(where + ": some slots cannot meet alpha / k");
                        const auto spec = BaselineSpec::union_bound(alpha, ub.thresholds);
                        add(evaluate_group(spec.label(), topology, fraction, alpha, splits.eval,
                                           traced([&ctx, spec](const QueryInstance& q) {
                                               return run_baseline(spec, q, ctx);
                                           }),
                                           config.workers));
                        out.union_bound.push_back({topology, fraction, alpha, std::move(ub)});
                        return 0;
                    });
                }
            }
            with_context(phase("baselines", topology, fraction), [&] {
                if (progress) progress(phase("baselines", topology, fraction));
                auto run = [&](const BaselineSpec& spec, double param) {
                    add(evaluate_group(spec.label(), topology, fraction, param, splits.eval,
                                       traced([&ctx, spec](const QueryInstance& q) {
                                           return run_baseline(spec, q, ctx);
                                       }),
                                       config.workers));
                };
                if (config.baselines.retrieval) run(BaselineSpec::retrieval(), 0.0);
                for (const double t : config.baselines.static_neural) run(BaselineSpec::static_neural(t), t);
                for (const double t : config.baselines.static_hybrid) run(BaselineSpec::static_hybrid(t), t);
                return 0;
            });
            out.retrieval_slot_invocations += retrieval_calls;
        }
        out.tables.emplace_back(fraction, std::move(table));
    }
    out.scores_retrieved = audit.retrieved;
    out.scores_inferred = audit.inferred;
    out.score_violations = audit.violations;
    return out;
}

}  // namespace kgcal
