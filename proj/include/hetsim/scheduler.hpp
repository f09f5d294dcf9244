#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <vector>

#include "hetsim/cost_model.hpp"
#include "hetsim/graph.hpp"
#include "hetsim/mapping.hpp"

namespace hetsim {

enum class ScheduleMode : std::uint8_t { Naive, Lookahead };

inline std::string schedule_mode_name(ScheduleMode m) { return m == ScheduleMode::Naive ? "naive" : "lookahead"; }

inline ScheduleMode schedule_mode_from_name(const std::string& s) {
    if (s == "naive") return ScheduleMode::Naive;
    if (s == "lookahead") return ScheduleMode::Lookahead;
    raise(ErrorCode::ConfigError, "unknown schedule mode '" + s + "' (expected naive|lookahead)");
}

// Zero-duration ops are stretched to this width so traces stay visible; such
// intervals are excluded from busy-time sums.
inline constexpr double kEpsilonInterval = 1e-12;

struct Interval {
    NodeId node = 0;
    EngineKind engine = EngineKind::TPC;
    double start = 0.0;  // s
    double end = 0.0;    // s
    bool epsilon_pad = false;

    double duration() const { return end - start; }
};

struct Timeline {
    std::vector<Interval> intervals;
    ScheduleMode mode = ScheduleMode::Lookahead;
};

// ---------------------------------------------------------------------------
// Cost-annotated DAG view: the list scheduler and the brute-force oracle run
// on plain (engine, duration, edges) triples so tests can drive them with
// synthetic costs directly.
// ---------------------------------------------------------------------------

struct AnnotatedDag {
    std::vector<EngineKind> engine;             // per node
    std::vector<double> duration;               // per node, seconds
    std::vector<std::vector<NodeId>> preds;     // distinct predecessor ids
    std::size_t size() const { return engine.size(); }

    std::vector<std::vector<NodeId>> successor_lists() const {
        std::vector<std::vector<NodeId>> succs(size());
        for (std::size_t v = 0; v < size(); ++v) {
            for (NodeId p : preds[v]) succs[static_cast<std::size_t>(p)].push_back(static_cast<NodeId>(v));
        }
        return succs;
    }
};

inline AnnotatedDag annotate(const Graph& g, const MappingTable& mapping, const CostParams& params) {
    AnnotatedDag dag;
    dag.engine.reserve(g.num_nodes());
    dag.duration.reserve(g.num_nodes());
    for (const OpNode& n : g.nodes()) {
        EngineKind e = mapping.assign_engine(n.kind);
        dag.engine.push_back(e);
        dag.duration.push_back(op_cost(n, g, e, params).duration);
    }
    dag.preds = g.predecessor_lists();
    return dag;
}

namespace detail {

inline Interval make_interval(NodeId id, EngineKind e, double start, double dur) {
    if (dur <= 0.0) return {id, e, start, start + kEpsilonInterval, true};
    return {id, e, start, start + dur, false};
}

// Event-driven greedy list scheduling: among ready ops per engine pick the
// highest critical-path length (ties: smaller node id); an op starts as soon
// as its engine is free and its predecessors have finished.
inline Timeline schedule_lookahead(const AnnotatedDag& dag) {
    const std::size_t n = dag.size();
    auto succs = dag.successor_lists();

    // Critical-path priority: longest path to a sink, inclusive, recomputed
    // once before scheduling.
    std::vector<double> cp(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double best = 0.0;
        for (NodeId s : succs[i]) best = std::max(best, cp[static_cast<std::size_t>(s)]);
        cp[i] = dag.duration[i] + best;
    }

    std::vector<std::size_t> missing(n, 0);
    for (std::size_t v = 0; v < n; ++v) missing[v] = dag.preds[v].size();

    struct ReadyOrder {
        const std::vector<double>* cp;
        bool operator()(NodeId a, NodeId b) const {
            double ca = (*cp)[static_cast<std::size_t>(a)], cb = (*cp)[static_cast<std::size_t>(b)];
            if (ca != cb) return ca < cb;  // max-heap on priority
            return a > b;                  // then min node id
        }
    };
    using ReadyQueue = std::priority_queue<NodeId, std::vector<NodeId>, ReadyOrder>;
    ReadyQueue ready[3] = {ReadyQueue(ReadyOrder{&cp}), ReadyQueue(ReadyOrder{&cp}), ReadyQueue(ReadyOrder{&cp})};

    for (std::size_t v = 0; v < n; ++v) {
        if (missing[v] == 0) ready[static_cast<int>(dag.engine[v])].push(static_cast<NodeId>(v));
    }

    double lane_free[3] = {0.0, 0.0, 0.0};
    NodeId lane_node[3] = {-1, -1, -1};
    std::vector<Interval> intervals;
    intervals.reserve(n);
    std::size_t done = 0;
    double now = 0.0;

    auto dispatch = [&](int lane, double t) {
        NodeId id = ready[lane].top();
        ready[lane].pop();
        double dur = dag.duration[static_cast<std::size_t>(id)];
        Interval iv = make_interval(id, static_cast<EngineKind>(lane), t, dur);
        intervals.push_back(iv);
        lane_free[lane] = iv.end;
        lane_node[lane] = id;
    };

    while (done < n) {
        for (int lane = 0; lane < 3; ++lane) {
            if (lane_node[lane] < 0 && !ready[lane].empty()) dispatch(lane, now);
        }
        // Advance to the earliest completion among running lanes.
        double next = std::numeric_limits<double>::infinity();
        for (int lane = 0; lane < 3; ++lane) {
            if (lane_node[lane] >= 0) next = std::min(next, lane_free[lane]);
        }
        if (!std::isfinite(next)) raise(ErrorCode::UnscheduledNode, "no runnable op; graph is not a valid DAG");
        now = next;
        for (int lane = 0; lane < 3; ++lane) {
            if (lane_node[lane] >= 0 && lane_free[lane] <= now) {
                NodeId finished = lane_node[lane];
                lane_node[lane] = -1;
                ++done;
                for (NodeId s : succs[static_cast<std::size_t>(finished)]) {
                    if (--missing[static_cast<std::size_t>(s)] == 0) {
                        ready[static_cast<int>(dag.engine[static_cast<std::size_t>(s)])].push(s);
                    }
                }
            }
        }
    }

    std::sort(intervals.begin(), intervals.end(), [](const Interval& a, const Interval& b) {
        if (a.start != b.start) return a.start < b.start;
        return a.node < b.node;
    });
    return {std::move(intervals), ScheduleMode::Lookahead};
}

// Program-order serialization with a global barrier between consecutive ops:
// models an eager compiler that never overlaps engines.
inline Timeline schedule_naive(const AnnotatedDag& dag) {
    std::vector<Interval> intervals;
    intervals.reserve(dag.size());
    double t = 0.0;
    for (std::size_t v = 0; v < dag.size(); ++v) {
        for (NodeId p : dag.preds[v]) {
            if (static_cast<std::size_t>(p) >= v) {
                raise(ErrorCode::UnscheduledNode, "program order is not topological");
            }
        }
        Interval iv = make_interval(static_cast<NodeId>(v), dag.engine[v], t, dag.duration[v]);
        intervals.push_back(iv);
        t = iv.end;
    }
    return {std::move(intervals), ScheduleMode::Naive};
}

}  // namespace detail

inline Timeline schedule(const AnnotatedDag& dag, ScheduleMode mode) {
    return mode == ScheduleMode::Naive ? detail::schedule_naive(dag) : detail::schedule_lookahead(dag);
}

inline Timeline schedule(const Graph& g, const MappingTable& mapping, const CostParams& params, ScheduleMode mode) {
    return schedule(annotate(g, mapping, params), mode);
}

// ---------------------------------------------------------------------------
// Transfer insertion: a MemCopy (DMA) node is placed on every producer ->
// consumer edge whose endpoints run on different compute engines. One copy is
// shared by all consumers of a tensor on the same destination engine.
// Idempotent: copy nodes themselves never trigger further insertion.
// ---------------------------------------------------------------------------

inline Graph insert_transfers(const Graph& g, const MappingTable& mapping) {
    Graph out;
    out.tag = g.tag;
    for (std::size_t t = 0; t < g.num_tensors(); ++t) {
        out.raw_add_tensor(g.tensor(static_cast<TensorId>(t)), g.is_input(static_cast<TensorId>(t)));
    }

    std::map<std::pair<TensorId, EngineKind>, TensorId> staged;
    NodeId next_id = 0;
    for (const OpNode& n : g.nodes()) {
        OpNode copy = n;
        if (n.kind != OpKind::MemCopy) {
            EngineKind dst = mapping.assign_engine(n.kind);
            for (TensorId& input : copy.inputs) {
                NodeId src_node = g.producer(input);
                if (src_node < 0) continue;  // entry tensors are resident everywhere
                const OpNode& src = g.node(src_node);
                if (src.kind == OpKind::MemCopy) continue;
                EngineKind src_engine = mapping.assign_engine(src.kind);
                if (src_engine == dst || src_engine == EngineKind::DMA || dst == EngineKind::DMA) continue;
                auto key = std::make_pair(input, dst);
                auto it = staged.find(key);
                if (it == staged.end()) {
                    TensorId staged_tensor = out.raw_add_tensor(g.tensor(input), false);
                    OpNode mc{next_id++, OpKind::MemCopy, {input}, staged_tensor, {}};
                    out.raw_add_node(std::move(mc));
                    it = staged.emplace(key, staged_tensor).first;
                }
                input = it->second;
            }
        }
        copy.id = next_id++;
        out.raw_add_node(std::move(copy));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Timeline metrics
// ---------------------------------------------------------------------------

inline double makespan(const Timeline& tl) {
    if (tl.intervals.empty()) return 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const Interval& iv : tl.intervals) {
        lo = std::min(lo, iv.start);
        hi = std::max(hi, iv.end);
    }
    return hi - lo;
}

inline double busy_time(const Timeline& tl, EngineKind engine) {
    double sum = 0.0;
    for (const Interval& iv : tl.intervals) {
        if (iv.engine == engine && !iv.epsilon_pad) sum += iv.duration();
    }
    return sum;
}

//! 1 - busy/makespan for the engine; defined as 1 when the engine has no ops.
inline double idle_fraction(const Timeline& tl, EngineKind engine) {
    bool any = std::any_of(tl.intervals.begin(), tl.intervals.end(),
                           [&](const Interval& iv) { return iv.engine == engine; });
    if (!any) return 1.0;
    double span = makespan(tl);
    if (span <= 0.0) return 0.0;
    return 1.0 - busy_time(tl, engine) / span;
}

//! Structural checks every timeline must satisfy: each node exactly once,
//! per-engine intervals non-overlapping, dependencies respected.
inline std::vector<std::string> validate_timeline(const Timeline& tl, const AnnotatedDag& dag) {
    std::vector<std::string> problems;
    std::vector<int> seen(dag.size(), 0);
    std::vector<double> end_of(dag.size(), 0.0);

    for (const Interval& iv : tl.intervals) {
        if (iv.node < 0 || static_cast<std::size_t>(iv.node) >= dag.size()) {
            problems.push_back("interval references unknown node " + std::to_string(iv.node));
            continue;
        }
        seen[static_cast<std::size_t>(iv.node)]++;
        end_of[static_cast<std::size_t>(iv.node)] = iv.end;
        if (!(iv.end > iv.start)) problems.push_back("interval for node " + std::to_string(iv.node) + " is empty");
        if (iv.engine != dag.engine[static_cast<std::size_t>(iv.node)]) {
            problems.push_back("node " + std::to_string(iv.node) + " on the wrong engine");
        }
    }
    for (std::size_t v = 0; v < dag.size(); ++v) {
        if (seen[v] != 1) problems.push_back("node " + std::to_string(v) + " appears " + std::to_string(seen[v]) + " times");
    }
    if (!problems.empty()) return problems;

    for (int lane = 0; lane < 3; ++lane) {
        std::vector<Interval> on_lane;
        for (const Interval& iv : tl.intervals) {
            if (static_cast<int>(iv.engine) == lane) on_lane.push_back(iv);
        }
        std::sort(on_lane.begin(), on_lane.end(), [](const Interval& a, const Interval& b) { return a.start < b.start; });
        for (std::size_t i = 1; i < on_lane.size(); ++i) {
            if (on_lane[i].start < on_lane[i - 1].end - 1e-15) {
                problems.push_back("overlap on " + engine_name(static_cast<EngineKind>(lane)) + " between nodes " +
                                   std::to_string(on_lane[i - 1].node) + " and " + std::to_string(on_lane[i].node));
            }
        }
    }

    for (const Interval& iv : tl.intervals) {
        for (NodeId p : dag.preds[static_cast<std::size_t>(iv.node)]) {
            double pred_end = end_of[static_cast<std::size_t>(p)];
            // epsilon padding may overhang a dependent's true start
            if (iv.start + kEpsilonInterval < pred_end - 1e-15) {
                problems.push_back("node " + std::to_string(iv.node) + " starts before predecessor " +
                                   std::to_string(p) + " ends");
            }
        }
    }
    return problems;
}

// ---------------------------------------------------------------------------
// Exhaustive oracle: minimum makespan over all topological orders with greedy
// earliest-start placement per order. Test-sized graphs only.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kBruteForceMaxNodes = 10;

namespace detail {

struct BruteForceState {
    const AnnotatedDag* dag;
    std::vector<std::vector<NodeId>> succs;
    std::vector<std::size_t> missing;
    std::vector<double> node_end;
    double lane_free[3] = {0.0, 0.0, 0.0};
    double best = std::numeric_limits<double>::infinity();

    void search(std::size_t placed, double span) {
        if (span >= best) return;  // placements only push times forward
        if (placed == dag->size()) {
            best = span;
            return;
        }
        for (std::size_t v = 0; v < dag->size(); ++v) {
            if (missing[v] != 0 || node_end[v] >= 0.0) continue;
            int lane = static_cast<int>(dag->engine[v]);
            double ready = 0.0;
            for (NodeId p : dag->preds[v]) ready = std::max(ready, node_end[static_cast<std::size_t>(p)]);
            double start = std::max(ready, lane_free[lane]);
            double end = start + std::max(dag->duration[v], kEpsilonInterval);

            double saved_free = lane_free[lane];
            lane_free[lane] = end;
            node_end[v] = end;
            for (NodeId s : succs[v]) missing[static_cast<std::size_t>(s)]--;

            search(placed + 1, std::max(span, end));

            for (NodeId s : succs[v]) missing[static_cast<std::size_t>(s)]++;
            node_end[v] = -1.0;
            lane_free[lane] = saved_free;
        }
    }
};

}  // namespace detail

inline double brute_force_optimal(const AnnotatedDag& dag) {
    if (dag.size() > kBruteForceMaxNodes) {
        raise(ErrorCode::TooLarge, "brute-force oracle is limited to " + std::to_string(kBruteForceMaxNodes) + " nodes");
    }
    if (dag.size() == 0) return 0.0;
    detail::BruteForceState st;
    st.dag = &dag;
    st.succs = dag.successor_lists();
    st.missing.resize(dag.size());
    for (std::size_t v = 0; v < dag.size(); ++v) st.missing[v] = dag.preds[v].size();
    st.node_end.assign(dag.size(), -1.0);
    st.search(0, 0.0);
    return st.best;
}

inline double brute_force_optimal(const Graph& g, const MappingTable& mapping, const CostParams& params) {
    return brute_force_optimal(annotate(g, mapping, params));
}

}  // namespace hetsim
