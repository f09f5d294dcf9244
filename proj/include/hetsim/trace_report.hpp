#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetsim/cost_model.hpp"
#include "hetsim/scheduler.hpp"

namespace hetsim {

// ---------------------------------------------------------------------------
// Chrome trace event format. Timestamps are integer microseconds (the format
// convention); the exact start/end in seconds ride in "args" so round-trips
// stay lossless.
// ---------------------------------------------------------------------------

inline nlohmann::json to_chrome_trace(const Timeline& tl, const Graph& g) {
    nlohmann::json events = nlohmann::json::array();
    events.push_back({{"ph", "M"}, {"pid", 0}, {"tid", 0}, {"name", "process_name"}, {"args", {{"name", g.tag.empty() ? "hetsim" : g.tag}}}});
    for (EngineKind e : {EngineKind::MME, EngineKind::TPC, EngineKind::DMA}) {
        events.push_back({{"ph", "M"},
                          {"pid", 0},
                          {"tid", static_cast<int>(e)},
                          {"name", "thread_name"},
                          {"args", {{"name", engine_name(e)}}}});
    }

    for (const Interval& iv : tl.intervals) {
        const OpNode& node = g.node(iv.node);
        std::int64_t ts = static_cast<std::int64_t>(std::floor(iv.start * 1e6));
        std::int64_t te = static_cast<std::int64_t>(std::floor(iv.end * 1e6));
        events.push_back({{"name", op_kind_name(node.kind)},
                          {"ph", "X"},
                          {"ts", ts},
                          {"dur", te - ts},
                          {"pid", 0},
                          {"tid", static_cast<int>(iv.engine)},
                          {"args",
                           {{"node", iv.node},
                            {"flops", op_flops(node, g)},
                            {"bytes", op_bytes(node, g)},
                            {"start_s", iv.start},
                            {"end_s", iv.end}}}});
    }
    return {{"traceEvents", events}};
}

//! Reconstruct intervals from an emitted trace document (exact, via args).
inline Timeline trace_to_timeline(const nlohmann::json& trace) {
    Timeline tl;
    for (const auto& ev : trace.at("traceEvents")) {
        if (ev.at("ph") != "X") continue;
        Interval iv;
        iv.node = ev.at("args").at("node").get<NodeId>();
        iv.engine = static_cast<EngineKind>(ev.at("tid").get<int>());
        iv.start = ev.at("args").at("start_s").get<double>();
        iv.end = ev.at("args").at("end_s").get<double>();
        iv.epsilon_pad = (iv.end - iv.start) <= kEpsilonInterval * 1.5;
        tl.intervals.push_back(iv);
    }
    return tl;
}

// ---------------------------------------------------------------------------
// Analysis report
// ---------------------------------------------------------------------------

inline std::string op_class_name(OpKind k) {
    switch (k) {
        case OpKind::MatMul:
        case OpKind::BatchMatMul: return "matmul";
        case OpKind::Softmax: return "softmax";
        case OpKind::Exp: return "exp";
        case OpKind::Reduction: return "reduction";
        case OpKind::Activation: return "activation";
        case OpKind::MemCopy:
        case OpKind::Transpose: return "transfer";
        default: return "elementwise";
    }
}

struct Gap {
    double start_ms;
    double end_ms;
};

struct EngineReport {
    double busy_ms = 0.0;
    double idle_fraction = 1.0;
    double total_gap_ms = 0.0;          // makespan - busy, exact
    std::vector<Gap> gaps;              // gaps shorter than 0.1 us are not listed
    std::map<std::string, double> class_share;  // fraction of this engine's busy time
};

struct Report {
    double makespan_ms = 0.0;
    std::map<std::string, EngineReport> engines;
    std::map<std::string, std::string> meta;

    nlohmann::json to_json() const {
        nlohmann::json je = nlohmann::json::object();
        for (const auto& [name, er] : engines) {
            nlohmann::json gaps = nlohmann::json::array();
            for (const Gap& gp : er.gaps) gaps.push_back({{"start_ms", gp.start_ms}, {"end_ms", gp.end_ms}});
            je[name] = {{"busy_ms", er.busy_ms},
                        {"idle_fraction", er.idle_fraction},
                        {"total_gap_ms", er.total_gap_ms},
                        {"gaps", gaps},
                        {"class_share", er.class_share}};
        }
        nlohmann::json jm = nlohmann::json::object();
        for (const auto& [k, v] : meta) jm[k] = v;
        return {{"makespan_ms", makespan_ms}, {"engines", je}, {"meta", jm}};
    }

    std::string to_text() const {
        std::ostringstream os;
        os << std::fixed << std::setprecision(2);
        os << "makespan: " << makespan_ms << " ms\n";
        for (const auto& [name, er] : engines) {
            os << "  " << name << ": busy " << std::setw(10) << er.busy_ms << " ms  idle " << std::setprecision(3)
               << er.idle_fraction << std::setprecision(2) << "  gaps " << er.gaps.size() << "\n";
            for (const auto& [cls, share] : er.class_share) {
                os << "      " << std::setw(11) << cls << " " << std::setprecision(3) << share << std::setprecision(2)
                   << "\n";
            }
        }
        return os.str();
    }
};

inline constexpr double kGapMergeUs = 0.1;  // drop epsilon-interval noise from gap lists

inline Report build_report(const Timeline& tl, const Graph& g) {
    Report rep;
    double span = makespan(tl);
    rep.makespan_ms = span * 1e3;
    rep.meta["workload"] = g.tag;
    rep.meta["mode"] = schedule_mode_name(tl.mode);
    rep.meta["graph"] = "forward";

    double t0 = 0.0;
    if (!tl.intervals.empty()) {
        t0 = std::numeric_limits<double>::infinity();
        for (const Interval& iv : tl.intervals) t0 = std::min(t0, iv.start);
    }

    for (EngineKind e : {EngineKind::MME, EngineKind::TPC, EngineKind::DMA}) {
        EngineReport er;
        std::vector<Interval> lane;
        for (const Interval& iv : tl.intervals) {
            if (iv.engine == e) lane.push_back(iv);
        }
        std::sort(lane.begin(), lane.end(), [](const Interval& a, const Interval& b) { return a.start < b.start; });

        double busy_s = 0.0;
        std::map<std::string, double> class_time;
        for (const Interval& iv : lane) {
            if (iv.epsilon_pad) continue;
            busy_s += iv.duration();
            class_time[op_class_name(g.node(iv.node).kind)] += iv.duration();
        }
        er.busy_ms = busy_s * 1e3;
        er.idle_fraction = idle_fraction(tl, e);
        er.total_gap_ms = rep.makespan_ms - er.busy_ms;
        if (busy_s > 0.0) {
            for (const auto& [cls, t] : class_time) er.class_share[cls] = t / busy_s;
        }

        // Gap list over [t0, t0+span]; sub-threshold gaps are absorbed.
        double cursor = t0;
        auto push_gap = [&](double from, double to) {
            if ((to - from) * 1e6 >= kGapMergeUs) er.gaps.push_back({(from - t0) * 1e3, (to - t0) * 1e3});
        };
        for (const Interval& iv : lane) {
            if (iv.start > cursor) push_gap(cursor, iv.start);
            cursor = std::max(cursor, iv.end);
        }
        if (!tl.intervals.empty() && cursor < t0 + span) push_gap(cursor, t0 + span);

        rep.engines[engine_name(e)] = std::move(er);
    }
    return rep;
}

//! Least-squares slope of log(makespan) against log(N).
inline double fit_scaling_exponent(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) raise(ErrorCode::InsufficientRows, "scaling fit needs at least 3 points");
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            if (points[i].first == points[j].first) raise(ErrorCode::InsufficientRows, "duplicate N in scaling fit");
        }
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [n, t] : points) {
        double x = std::log(n), y = std::log(t);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double m = static_cast<double>(points.size());
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace hetsim
