#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "hetsim/graph.hpp"
#include "hetsim/mapping.hpp"

namespace hetsim {

// ---------------------------------------------------------------------------
// EfficiencyCurve: achieved fraction of peak throughput as a function of the
// op's characteristic size, piecewise-linear between calibration knots and
// clamped at both ends.
// ---------------------------------------------------------------------------

struct EfficiencyKnot {
    std::int64_t size;
    double efficiency;  // fraction of peak in (0, 1]
};

class EfficiencyCurve {
public:
    EfficiencyCurve() : knots_{{1, 1.0}} {}

    explicit EfficiencyCurve(std::vector<EfficiencyKnot> knots) : knots_(std::move(knots)) {
        if (knots_.empty()) raise(ErrorCode::InvalidAttr, "efficiency curve needs at least one knot");
        for (std::size_t i = 0; i < knots_.size(); ++i) {
            if (knots_[i].efficiency <= 0.0 || knots_[i].efficiency > 1.0) {
                raise(ErrorCode::InvalidAttr, "efficiency must be in (0,1]");
            }
            if (i > 0 && knots_[i].size <= knots_[i - 1].size) {
                raise(ErrorCode::InvalidAttr, "knot sizes must be strictly increasing");
            }
        }
    }

    double eval(std::int64_t size) const {
        if (size <= knots_.front().size) return knots_.front().efficiency;
        if (size >= knots_.back().size) return knots_.back().efficiency;
        auto it = std::upper_bound(knots_.begin(), knots_.end(), size,
                                   [](std::int64_t s, const EfficiencyKnot& k) { return s < k.size; });
        const EfficiencyKnot& hi = *it;
        const EfficiencyKnot& lo = *(it - 1);
        double t = static_cast<double>(size - lo.size) / static_cast<double>(hi.size - lo.size);
        return lo.efficiency + t * (hi.efficiency - lo.efficiency);
    }

    const std::vector<EfficiencyKnot>& knots() const { return knots_; }

private:
    std::vector<EfficiencyKnot> knots_;
};

// ---------------------------------------------------------------------------
// CostParams
// ---------------------------------------------------------------------------

struct ClassMultipliers {
    double exp_mul = 1.0;
    double reduction_mul = 1.0;
    double div_mul = 1.0;
    double gelu_mul = 1.0;
};

//! Calibrated engine throughputs, per-op-class multipliers, overheads and
//! bandwidths. Durations are float64 seconds internally; reports convert to
//! milliseconds.
struct CostParams {
    double mme_peak_tflops = 14.59;
    double tpc_peak_tflops = 2.19;  // aggregate over the 8-core cluster
    EfficiencyCurve mme_eff;
    EfficiencyCurve tpc_eff;
    ClassMultipliers class_multipliers;
    double dma_bandwidth = 1.0e12;                      // bytes/s
    double mem_bandwidth_mme = 1.0e12;                  // bytes/s
    double mem_bandwidth_tpc = 1.0e12;                  // bytes/s
    double launch_overhead_mme = 1.0e-5;                // s
    double launch_overhead_tpc = 1.0e-5;                // s
    double launch_overhead_dma = 1.0e-5;                // s
    double glu_compile_penalty = 3.0e-3;                // s, charged once per GLU node
    nlohmann::json tuned_on = nlohmann::json::object(); // metadata written by the tuner

    double peak_tflops(EngineKind e) const { return e == EngineKind::MME ? mme_peak_tflops : tpc_peak_tflops; }
    const EfficiencyCurve& eff(EngineKind e) const { return e == EngineKind::MME ? mme_eff : tpc_eff; }
    double mem_bandwidth(EngineKind e) const { return e == EngineKind::MME ? mem_bandwidth_mme : mem_bandwidth_tpc; }
    double launch_overhead(EngineKind e) const {
        switch (e) {
            case EngineKind::MME: return launch_overhead_mme;
            case EngineKind::TPC: return launch_overhead_tpc;
            case EngineKind::DMA: return launch_overhead_dma;
        }
        return 0.0;
    }
};

struct OpCost {
    std::int64_t flops = 0;
    std::int64_t bytes_moved = 0;
    double compute_time = 0.0;  // s
    double memory_time = 0.0;   // s
    double overhead = 0.0;      // s
    double duration = 0.0;      // max(compute, memory) + overhead
    EngineKind engine = EngineKind::TPC;
};

// ---------------------------------------------------------------------------
// Analytic work per op
// ---------------------------------------------------------------------------

namespace detail {

inline std::int64_t matmul_mkn_flops(const TensorSpec& a, const TensorSpec& b) {
    // 2*B*M*K*N; B is the product of the left operand's batch dims.
    const auto& as = a.shape;
    std::int64_t batch = 1;
    for (std::size_t i = 0; i + 2 < as.size(); ++i) batch *= as[i];
    std::int64_t m = as[as.size() - 2];
    std::int64_t k = as[as.size() - 1];
    std::int64_t n = b.shape.back();
    return 2 * batch * m * k * n;
}

inline double activation_flop_factor(ActivationKind a) {
    switch (a) {
        case ActivationKind::Relu: return 1.0;
        case ActivationKind::LeakyRelu: return 2.0;
        case ActivationKind::EluPlusOne: return 3.0;
        case ActivationKind::Sigmoid: return 4.0;
        case ActivationKind::Gelu: return 8.0;
        case ActivationKind::Glu: return 2.5;  // sigmoid + mul over half the elements
    }
    return 1.0;
}

}  // namespace detail

inline std::int64_t op_flops(const OpNode& node, const Graph& g) {
    auto in0 = [&]() -> const TensorSpec& { return g.tensor(node.inputs.at(0)); };
    switch (node.kind) {
        case OpKind::MatMul:
        case OpKind::BatchMatMul:
            return detail::matmul_mkn_flops(in0(), g.tensor(node.inputs.at(1)));
        case OpKind::Softmax: {
            std::int64_t len = in0().inner_dim();
            std::int64_t rows = in0().element_count() / len;
            return rows * (3 * len - 1);  // L exp + (L-1) add + L div per row
        }
        case OpKind::Reduction: {
            std::int64_t axis = *attr_int(node.attrs, "axis");
            std::int64_t len = in0().shape[static_cast<std::size_t>(axis)];
            std::int64_t rows = in0().element_count() / len;
            return rows * (len - 1);
        }
        case OpKind::Exp:
        case OpKind::Log:
        case OpKind::Sqrt:
        case OpKind::Square:
        case OpKind::ScalarMul:
        case OpKind::ScalarAdd:
            return in0().element_count();
        case OpKind::ElemwiseAdd:
        case OpKind::ElemwiseSub:
        case OpKind::ElemwiseMul:
        case OpKind::ElemwiseDiv:
            return g.tensor(node.output).element_count();
        case OpKind::Activation: {
            double factor = detail::activation_flop_factor(activation_of(node.attrs));
            return static_cast<std::int64_t>(static_cast<double>(in0().element_count()) * factor);
        }
        case OpKind::Transpose:
        case OpKind::MemCopy:
        case OpKind::OnesLike:
            return 0;
    }
    return 0;
}

inline std::int64_t op_bytes(const OpNode& node, const Graph& g) {
    if (node.kind == OpKind::MemCopy) {
        return 2 * g.tensor(node.output).byte_size();  // read + write of the copied tensor
    }
    std::int64_t total = g.tensor(node.output).byte_size();
    for (TensorId t : node.inputs) total += g.tensor(t).byte_size();
    return total;
}

//! Index into the efficiency curve: min(M,K,N) for matrix products, the
//! innermost dimension length otherwise.
inline std::int64_t characteristic_size(const OpNode& node, const Graph& g) {
    if (node.kind == OpKind::MatMul || node.kind == OpKind::BatchMatMul) {
        const TensorSpec& a = g.tensor(node.inputs.at(0));
        const TensorSpec& b = g.tensor(node.inputs.at(1));
        std::int64_t m = a.shape[a.shape.size() - 2];
        std::int64_t k = a.shape.back();
        std::int64_t n = b.shape.back();
        return std::min({m, k, n});
    }
    return g.tensor(node.inputs.at(0)).inner_dim();
}

//! Effective cost multiplier for the op's class. The fused softmax kernel
//! combines an exponential pass, a row reduction and a normalization divide,
//! so its multiplier stacks the three penalties (neutral at the defaults).
inline double class_multiplier(const OpNode& node, const ClassMultipliers& m) {
    switch (node.kind) {
        case OpKind::Exp: return m.exp_mul;
        case OpKind::Reduction: return m.reduction_mul;
        case OpKind::ElemwiseDiv: return m.div_mul;
        case OpKind::Softmax: return m.exp_mul + m.reduction_mul + m.div_mul - 2.0;
        case OpKind::Activation:
            return activation_of(node.attrs) == ActivationKind::Gelu ? m.gelu_mul : 1.0;
        default: return 1.0;
    }
}

//! Roofline-style duration: max(compute, memory) + launch overhead.
inline OpCost op_cost(const OpNode& node, const Graph& g, EngineKind engine, const CostParams& params) {
    OpCost c;
    c.engine = engine;
    c.flops = op_flops(node, g);
    c.bytes_moved = op_bytes(node, g);

    if (engine == EngineKind::DMA) {
        if (node.kind == OpKind::MatMul || node.kind == OpKind::BatchMatMul) {
            raise(ErrorCode::UnsupportedPlacement, "matrix products cannot run on the DMA engine");
        }
        c.compute_time = 0.0;
        c.memory_time = static_cast<double>(c.bytes_moved) / params.dma_bandwidth;
    } else {
        if (c.flops > 0) {
            double eff = params.eff(engine).eval(characteristic_size(node, g));
            double rate = params.peak_tflops(engine) * 1e12 * eff;
            c.compute_time = static_cast<double>(c.flops) * class_multiplier(node, params.class_multipliers) / rate;
        }
        c.memory_time = static_cast<double>(c.bytes_moved) / params.mem_bandwidth(engine);
    }

    c.overhead = params.launch_overhead(engine);
    if (node.kind == OpKind::Activation && activation_of(node.attrs) == ActivationKind::Glu) {
        c.overhead += params.glu_compile_penalty;
    }
    c.duration = std::max(c.compute_time, c.memory_time) + c.overhead;
    return c;
}

// ---------------------------------------------------------------------------
// Params file (JSON), field names fixed by the CLI contract.
// ---------------------------------------------------------------------------

inline nlohmann::json curve_to_json(const EfficiencyCurve& c) {
    nlohmann::json knots = nlohmann::json::array();
    for (const auto& k : c.knots()) knots.push_back({{"size", k.size}, {"efficiency", k.efficiency}});
    return {{"knots", knots}};
}

inline EfficiencyCurve curve_from_json(const nlohmann::json& j) {
    std::vector<EfficiencyKnot> knots;
    for (const auto& k : j.at("knots")) {
        knots.push_back({k.at("size").get<std::int64_t>(), k.at("efficiency").get<double>()});
    }
    return EfficiencyCurve(std::move(knots));
}

inline nlohmann::json params_to_json(const CostParams& p) {
    nlohmann::json j = {
        {"mme_peak_tflops", p.mme_peak_tflops},
        {"tpc_peak_tflops", p.tpc_peak_tflops},
        {"mme_eff", curve_to_json(p.mme_eff)},
        {"tpc_eff", curve_to_json(p.tpc_eff)},
        {"class_multipliers",
         {{"exp_mul", p.class_multipliers.exp_mul},
          {"reduction_mul", p.class_multipliers.reduction_mul},
          {"div_mul", p.class_multipliers.div_mul},
          {"gelu_mul", p.class_multipliers.gelu_mul}}},
        {"dma_bandwidth", p.dma_bandwidth},
        {"mem_bandwidth", {{"mme", p.mem_bandwidth_mme}, {"tpc", p.mem_bandwidth_tpc}}},
        {"launch_overhead",
         {{"mme", p.launch_overhead_mme}, {"tpc", p.launch_overhead_tpc}, {"dma", p.launch_overhead_dma}}},
        {"glu_compile_penalty", p.glu_compile_penalty},
    };
    if (!p.tuned_on.empty()) j["tuned_on"] = p.tuned_on;
    return j;
}

inline CostParams params_from_json(const nlohmann::json& j) {
    static const char* known[] = {"mme_peak_tflops", "tpc_peak_tflops", "mme_eff",          "tpc_eff",
                                  "class_multipliers", "dma_bandwidth", "mem_bandwidth",    "launch_overhead",
                                  "glu_compile_penalty", "tuned_on"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return it.key() == k; }) == std::end(known)) {
            raise(ErrorCode::ConfigError, "unknown params field '" + it.key() + "'");
        }
    }
    CostParams p;
    p.mme_peak_tflops = j.at("mme_peak_tflops").get<double>();
    p.tpc_peak_tflops = j.at("tpc_peak_tflops").get<double>();
    p.mme_eff = curve_from_json(j.at("mme_eff"));
    p.tpc_eff = curve_from_json(j.at("tpc_eff"));
    const auto& cm = j.at("class_multipliers");
    p.class_multipliers = {cm.at("exp_mul").get<double>(), cm.at("reduction_mul").get<double>(),
                           cm.at("div_mul").get<double>(), cm.at("gelu_mul").get<double>()};
    p.dma_bandwidth = j.at("dma_bandwidth").get<double>();
    p.mem_bandwidth_mme = j.at("mem_bandwidth").at("mme").get<double>();
    p.mem_bandwidth_tpc = j.at("mem_bandwidth").at("tpc").get<double>();
    p.launch_overhead_mme = j.at("launch_overhead").at("mme").get<double>();
    p.launch_overhead_tpc = j.at("launch_overhead").at("tpc").get<double>();
    p.launch_overhead_dma = j.at("launch_overhead").at("dma").get<double>();
    p.glu_compile_penalty = j.at("glu_compile_penalty").get<double>();
    if (j.contains("tuned_on")) p.tuned_on = j.at("tuned_on");

    for (double v : {p.mme_peak_tflops, p.tpc_peak_tflops, p.dma_bandwidth, p.mem_bandwidth_mme,
                     p.mem_bandwidth_tpc}) {
        if (v <= 0.0) raise(ErrorCode::ConfigError, "throughputs and bandwidths must be positive");
    }
    for (double v : {p.class_multipliers.exp_mul, p.class_multipliers.reduction_mul, p.class_multipliers.div_mul,
                     p.class_multipliers.gelu_mul}) {
        if (v < 1.0) raise(ErrorCode::ConfigError, "class multipliers must be >= 1");
    }
    return p;
}

}  // namespace hetsim
