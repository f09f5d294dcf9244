#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hetsim/error.hpp"
#include "hetsim/tensor.hpp"

namespace hetsim {

using TensorId = std::int64_t;
using NodeId = std::int64_t;

enum class OpKind : std::uint8_t {
    MatMul,
    BatchMatMul,
    Transpose,
    Softmax,
    Exp,
    Log,
    Sqrt,
    Square,
    ElemwiseAdd,
    ElemwiseSub,
    ElemwiseMul,
    ElemwiseDiv,
    ScalarMul,
    ScalarAdd,
    Reduction,
    Activation,
    MemCopy,
    OnesLike,
};

inline constexpr OpKind kAllOpKinds[] = {
    OpKind::MatMul,      OpKind::BatchMatMul, OpKind::Transpose,   OpKind::Softmax,
    OpKind::Exp,         OpKind::Log,         OpKind::Sqrt,        OpKind::Square,
    OpKind::ElemwiseAdd, OpKind::ElemwiseSub, OpKind::ElemwiseMul, OpKind::ElemwiseDiv,
    OpKind::ScalarMul,   OpKind::ScalarAdd,   OpKind::Reduction,   OpKind::Activation,
    OpKind::MemCopy,     OpKind::OnesLike,
};

inline std::string op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::MatMul: return "MatMul";
        case OpKind::BatchMatMul: return "BatchMatMul";
        case OpKind::Transpose: return "Transpose";
        case OpKind::Softmax: return "Softmax";
        case OpKind::Exp: return "Exp";
        case OpKind::Log: return "Log";
        case OpKind::Sqrt: return "Sqrt";
        case OpKind::Square: return "Square";
        case OpKind::ElemwiseAdd: return "ElemwiseAdd";
        case OpKind::ElemwiseSub: return "ElemwiseSub";
        case OpKind::ElemwiseMul: return "ElemwiseMul";
        case OpKind::ElemwiseDiv: return "ElemwiseDiv";
        case OpKind::ScalarMul: return "ScalarMul";
        case OpKind::ScalarAdd: return "ScalarAdd";
        case OpKind::Reduction: return "Reduction";
        case OpKind::Activation: return "Activation";
        case OpKind::MemCopy: return "MemCopy";
        case OpKind::OnesLike: return "OnesLike";
    }
    return "Unknown";
}

inline OpKind op_kind_from_name(const std::string& s) {
    for (OpKind k : kAllOpKinds) {
        if (op_kind_name(k) == s) return k;
    }
    raise(ErrorCode::InvalidAttr, "unknown op kind '" + s + "'");
}

enum class ActivationKind : std::uint8_t { Relu, LeakyRelu, Gelu, Glu, EluPlusOne, Sigmoid };

inline std::string activation_name(ActivationKind a) {
    switch (a) {
        case ActivationKind::Relu: return "relu";
        case ActivationKind::LeakyRelu: return "leaky_relu";
        case ActivationKind::Gelu: return "gelu";
        case ActivationKind::Glu: return "glu";
        case ActivationKind::EluPlusOne: return "elu_plus_one";
        case ActivationKind::Sigmoid: return "sigmoid";
    }
    return "unknown";
}

inline ActivationKind activation_from_name(const std::string& s) {
    for (ActivationKind a : {ActivationKind::Relu, ActivationKind::LeakyRelu, ActivationKind::Gelu,
                             ActivationKind::Glu, ActivationKind::EluPlusOne, ActivationKind::Sigmoid}) {
        if (activation_name(a) == s) return a;
    }
    raise(ErrorCode::InvalidAttr, "unknown activation '" + s + "'");
}

// ---------------------------------------------------------------------------
// Node attributes. Scalar constants ride here rather than as tensors.
// ---------------------------------------------------------------------------

using AttrValue = std::variant<std::int64_t, double, std::string, std::vector<std::int64_t>>;
using AttrMap = std::map<std::string, AttrValue>;

inline std::optional<std::int64_t> attr_int(const AttrMap& attrs, const std::string& key) {
    auto it = attrs.find(key);
    if (it == attrs.end()) return std::nullopt;
    if (const auto* v = std::get_if<std::int64_t>(&it->second)) return *v;
    if (const auto* v = std::get_if<double>(&it->second)) return static_cast<std::int64_t>(*v);
    raise(ErrorCode::InvalidAttr, "attr '" + key + "' is not an integer");
}

inline std::optional<double> attr_double(const AttrMap& attrs, const std::string& key) {
    auto it = attrs.find(key);
    if (it == attrs.end()) return std::nullopt;
    if (const auto* v = std::get_if<double>(&it->second)) return *v;
    if (const auto* v = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*v);
    raise(ErrorCode::InvalidAttr, "attr '" + key + "' is not a number");
}

inline std::optional<std::string> attr_string(const AttrMap& attrs, const std::string& key) {
    auto it = attrs.find(key);
    if (it == attrs.end()) return std::nullopt;
    if (const auto* v = std::get_if<std::string>(&it->second)) return *v;
    raise(ErrorCode::InvalidAttr, "attr '" + key + "' is not a string");
}

inline std::optional<std::vector<std::int64_t>> attr_shape(const AttrMap& attrs, const std::string& key) {
    auto it = attrs.find(key);
    if (it == attrs.end()) return std::nullopt;
    if (const auto* v = std::get_if<std::vector<std::int64_t>>(&it->second)) return *v;
    raise(ErrorCode::InvalidAttr, "attr '" + key + "' is not a shape list");
}

inline ActivationKind activation_of(const AttrMap& attrs) {
    auto v = attr_string(attrs, "variant");
    if (!v) raise(ErrorCode::InvalidAttr, "Activation node requires a 'variant' attr");
    return activation_from_name(*v);
}

//! One operation in the DAG. `inputs` and `output` are tensor ids.
struct OpNode {
    NodeId id = 0;
    OpKind kind = OpKind::MemCopy;
    std::vector<TensorId> inputs;
    TensorId output = 0;
    AttrMap attrs;
};

// ---------------------------------------------------------------------------
// Shape inference. Deterministic and total on valid inputs; no broadcasting:
// elementwise binary ops require identical shapes. BatchMatMul accepts a
// rank-2 right operand shared across the batch (the Listing-1 feature-matrix
// pattern); otherwise leading batch dims must match exactly.
// ---------------------------------------------------------------------------

namespace detail {

inline void require_arity(OpKind kind, std::size_t got, std::size_t want) {
    if (got != want) {
        raise(ErrorCode::ArityError,
              op_kind_name(kind) + " expects " + std::to_string(want) + " inputs, got " + std::to_string(got));
    }
}

inline void require_same_dtype(OpKind kind, const TensorSpec& a, const TensorSpec& b) {
    if (a.dtype != b.dtype) {
        raise(ErrorCode::ShapeMismatch, op_kind_name(kind) + ": operand dtypes differ");
    }
}

}  // namespace detail

inline TensorSpec infer_shape(OpKind kind, std::span<const TensorSpec> in, const AttrMap& attrs) {
    using detail::require_arity;
    using detail::require_same_dtype;

    switch (kind) {
        case OpKind::MatMul: {
            require_arity(kind, in.size(), 2);
            require_same_dtype(kind, in[0], in[1]);
            if (in[0].rank() != 2 || in[1].rank() != 2) {
                raise(ErrorCode::ShapeMismatch, "MatMul operands must be rank-2");
            }
            if (in[0].shape[1] != in[1].shape[0]) {
                raise(ErrorCode::ShapeMismatch, "MatMul inner dims differ: " + in[0].to_string() + " vs " +
                                                    in[1].to_string());
            }
            return {{in[0].shape[0], in[1].shape[1]}, in[0].dtype};
        }
        case OpKind::BatchMatMul: {
            require_arity(kind, in.size(), 2);
            require_same_dtype(kind, in[0], in[1]);
            if (in[0].rank() < 3) raise(ErrorCode::ShapeMismatch, "BatchMatMul left operand must have batch dims");
            const auto& a = in[0].shape;
            const auto& b = in[1].shape;
            std::int64_t m = a[a.size() - 2], k = a[a.size() - 1];
            std::int64_t kb, n;
            std::vector<std::int64_t> out(a.begin(), a.end() - 2);
            if (in[1].rank() == 2) {
                // Shared right operand, applied per batch.
                kb = b[0];
                n = b[1];
            } else {
                if (in[1].rank() != in[0].rank() ||
                    !std::equal(a.begin(), a.end() - 2, b.begin(), b.end() - 2)) {
                    raise(ErrorCode::ShapeMismatch, "BatchMatMul batch dims differ");
                }
                kb = b[b.size() - 2];
                n = b[b.size() - 1];
            }
            if (k != kb) raise(ErrorCode::ShapeMismatch, "BatchMatMul inner dims differ");
            out.push_back(m);
            out.push_back(n);
            return {std::move(out), in[0].dtype};
        }
        case OpKind::Transpose: {
            require_arity(kind, in.size(), 1);
            if (in[0].rank() < 2) raise(ErrorCode::ShapeMismatch, "Transpose requires rank >= 2");
            auto s = in[0].shape;
            std::swap(s[s.size() - 1], s[s.size() - 2]);
            return {std::move(s), in[0].dtype};
        }
        case OpKind::Softmax:
        case OpKind::Exp:
        case OpKind::Log:
        case OpKind::Sqrt:
        case OpKind::Square:
        case OpKind::OnesLike: {
            require_arity(kind, in.size(), 1);
            return in[0];
        }
        case OpKind::ScalarMul:
        case OpKind::ScalarAdd: {
            require_arity(kind, in.size(), 1);
            if (!attr_double(attrs, "scalar")) {
                raise(ErrorCode::InvalidAttr, op_kind_name(kind) + " requires a 'scalar' attr");
            }
            return in[0];
        }
        case OpKind::ElemwiseAdd:
        case OpKind::ElemwiseSub:
        case OpKind::ElemwiseMul:
        case OpKind::ElemwiseDiv: {
            require_arity(kind, in.size(), 2);
            require_same_dtype(kind, in[0], in[1]);
            if (!(in[0].shape == in[1].shape)) {
                raise(ErrorCode::ShapeMismatch, op_kind_name(kind) + ": shapes must be identical (no broadcasting)");
            }
            return in[0];
        }
        case OpKind::Reduction: {
            require_arity(kind, in.size(), 1);
            auto axis = attr_int(attrs, "axis");
            if (!axis) raise(ErrorCode::InvalidAttr, "Reduction requires an 'axis' attr");
            if (*axis < 0 || *axis >= in[0].rank()) {
                raise(ErrorCode::InvalidAttr, "Reduction axis out of range");
            }
            auto s = in[0].shape;
            s[static_cast<std::size_t>(*axis)] = 1;  // keep-dims
            return {std::move(s), in[0].dtype};
        }
        case OpKind::Activation: {
            require_arity(kind, in.size(), 1);
            ActivationKind a = activation_of(attrs);
            if (a == ActivationKind::Glu) {
                // The gate consumes half the width: out last dim = in/2.
                if (in[0].inner_dim() % 2 != 0) {
                    raise(ErrorCode::ShapeMismatch, "glu requires an even innermost dim");
                }
                auto s = in[0].shape;
                s.back() /= 2;
                return {std::move(s), in[0].dtype};
            }
            return in[0];
        }
        case OpKind::MemCopy: {
            require_arity(kind, in.size(), 1);
            if (auto out_shape = attr_shape(attrs, "out_shape")) {
                TensorSpec out{*out_shape, in[0].dtype};
                out.check_valid();
                if (out.byte_size() > in[0].byte_size()) {
                    raise(ErrorCode::ShapeMismatch, "MemCopy out_shape larger than source tensor");
                }
                return out;
            }
            return in[0];
        }
    }
    raise(ErrorCode::InternalError, "unhandled op kind");
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

struct Violation {
    ErrorCode code;
    NodeId node = -1;
    std::string message;
};

//! A validated tensor compute DAG. Node order is program order and must be a
//! topological order. Construction is single-owner; a finalized graph is
//! immutable and safe to share across concurrent simulation runs.
class Graph {
public:
    std::string tag;  // workload label carried into reports

    //! Register an entry (input) tensor and return its id.
    TensorId add_tensor(const TensorSpec& spec) {
        spec.check_valid();
        return raw_add_tensor(spec, /*is_input=*/true);
    }

    //! Append an op; the output tensor is created via infer_shape.
    NodeId add_op(OpKind kind, const std::vector<TensorId>& inputs, AttrMap attrs = {}) {
        std::vector<TensorSpec> in_specs;
        in_specs.reserve(inputs.size());
        for (TensorId t : inputs) {
            if (t < 0 || t >= static_cast<TensorId>(tensors_.size())) {
                raise(ErrorCode::UnknownTensor, "tensor id " + std::to_string(t));
            }
            in_specs.push_back(tensors_[static_cast<std::size_t>(t)]);
        }
        TensorSpec out = infer_shape(kind, in_specs, attrs);
        TensorId out_id = raw_add_tensor(out, /*is_input=*/false);
        OpNode node{static_cast<NodeId>(nodes_.size()), kind, inputs, out_id, std::move(attrs)};
        producer_[static_cast<std::size_t>(out_id)] = node.id;
        nodes_.push_back(std::move(node));
        return nodes_.back().id;
    }

    // Low-level mutators for deserialization and graph rewrites; callers are
    // expected to run validate() afterwards.
    TensorId raw_add_tensor(const TensorSpec& spec, bool is_input) {
        tensors_.push_back(spec);
        is_input_.push_back(is_input);
        producer_.push_back(-1);
        return static_cast<TensorId>(tensors_.size() - 1);
    }

    void raw_add_node(OpNode node) {
        if (node.output >= 0 && node.output < static_cast<TensorId>(producer_.size())) {
            producer_[static_cast<std::size_t>(node.output)] = node.id;
            is_input_[static_cast<std::size_t>(node.output)] = false;
        }
        nodes_.push_back(std::move(node));
    }

    const TensorSpec& tensor(TensorId id) const { return tensors_.at(static_cast<std::size_t>(id)); }
    bool is_input(TensorId id) const { return is_input_.at(static_cast<std::size_t>(id)); }
    //! Producing node id, or -1 for entry tensors.
    NodeId producer(TensorId id) const { return producer_.at(static_cast<std::size_t>(id)); }

    const std::vector<OpNode>& nodes() const { return nodes_; }
    const OpNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    std::size_t num_tensors() const { return tensors_.size(); }
    std::size_t num_nodes() const { return nodes_.size(); }

    //! Distinct predecessor node ids per node (one edge per producer).
    std::vector<std::vector<NodeId>> predecessor_lists() const {
        std::vector<std::vector<NodeId>> preds(nodes_.size());
        for (const OpNode& n : nodes_) {
            auto& p = preds[static_cast<std::size_t>(n.id)];
            for (TensorId t : n.inputs) {
                NodeId src = producer(t);
                if (src >= 0) p.push_back(src);
            }
            std::sort(p.begin(), p.end());
            p.erase(std::unique(p.begin(), p.end()), p.end());
        }
        return preds;
    }

private:
    std::vector<TensorSpec> tensors_;
    std::vector<bool> is_input_;
    std::vector<NodeId> producer_;
    std::vector<OpNode> nodes_;
};

//! Collect all structural violations; a graph is valid iff the list is empty.
inline std::vector<Violation> validate(const Graph& g) {
    std::vector<Violation> out;
    std::vector<int> producer_count(g.num_tensors(), 0);

    for (const OpNode& n : g.nodes()) {
        if (n.output < 0 || n.output >= static_cast<TensorId>(g.num_tensors())) {
            out.push_back({ErrorCode::UnknownTensor, n.id, "output tensor id out of range"});
            continue;
        }
        producer_count[static_cast<std::size_t>(n.output)]++;

        bool inputs_ok = true;
        std::vector<TensorSpec> in_specs;
        for (TensorId t : n.inputs) {
            if (t < 0 || t >= static_cast<TensorId>(g.num_tensors())) {
                out.push_back({ErrorCode::UnknownTensor, n.id, "input tensor id out of range"});
                inputs_ok = false;
                continue;
            }
            if (t == n.output) {
                out.push_back({ErrorCode::CycleDetected, n.id, "node consumes its own output"});
                inputs_ok = false;
                continue;
            }
            NodeId src = g.producer(t);
            if (src >= n.id) {
                // Produced by this node or a later one: program order is not topological.
                out.push_back({ErrorCode::CycleDetected, n.id,
                               "input tensor " + std::to_string(t) + " produced at or after node " +
                                   std::to_string(n.id)});
                inputs_ok = false;
                continue;
            }
            if (src < 0 && !g.is_input(t)) {
                out.push_back({ErrorCode::UnknownTensor, n.id, "input tensor has no producer and is not a graph input"});
                inputs_ok = false;
                continue;
            }
            in_specs.push_back(g.tensor(t));
        }
        if (!inputs_ok) continue;

        try {
            TensorSpec expect = infer_shape(n.kind, in_specs, n.attrs);
            if (!(expect == g.tensor(n.output))) {
                out.push_back({ErrorCode::ShapeMismatch, n.id,
                               "recorded output " + g.tensor(n.output).to_string() + " != inferred " +
                                   expect.to_string()});
            }
        } catch (const Error& e) {
            out.push_back({e.code(), n.id, e.what()});
        }
    }

    for (std::size_t t = 0; t < g.num_tensors(); ++t) {
        if (g.is_input(static_cast<TensorId>(t))) continue;
        if (producer_count[t] == 0) {
            out.push_back({ErrorCode::UnknownTensor, -1,
                           "tensor " + std::to_string(t) + " is neither an input nor produced by a node"});
        } else if (producer_count[t] > 1) {
            out.push_back({ErrorCode::ShapeMismatch, -1,
                           "tensor " + std::to_string(t) + " produced by more than one node"});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON serialization:
//   {"tensors":[{id,shape,dtype}],"nodes":[{id,kind,attrs,inputs,output}]}
// ---------------------------------------------------------------------------

inline nlohmann::json attrs_to_json(const AttrMap& attrs) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, value] : attrs) {
        std::visit([&](const auto& v) { j[key] = v; }, value);
    }
    return j;
}

inline AttrMap attrs_from_json(const nlohmann::json& j) {
    AttrMap attrs;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& v = it.value();
        if (v.is_number_integer()) {
            attrs[it.key()] = v.get<std::int64_t>();
        } else if (v.is_number_float()) {
            attrs[it.key()] = v.get<double>();
        } else if (v.is_string()) {
            attrs[it.key()] = v.get<std::string>();
        } else if (v.is_array()) {
            attrs[it.key()] = v.get<std::vector<std::int64_t>>();
        } else {
            raise(ErrorCode::InvalidAttr, "unsupported attr value for '" + it.key() + "'");
        }
    }
    return attrs;
}

inline nlohmann::json graph_to_json(const Graph& g) {
    nlohmann::json tensors = nlohmann::json::array();
    for (std::size_t i = 0; i < g.num_tensors(); ++i) {
        const TensorSpec& t = g.tensor(static_cast<TensorId>(i));
        tensors.push_back({{"id", i}, {"shape", t.shape}, {"dtype", dtype_name(t.dtype)}});
    }
    nlohmann::json nodes = nlohmann::json::array();
    for (const OpNode& n : g.nodes()) {
        nodes.push_back({{"id", n.id},
                         {"kind", op_kind_name(n.kind)},
                         {"attrs", attrs_to_json(n.attrs)},
                         {"inputs", n.inputs},
                         {"output", n.output}});
    }
    return {{"tensors", tensors}, {"nodes", nodes}};
}

inline Graph graph_from_json(const nlohmann::json& j) {
    Graph g;
    if (!j.contains("tensors") || !j.contains("nodes")) {
        raise(ErrorCode::InvalidAttr, "graph document requires 'tensors' and 'nodes'");
    }
    std::size_t expect = 0;
    for (const auto& t : j.at("tensors")) {
        if (t.at("id").get<std::size_t>() != expect++) {
            raise(ErrorCode::InvalidAttr, "tensor ids must be dense and ordered");
        }
        g.raw_add_tensor({t.at("shape").get<std::vector<std::int64_t>>(), dtype_from_name(t.at("dtype"))},
                         /*is_input=*/true);
    }
    NodeId expect_node = 0;
    for (const auto& n : j.at("nodes")) {
        OpNode node;
        node.id = n.at("id").get<NodeId>();
        if (node.id != expect_node++) raise(ErrorCode::InvalidAttr, "node ids must be dense and ordered");
        node.kind = op_kind_from_name(n.at("kind"));
        node.inputs = n.at("inputs").get<std::vector<TensorId>>();
        node.output = n.at("output").get<TensorId>();
        node.attrs = attrs_from_json(n.at("attrs"));
        if (node.output < 0 || node.output >= static_cast<TensorId>(g.num_tensors())) {
            raise(ErrorCode::UnknownTensor, "node output id out of range");
        }
        g.raw_add_node(std::move(node));
    }
    return g;
}

}  // namespace hetsim
