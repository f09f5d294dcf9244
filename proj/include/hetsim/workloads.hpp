#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hetsim/graph.hpp"

namespace hetsim {

enum class AttnVariant : std::uint8_t { Softmax, LinearElu, Favor };

inline std::string attn_variant_name(AttnVariant v) {
    switch (v) {
        case AttnVariant::Softmax: return "softmax";
        case AttnVariant::LinearElu: return "linear_elu";
        case AttnVariant::Favor: return "favor";
    }
    return "?";
}

inline AttnVariant attn_variant_from_name(const std::string& s) {
    if (s == "softmax") return AttnVariant::Softmax;
    if (s == "linear_elu") return AttnVariant::LinearElu;
    if (s == "favor") return AttnVariant::Favor;
    raise(ErrorCode::ConfigError, "unknown attention variant '" + s + "'");
}

struct AttentionConfig {
    std::int64_t seq_len = 2048;
    std::int64_t batch = 128;
    std::int64_t heads = 6;
    std::int64_t head_dim = 64;
    DType dtype = DType::Fp32;
    AttnVariant variant = AttnVariant::Softmax;
    std::int64_t favor_features = 256;
    bool include_projections = false;

    std::int64_t model_dim() const { return heads * head_dim; }

    void check() const {
        for (std::int64_t v : {seq_len, batch, heads, head_dim}) {
            if (v < 1) raise(ErrorCode::ConfigError, "attention config dims must be positive");
        }
        if (variant == AttnVariant::Favor && favor_features < 1) {
            raise(ErrorCode::ConfigError, "favor requires favor_features >= 1");
        }
    }
};

enum class LMStyle : std::uint8_t { BertStyle, GptStyle };

inline std::string lm_style_name(LMStyle s) { return s == LMStyle::BertStyle ? "bert_style" : "gpt_style"; }

inline LMStyle lm_style_from_name(const std::string& s) {
    if (s == "bert_style") return LMStyle::BertStyle;
    if (s == "gpt_style") return LMStyle::GptStyle;
    raise(ErrorCode::ConfigError, "unknown model style '" + s + "'");
}

struct LMConfig {
    LMStyle model = LMStyle::GptStyle;
    std::int64_t layers = 2;
    std::int64_t seq_len = 2048;
    std::int64_t batch = 8;
    std::int64_t heads = 8;
    std::int64_t head_dim = 64;
    std::int64_t ffn_mult = 4;
    ActivationKind activation = ActivationKind::Gelu;

    void check() const {
        for (std::int64_t v : {layers, seq_len, batch, heads, head_dim, ffn_mult}) {
            if (v < 1) raise(ErrorCode::ConfigError, "lm config dims must be positive");
        }
    }
};

namespace detail {

// Builders tile the batch dimension into independent micro-batch pipelines so
// the scheduler can overlap one tile's TPC work with another tile's MME work,
// the way a whole-graph compiler tiles standard attention. The FAVOR builder
// stays monolithic: it mirrors the pseudocode module boundary whose internal
// independence the eager compiler fails to exploit.
inline std::int64_t batch_tiles(std::int64_t batch) {
    for (std::int64_t d = std::min<std::int64_t>(batch, 16); d > 1; --d) {
        if (batch % d == 0) return d;
    }
    return 1;
}

inline AttrMap scalar_attr(double v) { return AttrMap{{"scalar", AttrValue{v}}}; }

inline AttrMap reshape_attr(std::vector<std::int64_t> shape) {
    return AttrMap{{"out_shape", AttrValue{std::move(shape)}}};
}

inline AttrMap act_attr(ActivationKind a) { return AttrMap{{"variant", AttrValue{activation_name(a)}}}; }

struct ProjWeights {
    TensorId wq = -1, wk = -1, wv = -1;
};

// Q/K/V for one batch tile, either direct inputs or projected from the tile's
// token matrix x_tile.
struct TileQkv {
    TensorId q, k, v;
};

inline TileQkv tile_qkv(Graph& g, const AttentionConfig& cfg, std::int64_t tile_batch, TensorId x_tile,
                        const ProjWeights& w) {
    std::int64_t n = cfg.seq_len, d = cfg.head_dim, h = cfg.heads;
    std::vector<std::int64_t> head_layout{tile_batch * h, n, d};
    if (x_tile >= 0) {
        TensorId q2 = g.node(g.add_op(OpKind::MatMul, {x_tile, w.wq})).output;
        TensorId k2 = g.node(g.add_op(OpKind::MatMul, {x_tile, w.wk})).output;
        TensorId v2 = g.node(g.add_op(OpKind::MatMul, {x_tile, w.wv})).output;
        TensorId q = g.node(g.add_op(OpKind::MemCopy, {q2}, reshape_attr(head_layout))).output;
        TensorId k = g.node(g.add_op(OpKind::MemCopy, {k2}, reshape_attr(head_layout))).output;
        TensorId v = g.node(g.add_op(OpKind::MemCopy, {v2}, reshape_attr(head_layout))).output;
        return {q, k, v};
    }
    TensorId q = g.add_tensor({head_layout, cfg.dtype});
    TensorId k = g.add_tensor({head_layout, cfg.dtype});
    TensorId v = g.add_tensor({head_layout, cfg.dtype});
    return {q, k, v};
}

//! scores = softmax(Q Kt / sqrt(D)) V for one tile; returns the context tensor.
inline TensorId softmax_core(Graph& g, const AttentionConfig& cfg, const TileQkv& qkv) {
    TensorId kt = g.node(g.add_op(OpKind::Transpose, {qkv.k})).output;
    TensorId scores = g.node(g.add_op(OpKind::BatchMatMul, {qkv.q, kt})).output;
    TensorId scaled =
        g.node(g.add_op(OpKind::ScalarMul, {scores}, scalar_attr(1.0 / std::sqrt(static_cast<double>(cfg.head_dim)))))
            .output;
    TensorId probs = g.node(g.add_op(OpKind::Softmax, {scaled})).output;
    return g.node(g.add_op(OpKind::BatchMatMul, {probs, qkv.v})).output;
}

//! phi(Q) (phi(K)t V) with phi = elu + 1; the normalizer reuses phi(K)t ones.
//! No [N, N] intermediate is ever created.
inline TensorId linear_core(Graph& g, const TileQkv& qkv) {
    TensorId qf = g.node(g.add_op(OpKind::Activation, {qkv.q}, act_attr(ActivationKind::EluPlusOne))).output;
    TensorId kf = g.node(g.add_op(OpKind::Activation, {qkv.k}, act_attr(ActivationKind::EluPlusOne))).output;
    TensorId kt = g.node(g.add_op(OpKind::Transpose, {kf})).output;
    TensorId kv = g.node(g.add_op(OpKind::BatchMatMul, {kt, qkv.v})).output;
    TensorId raw = g.node(g.add_op(OpKind::BatchMatMul, {qf, kv})).output;
    TensorId ones = g.node(g.add_op(OpKind::OnesLike, {qkv.v})).output;
    TensorId ksum = g.node(g.add_op(OpKind::BatchMatMul, {kt, ones})).output;
    TensorId norm = g.node(g.add_op(OpKind::BatchMatMul, {qf, ksum})).output;
    return g.node(g.add_op(OpKind::ElemwiseDiv, {raw, norm})).output;
}

//! FAVOR, line for line: pre-scale, feature projection, offset, exp on both
//! chains, then the two contractions and the normalization divide. The
//! q_prime and k_prime chains share no nodes.
inline TensorId favor_core(Graph& g, const AttentionConfig& cfg, const TileQkv& qkv, TensorId features) {
    double pre_scale = std::pow(static_cast<double>(cfg.head_dim), -0.25);
    auto chain = [&](TensorId in) {
        TensorId scaled = g.node(g.add_op(OpKind::ScalarMul, {in}, scalar_attr(pre_scale))).output;
        TensorId projected = g.node(g.add_op(OpKind::BatchMatMul, {scaled, features})).output;
        TensorId shifted = g.node(g.add_op(OpKind::ScalarAdd, {projected}, scalar_attr(0.0))).output;
        return g.node(g.add_op(OpKind::Exp, {shifted})).output;
    };
    TensorId q_prime = chain(qkv.q);
    TensorId k_prime = chain(qkv.k);
    TensorId kt = g.node(g.add_op(OpKind::Transpose, {k_prime})).output;
    TensorId ones = g.node(g.add_op(OpKind::OnesLike, {qkv.v})).output;
    TensorId kt_ones = g.node(g.add_op(OpKind::BatchMatMul, {kt, ones})).output;
    TensorId att_norm = g.node(g.add_op(OpKind::BatchMatMul, {q_prime, kt_ones})).output;
    TensorId kt_v = g.node(g.add_op(OpKind::BatchMatMul, {kt, qkv.v})).output;
    TensorId att_raw = g.node(g.add_op(OpKind::BatchMatMul, {q_prime, kt_v})).output;
    return g.node(g.add_op(OpKind::ElemwiseDiv, {att_raw, att_norm})).output;
}

inline TensorId attention_core(Graph& g, const AttentionConfig& cfg, const TileQkv& qkv, TensorId features) {
    switch (cfg.variant) {
        case AttnVariant::Softmax: return softmax_core(g, cfg, qkv);
        case AttnVariant::LinearElu: return linear_core(g, qkv);
        case AttnVariant::Favor: return favor_core(g, cfg, qkv, features);
    }
    raise(ErrorCode::InternalError, "unhandled variant");
}

inline ProjWeights make_proj_weights(Graph& g, const AttentionConfig& cfg) {
    std::int64_t dm = cfg.model_dim();
    return {g.add_tensor({{dm, dm}, cfg.dtype}), g.add_tensor({{dm, dm}, cfg.dtype}),
            g.add_tensor({{dm, dm}, cfg.dtype})};
}

//! Normalization block: sum of squares per row, rsqrt-style scale broadcast
//! back over the row via a rank-1 product, then an elementwise divide.
inline TensorId norm_block(Graph& g, TensorId x, TensorId ones_row) {
    TensorId sq = g.node(g.add_op(OpKind::Square, {x})).output;
    TensorId ss = g.node(g.add_op(OpKind::Reduction, {sq}, AttrMap{{"axis", AttrValue{std::int64_t{1}}}})).output;
    TensorId rs = g.node(g.add_op(OpKind::Sqrt, {ss})).output;
    TensorId bc = g.node(g.add_op(OpKind::MatMul, {rs, ones_row})).output;
    return g.node(g.add_op(OpKind::ElemwiseDiv, {x, bc})).output;
}

struct LayerWeights {
    ProjWeights proj;
    TensorId w1 = -1, w2 = -1;
    TensorId features = -1;  // favor only
};

inline LayerWeights make_layer_weights(Graph& g, const AttentionConfig& cfg, std::int64_t ffn_mult,
                                       ActivationKind ffn_act) {
    LayerWeights w;
    w.proj = make_proj_weights(g, cfg);
    std::int64_t dm = cfg.model_dim();
    std::int64_t ffn = ffn_mult * dm;
    std::int64_t ffn_out = ffn_act == ActivationKind::Glu ? ffn / 2 : ffn;
    w.w1 = g.add_tensor({{dm, ffn}, cfg.dtype});
    w.w2 = g.add_tensor({{ffn_out, dm}, cfg.dtype});
    if (cfg.variant == AttnVariant::Favor) {
        w.features = g.add_tensor({{cfg.head_dim, cfg.favor_features}, cfg.dtype});
    }
    return w;
}

//! One transformer layer body on one batch tile: attention, residual, norm,
//! FFN, residual, norm. Returns the tile's output token matrix.
inline TensorId layer_tile(Graph& g, const AttentionConfig& cfg, std::int64_t tile_batch, TensorId x_tile,
                           const LayerWeights& w, ActivationKind ffn_act, TensorId ones_row) {
    std::int64_t rows = tile_batch * cfg.seq_len;
    std::int64_t dm = cfg.model_dim();

    TileQkv qkv = tile_qkv(g, cfg, tile_batch, x_tile, w.proj);
    TensorId ctx = attention_core(g, cfg, qkv, w.features);
    TensorId merged = g.node(g.add_op(OpKind::MemCopy, {ctx}, reshape_attr({rows, dm}))).output;
    TensorId res1 = g.node(g.add_op(OpKind::ElemwiseAdd, {x_tile, merged})).output;
    TensorId n1 = norm_block(g, res1, ones_row);

    TensorId f1 = g.node(g.add_op(OpKind::MatMul, {n1, w.w1})).output;
    TensorId act = g.node(g.add_op(OpKind::Activation, {f1}, act_attr(ffn_act))).output;
    TensorId f2 = g.node(g.add_op(OpKind::MatMul, {act, w.w2})).output;
    TensorId res2 = g.node(g.add_op(OpKind::ElemwiseAdd, {res1, f2})).output;
    return norm_block(g, res2, ones_row);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

inline Graph build_batched_matmul(std::int64_t batch, std::int64_t m, std::int64_t k, std::int64_t n,
                                  DType dtype = DType::Fp32) {
    Graph g;
    g.tag = "batched_matmul";
    TensorId a = g.add_tensor({{batch, m, k}, dtype});
    TensorId b = g.add_tensor({{batch, k, n}, dtype});
    g.add_op(OpKind::BatchMatMul, {a, b});
    return g;
}

//! Attention block only (no residual/FFN). Softmax and linear variants are
//! tiled over the batch; FAVOR is emitted once, matching its module boundary.
inline Graph build_attention(const AttentionConfig& cfg) {
    cfg.check();
    Graph g;
    g.tag = attn_variant_name(cfg.variant) + "_attention";

    const bool monolithic = cfg.variant == AttnVariant::Favor;
    std::int64_t tiles = monolithic ? 1 : detail::batch_tiles(cfg.batch);
    std::int64_t tile_batch = cfg.batch / tiles;

    detail::ProjWeights w;
    TensorId features = -1;
    if (cfg.include_projections) w = detail::make_proj_weights(g, cfg);
    if (cfg.variant == AttnVariant::Favor) {
        features = g.add_tensor({{cfg.head_dim, cfg.favor_features}, cfg.dtype});
    }

    for (std::int64_t t = 0; t < tiles; ++t) {
        TensorId x_tile = -1;
        if (cfg.include_projections) {
            x_tile = g.add_tensor({{tile_batch * cfg.seq_len, cfg.model_dim()}, cfg.dtype});
        }
        detail::TileQkv qkv = detail::tile_qkv(g, cfg, tile_batch, x_tile, w);
        detail::attention_core(g, cfg, qkv, features);
    }
    return g;
}

inline Graph build_softmax_attention(const AttentionConfig& cfg) {
    AttentionConfig c = cfg;
    c.variant = AttnVariant::Softmax;
    return build_attention(c);
}

inline Graph build_linear_attention(const AttentionConfig& cfg) {
    AttentionConfig c = cfg;
    c.variant = AttnVariant::LinearElu;
    return build_attention(c);
}

inline Graph build_favor_attention(const AttentionConfig& cfg) {
    AttentionConfig c = cfg;
    c.variant = AttnVariant::Favor;
    return build_attention(c);
}

//! Full transformer layer: attention + residual adds + normalization chains +
//! two-matmul FFN. Projections are always built (the residual path needs the
//! layer's token matrix).
inline Graph build_transformer_layer(const AttentionConfig& cfg, ActivationKind ffn_activation = ActivationKind::Gelu,
                                     std::int64_t ffn_mult = 4) {
    cfg.check();
    AttentionConfig c = cfg;
    c.include_projections = true;

    Graph g;
    g.tag = "transformer_layer_" + attn_variant_name(c.variant);

    const bool monolithic = c.variant == AttnVariant::Favor;
    std::int64_t tiles = monolithic ? 1 : detail::batch_tiles(c.batch);
    std::int64_t tile_batch = c.batch / tiles;

    TensorId ones_row = g.add_tensor({{1, c.model_dim()}, c.dtype});
    detail::LayerWeights w = detail::make_layer_weights(g, c, ffn_mult, ffn_activation);

    for (std::int64_t t = 0; t < tiles; ++t) {
        TensorId x_tile = g.add_tensor({{tile_batch * c.seq_len, c.model_dim()}, c.dtype});
        detail::layer_tile(g, c, tile_batch, x_tile, w, ffn_activation, ones_row);
    }
    return g;
}

inline Graph build_activation_bench(ActivationKind variant, const AttentionConfig& cfg) {
    if (variant != ActivationKind::Relu && variant != ActivationKind::LeakyRelu && variant != ActivationKind::Gelu &&
        variant != ActivationKind::Glu) {
        raise(ErrorCode::ConfigError, "activation bench supports relu|leaky_relu|gelu|glu");
    }
    AttentionConfig c = cfg;
    c.variant = AttnVariant::Softmax;
    Graph g = build_transformer_layer(c, variant);
    g.tag = "activation_bench_" + activation_name(variant);
    return g;
}

//! LM forward stack: embedding projection, `layers` transformer layers, LM
//! head. bert_style and gpt_style share the forward-graph structure; the
//! style only tags the graph for reporting.
inline Graph build_lm_stack(const LMConfig& cfg) {
    cfg.check();
    AttentionConfig attn;
    attn.seq_len = cfg.seq_len;
    attn.batch = cfg.batch;
    attn.heads = cfg.heads;
    attn.head_dim = cfg.head_dim;
    attn.variant = AttnVariant::Softmax;
    attn.include_projections = true;

    Graph g;
    g.tag = lm_style_name(cfg.model);

    std::int64_t dm = attn.model_dim();
    std::int64_t tiles = detail::batch_tiles(cfg.batch);
    std::int64_t tile_batch = cfg.batch / tiles;

    TensorId ones_row = g.add_tensor({{1, dm}, attn.dtype});
    TensorId w_embed = g.add_tensor({{dm, dm}, attn.dtype});
    TensorId w_head = g.add_tensor({{dm, dm}, attn.dtype});
    std::vector<detail::LayerWeights> weights;
    weights.reserve(static_cast<std::size_t>(cfg.layers));
    for (std::int64_t l = 0; l < cfg.layers; ++l) {
        weights.push_back(detail::make_layer_weights(g, attn, cfg.ffn_mult, cfg.activation));
    }

    for (std::int64_t t = 0; t < tiles; ++t) {
        TensorId x = g.add_tensor({{tile_batch * cfg.seq_len, dm}, attn.dtype});
        TensorId h = g.node(g.add_op(OpKind::MatMul, {x, w_embed})).output;
        for (std::int64_t l = 0; l < cfg.layers; ++l) {
            h = detail::layer_tile(g, attn, tile_batch, h, weights[static_cast<std::size_t>(l)], cfg.activation,
                                   ones_row);
        }
        g.add_op(OpKind::MatMul, {h, w_head});
    }
    return g;
}

}  // namespace hetsim
