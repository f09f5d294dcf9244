#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "hetsim/graph.hpp"

namespace hetsim {

enum class EngineKind : std::uint8_t { MME = 0, TPC = 1, DMA = 2 };

inline std::string engine_name(EngineKind e) {
    switch (e) {
        case EngineKind::MME: return "MME";
        case EngineKind::TPC: return "TPC";
        case EngineKind::DMA: return "DMA";
    }
    return "?";
}

inline EngineKind engine_from_name(const std::string& s) {
    if (s == "MME") return EngineKind::MME;
    if (s == "TPC") return EngineKind::TPC;
    if (s == "DMA") return EngineKind::DMA;
    raise(ErrorCode::InvalidAttr, "unknown engine '" + s + "'");
}

//! Per-kind engine assignment. The default table mirrors the observed
//! operation-hardware mapping: matrix products land on the MME, copies on the
//! DMA engine, everything else on the TPC cluster. Overrides apply last and
//! exist for what-if studies (e.g. forcing batched matmuls onto TPC).
class MappingTable {
public:
    EngineKind assign_engine(OpKind kind) const {
        auto ov = overrides_.find(kind);
        if (ov != overrides_.end()) return ov->second;
        return rules_.at(kind);
    }

    //! Pure: returns a new table, the source is unchanged.
    MappingTable with_override(OpKind kind, EngineKind engine) const {
        if (kind == OpKind::MemCopy && engine != EngineKind::DMA) {
            raise(ErrorCode::UnsupportedPlacement, "MemCopy may not be overridden off DMA");
        }
        MappingTable t = *this;
        t.overrides_[kind] = engine;  // last override wins
        return t;
    }

    const std::map<OpKind, EngineKind>& rules() const { return rules_; }
    const std::map<OpKind, EngineKind>& overrides() const { return overrides_; }

    static MappingTable defaults() {
        MappingTable t;
        for (OpKind k : kAllOpKinds) t.rules_[k] = EngineKind::TPC;
        t.rules_[OpKind::MatMul] = EngineKind::MME;
        t.rules_[OpKind::BatchMatMul] = EngineKind::MME;
        t.rules_[OpKind::MemCopy] = EngineKind::DMA;
        return t;
    }

    static MappingTable from_json(const nlohmann::json& j) {
        MappingTable t = defaults();
        if (j.contains("rules")) {
            for (auto it = j.at("rules").begin(); it != j.at("rules").end(); ++it) {
                t.rules_[op_kind_from_name(it.key())] = engine_from_name(it.value());
            }
        }
        if (j.contains("overrides")) {
            for (auto it = j.at("overrides").begin(); it != j.at("overrides").end(); ++it) {
                OpKind k = op_kind_from_name(it.key());
                EngineKind e = engine_from_name(it.value());
                if (k == OpKind::MemCopy && e != EngineKind::DMA) {
                    raise(ErrorCode::UnsupportedPlacement, "MemCopy may not be overridden off DMA");
                }
                t.overrides_[k] = e;
            }
        }
        if (t.rules_.at(OpKind::MemCopy) != EngineKind::DMA) {
            raise(ErrorCode::UnsupportedPlacement, "MemCopy must map to DMA");
        }
        return t;
    }

    nlohmann::json to_json() const {
        nlohmann::json rules = nlohmann::json::object();
        for (const auto& [k, e] : rules_) rules[op_kind_name(k)] = engine_name(e);
        nlohmann::json overrides = nlohmann::json::object();
        for (const auto& [k, e] : overrides_) overrides[op_kind_name(k)] = engine_name(e);
        return {{"rules", rules}, {"overrides", overrides}};
    }

private:
    std::map<OpKind, EngineKind> rules_;
    std::map<OpKind, EngineKind> overrides_;
};

inline MappingTable default_table() { return MappingTable::defaults(); }

inline EngineKind assign_engine(const MappingTable& t, OpKind kind) { return t.assign_engine(kind); }

inline MappingTable with_override(const MappingTable& t, OpKind kind, EngineKind engine) {
    return t.with_override(kind, engine);
}

}  // namespace hetsim
