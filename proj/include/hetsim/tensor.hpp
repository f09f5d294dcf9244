#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "hetsim/error.hpp"

namespace hetsim {

enum class DType : std::uint8_t { Fp32, Bf16 };

inline std::int64_t dtype_size_bytes(DType dt) { return dt == DType::Fp32 ? 4 : 2; }

inline std::string dtype_name(DType dt) { return dt == DType::Fp32 ? "fp32" : "bf16"; }

inline DType dtype_from_name(const std::string& s) {
    if (s == "fp32") return DType::Fp32;
    if (s == "bf16") return DType::Bf16;
    raise(ErrorCode::InvalidAttr, "unknown dtype '" + s + "'");
}

// Tensors are rank 1..5 (the TPC tensor rank limit); every dim >= 1.
inline constexpr int kMinRank = 1;
inline constexpr int kMaxRank = 5;

//! Shape + element type of a tensor flowing through the graph. No values are
//! ever stored; the simulator only reasons about shapes, op counts and bytes.
struct TensorSpec {
    std::vector<std::int64_t> shape;
    DType dtype = DType::Fp32;

    TensorSpec() = default;
    TensorSpec(std::vector<std::int64_t> s, DType dt = DType::Fp32) : shape(std::move(s)), dtype(dt) {}

    int rank() const { return static_cast<int>(shape.size()); }

    std::int64_t element_count() const {
        std::int64_t n = 1;
        for (std::int64_t d : shape) n *= d;
        return n;
    }

    std::int64_t byte_size() const { return element_count() * dtype_size_bytes(dtype); }

    //! Length of the innermost (fastest-varying) dimension.
    std::int64_t inner_dim() const { return shape.empty() ? 1 : shape.back(); }

    bool valid() const {
        if (rank() < kMinRank || rank() > kMaxRank) return false;
        for (std::int64_t d : shape) {
            if (d < 1) return false;
        }
        return true;
    }

    void check_valid() const {
        if (!valid()) raise(ErrorCode::InvalidShape, "rank must be 1..5 with all dims >= 1, got " + to_string());
    }

    bool operator==(const TensorSpec& o) const { return shape == o.shape && dtype == o.dtype; }

    std::string to_string() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        s += "]";
        s += dtype == DType::Fp32 ? "f32" : "bf16";
        return s;
    }
};

}  // namespace hetsim
