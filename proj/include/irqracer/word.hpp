#pragma once

#include <cstdint>
#include <string>

namespace irqr {

// Fixed-width two's-complement machine word. All program values live in the
// low `width` bits; arithmetic wraps. Shared by the interpreter, the symbolic
// engine and the constraint solver so the three never disagree on a result.
class WordOps {
public:
    explicit WordOps(unsigned width = 16) : width_(width), mask_(width >= 32 ? 0xffffffffu : ((1u << width) - 1u)) {}

    unsigned width() const { return width_; }
    uint32_t mask() const { return mask_; }

    uint32_t trunc(uint32_t v) const { return v & mask_; }
    uint32_t add(uint32_t a, uint32_t b) const { return (a + b) & mask_; }
    uint32_t sub(uint32_t a, uint32_t b) const { return (a - b) & mask_; }
    uint32_t mul(uint32_t a, uint32_t b) const { return (a * b) & mask_; }
    uint32_t band(uint32_t a, uint32_t b) const { return (a & b) & mask_; }
    uint32_t bor(uint32_t a, uint32_t b) const { return (a | b) & mask_; }
    uint32_t bxor(uint32_t a, uint32_t b) const { return (a ^ b) & mask_; }
    uint32_t shl(uint32_t a, uint32_t b) const { return b >= width_ ? 0u : (a << b) & mask_; }
    uint32_t shr(uint32_t a, uint32_t b) const { return b >= width_ ? 0u : (trunc(a) >> b); }
    uint32_t neg(uint32_t a) const { return (0u - a) & mask_; }

    // Sign-extend the low `width` bits to a signed 64-bit value.
    int64_t toSigned(uint32_t v) const {
        v &= mask_;
        uint32_t sign = 1u << (width_ - 1);
        if (v & sign) return static_cast<int64_t>(v) - (static_cast<int64_t>(1) << width_);
        return static_cast<int64_t>(v);
    }

    bool lt(uint32_t a, uint32_t b) const { return toSigned(a) < toSigned(b); }
    bool le(uint32_t a, uint32_t b) const { return toSigned(a) <= toSigned(b); }

    static std::string hex(uint32_t v);

private:
    unsigned width_;
    uint32_t mask_;
};

} // namespace irqr
