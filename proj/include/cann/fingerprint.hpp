#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>

namespace cann {

/// Incremental 64-bit FNV-1a hash. Used for dataset and run fingerprints
/// that must be stable across processes and platforms.
class Fingerprint {
public:
    Fingerprint& mix_bytes(const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= bytes[i];
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    Fingerprint& mix(const std::string& s) {
        mix_u64(s.size());
        return mix_bytes(s.data(), s.size());
    }

    Fingerprint& mix_u64(std::uint64_t v) { return mix_bytes(&v, sizeof v); }

    Fingerprint& mix_double(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        return mix_u64(bits);
    }

    Fingerprint& mix_doubles(std::span<const double> vs) {
        mix_u64(vs.size());
        for (double v : vs) mix_double(v);
        return *this;
    }

    std::uint64_t value() const { return state_; }

    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        std::uint64_t v = state_;
        for (int i = 15; i >= 0; --i) {
            out[static_cast<std::size_t>(i)] = digits[v & 0xf];
            v >>= 4;
        }
        return out;
    }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

} // namespace cann
