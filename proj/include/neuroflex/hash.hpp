#pragma once

// FNV-1a 64-bit hashing for provenance fields in emitted artifacts.

#include <cstdint>
#include <cstdio>
#include <string>

namespace neuroflex {

class Fnv1a {
public:
    void update(const void* data, std::size_t n) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ull;
        }
    }

    void update_u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        update(b, 8);
    }

    void update_i64(std::int64_t v) { update_u64(static_cast<std::uint64_t>(v)); }

    // Doubles are hashed via their shortest round-trip decimal form so the
    // digest does not depend on binary layout quirks.
    void update_double(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        update(buf, std::char_traits<char>::length(buf));
    }

    void update_str(const std::string& s) {
        update_u64(s.size());
        update(s.data(), s.size());
    }

    std::uint64_t digest() const { return state_; }

    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(state_));
        return std::string(buf);
    }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ull;
};

}  // namespace neuroflex
