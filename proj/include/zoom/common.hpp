#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace zoom {

struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StorageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define ZOOM_ARG_CHECK(cond, msg)                                              \
    do {                                                                       \
        if (!(cond)) throw ::zoom::ArgumentError(msg);                         \
    } while (0)

// Squared Euclidean distance. Eight accumulator lanes combined in a fixed
// order: deterministic without -ffast-math, still auto-vectorizable.
inline float l2_sq(const float* a, const float* b, std::size_t d) {
    float acc[8] = {0.f, 0.f, 0.f, 0.f, 0.f, 0.f, 0.f, 0.f};
    std::size_t i = 0;
    for (; i + 8 <= d; i += 8) {
        for (int j = 0; j < 8; ++j) {
            float t = a[i + j] - b[i + j];
            acc[j] += t * t;
        }
    }
    float tail = 0.f;
    for (; i < d; ++i) {
        float t = a[i] - b[i];
        tail += t * t;
    }
    return ((acc[0] + acc[4]) + (acc[1] + acc[5])) +
           ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

inline float dot(const float* a, const float* b, std::size_t d) {
    float acc[8] = {0.f, 0.f, 0.f, 0.f, 0.f, 0.f, 0.f, 0.f};
    std::size_t i = 0;
    for (; i + 8 <= d; i += 8)
        for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
    float tail = 0.f;
    for (; i < d; ++i) tail += a[i] * b[i];
    return ((acc[0] + acc[4]) + (acc[1] + acc[5])) +
           ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

inline uint64_t fnv1a64(const void* data, std::size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace zoom
