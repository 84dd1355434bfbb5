#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zoom/core.hpp"

namespace zoom {

enum class IoMode { direct, buffered };

// Batch size for candidate reads during rerank.
struct RerankPlan {
    uint32_t b = 8;
};

// On-disk exact-vector store: 32-byte header (magic, version, n, d) followed
// by n records of d little-endian f32. Direct mode reads through O_DIRECT
// with kernel AIO so a batch becomes one submission; if the file system
// refuses O_DIRECT the store silently falls back to buffered reads and
// reports the effective mode.
class FullViewStore {
  public:
    FullViewStore() = default;
    FullViewStore(const FullViewStore&) = delete;
    FullViewStore& operator=(const FullViewStore&) = delete;
    FullViewStore(FullViewStore&& other) noexcept { swap(other); }
    FullViewStore& operator=(FullViewStore&& other) noexcept {
        if (this != &other) {
            close();
            swap(other);
        }
        return *this;
    }
    ~FullViewStore() { close(); }

    static void write(const std::string& path, const VectorDataset& ds);
    static FullViewStore open(const std::string& path, IoMode requested);

    uint64_t n() const { return n_; }
    uint64_t d() const { return d_; }
    IoMode mode() const { return mode_; }
    const std::string& path() const { return path_; }

    // Reads count records into out (count * d floats). Completions within a
    // batch may arrive out of order; results land at the slot of their id.
    void read_batch(const uint32_t* ids, size_t count, float* out);

    // Exact top-k over the given candidates: ids are deduplicated, fetched
    // in batches of plan.b, and scored with squared L2. Ascending
    // (distance, id).
    std::vector<std::pair<uint32_t, float>> rerank(const float* query,
                                                   std::vector<uint32_t> ids,
                                                   uint32_t k,
                                                   const RerankPlan& plan);

    // Picks the batch size with the lowest median wall time for reading r
    // random records, over a small candidate grid.
    static RerankPlan autotune_plan(FullViewStore& store, uint32_t r,
                                    uint64_t seed);

    void close();

  private:
    void swap(FullViewStore& other) noexcept;

    std::string path_;
    uint64_t n_ = 0;
    uint64_t d_ = 0;
    int fd_ = -1;
    IoMode mode_ = IoMode::buffered;
    unsigned long aio_ctx_ = 0;
    bool aio_ready_ = false;
    void* aligned_buf_ = nullptr;
    size_t aligned_stride_ = 0;
    size_t aligned_slots_ = 0;
};

}  // namespace zoom
