#include "zoom/fullview.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <random>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#if defined(__linux__)
#include <linux/aio_abi.h>
#include <sys/syscall.h>
#endif

#include "zoom/common.hpp"
#include "zoom/detail/topk.hpp"

namespace zoom {

namespace {

static_assert(std::endian::native == std::endian::little,
              "on-disk format assumes a little-endian host");

constexpr char kMagic[4] = {'Z', 'F', 'V', 'W'};
constexpr uint32_t kVersion = 1;
constexpr size_t kHeaderBytes = 32;
constexpr size_t kAlign = 4096;
constexpr size_t kMaxBatch = 512;

std::string errno_text(const char* what, const std::string& path) {
    return std::string(what) + " " + path + ": " + std::strerror(errno);
}

void store_u32(unsigned char* p, uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

void store_u64(unsigned char* p, uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

uint32_t load_u32(const unsigned char* p) {
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

uint64_t load_u64(const unsigned char* p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void write_fully(int fd, const void* data, size_t len, const std::string& path) {
    const char* p = static_cast<const char*>(data);
    while (len > 0) {
        const ssize_t w = ::write(fd, p, len);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw StorageError(errno_text("write failed for", path));
        }
        p += w;
        len -= static_cast<size_t>(w);
    }
}

void pread_fully(int fd, void* data, size_t len, uint64_t offset,
                 const std::string& path) {
    char* p = static_cast<char*>(data);
    while (len > 0) {
        const ssize_t r = ::pread(fd, p, len, static_cast<off_t>(offset));
        if (r < 0) {
            if (errno == EINTR) continue;
            throw StorageError(errno_text("read failed for", path));
        }
        if (r == 0) throw StorageError("unexpected end of file in " + path);
        p += r;
        offset += static_cast<uint64_t>(r);
        len -= static_cast<size_t>(r);
    }
}

#if defined(__linux__)
long sys_io_setup(unsigned nr, aio_context_t* ctx) {
    return syscall(SYS_io_setup, nr, ctx);
}
long sys_io_destroy(aio_context_t ctx) { return syscall(SYS_io_destroy, ctx); }
long sys_io_submit(aio_context_t ctx, long n, struct iocb** cbs) {
    return syscall(SYS_io_submit, ctx, n, cbs);
}
long sys_io_getevents(aio_context_t ctx, long min_nr, long nr,
                      struct io_event* ev) {
    return syscall(SYS_io_getevents, ctx, min_nr, nr, ev, nullptr);
}
#endif

}  // namespace

void FullViewStore::swap(FullViewStore& other) noexcept {
    std::swap(path_, other.path_);
    std::swap(n_, other.n_);
    std::swap(d_, other.d_);
    std::swap(fd_, other.fd_);
    std::swap(mode_, other.mode_);
    std::swap(aio_ctx_, other.aio_ctx_);
    std::swap(aio_ready_, other.aio_ready_);
    std::swap(aligned_buf_, other.aligned_buf_);
    std::swap(aligned_stride_, other.aligned_stride_);
    std::swap(aligned_slots_, other.aligned_slots_);
}

void FullViewStore::close() {
#if defined(__linux__)
    if (aio_ready_) {
        sys_io_destroy(static_cast<aio_context_t>(aio_ctx_));
        aio_ready_ = false;
        aio_ctx_ = 0;
    }
#endif
    if (aligned_buf_) {
        std::free(aligned_buf_);
        aligned_buf_ = nullptr;
    }
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    n_ = d_ = 0;
    aligned_stride_ = aligned_slots_ = 0;
}

void FullViewStore::write(const std::string& path, const VectorDataset& ds) {
    ZOOM_ARG_CHECK(ds.n > 0 && ds.d > 0, "refusing to write an empty store");
    ZOOM_ARG_CHECK(ds.data.size() == ds.n * ds.d,
                   "dataset buffer does not match its dimensions");

    const std::string tmp = path + ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw StorageError(errno_text("cannot create", tmp));
    try {
        unsigned char header[kHeaderBytes] = {};
        std::memcpy(header, kMagic, 4);
        store_u32(header + 4, kVersion);
        store_u64(header + 8, ds.n);
        store_u64(header + 16, ds.d);
        write_fully(fd, header, kHeaderBytes, tmp);
        write_fully(fd, ds.data.data(), ds.data.size() * sizeof(float), tmp);
        if (::fsync(fd) != 0) throw StorageError(errno_text("fsync failed for", tmp));
    } catch (...) {
        ::close(fd);
        ::unlink(tmp.c_str());
        throw;
    }
    ::close(fd);
    if (::rename(tmp.c_str(), path.c_str()) != 0) {
        ::unlink(tmp.c_str());
        throw StorageError(errno_text("cannot move store into place at", path));
    }
}

FullViewStore FullViewStore::open(const std::string& path, IoMode requested) {
    const int plain = ::open(path.c_str(), O_RDONLY);
    if (plain < 0) throw StorageError(errno_text("cannot open", path));

    FullViewStore store;
    store.path_ = path;
    store.fd_ = plain;
    store.mode_ = IoMode::buffered;
    try {
        unsigned char header[kHeaderBytes];
        pread_fully(plain, header, kHeaderBytes, 0, path);
        if (std::memcmp(header, kMagic, 4) != 0)
            throw FormatError("not a full-view store: " + path);
        const uint32_t version = load_u32(header + 4);
        if (version != kVersion)
            throw FormatError("unsupported store version " +
                              std::to_string(version) + " in " + path);
        store.n_ = load_u64(header + 8);
        store.d_ = load_u64(header + 16);
        if (store.n_ == 0 || store.d_ == 0)
            throw FormatError("store has zero rows or dimensions: " + path);

        struct stat st {};
        if (::fstat(plain, &st) != 0)
            throw StorageError(errno_text("cannot stat", path));
        const uint64_t expect = kHeaderBytes + store.n_ * store.d_ * 4;
        if (static_cast<uint64_t>(st.st_size) != expect)
            throw FormatError("store size mismatch in " + path + ": expected " +
                              std::to_string(expect) + " bytes, found " +
                              std::to_string(st.st_size));
    } catch (...) {
        ::close(plain);
        throw;
    }

#if defined(__linux__)
    if (requested == IoMode::direct) {
        const int direct = ::open(path.c_str(), O_RDONLY | O_DIRECT);
        if (direct >= 0) {
            aio_context_t ctx = 0;
            if (sys_io_setup(kMaxBatch, &ctx) == 0) {
                const uint64_t rec = store.d_ * 4;
                const size_t stride = ((rec + kAlign - 1) / kAlign + 1) * kAlign;
                void* buf = nullptr;
                if (posix_memalign(&buf, kAlign, stride * kMaxBatch) == 0) {
                    ::close(plain);
                    store.fd_ = direct;
                    store.mode_ = IoMode::direct;
                    store.aio_ctx_ = static_cast<unsigned long>(ctx);
                    store.aio_ready_ = true;
                    store.aligned_buf_ = buf;
                    store.aligned_stride_ = stride;
                    store.aligned_slots_ = kMaxBatch;
                    return store;
                }
                sys_io_destroy(ctx);
            }
            ::close(direct);
        }
        // Fall through: stay on the buffered descriptor.
    }
#else
    (void)requested;
#endif
    return store;
}

void FullViewStore::read_batch(const uint32_t* ids, size_t count, float* out) {
    if (count == 0) return;
    ZOOM_ARG_CHECK(ids != nullptr && out != nullptr,
                   "read_batch: null ids or output");
    ZOOM_ARG_CHECK(fd_ >= 0, "read_batch: store is closed");
    for (size_t i = 0; i < count; ++i)
        ZOOM_ARG_CHECK(ids[i] < n_, "read_batch: id out of range");

    const uint64_t rec = d_ * 4;

    if (mode_ == IoMode::buffered) {
        for (size_t i = 0; i < count; ++i) {
            const uint64_t offset = kHeaderBytes + uint64_t{ids[i]} * rec;
            pread_fully(fd_, out + i * d_, rec, offset, path_);
        }
        return;
    }

#if defined(__linux__)
    const auto ctx = static_cast<aio_context_t>(aio_ctx_);
    size_t base = 0;
    std::vector<struct iocb> cbs(std::min(count, aligned_slots_));
    std::vector<struct iocb*> cbp(cbs.size());
    std::vector<struct io_event> events(cbs.size());
    while (base < count) {
        const size_t chunk = std::min(count - base, aligned_slots_);
        for (size_t s = 0; s < chunk; ++s) {
            const uint64_t offset = kHeaderBytes + uint64_t{ids[base + s]} * rec;
            const uint64_t aligned_off = offset & ~uint64_t{kAlign - 1};
            const uint64_t need = (offset - aligned_off) + rec;
            const uint64_t aligned_len = (need + kAlign - 1) & ~uint64_t{kAlign - 1};
            struct iocb& cb = cbs[s];
            std::memset(&cb, 0, sizeof(cb));
            cb.aio_data = s;
            cb.aio_lio_opcode = IOCB_CMD_PREAD;
            cb.aio_fildes = static_cast<uint32_t>(fd_);
            cb.aio_buf = reinterpret_cast<uint64_t>(
                static_cast<char*>(aligned_buf_) + s * aligned_stride_);
            cb.aio_nbytes = aligned_len;
            cb.aio_offset = static_cast<int64_t>(aligned_off);
            cbp[s] = &cb;
        }
        size_t submitted = 0;
        while (submitted < chunk) {
            const long r = sys_io_submit(ctx, static_cast<long>(chunk - submitted),
                                         cbp.data() + submitted);
            if (r < 0) {
                if (errno == EINTR) continue;
                throw StorageError(errno_text("io_submit failed for", path_));
            }
            submitted += static_cast<size_t>(r);
        }
        size_t done = 0;
        while (done < chunk) {
            const long r = sys_io_getevents(ctx, 1, static_cast<long>(chunk - done),
                                            events.data());
            if (r < 0) {
                if (errno == EINTR) continue;
                throw StorageError(errno_text("io_getevents failed for", path_));
            }
            for (long e = 0; e < r; ++e) {
                const size_t s = static_cast<size_t>(events[e].data);
                const uint64_t offset = kHeaderBytes + uint64_t{ids[base + s]} * rec;
                const uint64_t delta = offset & uint64_t{kAlign - 1};
                const int64_t res = events[e].res;
                if (res < 0)
                    throw StorageError("direct read failed for " + path_ + ": " +
                                       std::strerror(static_cast<int>(-res)));
                if (static_cast<uint64_t>(res) < delta + rec)
                    throw StorageError("short direct read in " + path_);
                std::memcpy(out + (base + s) * d_,
                            static_cast<char*>(aligned_buf_) +
                                s * aligned_stride_ + delta,
                            rec);
            }
            done += static_cast<size_t>(r);
        }
        base += chunk;
    }
#else
    throw StorageError("direct I/O unavailable on this platform");
#endif
}

std::vector<std::pair<uint32_t, float>> FullViewStore::rerank(
    const float* query, std::vector<uint32_t> ids, uint32_t k,
    const RerankPlan& plan) {
    ZOOM_ARG_CHECK(query != nullptr, "rerank: null query");
    ZOOM_ARG_CHECK(k > 0, "rerank: k must be positive");
    ZOOM_ARG_CHECK(plan.b > 0, "rerank: batch size must be positive");

    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    detail::TopK topk(k);
    std::vector<float> buf(uint64_t{plan.b} * d_);
    for (size_t bs = 0; bs < ids.size(); bs += plan.b) {
        const size_t cnt = std::min<size_t>(plan.b, ids.size() - bs);
        read_batch(ids.data() + bs, cnt, buf.data());
        for (size_t i = 0; i < cnt; ++i)
            topk.consider(l2_sq(query, buf.data() + i * d_, d_), ids[bs + i]);
    }
    return topk.take_sorted();
}

RerankPlan FullViewStore::autotune_plan(FullViewStore& store, uint32_t r,
                                        uint64_t seed) {
    ZOOM_ARG_CHECK(r > 0, "autotune: r must be positive");
    ZOOM_ARG_CHECK(store.n_ > 0, "autotune: store is closed");

    std::vector<uint32_t> grid = {1, 4, 8, 16, 32, r};
    for (auto& b : grid) b = std::min(b, r);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    constexpr int kRuns = 5;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<uint64_t> pick(0, store.n_ - 1);
    std::vector<std::vector<uint32_t>> idsets(kRuns, std::vector<uint32_t>(r));
    for (auto& set : idsets)
        for (auto& id : set) id = static_cast<uint32_t>(pick(rng));

    std::vector<float> buf(uint64_t{r} * store.d_);
    for (const auto& set : idsets)  // warm pass, untimed
        store.read_batch(set.data(), set.size(), buf.data());

    RerankPlan best;
    double best_us = std::numeric_limits<double>::infinity();
    for (const uint32_t b : grid) {
        std::array<double, kRuns> us{};
        for (int run = 0; run < kRuns; ++run) {
            const auto& set = idsets[run];
            const auto t0 = std::chrono::steady_clock::now();
            for (size_t base = 0; base < set.size(); base += b) {
                const size_t cnt = std::min<size_t>(b, set.size() - base);
                store.read_batch(set.data() + base, cnt, buf.data());
            }
            const auto t1 = std::chrono::steady_clock::now();
            us[run] = std::chrono::duration<double, std::micro>(t1 - t0).count();
        }
        std::sort(us.begin(), us.end());
        const double median = us[kRuns / 2];
        if (median < best_us) {
            best_us = median;
            best.b = b;
        }
    }
    return best;
}

}  // namespace zoom
