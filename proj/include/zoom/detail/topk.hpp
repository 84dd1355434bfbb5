#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <utility>
#include <vector>

namespace zoom::detail {

// Bounded top-k of (distance, id) pairs, smallest first. Lexicographic order
// on the pair, so equal distances resolve to the lower id.
class TopK {
  public:
    explicit TopK(uint32_t k) : k_(k) {}

    void consider(float dist, uint32_t id) {
        if (heap_.size() < k_) {
            heap_.emplace(dist, id);
        } else if (std::pair<float, uint32_t>(dist, id) < heap_.top()) {
            heap_.pop();
            heap_.emplace(dist, id);
        }
    }

    bool full() const { return heap_.size() >= k_; }
    float worst() const { return heap_.top().first; }
    std::size_t size() const { return heap_.size(); }

    // Ascending (distance, id).
    std::vector<std::pair<uint32_t, float>> take_sorted() {
        std::vector<std::pair<float, uint32_t>> tmp;
        tmp.reserve(heap_.size());
        while (!heap_.empty()) {
            tmp.push_back(heap_.top());
            heap_.pop();
        }
        std::sort(tmp.begin(), tmp.end());
        std::vector<std::pair<uint32_t, float>> out;
        out.reserve(tmp.size());
        for (auto& [dist, id] : tmp) out.emplace_back(id, dist);
        return out;
    }

  private:
    uint32_t k_;
    std::priority_queue<std::pair<float, uint32_t>> heap_;
};

// Variant keeping the first-encountered entry on distance ties (strict
// compare on distance only), used by the PQ scan kernel.
class TopKFirstTie {
  public:
    explicit TopKFirstTie(uint32_t k) : k_(k) {}

    void consider(float dist, uint32_t id) {
        if (heap_.size() < k_) {
            heap_.emplace(dist, id);
        } else if (dist < heap_.top().first) {
            heap_.pop();
            heap_.emplace(dist, id);
        }
    }

    bool full() const { return heap_.size() >= k_; }
    float worst() const { return heap_.top().first; }

    std::vector<std::pair<uint32_t, float>> take_sorted() {
        std::vector<std::pair<float, uint32_t>> tmp;
        tmp.reserve(heap_.size());
        while (!heap_.empty()) {
            tmp.push_back(heap_.top());
            heap_.pop();
        }
        std::sort(tmp.begin(), tmp.end());
        std::vector<std::pair<uint32_t, float>> out;
        out.reserve(tmp.size());
        for (auto& [dist, id] : tmp) out.emplace_back(id, dist);
        return out;
    }

  private:
    struct FirstCmp {
        bool operator()(const std::pair<float, uint32_t>& a,
                        const std::pair<float, uint32_t>& b) const {
            return a.first < b.first;
        }
    };
    uint32_t k_;
    std::priority_queue<std::pair<float, uint32_t>,
                        std::vector<std::pair<float, uint32_t>>, FirstCmp>
        heap_;
};

}  // namespace zoom::detail
