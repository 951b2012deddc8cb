#pragma once

#include "ramol/stream.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <queue>
#include <vector>

namespace ramol {

struct MemoryEntry {
  Vector x;
  int y = 0;
  Vector h;
  std::size_t t = 0;
};

struct Neighbour {
  MemoryEntry entry;
  double d = 0.0;  // Euclidean distance in embedding space
  double s = 0.0;  // similarity exp(-d / tau)
  double w = 0.0;  // normalised weight
};

// Ordered by nondecreasing distance.
struct NeighbourSet {
  std::vector<Neighbour> items;

  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
  double weight_sum() const;
};

// Fixed-capacity FIFO store of (x, y, h, t). Entries live in a ring; the
// embeddings sit column-wise in one matrix so a retrieval scan is contiguous.
class Buffer {
 public:
  Buffer(std::size_t capacity, std::size_t feature_dim, std::size_t embedding_dim);

  // Appends and evicts the single oldest entry when full. Timestamps must be
  // strictly increasing.
  void insert(const MemoryEntry& entry);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t embedding_dim() const { return embedding_dim_; }

  // i-th entry in storage order, 0 = oldest.
  MemoryEntry at(std::size_t i) const;
  std::size_t step_at(std::size_t i) const { return steps_[slot(i)]; }
  std::vector<MemoryEntry> entries() const;

  // Exact K nearest neighbours of `query` among entries with
  // t_now - t <= horizon (all entries when horizon is unset). Distance ties go
  // to the more recent entry. Only `d` is filled in.
  NeighbourSet retrieve(const Vector& query, std::size_t t_now, std::size_t k,
                        std::optional<std::size_t> horizon = std::nullopt) const;

 private:
  std::size_t slot(std::size_t i) const { return (head_ + i) % capacity_; }

  std::size_t capacity_;
  std::size_t feature_dim_;
  std::size_t embedding_dim_;
  Matrix features_;    // d x capacity
  Matrix embeddings_;  // hidden x capacity
  std::vector<int> labels_;
  std::vector<std::size_t> steps_;
  std::size_t head_ = 0;  // slot of the oldest entry
  std::size_t size_ = 0;
};

inline NeighbourSet retrieve(const Buffer& buffer, const Vector& query, std::size_t t_now, std::size_t k,
                             std::optional<std::size_t> horizon = std::nullopt) {
  return buffer.retrieve(query, t_now, k, horizon);
}

// s_j = exp(-d_j / tau), w_j = s_j / sum_k s_k. Throws on an empty set.
NeighbourSet similarity_weights(NeighbourSet ns, double tau);

// w_j = 1 / |N| for every neighbour, s left at 1.
NeighbourSet uniform_weights(NeighbourSet ns);

// Drops neighbours with w_j < rho * max_k w_k. Survivors are re-normalised to
// sum to one unless `renormalize` is false.
NeighbourSet similarity_gate(NeighbourSet ns, double rho, bool renormalize = true);

// Streaming median of every value pushed so far (two heaps).
class RunningMedian {
 public:
  void push(double v);
  std::optional<double> median() const;
  std::size_t count() const { return low_.size() + high_.size(); }

 private:
  std::priority_queue<double> low_;
  std::priority_queue<double, std::vector<double>, std::greater<>> high_;
};

// {"format": "ramol-buffer", "version": 1, "capacity", "entries": [{t, y, x, h}]}
nlohmann::json buffer_to_json(const Buffer& buffer);
Buffer buffer_from_json(const nlohmann::json& j);

}  // namespace ramol
