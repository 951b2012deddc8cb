#include "ramol/memory.hpp"

#include "ramol/error.hpp"

#include <algorithm>
#include <cmath>

namespace ramol {

double NeighbourSet::weight_sum() const {
  double s = 0.0;
  for (const auto& n : items) s += n.w;
  return s;
}

Buffer::Buffer(std::size_t capacity, std::size_t feature_dim, std::size_t embedding_dim)
    : capacity_(capacity), feature_dim_(feature_dim), embedding_dim_(embedding_dim) {
  if (capacity == 0) throw ConfigError("buffer capacity must be positive");
  features_.resize(static_cast<Eigen::Index>(feature_dim), static_cast<Eigen::Index>(capacity));
  embeddings_.resize(static_cast<Eigen::Index>(embedding_dim), static_cast<Eigen::Index>(capacity));
  labels_.resize(capacity);
  steps_.resize(capacity);
}

void Buffer::insert(const MemoryEntry& e) {
  if (static_cast<std::size_t>(e.x.size()) != feature_dim_ || static_cast<std::size_t>(e.h.size()) != embedding_dim_) {
    throw DimensionError("buffer insert: entry dimensions do not match the buffer");
  }
  if (size_ > 0 && e.t <= steps_[slot(size_ - 1)]) {
    throw ConfigError("buffer insert: timestamps must be strictly increasing");
  }
  std::size_t s;
  if (size_ < capacity_) {
    s = slot(size_);
    ++size_;
  } else {
    s = head_;
    head_ = (head_ + 1) % capacity_;
  }
  const auto col = static_cast<Eigen::Index>(s);
  features_.col(col) = e.x;
  embeddings_.col(col) = e.h;
  labels_[s] = e.y;
  steps_[s] = e.t;
}

MemoryEntry Buffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("buffer index out of range");
  const auto s = slot(i);
  const auto col = static_cast<Eigen::Index>(s);
  return MemoryEntry{features_.col(col), labels_[s], embeddings_.col(col), steps_[s]};
}

std::vector<MemoryEntry> Buffer::entries() const {
  std::vector<MemoryEntry> out;
  out.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) out.push_back(at(i));
  return out;
}

NeighbourSet Buffer::retrieve(const Vector& query, std::size_t t_now, std::size_t k,
                              std::optional<std::size_t> horizon) const {
  if (k == 0) throw ConfigError("retrieve: K must be at least 1");
  if (static_cast<std::size_t>(query.size()) != embedding_dim_) {
    throw DimensionError("retrieve: query dimension does not match buffer embeddings");
  }
  struct Candidate {
    double d;
    std::size_t t;
    std::size_t slot;
  };
  std::vector<Candidate> cand;
  cand.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) {
    const auto s = slot(i);
    const auto t = steps_[s];
    if (horizon && (t > t_now || t_now - t > *horizon)) continue;
    const double d = (embeddings_.col(static_cast<Eigen::Index>(s)) - query).norm();
    cand.push_back({d, t, s});
  }
  const auto closer = [](const Candidate& a, const Candidate& b) {
    if (a.d != b.d) return a.d < b.d;
    return a.t > b.t;
  };
  const auto take = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), closer);

  NeighbourSet ns;
  ns.items.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const auto col = static_cast<Eigen::Index>(cand[i].slot);
    Neighbour n;
    n.entry = MemoryEntry{features_.col(col), labels_[cand[i].slot], embeddings_.col(col), cand[i].t};
    n.d = cand[i].d;
    ns.items.push_back(std::move(n));
  }
  return ns;
}

NeighbourSet similarity_weights(NeighbourSet ns, double tau) {
  if (ns.empty()) throw ConfigError("similarity_weights: empty neighbour set");
  if (!(tau > 0.0)) throw ConfigError("similarity_weights: tau must be positive");
  double total = 0.0;
  for (auto& n : ns.items) {
    n.s = std::exp(-n.d / tau);
    total += n.s;
  }
  if (total > 0.0) {
    for (auto& n : ns.items) n.w = n.s / total;
  } else {
    // Every similarity underflowed; the limit of the normalised weights puts
    // all mass on the nearest distance.
    const double dmin = ns.items.front().d;
    std::size_t ties = 0;
    for (const auto& n : ns.items) ties += (n.d == dmin);
    for (auto& n : ns.items) n.w = n.d == dmin ? 1.0 / static_cast<double>(ties) : 0.0;
  }
  return ns;
}

NeighbourSet uniform_weights(NeighbourSet ns) {
  const double w = ns.empty() ? 0.0 : 1.0 / static_cast<double>(ns.size());
  for (auto& n : ns.items) {
    n.s = 1.0;
    n.w = w;
  }
  return ns;
}

NeighbourSet similarity_gate(NeighbourSet ns, double rho, bool renormalize) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("similarity_gate: rho must lie in [0, 1]");
  if (ns.empty()) return ns;
  double wmax = 0.0;
  for (const auto& n : ns.items) wmax = std::max(wmax, n.w);
  const double cut = rho * wmax;
  std::erase_if(ns.items, [cut](const Neighbour& n) { return n.w < cut; });
  if (renormalize) {
    const double total = ns.weight_sum();
    for (auto& n : ns.items) n.w /= total;
  }
  return ns;
}

void RunningMedian::push(double v) {
  if (low_.empty() || v <= low_.top()) {
    low_.push(v);
  } else {
    high_.push(v);
  }
  if (low_.size() > high_.size() + 1) {
    high_.push(low_.top());
    low_.pop();
  } else if (high_.size() > low_.size()) {
    low_.push(high_.top());
    high_.pop();
  }
}

std::optional<double> RunningMedian::median() const {
  if (low_.empty()) return std::nullopt;
  if (low_.size() > high_.size()) return low_.top();
  return 0.5 * (low_.top() + high_.top());
}

nlohmann::json buffer_to_json(const Buffer& buffer) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : buffer.entries()) {
    entries.push_back({{"t", e.t},
                       {"y", e.y},
                       {"x", std::vector<double>(e.x.data(), e.x.data() + e.x.size())},
                       {"h", std::vector<double>(e.h.data(), e.h.data() + e.h.size())}});
  }
  return {{"format", "ramol-buffer"},
          {"version", 1},
          {"capacity", buffer.capacity()},
          {"feature_dim", buffer.feature_dim()},
          {"embedding_dim", buffer.embedding_dim()},
          {"entries", std::move(entries)}};
}

Buffer buffer_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "ramol-buffer") throw DataError("not a ramol-buffer snapshot");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported buffer snapshot version");
    Buffer b(j.at("capacity").get<std::size_t>(), j.at("feature_dim").get<std::size_t>(),
             j.at("embedding_dim").get<std::size_t>());
    for (const auto& e : j.at("entries")) {
      const auto x = e.at("x").get<std::vector<double>>();
      const auto h = e.at("h").get<std::vector<double>>();
      b.insert(MemoryEntry{Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size())),
                           e.at("y").get<int>(),
                           Eigen::Map<const Vector>(h.data(), static_cast<Eigen::Index>(h.size())),
                           e.at("t").get<std::size_t>()});
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("buffer snapshot: ") + e.what());
  }
}

}  // namespace ramol
