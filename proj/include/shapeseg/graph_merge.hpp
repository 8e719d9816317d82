#pragma once

// Inference back end: pixels become graph nodes, affinity slots become
// weighted edges, greedy agglomeration merges them into class-agnostic
// instances, and class assignment attaches semantic labels.

#include <absl/container/flat_hash_map.h>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "shapeseg/affinity.hpp"
#include "shapeseg/errors.hpp"
#include "shapeseg/kernel.hpp"
#include "shapeseg/raster.hpp"

namespace shapeseg {

/// Sparse undirected graph over foreground pixels. Node ids follow the
/// row-major order of their pixels; every edge is stored once with u < v.
struct PixelGraph {
  struct Edge {
    std::uint32_t u = 0;
    std::uint32_t v = 0;
    float score = 0.0f;  // 2 * affinity - 1, in [-1, 1]
    auto operator<=>(const Edge&) const = default;
  };

  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> node_pixel;  // node id -> pixel index
  std::vector<Edge> edges;
  std::vector<std::uint32_t> adjacency_offsets;  // CSR over node ids
  std::vector<std::uint32_t> adjacency_edges;    // edge indices

  std::size_t node_count() const noexcept { return node_pixel.size(); }

  std::span<const std::uint32_t> incident(std::uint32_t node) const noexcept {
    return std::span<const std::uint32_t>(adjacency_edges)
        .subspan(adjacency_offsets[node], adjacency_offsets[node + 1] - adjacency_offsets[node]);
  }
};

/// One node per foreground pixel; one edge per valid kernel slot whose two
/// endpoints are foreground. For symmetric kernels the two slots describing
/// the same pixel pair are averaged into a single edge.
inline PixelGraph build_graph(const AffinityMap& aff, const BinaryMask& foreground) {
  if (!foreground.same_shape(aff.width(), aff.height()))
    throw ContractError("foreground mask and affinity map differ in size");

  PixelGraph g;
  g.width = aff.width();
  g.height = aff.height();
  std::vector<std::uint32_t> node_of(foreground.size(), std::numeric_limits<std::uint32_t>::max());
  for (std::size_t i = 0; i < foreground.size(); ++i)
    if (foreground[i]) {
      node_of[i] = static_cast<std::uint32_t>(g.node_pixel.size());
      g.node_pixel.push_back(static_cast<std::uint32_t>(i));
    }

  const auto& offsets = aff.kernel().offsets;
  // Channel of the negated offset, for averaging symmetric pairs.
  std::vector<std::ptrdiff_t> mirror(offsets.size(), -1);
  for (std::size_t c = 0; c < offsets.size(); ++c) {
    const auto it = std::lower_bound(offsets.begin(), offsets.end(), -offsets[c]);
    if (it != offsets.end() && *it == -offsets[c]) mirror[c] = it - offsets.begin();
  }

  const int w = g.width;
  for (const auto pixel : g.node_pixel) {
    const int x = static_cast<int>(pixel % static_cast<std::uint32_t>(w));
    const int y = static_cast<int>(pixel / static_cast<std::uint32_t>(w));
    for (std::size_t c = 0; c < offsets.size(); ++c) {
      const auto o = offsets[c];
      if (!in_half_plane(o) && mirror[c] >= 0) continue;  // handled from the other end
      if (!aff.valid(c, x, y)) continue;
      const int nx = x + o.dx, ny = y + o.dy;
      const auto q = foreground.index(nx, ny);
      if (!foreground[q]) continue;
      double value = aff.value(c, x, y);
      if (mirror[c] >= 0 && aff.valid(static_cast<std::size_t>(mirror[c]), nx, ny))
        value = 0.5 * (value + aff.value(static_cast<std::size_t>(mirror[c]), nx, ny));
      auto u = node_of[pixel], v = node_of[q];
      if (u > v) std::swap(u, v);
      g.edges.push_back({u, v, static_cast<float>(2.0 * value - 1.0)});
    }
  }

  g.adjacency_offsets.assign(g.node_count() + 1, 0);
  for (const auto& e : g.edges) {
    ++g.adjacency_offsets[e.u + 1];
    ++g.adjacency_offsets[e.v + 1];
  }
  for (std::size_t i = 1; i < g.adjacency_offsets.size(); ++i) g.adjacency_offsets[i] += g.adjacency_offsets[i - 1];
  g.adjacency_edges.resize(2 * g.edges.size());
  std::vector<std::uint32_t> fill(g.adjacency_offsets.begin(), g.adjacency_offsets.end() - 1);
  for (std::uint32_t i = 0; i < g.edges.size(); ++i) {
    g.adjacency_edges[fill[g.edges[i].u]++] = i;
    g.adjacency_edges[fill[g.edges[i].v]++] = i;
  }
  return g;
}

/// Instance map plus a confidence in [0, 1] per instance; ids run 1..K.
struct SegmentationResult {
  InstanceMap instance_map;
  std::map<InstanceId, double> confidences;
};

struct MergeOptions {
  /// Merge while the best mean edge score exceeds this value. 0 corresponds
  /// to affinity 0.5.
  double merge_threshold = 0.0;
  /// Final supernodes smaller than this become background.
  std::size_t min_instance_px = 16;
  /// Queue order uses sum / (count + prior_count): pairs backed by many
  /// pixel pairs go before equally scored pairs backed by few. 0 orders by
  /// the plain mean. The merge test always uses the plain mean.
  double prior_count = 1.0;
};

namespace detail {

struct EdgeAggregate {
  double sum = 0.0;
  std::uint32_t count = 0;
  double mean() const noexcept { return sum / count; }
};

struct QueueEntry {
  float priority;
  std::uint32_t ta;  // supernode ids, ta < tb
  std::uint32_t tb;
  std::uint32_t count;  // aggregate count when pushed; stale if it changed
};

/// Highest priority first; ties go to the smallest supernode id pair.
inline bool pops_before(const QueueEntry& x, const QueueEntry& y) noexcept {
  if (x.priority != y.priority) return x.priority > y.priority;
  if (x.ta != y.ta) return x.ta < y.ta;
  return x.tb < y.tb;
}

/// Four-ary heap; a node's children share one cache line.
class MergeQueue {
 public:
  explicit MergeQueue(std::vector<QueueEntry> items) : v_(std::move(items)) {
    if (v_.size() > 1)
      for (std::size_t i = (v_.size() - 2) / 4 + 1; i-- > 0;) sift_down(i);
  }
  bool empty() const noexcept { return v_.empty(); }
  const QueueEntry& top() const noexcept { return v_.front(); }
  void push(const QueueEntry& e) {
    v_.push_back(e);
    sift_up(v_.size() - 1);
  }
  void pop() {
    v_.front() = v_.back();
    v_.pop_back();
    if (!v_.empty()) sift_down(0);
  }

 private:
  void sift_up(std::size_t i) {
    const QueueEntry x = v_[i];
    while (i > 0) {
      const std::size_t p = (i - 1) / 4;
      if (!pops_before(x, v_[p])) break;
      v_[i] = v_[p];
      i = p;
    }
    v_[i] = x;
  }
  void sift_down(std::size_t i) {
    const QueueEntry x = v_[i];
    const std::size_t n = v_.size();
    for (;;) {
      const std::size_t c = 4 * i + 1;
      if (c >= n) break;
      std::size_t best = c;
      for (std::size_t j = c + 1; j < std::min(c + 4, n); ++j)
        if (pops_before(v_[j], v_[best])) best = j;
      if (!pops_before(v_[best], x)) break;
      v_[i] = v_[best];
      i = best;
    }
    v_[i] = x;
  }

  std::vector<QueueEntry> v_;
};

}  // namespace detail

/// Greedy mean-linkage agglomeration with lazy priority-queue invalidation.
///
/// Every supernode keeps, per neighboring supernode, the summed score and
/// the number of pixel pairs between them. The best edge is popped; if its
/// mean beats the threshold its endpoints merge and their aggregates
/// combine. Pixels carry ids 0..n-1 and every merge product gets the next
/// unused id, so among equal priorities the pairs of older, smaller
/// supernodes go first. Stale queue entries are recognized by their pair
/// count and supernode ids. The result carries class 1 for every instance;
/// class_assign replaces it.
///
/// Confidence of a merged instance is (m + 1) / 2 where m is the mean score
/// over all pixel pairs absorbed by its merges; a never-merged supernode
/// gets min(1, size / min_instance_px).
inline SegmentationResult graph_merge(const PixelGraph& graph, const MergeOptions& opt = {}) {
  using detail::EdgeAggregate;
  const auto n = static_cast<std::uint32_t>(graph.node_count());

  std::vector<absl::flat_hash_map<std::uint32_t, EdgeAggregate>> adj(n);
  for (std::uint32_t u = 0; u < n; ++u) adj[u].reserve(graph.incident(u).size());
  for (const auto& e : graph.edges) {
    auto& fwd = adj[e.u][e.v];
    fwd.sum += e.score;
    fwd.count += 1;
    adj[e.v][e.u] = fwd;
  }

  std::vector<std::uint32_t> parent(n);
  for (std::uint32_t i = 0; i < n; ++i) parent[i] = i;
  std::vector<std::uint32_t> size(n, 1);
  std::vector<double> internal_sum(n, 0.0);
  std::vector<std::uint64_t> internal_count(n, 0);

  // Supernode ids: pixels are 0..n-1, merge products n, n+1, ...
  std::vector<std::uint32_t> node_id(n);
  std::iota(node_id.begin(), node_id.end(), 0u);
  std::vector<std::uint32_t> slot_of(n);
  std::iota(slot_of.begin(), slot_of.end(), 0u);
  slot_of.reserve(2 * static_cast<std::size_t>(n));

  // Pairs whose mean cannot pass the threshold are not queued; they are
  // queued again whenever their aggregate changes.
  const double prior = opt.prior_count;
  const auto entry = [&](std::uint32_t x, std::uint32_t y, const EdgeAggregate& agg) {
    auto tx = node_id[x], ty = node_id[y];
    if (tx > ty) std::swap(tx, ty);
    return detail::QueueEntry{static_cast<float>(agg.sum / (agg.count + prior)), tx, ty, agg.count};
  };
  std::vector<detail::QueueEntry> initial;
  initial.reserve(graph.edges.size());
  for (const auto& e : graph.edges)
    if (e.score > opt.merge_threshold) initial.push_back(entry(e.u, e.v, {e.score, 1}));
  detail::MergeQueue queue(std::move(initial));
  const auto push = [&](std::uint32_t x, std::uint32_t y, const EdgeAggregate& agg) {
    if (agg.mean() > opt.merge_threshold) queue.push(entry(x, y, agg));
  };

  while (!queue.empty()) {
    const auto top = queue.top();
    queue.pop();
    const auto a = slot_of[top.ta], b = slot_of[top.tb];
    if (parent[a] != a || parent[b] != b) continue;
    const auto it = adj[a].find(b);
    if (it == adj[a].end() || it->second.count != top.count) continue;
    // A survivor's id grew since this entry was queued; requeue under the
    // current ids, which can only sort later.
    if (node_id[a] != top.ta || node_id[b] != top.tb) {
      push(a, b, it->second);
      continue;
    }
    // The slot with the larger aggregate table survives.
    auto keep = a, drop = b;
    if (adj[drop].size() > adj[keep].size()) std::swap(keep, drop);
    const EdgeAggregate link = it->second;

    parent[drop] = keep;
    node_id[keep] = static_cast<std::uint32_t>(slot_of.size());
    slot_of.push_back(keep);
    size[keep] += size[drop];
    internal_sum[keep] += internal_sum[drop] + link.sum;
    internal_count[keep] += internal_count[drop] + link.count;

    adj[keep].erase(drop);
    for (const auto& [other, agg] : adj[drop]) {
      if (other == keep) continue;
      adj[other].erase(drop);
      auto& merged = adj[keep][other];
      merged.sum += agg.sum;
      merged.count += agg.count;
      adj[other][keep] = merged;
      push(keep, other, merged);
    }
    absl::flat_hash_map<std::uint32_t, EdgeAggregate>().swap(adj[drop]);
  }

  const auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  // Number surviving supernodes by their first pixel in row-major order.
  SegmentationResult result;
  result.instance_map = InstanceMap(graph.width, graph.height);
  std::vector<InstanceId> id_of(n, 0);
  std::vector<bool> seen(n, false);
  InstanceId next = 0;
  for (std::uint32_t node = 0; node < n; ++node) {
    const auto root = find(node);
    if (!seen[root]) {
      seen[root] = true;
      if (size[root] >= opt.min_instance_px && size[root] > 0) {
        id_of[root] = ++next;
        double conf;
        if (internal_count[root] > 0) {
          conf = 0.5 * (internal_sum[root] / static_cast<double>(internal_count[root]) + 1.0);
        } else {
          conf = opt.min_instance_px == 0 ? 1.0
                                          : std::min(1.0, static_cast<double>(size[root]) /
                                                              static_cast<double>(opt.min_instance_px));
        }
        result.confidences[next] = std::clamp(conf, 0.0, 1.0);
        result.instance_map.classes[next] = 1;
      }
    }
    if (const auto id = id_of[root]; id != 0) result.instance_map.labels[graph.node_pixel[node]] = id;
  }
  return result;
}

/// Averages the semantic distribution over each instance, assigns the best
/// non-background class, and drops instances whose overall argmax is
/// background. Confidence becomes instance confidence x mean class
/// probability. Surviving instances are renumbered 1..K in their original
/// order.
inline SegmentationResult class_assign(const SegmentationResult& seg, const SemanticMap& semantic) {
  const auto& map = seg.instance_map;
  if (semantic.width() != map.width() || semantic.height() != map.height())
    throw ContractError("semantic map and instance map differ in size");
  const auto channels = static_cast<std::size_t>(semantic.channels());
  if (channels < 2) throw ContractError("semantic map has no foreground class");

  std::map<InstanceId, std::vector<double>> sums;
  std::map<InstanceId, std::size_t> counts;
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    const auto id = map.labels[i];
    if (id == 0) continue;
    auto& acc = sums[id];
    if (acc.empty()) acc.assign(channels, 0.0);
    const auto p = semantic.at(i);
    for (std::size_t c = 0; c < channels; ++c) acc[c] += p[c];
    ++counts[id];
  }

  SegmentationResult out;
  out.instance_map = InstanceMap(map.width(), map.height());
  std::map<InstanceId, InstanceId> renumber;
  InstanceId next = 0;
  for (const auto& [id, acc] : sums) {
    const auto best_fg = static_cast<std::size_t>(std::max_element(acc.begin() + 1, acc.end()) - acc.begin());
    if (acc[0] > acc[best_fg]) continue;
    renumber[id] = ++next;
    const double mean_prob = acc[best_fg] / static_cast<double>(counts[id]);
    const auto conf_it = seg.confidences.find(id);
    const double base = conf_it == seg.confidences.end() ? 1.0 : conf_it->second;
    out.instance_map.classes[next] = static_cast<ClassId>(best_fg);
    out.confidences[next] = std::clamp(base * mean_prob, 0.0, 1.0);
  }
  for (std::size_t i = 0; i < map.labels.size(); ++i)
    if (const auto it = renumber.find(map.labels[i]); it != renumber.end()) out.instance_map.labels[i] = it->second;
  return out;
}

/// build_graph -> graph_merge -> class_assign, with the foreground taken as
/// the pixels whose semantic argmax is not background.
inline SegmentationResult segment(const AffinityMap& aff, const SemanticMap& semantic, const MergeOptions& opt = {}) {
  if (semantic.width() != aff.width() || semantic.height() != aff.height())
    throw ContractError("semantic map and affinity map differ in size");
  const auto graph = build_graph(aff, semantic.foreground());
  return class_assign(graph_merge(graph, opt), semantic);
}

}  // namespace shapeseg
