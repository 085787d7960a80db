#pragma once

#include "rectilab/types.hpp"

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

namespace rectilab {

/// Bounding-volume hierarchy over axis-aligned boxes. Items are referred to by
/// their index in the construction vector. Point clouds are boxes of zero
/// extent. Queries are const and safe to run concurrently.
class BoxTree {
 public:
  BoxTree() = default;

  explicit BoxTree(std::vector<Box> boxes, std::size_t leaf_size = 8)
      : boxes_(std::move(boxes)), leaf_size_(leaf_size) {
    order_.resize(boxes_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!boxes_.empty()) build(0, boxes_.size());
  }

  std::size_t size() const { return boxes_.size(); }
  bool empty() const { return boxes_.empty(); }
  const Box& box(std::size_t i) const { return boxes_[i]; }
  const Box& bounds() const { return nodes_.front().box; }

  /// Calls f(i) for every item whose box intersects q.
  template <typename F>
  void query(const Box& q, F&& f) const {
    if (nodes_.empty()) return;
    visit(0, [&](const Box& b) { return b.intersects(q); }, f);
  }

  /// Calls f(i) for every item whose box comes within distance r of c.
  template <typename F>
  void query_ball(const Point& c, double r, F&& f) const {
    if (nodes_.empty()) return;
    visit(0, [&](const Box& b) { return b.distance(c) <= r; }, f);
  }

  /// Best-first minimisation of exact(i) over items, pruned by the lower bound
  /// lower(box) <= exact(i) for every item inside box. Ties in exact value are
  /// resolved by prefer(i, j) == true meaning i wins. Returns (index, value);
  /// index == size() when the tree is empty.
  template <typename Lower, typename Exact, typename Prefer>
  std::pair<std::size_t, double> minimize(Lower&& lower, Exact&& exact, Prefer&& prefer) const {
    std::size_t best = boxes_.size();
    double best_val = kInf;
    if (nodes_.empty()) return {best, best_val};
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    heap.emplace(lower(nodes_[0].box), 0);
    while (!heap.empty()) {
      auto [lb, ni] = heap.top();
      heap.pop();
      if (lb > best_val) break;
      const Node& n = nodes_[ni];
      if (n.left == kNone) {
        for (std::size_t k = n.begin; k < n.end; ++k) {
          std::size_t i = order_[k];
          if (lower(boxes_[i]) > best_val) continue;
          double v = exact(i);
          if (v < best_val || (v == best_val && best != boxes_.size() && prefer(i, best))) {
            best_val = v;
            best = i;
          }
        }
      } else {
        for (std::size_t c : {n.left, n.right}) {
          double l = lower(nodes_[c].box);
          if (l <= best_val) heap.emplace(l, c);
        }
      }
    }
    return {best, best_val};
  }

  template <typename Lower, typename Exact>
  std::pair<std::size_t, double> minimize(Lower&& lower, Exact&& exact) const {
    return minimize(lower, exact, [](std::size_t i, std::size_t j) { return i < j; });
  }

  /// Nearest item to x under an exact item distance.
  template <typename Exact>
  std::pair<std::size_t, double> nearest(const Point& x, Exact&& exact) const {
    return minimize([&](const Box& b) { return b.distance(x); }, exact);
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Node {
    Box box;
    std::size_t begin = 0, end = 0;
    std::size_t left = kNone, right = kNone;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    std::size_t idx = nodes_.size();
    nodes_.push_back({});
    Box b = boxes_[order_[begin]];
    for (std::size_t k = begin + 1; k < end; ++k) b.expand(boxes_[order_[k]]);
    nodes_[idx].box = b;
    nodes_[idx].begin = begin;
    nodes_[idx].end = end;
    if (end - begin <= leaf_size_) return idx;

    Point ext = b.extent();
    Eigen::Index axis = 0;
    ext.maxCoeff(&axis);
    std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t i, std::size_t j) {
                       double ci = boxes_[i].lo(axis) + boxes_[i].hi(axis);
                       double cj = boxes_[j].lo(axis) + boxes_[j].hi(axis);
                       return ci < cj || (ci == cj && i < j);
                     });
    std::size_t l = build(begin, mid);
    std::size_t r = build(mid, end);
    nodes_[idx].left = l;
    nodes_[idx].right = r;
    return idx;
  }

  template <typename Pred, typename F>
  void visit(std::size_t ni, Pred&& pred, F& f) const {
    const Node& n = nodes_[ni];
    if (!pred(n.box)) return;
    if (n.left == kNone) {
      for (std::size_t k = n.begin; k < n.end; ++k)
        if (pred(boxes_[order_[k]])) f(order_[k]);
      return;
    }
    visit(n.left, pred, f);
    visit(n.right, pred, f);
  }

  std::vector<Box> boxes_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 8;
};

}  // namespace rectilab
