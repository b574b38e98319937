#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "kpose/core/error.hpp"
#include "kpose/core/point_cloud.hpp"

namespace kpose {

template <typename Scalar>
struct Neighbor {
  Index index;
  Scalar squared_distance;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.squared_distance < b.squared_distance ||
           (a.squared_distance == b.squared_distance && a.index < b.index);
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exact k-d tree over a snapshot of 3D points. Results are ordered by
/// (squared distance, index), so equidistant points resolve to the lower
/// index and every query agrees with a brute-force scan. Queries are const
/// and safe to run concurrently.
template <typename Scalar_>
class KdTree {
 public:
  using Scalar = Scalar_;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  using NeighborT = Neighbor<Scalar>;

  explicit KdTree(Points3<Scalar> points, Index leaf_size = 12)
      : points_(std::move(points)), leaf_size_(std::max<Index>(1, leaf_size)) {
    if (points_.cols() == 0) throw InvalidArgument("empty input");
    order_.resize(static_cast<std::size_t>(points_.cols()));
    std::iota(order_.begin(), order_.end(), Index{0});
    nodes_.reserve(static_cast<std::size_t>(2 * points_.cols() / leaf_size_ + 1));
    build(0, points_.cols());
  }

  explicit KdTree(const PointCloud<Scalar>& cloud, Index leaf_size = 12)
      : KdTree(cloud.points, leaf_size) {}

  Index size() const { return points_.cols(); }
  const Points3<Scalar>& points() const { return points_; }

  /// The k nearest points, nearest first (fewer if the tree is smaller).
  std::vector<NeighborT> knn(const Vector3& q, Index k) const {
    std::vector<NeighborT> best;
    if (k <= 0) return best;
    best.reserve(static_cast<std::size_t>(k) + 1);
    knn_recurse(0, q, std::min(k, size()), best);
    return best;
  }

  NeighborT nearest(const Vector3& q) const { return knn(q, 1).front(); }

  /// Nearest point with squared distance <= max_sq, or index -1 if none.
  NeighborT nearest_within(const Vector3& q, Scalar max_sq) const {
    NeighborT best{-1, max_sq};
    nearest_recurse(0, q, best);
    return best;
  }

  /// All points with distance <= radius, nearest first.
  std::vector<NeighborT> radius(const Vector3& q, Scalar r) const {
    std::vector<NeighborT> out;
    if (r < Scalar(0)) return out;
    radius_recurse(0, q, r * r, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    Index begin, end;
    int axis = -1;  // -1 marks a leaf
    Scalar split = 0;
    Index left = -1, right = -1;
  };

  Index build(Index begin, Index end) {
    const Index id = static_cast<Index>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size_) return id;

    Vector3 lo = Vector3::Constant(std::numeric_limits<Scalar>::max());
    Vector3 hi = Vector3::Constant(std::numeric_limits<Scalar>::lowest());
    for (Index i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_.col(order_[i]));
      hi = hi.cwiseMax(points_.col(order_[i]));
    }
    int axis;
    (hi - lo).maxCoeff(&axis);
    if (hi(axis) == lo(axis)) return id;  // all coincident: keep as leaf

    const Index mid = begin + (end - begin) / 2;
    auto first = order_.begin() + begin;
    std::nth_element(first, order_.begin() + mid, order_.begin() + end,
                     [&](Index a, Index b) {
                       return points_(axis, a) < points_(axis, b);
                     });
    const Scalar split = points_(axis, order_[mid]);
    const Index left = build(begin, mid);
    const Index right = build(mid, end);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  void consider(const Vector3& q, Index idx, Index k,
                std::vector<NeighborT>& best) const {
    const NeighborT cand{idx, (points_.col(idx) - q).squaredNorm()};
    if (static_cast<Index>(best.size()) == k && !(cand < best.back())) return;
    best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
    if (static_cast<Index>(best.size()) > k) best.pop_back();
  }

  void knn_recurse(Index id, const Vector3& q, Index k,
                   std::vector<NeighborT>& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.axis < 0) {
      for (Index i = node.begin; i < node.end; ++i) consider(q, order_[i], k, best);
      return;
    }
    const Scalar diff = q(node.axis) - node.split;
    const Index near = diff < 0 ? node.left : node.right;
    const Index far = diff < 0 ? node.right : node.left;
    knn_recurse(near, q, k, best);
    // <= keeps equidistant candidates reachable for the index tie-break.
    if (static_cast<Index>(best.size()) < k ||
        diff * diff <= best.back().squared_distance)
      knn_recurse(far, q, k, best);
  }

  void nearest_recurse(Index id, const Vector3& q, NeighborT& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.axis < 0) {
      for (Index i = node.begin; i < node.end; ++i) {
        const Index idx = order_[i];
        const Scalar d2 = (points_.col(idx) - q).squaredNorm();
        if (d2 < best.squared_distance ||
            (d2 == best.squared_distance && (best.index < 0 || idx < best.index)))
          best = {idx, d2};
      }
      return;
    }
    const Scalar diff = q(node.axis) - node.split;
    nearest_recurse(diff < 0 ? node.left : node.right, q, best);
    if (diff * diff <= best.squared_distance)
      nearest_recurse(diff < 0 ? node.right : node.left, q, best);
  }

  void radius_recurse(Index id, const Vector3& q, Scalar r2,
                      std::vector<NeighborT>& out) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.axis < 0) {
      for (Index i = node.begin; i < node.end; ++i) {
        const Index idx = order_[i];
        const Scalar d2 = (points_.col(idx) - q).squaredNorm();
        if (d2 <= r2) out.push_back({idx, d2});
      }
      return;
    }
    const Scalar diff = q(node.axis) - node.split;
    if (diff <= 0 || diff * diff <= r2) radius_recurse(node.left, q, r2, out);
    if (diff >= 0 || diff * diff <= r2) radius_recurse(node.right, q, r2, out);
  }

  Points3<Scalar> points_;
  Index leaf_size_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

using KdTreed = KdTree<double>;

}  // namespace kpose
