#pragma once

#include <vector>

#include "kpose/core/point_cloud.hpp"

namespace kpose {

/// A scene point asserted to coincide with a target point under the true
/// pose. The target is a keypoint index (learned-matching path) or an
/// object cloud index (descriptor path), depending on the producer.
struct Correspondence {
  Index scene = 0;
  Index target = 0;
  double weight = 1.0;

  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

/// A scene index may appear several times (multi-vote).
struct CorrespondenceSet {
  std::vector<Correspondence> pairs;

  Index size() const { return static_cast<Index>(pairs.size()); }
  bool empty() const { return pairs.empty(); }
};

}  // namespace kpose
