#include "kpose/matchgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "kpose/core/error.hpp"
#include "kpose/core/geometry.hpp"
#include "kpose/core/io.hpp"
#include "kpose/core/kd_tree.hpp"
#include "kpose/core/random.hpp"

namespace kpose {
namespace {

constexpr int kFolds[] = {2, 3, 4, 5, 6, 8, 12};
constexpr double kSymmetryTolerance = 0.7;  // mean NN error in units of spacing
constexpr Index kNormalAxisCandidates = 32;

Index argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Index best = 0;
  for (Index j = 1; j < row.size(); ++j)
    if (row(j) > row(best)) best = j;
  return best;
}

bool same_rotation(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return (a - b).cwiseAbs().maxCoeff() < 1e-6;
}

void add_axis(std::vector<Eigen::Vector3d>& axes, const Eigen::Vector3d& v) {
  const double n = v.norm();
  if (!(n > 1e-9)) return;
  const Eigen::Vector3d a = v / n;
  for (const auto& b : axes)
    if (std::abs(a.dot(b)) > std::cos(5.0 * M_PI / 180.0)) return;
  axes.push_back(a);
}

}  // namespace

void OracleSpec::validate() const {
  if (!(seg_accuracy > 0 && seg_accuracy <= 1)) throw InvalidArgument("seg_accuracy must be in (0,1]");
  if (!(keypoint_accuracy > 0 && keypoint_accuracy <= 1))
    throw InvalidArgument("keypoint_accuracy must be in (0,1]");
  if (!(temperature > 0)) throw InvalidArgument("temperature must be positive");
}

SymmetryGroup detect_symmetries(const ObjectModel& model) {
  if (model.cloud.empty()) throw InvalidArgument("empty model");
  SymmetryGroup group;
  const auto& pts = model.cloud.points;
  group.center = centroid(model.cloud);
  if (pts.cols() < 4) return group;
  const double spacing = mean_spacing(model.cloud);
  const Eigen::Matrix3Xd q = pts.colwise() - group.center;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(q * q.transpose());

  std::vector<Eigen::Vector3d> axes;
  for (int a = 2; a >= 0; --a) add_axis(axes, es.eigenvectors().col(a));
  if (model.cloud.has_normals()) {
    const Index m = std::min<Index>(kNormalAxisCandidates, model.keypoint_count());
    for (Index j = 0; j < m; ++j)
      add_axis(axes, model.cloud.normals.col(model.keypoint_indices[static_cast<std::size_t>(j)]));
  }

  const KdTreed tree(pts);
  std::vector<Eigen::Matrix3d> generators;
  for (const auto& axis : axes) {
    for (int n : kFolds) {
      const Eigen::Matrix3d r = Eigen::AngleAxisd(2.0 * M_PI / n, axis).toRotationMatrix();
      const Eigen::Matrix3Xd moved = (r * q).colwise() + group.center;
      double err = 0;
      const double budget = kSymmetryTolerance * spacing * static_cast<double>(pts.cols());
      for (Index i = 0; i < moved.cols() && err < budget; ++i)
        err += std::sqrt(tree.nearest(moved.col(i)).squared_distance);
      if (err < budget) generators.push_back(r);
    }
  }

  for (std::size_t g = 0; g < group.rotations.size(); ++g) {
    for (const auto& h : generators) {
      if (group.order() >= kMaxSymmetryOrder) return group;
      const Eigen::Matrix3d c = h * group.rotations[g];
      const bool known = std::any_of(group.rotations.begin(), group.rotations.end(),
                                     [&](const Eigen::Matrix3d& e) { return same_rotation(e, c); });
      if (!known) group.rotations.push_back(c);
    }
  }
  return group;
}

OracleTable OracleTable::build(const ObjectModel& model) {
  return build(model, detect_symmetries(model));
}

OracleTable OracleTable::build(const ObjectModel& model, SymmetryGroup symmetry) {
  if (model.cloud.empty() || model.keypoint_count() == 0) throw InvalidArgument("empty model");
  OracleTable t;
  t.keypoints = model.keypoints();
  t.diameter = model.diameter;
  t.symmetry = std::move(symmetry);
  const Index k = t.keypoints.cols();
  t.orbit.resize(3, t.symmetry.order() * k);
  const Eigen::Matrix3Xd local = t.keypoints.colwise() - t.symmetry.center;
  for (Index g = 0; g < t.symmetry.order(); ++g)
    t.orbit.middleCols(g * k, k) =
        (t.symmetry.rotations[static_cast<std::size_t>(g)] * local).colwise() + t.symmetry.center;
  return t;
}

Eigen::VectorXd OracleTable::distances(const Eigen::Vector3d& x) const {
  const Index k = keypoint_count();
  Eigen::VectorXd d = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::infinity());
  for (Index c = 0; c < orbit.cols(); ++c) {
    const double s = (orbit.col(c) - x).squaredNorm();
    double& slot = d(c % k);
    slot = std::min(slot, s);
  }
  return d.cwiseSqrt();
}

Index OracleTable::nearest_keypoint(const Eigen::Vector3d& x) const {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < keypoints.cols(); ++j) {
    const double s = (keypoints.col(j) - x).squaredNorm();
    if (s < best_d) {
      best_d = s;
      best = j;
    }
  }
  return best;
}

Index OracleTable::true_keypoint(const Eigen::Vector3d& x) const {
  Index best = 0;
  distances(x).minCoeff(&best);
  return best;
}

Eigen::VectorXd score_row(const Eigen::VectorXd& distances, double temperature, double diameter) {
  const double scale = temperature * diameter;
  if (!(scale > 0)) throw InvalidArgument("temperature * diameter must be positive");
  const double dmin = distances.minCoeff();
  Eigen::VectorXd e = (-(distances.array() - dmin) / scale).exp().matrix();
  return e / e.sum();
}

MatchPrediction oracle_predict(const PointCloudd& scene, const ObjectModel& model,
                               const RigidTransformd& gt_pose,
                               const std::vector<bool>& instance_mask, const OracleSpec& spec) {
  return oracle_predict(scene, OracleTable::build(model), gt_pose, instance_mask, spec);
}

MatchPrediction oracle_predict(const PointCloudd& scene, const OracleTable& table,
                               const RigidTransformd& gt_pose,
                               const std::vector<bool>& instance_mask, const OracleSpec& spec) {
  spec.validate();
  if (scene.empty()) throw InvalidArgument("empty scene");
  if (table.keypoint_count() == 0) throw InvalidArgument("empty model");
  if (static_cast<Index>(instance_mask.size()) != scene.size())
    throw InvalidArgument("mask length does not match scene size");
  if (!gt_pose.is_valid()) throw InvalidArgument("invalid ground-truth pose");

  const Index n = scene.size();
  const Index k = table.keypoint_count();
  MatchPrediction pred;
  pred.seg_prob.resize(n);
  pred.keypoint_scores.resize(n, k);

  // Row that a point sitting exactly on keypoint r would get.
  Eigen::MatrixXd recentred(k, k);
  for (Index r = 0; r < k; ++r)
    recentred.row(r) = score_row(table.distances(table.keypoints.col(r)), spec.temperature,
                                 table.diameter).transpose();

  const RigidTransformd to_model = gt_pose.inverse();
  Index masked = 0, hits = 0;
  for (Index i = 0; i < n; ++i) {
    if (!instance_mask[static_cast<std::size_t>(i)]) continue;
    const Eigen::VectorXd d = table.distances(to_model.apply_point(scene.point(i)));
    Index label = 0;
    d.minCoeff(&label);
    pred.keypoint_scores.row(i) = score_row(d, spec.temperature, table.diameter).transpose();
    ++masked;
    hits += argmax_row(pred.keypoint_scores.row(i)) == label;
  }

  // Corruption rate chosen so the expected top-1 accuracy hits the target
  // given how often clean rows are already right.
  const double chance = 1.0 / static_cast<double>(k);
  const double a0 = masked > 0 ? static_cast<double>(hits) / static_cast<double>(masked) : 1.0;
  double p = 0;
  if (a0 > chance) p = std::clamp((a0 - spec.keypoint_accuracy) / (a0 - chance), 0.0, 1.0);

  for (Index i = 0; i < n; ++i) {
    auto rng = make_rng(spec.seed, static_cast<std::uint64_t>(i));
    const bool label = instance_mask[static_cast<std::size_t>(i)];
    const bool flip = uniform_unit(rng) >= spec.seg_accuracy;
    const double u = uniform_unit(rng);
    const bool corrupt = uniform_unit(rng) < p;
    const Index r = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(k)));
    const bool positive = label != flip;
    pred.seg_prob(i) = positive ? 0.5 + 0.5 * u : 0.5 * u;
    if (!label || corrupt) pred.keypoint_scores.row(i) = recentred.row(r);
  }
  return pred;
}

CorrespondenceSet extract_correspondences(const MatchPrediction& pred, double vote_threshold) {
  if (!(vote_threshold > 0 && vote_threshold <= 1))
    throw InvalidArgument("vote_threshold must be in (0,1]");
  CorrespondenceSet out;
  for (Index i = 0; i < pred.size(); ++i) {
    if (!(pred.seg_prob(i) >= 0.5)) continue;
    const auto row = pred.keypoint_scores.row(i);
    const double cut = vote_threshold * row.maxCoeff();
    for (Index j = 0; j < row.size(); ++j)
      if (row(j) >= cut) out.pairs.push_back({i, j, row(j)});
  }
  return out;
}

double keypoint_top1_accuracy(const MatchPrediction& pred, const std::vector<Index>& true_keypoint,
                              const std::vector<bool>& mask) {
  if (static_cast<Index>(mask.size()) != pred.size() ||
      static_cast<Index>(true_keypoint.size()) != pred.size())
    throw InvalidArgument("size mismatch");
  Index masked = 0, hits = 0;
  for (Index i = 0; i < pred.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    ++masked;
    hits += argmax_row(pred.keypoint_scores.row(i)) == true_keypoint[static_cast<std::size_t>(i)];
  }
  if (masked == 0) throw InvalidArgument("no masked rows");
  return static_cast<double>(hits) / static_cast<double>(masked);
}

void write_prediction_csv(std::ostream& out, const MatchPrediction& pred) {
  out << "scene_index,seg_prob";
  for (Index j = 0; j < pred.keypoint_count(); ++j) out << ",k" << j;
  out << '\n';
  for (Index i = 0; i < pred.size(); ++i) {
    out << i << ',' << format_real(pred.seg_prob(i));
    for (Index j = 0; j < pred.keypoint_count(); ++j)
      out << ',' << format_real(pred.keypoint_scores(i, j));
    out << '\n';
  }
}

void write_correspondence_csv(std::ostream& out, const CorrespondenceSet& corr) {
  out << "scene_index,keypoint_index,weight\n";
  for (const auto& c : corr.pairs) out << c.scene << ',' << c.target << ',' << format_real(c.weight) << '\n';
}

}  // namespace kpose
