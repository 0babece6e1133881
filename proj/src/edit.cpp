// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>

#include "spgs/io.hpp"

namespace spgs {

namespace {

using json = nlohmann::json;

// Logit for neighbor slots that exist only to keep K columns; never the argmax.
constexpr double kFillerLogit = -30.0;

void require_superpoints(const SpgsModel& m) {
  if (!m.superpoints) throw Error("model has no superpoints");
}

void check_ids(const SpgsModel& m, const std::vector<int>& ids) {
  for (int j : ids)
    if (j < 0 || j >= m.superpoints->count()) throw Error("unknown superpoint id " + std::to_string(j));
}

// Gives every row exactly K distinct neighbors, topping up with the nearest
// unused superpoints at the filler logit.
void fill_rows(std::vector<std::vector<std::pair<int, double>>>& rows, const Tensor& centers,
               const Tensor& sp_positions, int K, IndexMatrix& neighbors, Tensor& logits) {
  const int P = static_cast<int>(rows.size());
  const int M = static_cast<int>(sp_positions.rows());
  neighbors.resize(P, K);
  logits.resize(P, K);
  for (int i = 0; i < P; ++i) {
    auto& row = rows[i];
    if (static_cast<int>(row.size()) < K) {
      std::vector<std::pair<double, int>> cand;
      for (int j = 0; j < M; ++j) {
        if (std::any_of(row.begin(), row.end(), [&](const auto& s) { return s.first == j; })) continue;
        cand.emplace_back((sp_positions.row(j) - centers.row(i)).squaredNorm(), j);
      }
      std::sort(cand.begin(), cand.end());
      for (std::size_t c = 0; c < cand.size() && static_cast<int>(row.size()) < K; ++c)
        row.emplace_back(cand[c].second, kFillerLogit);
    }
    for (int k = 0; k < K; ++k) {
      neighbors(i, k) = row[k].first;
      logits(i, k) = row[k].second;
    }
  }
}

void ensure_cache(SpgsModel& m) {
  if (m.cache) return;
  if (m.cache_only) throw Error("cache-only model without a deformation cache");
  m.build_cache();
}

std::vector<double> merged_times(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out = a;
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

DeformationCache resample(const DeformationCache& c, const std::vector<double>& times) {
  if (c.times == times) return c;
  DeformationCache out;
  out.times = times;
  for (double t : times) out.motions.push_back(deform_at_time(c, t));
  return out;
}

void pad_sh(GaussianCloud& c, int degree) {
  if (c.sh_degree >= degree) return;
  Tensor sh = Tensor::Zero(c.size(), 3 * sh_coeff_count(degree));
  sh.leftCols(c.sh.cols()) = c.sh;
  c.sh = std::move(sh);
  c.sh_degree = degree;
}

}  // namespace

void delete_superpoints(SpgsModel& model, const std::vector<int>& ids) {
  require_superpoints(model);
  check_ids(model, ids);
  if (ids.empty()) return;
  const SuperpointModel& sp = *model.superpoints;
  const std::set<int> gone(ids.begin(), ids.end());
  const int M = sp.count();
  std::vector<int> new_id(M, -1);
  std::vector<int> keep_sp;
  for (int j = 0; j < M; ++j)
    if (!gone.count(j)) {
      new_id[j] = static_cast<int>(keep_sp.size());
      keep_sp.push_back(j);
    }
  const std::vector<int> assign = model.assignment();
  std::vector<int> keep;
  for (int i = 0; i < model.cloud.size(); ++i)
    if (!gone.count(assign[i])) keep.push_back(i);
  if (keep.empty() || keep_sp.empty()) throw Error("empty scene");

  GaussianCloud cloud = model.cloud.select(keep);
  Tensor positions(static_cast<Eigen::Index>(keep_sp.size()), 3);
  for (std::size_t j = 0; j < keep_sp.size(); ++j) positions.row(j) = sp.positions.row(keep_sp[j]);
  const int K = std::min(sp.k(), static_cast<int>(keep_sp.size()));
  std::vector<std::vector<std::pair<int, double>>> rows(keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r)
    for (int k = 0; k < sp.k(); ++k) {
      const int j = sp.neighbors(keep[r], k);
      if (new_id[j] >= 0) rows[r].emplace_back(new_id[j], sp.logits(keep[r], k));
    }
  SuperpointModel out;
  out.positions = positions;
  fill_rows(rows, cloud.positions, positions, K, out.neighbors, out.logits);
  if (model.cache)
    for (Tensor& m : model.cache->motions) {
      Tensor kept(static_cast<Eigen::Index>(keep_sp.size()), 6);
      for (std::size_t j = 0; j < keep_sp.size(); ++j) kept.row(j) = m.row(keep_sp[j]);
      m = std::move(kept);
    }
  model.cloud = std::move(cloud);
  model.superpoints = std::move(out);
}

void transform_superpoints(SpgsModel& model, const std::vector<int>& ids, const RigidTransform& T) {
  require_superpoints(model);
  check_ids(model, ids);
  if (model.nonrigid) throw Error("transform edits are not supported with a non-rigid network");
  ensure_cache(model);
  model.cache_only = true;
  const std::set<int> moved(ids.begin(), ids.end());
  const Mat3 Re = T.rotation();
  const std::vector<int> assign = model.assignment();
  GaussianCloud& c = model.cloud;
  for (int i = 0; i < c.size(); ++i) {
    if (!moved.count(assign[i])) continue;
    c.positions.row(i) = T.apply(c.position(i)).transpose();
    const Quat q = rotmat_to_quat(Re * quat_to_rotmat(c.rotation(i)));
    const double n = c.rotation(i).norm();  // keep the stored magnitude
    c.rotations.row(i) = (n * q.as_vec()).transpose();
  }
  SuperpointModel& sp = *model.superpoints;
  for (int j : moved) sp.positions.row(j) = T.apply(sp.positions.row(j).transpose()).transpose();
  // Conjugate the stored motions so members follow the moved frame: E ∘ D ∘ E⁻¹.
  for (Tensor& m : model.cache->motions)
    for (int j : moved) {
      const RigidTransform D = transform_row(m, j);
      set_transform_row(m, j, T.compose(D).compose(T.inverse()));
    }
}

void merge_models(SpgsModel& model, SpgsModel other, const RigidTransform& T) {
  require_superpoints(model);
  require_superpoints(other);
  if (model.nonrigid || other.nonrigid) throw Error("merging models with a non-rigid network is not supported");
  std::vector<int> all(other.superpoints->count());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = static_cast<int>(j);
  transform_superpoints(other, all, T);
  ensure_cache(model);
  model.cache_only = true;

  const std::vector<double> times = merged_times(model.cache->times, other.cache->times);
  DeformationCache a = resample(*model.cache, times), b = resample(*other.cache, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    Tensor m(a.motions[k].rows() + b.motions[k].rows(), 6);
    m << a.motions[k], b.motions[k];
    a.motions[k] = std::move(m);
  }

  const int degree = std::max(model.cloud.sh_degree, other.cloud.sh_degree);
  pad_sh(model.cloud, degree);
  pad_sh(other.cloud, degree);
  const SuperpointModel& sa = *model.superpoints;
  const SuperpointModel& sb = *other.superpoints;
  const int Ma = sa.count();
  const int K = std::max(sa.k(), sb.k());
  Tensor positions(Ma + sb.count(), 3);
  positions << sa.positions, sb.positions;

  std::vector<std::vector<std::pair<int, double>>> rows_a(sa.gaussians()), rows_b(sb.gaussians());
  for (int i = 0; i < sa.gaussians(); ++i)
    for (int k = 0; k < sa.k(); ++k) rows_a[i].emplace_back(sa.neighbors(i, k), sa.logits(i, k));
  for (int i = 0; i < sb.gaussians(); ++i)
    for (int k = 0; k < sb.k(); ++k) rows_b[i].emplace_back(sb.neighbors(i, k), sb.logits(i, k));
  // Padding draws only from each model's own superpoints.
  IndexMatrix na, nb;
  Tensor la, lb;
  fill_rows(rows_a, model.cloud.positions, sa.positions, std::min(K, Ma), na, la);
  fill_rows(rows_b, other.cloud.positions, sb.positions, std::min(K, sb.count()), nb, lb);
  if (na.cols() != nb.cols()) throw Error("cannot merge: too few superpoints to share a neighbor count");
  nb.array() += Ma;

  SuperpointModel merged;
  merged.positions = std::move(positions);
  merged.neighbors.resize(na.rows() + nb.rows(), na.cols());
  merged.neighbors << na, nb;
  merged.logits.resize(la.rows() + lb.rows(), la.cols());
  merged.logits << la, lb;

  model.cloud.append(other.cloud);
  model.superpoints = std::move(merged);
  model.cache = std::move(a);
  model.train_times = times;
}

EditScript parse_edit_script(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid edit script: ") + e.what());
  }
  if (!j.is_array()) throw Error("edit script must be a JSON array");
  auto vec3 = [](const json& o, const char* key) {
    if (!o.contains(key)) return Vec3(Vec3::Zero());
    const json& v = o[key];
    if (!v.is_array() || v.size() != 3) throw Error(std::string("edit field ") + key + " must be a 3-vector");
    return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
  };
  EditScript script;
  for (const json& o : j) {
    EditOp op;
    const std::string kind = o.at("op").get<std::string>();
    if (kind == "delete") op.kind = EditOp::Kind::remove;
    else if (kind == "transform") op.kind = EditOp::Kind::transform;
    else if (kind == "merge" || kind == "merge-scene") op.kind = EditOp::Kind::merge;
    else throw Error("unknown edit op " + kind);
    if (o.contains("superpoints")) op.superpoints = o["superpoints"].get<std::vector<int>>();
    op.transform.omega = vec3(o, "omega");
    op.transform.t = vec3(o, "t");
    if (op.kind == EditOp::Kind::merge) op.path = o.at("path").get<std::string>();
    script.push_back(std::move(op));
  }
  return script;
}

EditScript load_edit_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_edit_script(std::string(std::istreambuf_iterator<char>(in), {}));
}

void apply_edit_script(SpgsModel& model, const EditScript& script, const std::string& base_dir) {
  for (const EditOp& op : script) {
    switch (op.kind) {
      case EditOp::Kind::remove:
        delete_superpoints(model, op.superpoints);
        break;
      case EditOp::Kind::transform:
        transform_superpoints(model, op.superpoints, op.transform);
        break;
      case EditOp::Kind::merge: {
        const std::filesystem::path p = std::filesystem::path(base_dir) / op.path;
        merge_models(model, load_checkpoint(p.string()), op.transform);
        break;
      }
    }
  }
}

}  // namespace spgs
