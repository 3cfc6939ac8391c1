// Copyright 2026 The core-reg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "core_reg/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "core_reg/error.hpp"
#include "core_reg/parallel.hpp"
#include "core_reg/penalty.hpp"

namespace corereg {

bool ConditionalCovariance::all_spd() const {
  return std::all_of(spd.begin(), spd.end(), [](bool b) { return b; });
}

namespace {

bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.rows() != m.cols()) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  return lo > 1e-12 * std::max(1.0, hi);
}

double spectral_norm(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

ConditionalCovariance finish(std::vector<Eigen::MatrixXd> sigma) {
  ConditionalCovariance c;
  c.sigma = std::move(sigma);
  for (const auto& s : c.sigma) {
    c.spd.push_back(is_spd(s));
    c.zeta = std::max(c.zeta, spectral_norm(s));
  }
  return c;
}

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success || !is_spd(sigma))
    throw NumericalError("style covariance is not positive definite");
  return llt.matrixL();
}

std::vector<double> as_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Evaluates group losses and gradients under a style shift.
class ShiftEvaluator {
 public:
  ShiftEvaluator(const ModelSpec& spec, std::span<const double> theta,
                 const StyleAwareDataset& sds, const GroupIndex& groups)
      : spec_(spec), theta_(theta), sds_(sds), groups_(groups) {
    sds.validate();
    check_compatible(spec, sds.data);
    if (groups.n() != sds.data.size()) throw DataError("grouping does not match the dataset");
  }

  double sample_loss_at(std::size_t i, const Eigen::VectorXd& delta) const {
    const Latent& l = sds_.latents[i];
    const Eigen::VectorXd x = sds_.renderer->render(l.core, l.style + delta);
    const std::vector<double> xs = as_std(x);
    return sample_loss(sds_.data[i].label, forward(spec_, theta_, xs));
  }

  double group_loss(std::size_t j, const Eigen::VectorXd& delta) const {
    double s = 0.0;
    for (std::size_t i : groups_.groups[j]) s += sample_loss_at(i, delta);
    return s / static_cast<double>(groups_.groups[j].size());
  }

  Eigen::VectorXd group_gradient(std::size_t j, const Eigen::VectorXd& delta) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sds_.style_dim()));
    for (std::size_t i : groups_.groups[j]) {
      const Latent& l = sds_.latents[i];
      const Eigen::VectorXd style = l.style + delta;
      const std::vector<double> xs = as_std(sds_.renderer->render(l.core, style));
      const auto [loss, grad_x] = loss_input_gradient(spec_, theta_, xs, sds_.data[i].label);
      const Eigen::Map<const Eigen::VectorXd> gx(grad_x.data(),
                                                 static_cast<Eigen::Index>(grad_x.size()));
      g += sds_.renderer->style_jacobian(l.core, style).transpose() * gx;
    }
    return g / static_cast<double>(groups_.groups[j].size());
  }

  std::size_t q() const { return sds_.style_dim(); }
  std::size_t m() const { return groups_.m(); }
  double weight(std::size_t j) const {
    return static_cast<double>(groups_.groups[j].size()) / static_cast<double>(groups_.n());
  }

 private:
  const ModelSpec& spec_;
  std::span<const double> theta_;
  const StyleAwareDataset& sds_;
  const GroupIndex& groups_;
};

// Unit directions in whitened coordinates for the sphere search.
std::vector<Eigen::VectorXd> direction_grid(std::size_t q) {
  std::vector<Eigen::VectorXd> dirs;
  if (q == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
  } else if (q == 2) {
    for (int k = 0; k < 720; ++k) {
      const double a = 2.0 * std::numbers::pi * k / 720.0;
      dirs.push_back(Eigen::Vector2d(std::cos(a), std::sin(a)));
    }
  } else if (q == 3) {
    constexpr int kPoints = 2000;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < kPoints; ++k) {
      const double z = 1.0 - 2.0 * (k + 0.5) / kPoints;
      const double r = std::sqrt(1.0 - z * z);
      dirs.push_back(Eigen::Vector3d(r * std::cos(golden * k), r * std::sin(golden * k), z));
    }
  }
  return dirs;
}

struct GroupBest {
  double loss;
  Eigen::VectorXd delta;
};

// Maximizes group j's loss over the sphere delta' Sigma^{-1} delta = budget.
GroupBest best_on_sphere(const ShiftEvaluator& ev, std::size_t j, const Eigen::MatrixXd& L,
                         double budget, const std::vector<Eigen::VectorXd>& grid,
                         std::uint64_t seed) {
  const auto q = static_cast<Eigen::Index>(ev.q());
  if (budget <= 0.0) return {ev.group_loss(j, Eigen::VectorXd::Zero(q)), Eigen::VectorXd::Zero(q)};
  const double radius = std::sqrt(budget);
  GroupBest best{-std::numeric_limits<double>::infinity(), Eigen::VectorXd::Zero(q)};
  if (!grid.empty()) {
    for (const auto& u : grid) {
      const Eigen::VectorXd delta = radius * (L * u);
      const double v = ev.group_loss(j, delta);
      if (v > best.loss) best = {v, delta};
    }
    return best;
  }
  // Projected ascent in whitened coordinates v = L^{-1} delta, |v| = radius.
  constexpr int kRestarts = 64, kSteps = 200;
  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (j + 1)));
  std::normal_distribution<double> normal;
  for (int r = 0; r < kRestarts; ++r) {
    Eigen::VectorXd v(q);
    for (Eigen::Index k = 0; k < q; ++k) v[k] = normal(rng);
    v *= radius / v.norm();
    for (int s = 0; s < kSteps; ++s) {
      const Eigen::VectorXd g = L.transpose() * ev.group_gradient(j, L * v);
      const double gn = g.norm();
      if (!(gn > 0.0)) break;
      v += 0.1 * radius * g / gn;
      v *= radius / v.norm();
    }
    const Eigen::VectorXd delta = L * v;
    const double val = ev.group_loss(j, delta);
    if (val > best.loss) best = {val, delta};
  }
  return best;
}

std::vector<Eigen::MatrixXd> cholesky_factors(const ConditionalCovariance& cov,
                                              const GroupIndex& groups, std::size_t q) {
  if (cov.sigma.size() != groups.m())
    throw DataError("need one style covariance per group");
  std::vector<Eigen::MatrixXd> L;
  L.reserve(cov.sigma.size());
  for (const auto& s : cov.sigma) {
    if (static_cast<std::size_t>(s.rows()) != q || static_cast<std::size_t>(s.cols()) != q)
      throw DataError("style covariance has the wrong shape");
    L.push_back(cholesky_factor(s));
  }
  return L;
}

}  // namespace

ConditionalCovariance shared_covariance(const Eigen::MatrixXd& sigma, const GroupIndex& groups) {
  return finish(std::vector<Eigen::MatrixXd>(groups.m(), sigma));
}

ConditionalCovariance estimate_conditional_covariance(const StyleAwareDataset& sds,
                                                      const GroupIndex& groups) {
  sds.validate();
  if (groups.n() != sds.data.size()) throw DataError("grouping does not match the dataset");
  const auto q = static_cast<Eigen::Index>(sds.style_dim());
  if (q == 0) throw DataError("no style latents");
  std::vector<Eigen::MatrixXd> sigma(groups.m());
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(q, q);
  std::size_t pooled_count = 0;
  for (std::size_t j = 0; j < groups.m(); ++j) {
    const auto& g = groups.groups[j];
    if (g.size() < 2) continue;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(q);
    for (std::size_t i : g) mu += sds.latents[i].style;
    mu /= static_cast<double>(g.size());
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(q, q);
    for (std::size_t i : g) {
      const Eigen::VectorXd d = sds.latents[i].style - mu;
      s += d * d.transpose();
    }
    pooled += s;
    pooled_count += g.size();
    sigma[j] = s / static_cast<double>(g.size());
  }
  Eigen::MatrixXd fallback;
  if (sds.style_covariance) fallback = *sds.style_covariance;
  else if (pooled_count > 0) fallback = pooled / static_cast<double>(pooled_count);
  else fallback = Eigen::MatrixXd::Zero(q, q);
  for (std::size_t j = 0; j < groups.m(); ++j)
    if (groups.groups[j].size() < 2) sigma[j] = fallback;
  return finish(std::move(sigma));
}

double mahalanobis_cost(const Eigen::VectorXd& delta, const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != delta.size() || sigma.cols() != delta.size())
    throw DataError("shift and covariance dimensions differ");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success || !is_spd(sigma))
    throw NumericalError("covariance is not positive definite");
  const Eigen::VectorXd z = llt.matrixL().solve(delta);
  return z.squaredNorm();
}

double assignment_cost(const ShiftAssignment& assignment, const ConditionalCovariance& cov,
                       const GroupIndex& groups) {
  if (assignment.size() != groups.m() || cov.sigma.size() != groups.m())
    throw DataError("assignment, covariance and grouping sizes differ");
  double total = 0.0;
  for (std::size_t j = 0; j < groups.m(); ++j)
    total += static_cast<double>(groups.groups[j].size()) *
             mahalanobis_cost(assignment[j], cov.sigma[j]);
  return total / static_cast<double>(groups.n());
}

ShiftAssignment zero_assignment(const GroupIndex& groups, std::size_t q) {
  return ShiftAssignment(groups.m(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q)));
}

double loss_under_shift(const ModelSpec& spec, std::span<const double> theta,
                        const StyleAwareDataset& sds, const GroupIndex& groups,
                        const ShiftAssignment& assignment) {
  const ShiftEvaluator ev(spec, theta, sds, groups);
  if (assignment.size() != groups.m()) throw DataError("need one shift per group");
  for (const auto& d : assignment)
    if (static_cast<std::size_t>(d.size()) != sds.style_dim())
      throw DataError("shift dimension differs from the style dimension");
  double s = 0.0;
  for (std::size_t i = 0; i < sds.data.size(); ++i)
    s += ev.sample_loss_at(i, assignment[groups.group_of[i]]);
  return s / static_cast<double>(sds.data.size());
}

std::string to_string(WorstCaseMethod method) {
  switch (method) {
    case WorstCaseMethod::uniform_ball: return "uniform_ball";
    case WorstCaseMethod::gradient_allocation: return "gradient_allocation";
    case WorstCaseMethod::exhaustive_tiny: return "exhaustive_tiny";
  }
  return "unknown";
}

WorstCaseMethod worst_case_method_from_string(const std::string& name) {
  if (name == "uniform_ball") return WorstCaseMethod::uniform_ball;
  if (name == "gradient_allocation") return WorstCaseMethod::gradient_allocation;
  if (name == "exhaustive_tiny") return WorstCaseMethod::exhaustive_tiny;
  throw ConfigError("unknown worst-case method '" + name + "'");
}

WorstCaseResult worst_case_loss(const ModelSpec& spec, std::span<const double> theta,
                                const StyleAwareDataset& sds, const GroupIndex& groups,
                                const ConditionalCovariance& cov, double xi,
                                WorstCaseMethod method, std::uint64_t seed) {
  if (!std::isfinite(xi) || xi < 0.0) throw ConfigError("shift budget must be finite and >= 0");
  const ShiftEvaluator ev(spec, theta, sds, groups);
  const std::size_t q = sds.style_dim();
  if (method == WorstCaseMethod::exhaustive_tiny && groups.m() > 3)
    throw ConfigError("exhaustive_tiny supports at most 3 groups, got " +
                      std::to_string(groups.m()));
  WorstCaseResult res;
  res.assignment = zero_assignment(groups, q);
  if (xi == 0.0) {
    res.value = loss_under_shift(spec, theta, sds, groups, res.assignment);
    return res;
  }
  const auto L = cholesky_factors(cov, groups, q);
  const auto grid = direction_grid(q);

  switch (method) {
    case WorstCaseMethod::uniform_ball:
      parallel_for(groups.m(), [&](std::size_t j) {
        res.assignment[j] = best_on_sphere(ev, j, L[j], xi, grid, seed).delta;
      });
      break;
    case WorstCaseMethod::gradient_allocation:
      parallel_for(groups.m(), [&](std::size_t j) {
        const Eigen::VectorXd g = ev.group_gradient(j, Eigen::VectorXd::Zero(
                                                           static_cast<Eigen::Index>(q)));
        const Eigen::VectorXd sg = cov.sigma[j] * g;
        const double norm = std::sqrt(std::max(0.0, g.dot(sg)));
        if (norm > 0.0) res.assignment[j] = std::sqrt(xi) * sg / norm;
      });
      break;
    case WorstCaseMethod::exhaustive_tiny: {
      // Budget fractions t_j on a simplex grid; group j receives xi_j = t_j xi / w_j.
      const std::size_t m = groups.m();
      const int K = m == 1 ? 1 : (m == 2 ? 200 : 60);
      std::vector<std::vector<GroupBest>> table(m);
      for (std::size_t j = 0; j < m; ++j)
        for (int k = 0; k <= K; ++k)
          table[j].push_back(best_on_sphere(ev, j, L[j], xi * k / K / ev.weight(j), grid, seed));
      double best = -std::numeric_limits<double>::infinity();
      auto consider = [&](const std::vector<int>& ks) {
        double v = 0.0;
        for (std::size_t j = 0; j < m; ++j) v += ev.weight(j) * table[j][ks[j]].loss;
        if (v > best) {
          best = v;
          for (std::size_t j = 0; j < m; ++j) res.assignment[j] = table[j][ks[j]].delta;
        }
      };
      if (m == 1) {
        consider({K});
      } else if (m == 2) {
        for (int a = 0; a <= K; ++a) consider({a, K - a});
      } else {
        for (int a = 0; a <= K; ++a)
          for (int b = 0; a + b <= K; ++b) consider({a, b, K - a - b});
      }
      break;
    }
  }
  res.value = loss_under_shift(spec, theta, sds, groups, res.assignment);
  return res;
}

DivergenceResult divergence_probe(const ModelSpec& spec, std::span<const double> theta,
                                  const StyleAwareDataset& sds, const Eigen::VectorXd& direction,
                                  std::span<const double> magnitudes) {
  if (static_cast<std::size_t>(direction.size()) != sds.style_dim())
    throw DataError("direction dimension differs from the style dimension");
  if (!(direction.norm() > 0.0)) throw ConfigError("divergence direction must be nonzero");
  if (magnitudes.empty()) throw ConfigError("divergence probe needs at least one magnitude");
  for (std::size_t k = 1; k < magnitudes.size(); ++k)
    if (!(magnitudes[k] > magnitudes[k - 1]))
      throw ConfigError("divergence magnitudes must be strictly increasing");
  DivergenceResult r;
  r.direction = direction;
  r.magnitudes.assign(magnitudes.begin(), magnitudes.end());
  r.unshifted_loss = mean_loss(spec, theta, rerender(sds, Eigen::VectorXd::Zero(direction.size())));
  for (double mag : magnitudes)
    r.losses.push_back(mean_loss(spec, theta, rerender(sds, mag * direction)));
  const std::size_t n = r.losses.size();
  bool increasing = true;
  for (std::size_t k = n >= 3 ? n - 2 : 1; k < n; ++k)
    increasing = increasing && r.losses[k] > r.losses[k - 1];
  r.unbounded = increasing && r.losses.back() > 10.0 * r.unshifted_loss;
  return r;
}

FirstOrderGap first_order_gap(const ModelSpec& spec, std::span<const double> theta,
                              const StyleAwareDataset& sds, const GroupIndex& groups,
                              const ConditionalCovariance& cov, double xi) {
  FirstOrderGap out;
  out.lhs = worst_case_loss(spec, theta, sds, groups, cov, xi,
                            WorstCaseMethod::gradient_allocation).value;
  const std::vector<double> losses = per_sample_losses(spec, theta, sds.data);
  double mean = 0.0;
  for (double l : losses) mean += l;
  mean /= static_cast<double>(losses.size());
  out.penalty = conditional_penalty(losses, groups, 0.5);
  out.rhs = mean + std::sqrt(xi) * out.penalty;
  out.gap = xi == 0.0 ? 0.0 : std::abs(out.lhs - out.rhs);
  return out;
}

namespace {

Eigen::MatrixXd linear_weights(const ModelSpec& spec, std::span<const double> theta) {
  if (spec.kind != ModelKind::linear) throw ConfigError("invariance defect needs a linear model");
  if (theta.size() != spec.param_count()) throw DataError("parameter vector has wrong length");
  const auto out = static_cast<Eigen::Index>(spec.output_dim());
  const auto p = static_cast<Eigen::Index>(spec.input_dim());
  Eigen::MatrixXd M(out, p);
  for (Eigen::Index r = 0; r < out; ++r)
    for (Eigen::Index c = 0; c < p; ++c) M(r, c) = theta[static_cast<std::size_t>(r * p + c)];
  return M;
}

}  // namespace

double invariance_defect(const ModelSpec& spec, std::span<const double> theta,
                         const Eigen::MatrixXd& W) {
  const Eigen::MatrixXd M = linear_weights(spec, theta);
  if (W.rows() != M.cols()) throw DataError("W row count differs from the input dimension");
  const double norm = M.norm();
  if (norm == 0.0) return 0.0;
  return (M * W).norm() / norm;
}

double invariance_defect(const Eigen::VectorXd& weights, const Eigen::MatrixXd& W) {
  if (W.rows() != weights.size()) throw DataError("W row count differs from the weight length");
  const double norm = weights.norm();
  if (norm == 0.0) return 0.0;
  return (W.transpose() * weights).norm() / norm;
}

Eigen::VectorXd worst_style_direction(const ModelSpec& spec, std::span<const double> theta,
                                      const Eigen::MatrixXd& W, const Eigen::MatrixXd& sigma) {
  const Eigen::MatrixXd M = linear_weights(spec, theta);
  if (M.rows() != 1) throw ConfigError("worst style direction needs a single-logit model");
  if (W.rows() != M.cols() || sigma.rows() != W.cols() || sigma.cols() != W.cols())
    throw DataError("dimension mismatch between weights, W and Sigma");
  const Eigen::VectorXd a = W.transpose() * M.row(0).transpose();
  const Eigen::VectorXd sa = sigma * a;
  const double norm = std::sqrt(std::max(0.0, a.dot(sa)));
  if (!(norm > 0.0)) throw NumericalError("model is invariant to style; no worst direction");
  return sa / norm;
}

nlohmann::json to_json(const RobustnessReport& r) {
  nlohmann::json j;
  j["xi_grid"] = r.xi_grid;
  j["worst_case"] = r.worst_case;
  j["worst_case_is_lower_bound"] = true;
  j["method"] = to_string(r.method);
  j["unshifted_loss"] = r.unshifted_loss;
  j["first_order"] = {{"xi", r.first_order_xi},
                      {"lhs", r.first_order.lhs},
                      {"rhs", r.first_order.rhs},
                      {"gap", r.first_order.gap},
                      {"conditional_loss_sd", r.first_order.penalty}};
  j["invariance_defect"] =
      r.invariance_defect ? nlohmann::json(*r.invariance_defect) : nlohmann::json(nullptr);
  j["divergence"] = {
      {"direction", std::vector<double>(r.divergence.direction.data(),
                                        r.divergence.direction.data() +
                                            r.divergence.direction.size())},
      {"magnitudes", r.divergence.magnitudes},
      {"losses", r.divergence.losses},
      {"verdict", r.divergence.verdict()}};
  return j;
}

}  // namespace corereg
