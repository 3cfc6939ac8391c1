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

#include "core_reg/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "core_reg/error.hpp"

namespace corereg {

void TrainConfig::validate(const GroupIndex& groups) const {
  penalty.validate();
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (groups.max_group_size() > batch_size)
    throw ConfigError("batch size " + std::to_string(batch_size) +
                      " is smaller than the largest group (" +
                      std::to_string(groups.max_group_size()) + ")");
  std::visit(
      [](const auto& opt) {
        if (!(opt.lr > 0.0) || !std::isfinite(opt.lr))
          throw ConfigError("learning rate must be positive");
        using T = std::decay_t<decltype(opt)>;
        if constexpr (std::is_same_v<T, SgdConfig>) {
          if (opt.momentum < 0.0 || opt.momentum >= 1.0)
            throw ConfigError("momentum must lie in [0, 1)");
        } else {
          if (opt.beta1 < 0.0 || opt.beta1 >= 1.0 || opt.beta2 < 0.0 || opt.beta2 >= 1.0)
            throw ConfigError("Adam betas must lie in [0, 1)");
          if (!(opt.eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
        }
      },
      optimizer);
}

double ridge_value(const ModelSpec& spec, std::span<const double> theta) {
  const std::vector<bool> mask = weight_mask(spec);
  double s = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k)
    if (mask[k]) s += theta[k] * theta[k];
  return s;
}

Var ridge_value(const ModelSpec& spec, std::span<const Var> theta) {
  const std::vector<bool> mask = weight_mask(spec);
  std::vector<Var> weights;
  weights.reserve(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k)
    if (mask[k]) weights.push_back(theta[k]);
  return sum_of_squares(weights);
}

namespace {

void check_batch(const Dataset& data, std::span<const std::size_t> batch) {
  if (batch.empty()) throw DataError("empty batch");
  for (std::size_t i : batch)
    if (i >= data.size()) throw DataError("batch index out of range");
}

template <class T>
struct BatchTerms {
  std::vector<std::vector<T>> logits;
  std::vector<T> losses;
};

template <class T>
BatchTerms<T> batch_terms(const ModelSpec& spec, std::span<const T> theta, const Dataset& data,
                          std::span<const std::size_t> batch) {
  BatchTerms<T> out;
  out.logits.reserve(batch.size());
  out.losses.reserve(batch.size());
  for (std::size_t i : batch) {
    const Sample& s = data[i];
    out.logits.push_back(forward(spec, theta, std::span<const double>(s.features)));
    out.losses.push_back(sample_loss(s.label, std::span<const T>(out.logits.back())));
  }
  return out;
}

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

Var mean_of(std::span<const Var> xs) { return mean(xs); }

template <class T>
T pooled_from_terms(const ModelSpec& spec, std::span<const T> theta, const BatchTerms<T>& terms,
                    double gamma) {
  T obj = mean_of(std::span<const T>(terms.losses));
  if (gamma != 0.0) obj = obj + T(gamma) * ridge_value(spec, theta);
  return obj;
}

// Returns nullopt when no group has two members, so callers can leave the
// pooled objective untouched.
template <class T>
std::optional<T> penalty_from_terms(const BatchTerms<T>& terms, const GroupIndex& groups,
                                    const PenaltyConfig& config) {
  if (groups.non_singleton_count() == 0) return std::nullopt;
  if (config.target == PenaltyTarget::loss)
    return conditional_penalty(std::span<const T>(terms.losses), groups, config.exponent);
  const std::size_t k = terms.logits.front().size();
  std::vector<T> column(terms.logits.size());
  std::optional<T> total;
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t i = 0; i < column.size(); ++i) column[i] = terms.logits[i][r];
    T c = conditional_penalty(std::span<const T>(column), groups, config.exponent);
    total = total ? *total + c : c;
  }
  return total;
}

template <class T>
T core_impl(const ModelSpec& spec, std::span<const T> theta, const Dataset& data,
            std::span<const std::size_t> batch, const GroupIndex& batch_groups,
            const PenaltyConfig& config) {
  check_batch(data, batch);
  if (batch_groups.n() != batch.size())
    throw DataError("batch grouping does not match the batch size");
  const BatchTerms<T> terms = batch_terms(spec, theta, data, batch);
  T obj = pooled_from_terms(spec, theta, terms, config.ridge);
  if (config.weight == 0.0) return obj;
  if (auto pen = penalty_from_terms(terms, batch_groups, config))
    obj = obj + T(config.weight) * *pen;
  return obj;
}

}  // namespace

double pooled_objective(const ModelSpec& spec, std::span<const double> theta,
                        const Dataset& data, std::span<const std::size_t> batch, double gamma) {
  check_batch(data, batch);
  return pooled_from_terms(spec, theta, batch_terms(spec, theta, data, batch), gamma);
}

Var pooled_objective(const ModelSpec& spec, std::span<const Var> theta, const Dataset& data,
                     std::span<const std::size_t> batch, double gamma) {
  check_batch(data, batch);
  return pooled_from_terms(spec, theta, batch_terms(spec, theta, data, batch), gamma);
}

double core_objective(const ModelSpec& spec, std::span<const double> theta, const Dataset& data,
                      std::span<const std::size_t> batch, const GroupIndex& batch_groups,
                      const PenaltyConfig& config) {
  return core_impl(spec, theta, data, batch, batch_groups, config);
}

Var core_objective(const ModelSpec& spec, std::span<const Var> theta, const Dataset& data,
                   std::span<const std::size_t> batch, const GroupIndex& batch_groups,
                   const PenaltyConfig& config) {
  return core_impl(spec, theta, data, batch, batch_groups, config);
}

double full_penalty(const ModelSpec& spec, std::span<const double> theta, const Dataset& data,
                    const GroupIndex& groups, const PenaltyConfig& config) {
  if (config.target == PenaltyTarget::loss)
    return conditional_penalty(per_sample_losses(spec, theta, data), groups, config.exponent);
  return prediction_penalty(all_logits(spec, theta, data), groups, config.exponent);
}

std::vector<std::vector<std::size_t>> group_aware_minibatches(const GroupIndex& groups,
                                                              std::size_t batch_size,
                                                              std::uint64_t seed,
                                                              std::uint64_t epoch) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (groups.max_group_size() > batch_size)
    throw ConfigError("a group of size " + std::to_string(groups.max_group_size()) +
                      " does not fit in batch size " + std::to_string(batch_size));
  std::vector<std::size_t> order(groups.m());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> current;
  for (std::size_t j : order) {
    const auto& g = groups.groups[j];
    if (!current.empty() && current.size() + g.size() > batch_size) {
      std::sort(current.begin(), current.end());
      batches.push_back(std::move(current));
      current.clear();
    }
    current.insert(current.end(), g.begin(), g.end());
  }
  if (!current.empty()) {
    std::sort(current.begin(), current.end());
    batches.push_back(std::move(current));
  }
  return batches;
}

GroupIndex batch_group_index(const GroupIndex& groups, std::span<const std::size_t> batch) {
  // Position of each global group's members inside the batch.
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::size_t> slot(groups.m(), static_cast<std::size_t>(-1));
  std::vector<std::size_t> owner;
  for (std::size_t pos = 0; pos < batch.size(); ++pos) {
    const std::size_t j = groups.group_of.at(batch[pos]);
    if (slot[j] == static_cast<std::size_t>(-1)) {
      slot[j] = members.size();
      members.emplace_back();
      owner.push_back(j);
    }
    members[slot[j]].push_back(pos);
  }
  std::vector<std::vector<std::size_t>> local;
  for (std::size_t s = 0; s < members.size(); ++s) {
    if (members[s].size() == groups.groups[owner[s]].size()) {
      local.push_back(std::move(members[s]));
    } else {
      for (std::size_t pos : members[s]) local.push_back({pos});
    }
  }
  return group_index_from_groups(std::move(local), batch.size());
}

GroupIndex penalty_groups(const Dataset& data, const GroupIndex& id_groups,
                          PenaltyGrouping mode) {
  switch (mode) {
    case PenaltyGrouping::by_id: return id_groups;
    case PenaltyGrouping::by_label: return baseline_group_by_label(data);
    case PenaltyGrouping::all: {
      std::vector<std::size_t> all(data.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      return group_index_from_groups({std::move(all)}, data.size());
    }
  }
  throw ConfigError("unknown penalty grouping");
}

namespace {

GroupIndex local_penalty_groups(const Dataset& data, const GroupIndex& groups,
                                std::span<const std::size_t> batch, PenaltyGrouping mode) {
  if (mode == PenaltyGrouping::by_id) return batch_group_index(groups, batch);
  std::vector<std::size_t> labels(batch.size());
  for (std::size_t pos = 0; pos < batch.size(); ++pos)
    labels[pos] = mode == PenaltyGrouping::by_label ? data[batch[pos]].label : 0;
  std::vector<std::vector<std::size_t>> local;
  std::vector<std::size_t> slot(data.num_classes(), static_cast<std::size_t>(-1));
  for (std::size_t pos = 0; pos < batch.size(); ++pos) {
    if (slot[labels[pos]] == static_cast<std::size_t>(-1)) {
      slot[labels[pos]] = local.size();
      local.emplace_back();
    }
    local[slot[labels[pos]]].push_back(pos);
  }
  return group_index_from_groups(std::move(local), batch.size());
}

// Maps free optimization variables to model parameters. The identity map is
// used for ordinary training; the oracle uses theta = P phi on the weights.
struct Reparam {
  std::size_t free_dim = 0;
  std::function<std::vector<double>(std::span<const double>)> to_theta;
  std::function<std::vector<Var>(std::span<const Var>)> to_theta_var;
};

Reparam identity_reparam(const ModelSpec& spec) {
  Reparam r;
  r.free_dim = spec.param_count();
  r.to_theta = [](std::span<const double> z) { return std::vector<double>(z.begin(), z.end()); };
  r.to_theta_var = [](std::span<const Var> z) { return std::vector<Var>(z.begin(), z.end()); };
  return r;
}

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, std::size_t dim)
      : config_(config), m_(dim, 0.0), v_(dim, 0.0) {}

  void step(std::vector<double>& z, std::span<const double> g) {
    ++t_;
    if (const auto* sgd = std::get_if<SgdConfig>(&config_)) {
      for (std::size_t k = 0; k < z.size(); ++k) {
        m_[k] = sgd->momentum * m_[k] + g[k];
        z[k] -= sgd->lr * m_[k];
      }
      return;
    }
    const auto& a = std::get<AdamConfig>(config_);
    const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < z.size(); ++k) {
      m_[k] = a.beta1 * m_[k] + (1.0 - a.beta1) * g[k];
      v_[k] = a.beta2 * v_[k] + (1.0 - a.beta2) * g[k] * g[k];
      const double mhat = m_[k] / c1;
      const double vhat = v_[k] / c2;
      z[k] -= a.lr * mhat / (std::sqrt(vhat) + a.eps);
    }
  }

 private:
  OptimizerConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

EpochMetrics epoch_metrics(const Dataset& data, const GroupIndex& groups, const ModelSpec& spec,
                           std::span<const double> theta, const PenaltyConfig& penalty) {
  EpochMetrics m;
  const auto logits = all_logits(spec, theta, data);
  std::vector<double> losses(data.size());
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    losses[i] = sample_loss(data[i].label, logits[i]);
    if (predict_class(logits[i]) != data[i].label) ++wrong;
  }
  m.loss = mean_of(losses);
  m.penalty = penalty.target == PenaltyTarget::loss
                  ? conditional_penalty(losses, groups, penalty.exponent)
                  : prediction_penalty(logits, groups, penalty.exponent);
  m.ridge = ridge_value(spec, theta);
  m.train_error = static_cast<double>(wrong) / static_cast<double>(data.size());
  return m;
}

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

TrainReport train_impl(const Dataset& data, const GroupIndex& groups, const ModelSpec& spec,
                       const TrainConfig& config, const Reparam& reparam,
                       std::vector<double> z, const PenaltyConfig& objective_penalty,
                       const StepObserver& observer) {
  spec.validate();
  check_compatible(spec, data);
  config.validate(groups);
  if (groups.n() != data.size()) throw DataError("grouping does not match the dataset size");
  if (z.size() != reparam.free_dim) throw DataError("initial parameter vector has wrong length");

  const GroupIndex metric_groups = penalty_groups(data, groups, config.grouping);
  Optimizer opt(config.optimizer, z.size());
  TrainReport report;
  report.history.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = group_aware_minibatches(groups, config.batch_size, config.seed, epoch);
    for (const auto& batch : batches) {
      const GroupIndex local = local_penalty_groups(data, groups, batch, config.grouping);
      auto objective = [&](std::span<const Var> zv) {
        const std::vector<Var> theta = reparam.to_theta_var(zv);
        return core_objective(spec, std::span<const Var>(theta), data, batch, local,
                              objective_penalty);
      };
      auto [value, grad] = value_and_gradient(objective, z);
      if (!std::isfinite(value) || !all_finite(grad))
        throw NumericalError("non-finite objective or gradient at epoch " +
                             std::to_string(epoch) + ", step " +
                             std::to_string(report.steps) + " (objective " +
                             std::to_string(value) + "); try a smaller learning rate");
      opt.step(z, grad);
      ++report.steps;
      if (observer) {
        const std::vector<double> theta = reparam.to_theta(z);
        observer(report.steps, theta);
      }
    }
    const std::vector<double> theta = reparam.to_theta(z);
    if (!all_finite(theta))
      throw NumericalError("parameters became non-finite at epoch " + std::to_string(epoch));
    report.history.push_back(epoch_metrics(data, metric_groups, spec, theta, config.penalty));
  }
  report.theta = reparam.to_theta(z);
  return report;
}

}  // namespace

TrainReport train(const Dataset& data, const GroupIndex& groups, const ModelSpec& spec,
                  const TrainConfig& config, std::optional<std::vector<double>> initial_theta,
                  const StepObserver& observer) {
  std::vector<double> z = initial_theta ? std::move(*initial_theta)
                                        : init_params(spec, config.seed);
  return train_impl(data, groups, spec, config, identity_reparam(spec), std::move(z),
                    config.penalty, observer);
}

Eigen::MatrixXd orthogonal_complement(const Eigen::MatrixXd& W) {
  const auto p = W.rows();
  const auto q = W.cols();
  if (q == 0) return Eigen::MatrixXd::Identity(p, p);
  if (q >= p)
    throw ConfigError("W has " + std::to_string(q) + " columns in dimension " +
                      std::to_string(p) + "; the invariant space is {0}");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> cqr(W);
  if (cqr.rank() < q) throw ConfigError("W is rank deficient");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(W);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
  return Q.rightCols(p - q);
}

TrainReport oracle_train_constrained(const Dataset& data, const GroupIndex& groups,
                                     const ModelSpec& spec, const Eigen::MatrixXd& W,
                                     const TrainConfig& config) {
  if (spec.kind != ModelKind::linear) throw ConfigError("oracle training needs a linear model");
  const std::size_t p = spec.input_dim();
  const std::size_t out = spec.output_dim();
  if (static_cast<std::size_t>(W.rows()) != p)
    throw ConfigError("W has " + std::to_string(W.rows()) + " rows, model input is " +
                      std::to_string(p));
  const Eigen::MatrixXd P = orthogonal_complement(W);
  const std::size_t r = static_cast<std::size_t>(P.cols());

  // Row-major copy of P so each weight is an affine map of phi.
  std::vector<std::vector<double>> rows(p, std::vector<double>(r));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < r; ++k) rows[i][k] = P(static_cast<Eigen::Index>(i),
                                                     static_cast<Eigen::Index>(k));

  // Free layout: out blocks of r coefficients, then out biases.
  Reparam rp;
  rp.free_dim = out * r + out;
  rp.to_theta = [&, p, r, out](std::span<const double> z) {
    std::vector<double> theta(spec.param_count(), 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t i = 0; i < p; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < r; ++k) s += rows[i][k] * z[o * r + k];
        theta[o * p + i] = s;
      }
      theta[out * p + o] = z[out * r + o];
    }
    return theta;
  };
  rp.to_theta_var = [&, p, r, out](std::span<const Var> z) {
    std::vector<Var> theta(spec.param_count());
    for (std::size_t o = 0; o < out; ++o) {
      const auto phi = z.subspan(o * r, r);
      for (std::size_t i = 0; i < p; ++i) theta[o * p + i] = affine(phi, rows[i], Var(0.0));
      theta[out * p + o] = z[out * r + o];
    }
    return theta;
  };

  const std::vector<double> theta0 = init_params(spec, config.seed);
  std::vector<double> z(rp.free_dim, 0.0);
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t k = 0; k < r; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < p; ++i) s += rows[i][k] * theta0[o * p + i];
      z[o * r + k] = s;
    }

  PenaltyConfig pooled = config.penalty;
  pooled.weight = 0.0;
  return train_impl(data, groups, spec, config, rp, std::move(z), pooled, {});
}

LambdaGridResult lambda_grid(const Dataset& train_data, const GroupIndex& groups,
                             const Dataset& validation, const ModelSpec& spec,
                             const TrainConfig& base, std::span<const double> lambdas,
                             double tolerance) {
  if (lambdas.empty()) throw ConfigError("lambda grid is empty");
  LambdaGridResult result;
  double best = std::numeric_limits<double>::infinity();
  for (double lambda : lambdas) {
    TrainConfig cfg = base;
    cfg.penalty.weight = lambda;
    const TrainReport rep = train(train_data, groups, spec, cfg);
    LambdaGridEntry e{lambda, mean_loss(spec, rep.theta, validation),
                      error_rate(spec, rep.theta, validation)};
    best = std::min(best, e.validation_loss);
    result.entries.push_back(e);
  }
  result.recommended = result.entries.front().lambda;
  for (const auto& e : result.entries)
    if (e.validation_loss <= (1.0 + tolerance) * best)
      result.recommended = std::max(result.recommended, e.lambda);
  return result;
}

nlohmann::json to_json(const TrainConfig& config) {
  nlohmann::json j;
  j["penalty"] = {{"target", config.penalty.target == PenaltyTarget::loss ? "loss" : "prediction"},
                  {"exponent", config.penalty.exponent},
                  {"weight", config.penalty.weight},
                  {"ridge", config.penalty.ridge}};
  if (const auto* sgd = std::get_if<SgdConfig>(&config.optimizer)) {
    j["optimizer"] = {{"kind", "sgd"}, {"lr", sgd->lr}, {"momentum", sgd->momentum}};
  } else {
    const auto& a = std::get<AdamConfig>(config.optimizer);
    j["optimizer"] = {{"kind", "adam"}, {"lr", a.lr},       {"beta1", a.beta1},
                      {"beta2", a.beta2}, {"eps", a.eps}};
  }
  j["batch_size"] = config.batch_size;
  j["epochs"] = config.epochs;
  j["seed"] = config.seed;
  j["grouping"] = config.grouping == PenaltyGrouping::by_id
                      ? "id"
                      : (config.grouping == PenaltyGrouping::by_label ? "label" : "all");
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  try {
    TrainConfig c;
    if (j.contains("penalty")) {
      const auto& p = j.at("penalty");
      const std::string target = p.value("target", std::string("prediction"));
      if (target == "prediction") c.penalty.target = PenaltyTarget::prediction;
      else if (target == "loss") c.penalty.target = PenaltyTarget::loss;
      else throw ConfigError("unknown penalty target '" + target + "'");
      c.penalty.exponent = p.value("exponent", 1.0);
      c.penalty.weight = p.value("weight", 0.0);
      c.penalty.ridge = p.value("ridge", 0.0);
    }
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      const std::string kind = o.value("kind", std::string("adam"));
      if (kind == "sgd") {
        c.optimizer = SgdConfig{o.value("lr", 0.01), o.value("momentum", 0.0)};
      } else if (kind == "adam") {
        c.optimizer = AdamConfig{o.value("lr", 1e-3), o.value("beta1", 0.9),
                                 o.value("beta2", 0.999), o.value("eps", 1e-8)};
      } else {
        throw ConfigError("unknown optimizer '" + kind + "'");
      }
    }
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    const std::string grouping = j.value("grouping", std::string("id"));
    if (grouping == "id") c.grouping = PenaltyGrouping::by_id;
    else if (grouping == "label") c.grouping = PenaltyGrouping::by_label;
    else if (grouping == "all") c.grouping = PenaltyGrouping::all;
    else throw ConfigError("unknown grouping '" + grouping + "'");
    c.penalty.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid training config: ") + e.what());
  }
}

nlohmann::json to_json(const TrainReport& report) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& m : report.history)
    history.push_back({{"loss", m.loss},
                       {"penalty", m.penalty},
                       {"ridge", m.ridge},
                       {"train_error", m.train_error}});
  return {{"theta", report.theta}, {"history", history}, {"steps", report.steps}};
}

}  // namespace corereg
