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

// core-reg command-line front end.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "CLI11.hpp"
#include "core_reg/dataset.hpp"
#include "core_reg/error.hpp"
#include "core_reg/model.hpp"
#include "core_reg/penalty.hpp"
#include "core_reg/robustness.hpp"
#include "core_reg/scm.hpp"
#include "core_reg/svg_plot.hpp"
#include "core_reg/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace corereg;

namespace {

constexpr const char* kVersion = "0.1.0";

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

fs::path prepare_out(const std::string& dir) {
  fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw DataError("cannot create output directory " + dir);
  return out;
}

// The manifest holds everything needed to rerun: the command line and the
// fully resolved configuration.
void write_manifest(const fs::path& out, const std::string& command,
                    const std::vector<std::string>& argv, const json& config,
                    const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "core-reg";
  m["version"] = kVersion;
  m["command"] = command;
  m["argv"] = argv;
  m["config"] = config;
  m["outputs"] = outputs;
  write_json(out / "manifest.json", m);
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("expected a comma-separated list of numbers, got '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

PenaltyGrouping grouping_from_string(const std::string& s) {
  if (s == "id") return PenaltyGrouping::by_id;
  if (s == "label") return PenaltyGrouping::by_label;
  if (s == "all") return PenaltyGrouping::all;
  throw ConfigError("unknown grouping '" + s + "' (expected id, label or all)");
}

void parse_penalty(const std::string& s, PenaltyConfig& pc) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ConfigError("--penalty expects f,1 | f,0.5 | l,1 | l,0.5");
  const std::string target = s.substr(0, comma);
  const std::string nu = s.substr(comma + 1);
  if (target == "f") pc.target = PenaltyTarget::prediction;
  else if (target == "l") pc.target = PenaltyTarget::loss;
  else throw ConfigError("--penalty target must be f or l, got '" + target + "'");
  if (nu == "1") pc.exponent = 1.0;
  else if (nu == "0.5") pc.exponent = 0.5;
  else throw ConfigError("--penalty exponent must be 1 or 0.5, got '" + nu + "'");
}

Dataset load_for(const std::string& path, std::optional<std::size_t> classes = std::nullopt) {
  return load_csv(path, classes);
}

std::size_t classes_of(const ModelSpec& spec) {
  return spec.output_dim() == 1 ? 2 : spec.output_dim();
}

StyleAwareDataset load_style_aware(const std::string& data_path, const std::string& latents_path,
                                   const std::string& split, std::size_t classes) {
  const json side = read_json(latents_path);
  if (!side.contains(split)) throw DataError("latents missing: no '" + split + "' split in " + latents_path);
  return attach_latents(load_for(data_path, classes), side.at(split));
}

const LinearRenderer* linear_renderer(const StyleAwareDataset& sds) {
  return dynamic_cast<const LinearRenderer*>(sds.renderer.get());
}

// ---- gen ----

struct GenArgs {
  std::string generator;
  std::size_t n = 0;
  std::size_t c = 0;
  std::uint64_t seed = 0;
  std::optional<double> test_shift;
  std::size_t p = 10;
  std::size_t q = 2;
  double style_sd = 1.0;
  std::string id_sampler = "uniform";
  std::size_t id_count = 0;
  std::string out = ".";
};

int cmd_gen(const GenArgs& a, const std::vector<std::string>& argv) {
  const fs::path out = prepare_out(a.out);
  json config = {{"generator", a.generator}, {"n", a.n}, {"c", a.c}, {"seed", a.seed}};
  std::optional<TrainTestPair> pair;
  json side;
  if (a.generator == "example1" || a.generator == "example2") {
    const bool first = a.generator == "example1";
    const double shift = a.test_shift.value_or(first ? kExample1DefaultShift : kExample2DefaultShift);
    pair = first ? gen_example1(a.n, a.c, shift, a.seed) : gen_example2(a.n, a.c, shift, a.seed);
    config["test_shift"] = shift;
  } else if (a.generator == "linear_scm") {
    LinearScmSpec spec = default_linear_scm(a.p, a.q, a.seed, a.style_sd);
    if (a.id_sampler == "blocked") spec.id_sampler = IdSampler::blocked;
    else if (a.id_sampler != "uniform") throw ConfigError("--id-sampler must be uniform or blocked");
    if (a.id_count > 0) spec.id_count = a.id_count;
    spec.validate();
    // The c grouped observations come from drawing ids with replacement;
    // c is reported from the realized grouping.
    const double shift = a.test_shift.value_or(0.0);
    InterventionSpec test_iv = NoIntervention{};
    if (shift != 0.0) test_iv = MeanShift{shift * Eigen::VectorXd::Unit(static_cast<Eigen::Index>(a.q), 0)};
    pair.emplace(sample_linear_scm(spec, a.n, NoIntervention{}, a.seed),
                 sample_linear_scm(spec, a.n, test_iv, a.seed ^ 0x5bd1e995ULL));
    config["p"] = a.p;
    config["q"] = a.q;
    config["style_sd"] = a.style_sd;
    config["id_sampler"] = a.id_sampler;
    config["id_count"] = spec.id_count;
    config["test_shift"] = shift;
    side["scm"] = to_json(spec);
  } else {
    throw ConfigError("unknown generator '" + a.generator + "' (expected example1, example2 or linear_scm)");
  }
  save_csv(pair->first.data, out / "train.csv");
  save_csv(pair->second.data, out / "test.csv");
  side["generator"] = a.generator;
  side["train"] = latents_to_json(pair->first);
  side["test"] = latents_to_json(pair->second);
  write_json(out / "latents.json", side);
  const GroupIndex g = build_group_index(pair->first.data);
  config["realized"] = {{"n", g.n()}, {"m", g.m()}, {"c", g.c()}};
  write_manifest(out, "gen", argv, config, {"train.csv", "test.csv", "latents.json", "manifest.json"});
  std::cout << "gen " << a.generator << ": n=" << g.n() << " m=" << g.m() << " c=" << g.c() << "\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string data;
  std::string config;
  std::string model = "linear";
  std::string hidden = "16,16";
  std::string activation = "tanh";
  double lambda = 0.0;
  std::string penalty = "f,1";
  double ridge = 0.0;
  std::string grouping = "id";
  std::size_t epochs = 1;
  std::size_t batch_size = 120;
  double lr = 1e-3;
  std::string optimizer = "adam";
  double momentum = 0.0;
  std::uint64_t seed = 0;
  bool oracle = false;
  std::string latents;
  std::string out = ".";
};

TrainConfig resolve_train_config(const TrainArgs& a, const CLI::App& sub) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg = train_config_from_json(read_json(a.config));
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  if (given("--lambda")) cfg.penalty.weight = a.lambda;
  if (given("--penalty")) parse_penalty(a.penalty, cfg.penalty);
  if (given("--ridge")) cfg.penalty.ridge = a.ridge;
  if (given("--grouping")) cfg.grouping = grouping_from_string(a.grouping);
  if (given("--epochs")) cfg.epochs = a.epochs;
  if (given("--batch-size")) cfg.batch_size = a.batch_size;
  if (given("--seed")) cfg.seed = a.seed;
  if (given("--optimizer") || given("--lr") || given("--momentum")) {
    std::string kind = a.optimizer;
    if (!given("--optimizer")) kind = std::holds_alternative<SgdConfig>(cfg.optimizer) ? "sgd" : "adam";
    if (kind == "adam") {
      AdamConfig adam = std::holds_alternative<AdamConfig>(cfg.optimizer) ? std::get<AdamConfig>(cfg.optimizer)
                                                                          : AdamConfig{};
      if (given("--lr")) adam.lr = a.lr;
      if (given("--momentum")) throw ConfigError("--momentum applies to sgd only");
      cfg.optimizer = adam;
    } else if (kind == "sgd") {
      SgdConfig sgd = std::holds_alternative<SgdConfig>(cfg.optimizer) ? std::get<SgdConfig>(cfg.optimizer)
                                                                       : SgdConfig{};
      if (given("--lr")) sgd.lr = a.lr;
      if (given("--momentum")) sgd.momentum = a.momentum;
      cfg.optimizer = sgd;
    } else {
      throw ConfigError("--optimizer must be adam or sgd, got '" + kind + "'");
    }
  }
  return cfg;
}

ModelSpec resolve_model(const TrainArgs& a, const json* file_config, std::size_t dim, std::size_t classes,
                        const CLI::App& sub) {
  const std::size_t out_width = classes == 2 ? 1 : classes;
  if (file_config && file_config->contains("model") && sub.count("--model") == 0)
    return model_spec_from_json(file_config->at("model"));
  if (a.model == "linear") return ModelSpec::linear(dim, out_width);
  if (a.model != "mlp") throw ConfigError("--model must be linear or mlp, got '" + a.model + "'");
  std::vector<std::size_t> sizes{dim};
  for (double h : parse_doubles(a.hidden)) {
    if (h < 1 || h != static_cast<double>(static_cast<std::size_t>(h)))
      throw ConfigError("--hidden expects positive integer widths");
    sizes.push_back(static_cast<std::size_t>(h));
  }
  sizes.push_back(out_width);
  Activation act;
  if (a.activation == "tanh") act = Activation::tanh;
  else if (a.activation == "relu") act = Activation::relu;
  else throw ConfigError("--activation must be tanh or relu");
  return ModelSpec::mlp(sizes, act);
}

int cmd_train(const TrainArgs& a, const CLI::App& sub, const std::vector<std::string>& argv) {
  const fs::path out = prepare_out(a.out);
  std::optional<json> file_config;
  if (!a.config.empty()) file_config = read_json(a.config);
  TrainConfig cfg = resolve_train_config(a, sub);
  const Dataset data = load_for(a.data);
  const ModelSpec spec =
      resolve_model(a, file_config ? &*file_config : nullptr, data.dim(), data.num_classes(), sub);
  spec.validate();
  check_compatible(spec, data);
  const GroupIndex groups = build_group_index(data);
  cfg.validate(groups);

  TrainReport report;
  if (a.oracle) {
    if (a.latents.empty()) throw ConfigError("--oracle needs --latents to read the style loading W");
    const json side = read_json(a.latents);
    if (!side.contains("train")) throw DataError("latents missing: no 'train' split in " + a.latents);
    const auto renderer = renderer_from_json(side.at("train").at("renderer"));
    const auto* lin = dynamic_cast<const LinearRenderer*>(renderer.get());
    if (!lin) throw ConfigError("--oracle needs a linear style renderer");
    report = oracle_train_constrained(data, groups, spec, lin->W(), cfg);
  } else {
    report = train(data, groups, spec, cfg);
  }

  save_checkpoint({spec, report.theta, cfg.seed, report.steps}, out / "checkpoint.json");
  json rep = {{"config", to_json(cfg)}, {"model", to_json(spec)}, {"oracle", a.oracle},
              {"report", to_json(report)}};
  write_json(out / "report.json", rep);
  json config = {{"data", a.data}, {"model", to_json(spec)}, {"train", to_json(cfg)}, {"oracle", a.oracle}};
  if (a.oracle) config["latents"] = a.latents;
  write_manifest(out, "train", argv, config, {"checkpoint.json", "report.json", "manifest.json"});
  if (!report.history.empty()) {
    const auto& last = report.history.back();
    std::cout << "train: steps=" << report.steps << " loss=" << last.loss << " penalty=" << last.penalty
              << " train_error=" << last.train_error << "\n";
  }
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out = ".";
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  const fs::path out = prepare_out(a.out);
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Dataset data = load_for(a.data, classes_of(ck.spec));
  check_compatible(ck.spec, data);
  const GroupIndex groups = build_group_index(data);
  const auto logits = all_logits(ck.spec, ck.params, data);
  json m;
  m["n"] = groups.n();
  m["m"] = groups.m();
  m["c"] = groups.c();
  m["error_rate"] = error_rate(ck.spec, ck.params, data);
  m["mean_loss"] = mean_loss(ck.spec, ck.params, data);
  m["penalty_f1"] = prediction_penalty(logits, groups, 1.0);
  m["variance_ratio"] = nullptr;
  if (ck.spec.output_dim() == 1) {
    std::vector<double> z(logits.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = logits[i][0];
    try {
      m["variance_ratio"] = variance_ratio(z, groups);
    } catch (const Error&) {
      // Undefined without grouped samples or between-group spread.
    }
  }
  write_json(out / "metrics.json", m);
  write_manifest(out, "eval", argv, {{"checkpoint", a.checkpoint}, {"data", a.data}},
                 {"metrics.json", "manifest.json"});
  std::cout << "eval: error_rate=" << m["error_rate"].get<double>()
            << " mean_loss=" << m["mean_loss"].get<double>() << "\n";
  return 0;
}

// ---- shift-eval ----

struct ShiftArgs {
  std::string checkpoint;
  std::string data;
  std::string latents;
  std::string split = "test";
  std::string xi = "0,0.01,0.1,1";
  std::string method = "gradient_allocation";
  std::string magnitudes = "1,10,100,1000";
  std::string direction = "auto";
  std::string direction_from;
  double first_order_xi = 1e-3;
  std::uint64_t seed = 0;
  std::string out = ".";
};

int cmd_shift_eval(const ShiftArgs& a, const std::vector<std::string>& argv) {
  const fs::path out = prepare_out(a.out);
  if (a.latents.empty()) throw DataError("latents missing: shift-eval needs --latents");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const StyleAwareDataset sds = load_style_aware(a.data, a.latents, a.split, classes_of(ck.spec));
  check_compatible(ck.spec, sds.data);
  const GroupIndex groups = build_group_index(sds.data);
  const ConditionalCovariance cov = sds.style_covariance ? shared_covariance(*sds.style_covariance, groups)
                                                         : estimate_conditional_covariance(sds, groups);
  RobustnessReport r;
  r.method = worst_case_method_from_string(a.method);
  r.xi_grid = parse_doubles(a.xi);
  r.unshifted_loss = mean_loss(ck.spec, ck.params, sds.data);
  for (double xi : r.xi_grid)
    r.worst_case.push_back(worst_case_loss(ck.spec, ck.params, sds, groups, cov, xi, r.method, a.seed).value);
  r.first_order_xi = a.first_order_xi;
  r.first_order = first_order_gap(ck.spec, ck.params, sds, groups, cov, a.first_order_xi);

  const LinearRenderer* lin = linear_renderer(sds);
  if (lin && ck.spec.kind == ModelKind::linear) r.invariance_defect = invariance_defect(ck.spec, ck.params, lin->W());

  const auto q = static_cast<Eigen::Index>(sds.style_dim());
  Eigen::VectorXd direction;
  if (a.direction == "auto") {
    const Checkpoint src = a.direction_from.empty() ? ck : load_checkpoint(a.direction_from);
    const Eigen::MatrixXd sigma = cov.sigma.empty() ? Eigen::MatrixXd::Identity(q, q) : cov.sigma.front();
    if (lin && src.spec.kind == ModelKind::linear && src.spec.output_dim() == 1) {
      try {
        direction = worst_style_direction(src.spec, src.params, lin->W(), sigma);
      } catch (const NumericalError&) {
        direction = Eigen::VectorXd::Unit(q, 0);
      }
    } else {
      direction = Eigen::VectorXd::Unit(q, 0);
    }
  } else {
    const auto v = parse_doubles(a.direction);
    if (static_cast<Eigen::Index>(v.size()) != q)
      throw ConfigError("--direction needs " + std::to_string(q) + " components");
    direction = Eigen::Map<const Eigen::VectorXd>(v.data(), q);
  }
  const auto mags = parse_doubles(a.magnitudes);
  r.divergence = divergence_probe(ck.spec, ck.params, sds, direction, mags);

  write_json(out / "robustness.json", to_json(r));
  json config = {{"checkpoint", a.checkpoint}, {"data", a.data},        {"latents", a.latents},
                 {"split", a.split},           {"xi", r.xi_grid},       {"method", a.method},
                 {"magnitudes", mags},         {"direction", a.direction}, {"direction_from", a.direction_from},
                 {"first_order_xi", a.first_order_xi}, {"seed", a.seed}};
  write_manifest(out, "shift-eval", argv, config, {"robustness.json", "manifest.json"});
  std::cout << "shift-eval: unshifted=" << r.unshifted_loss << " verdict=" << r.divergence.verdict() << "\n";
  return 0;
}

// ---- plot ----

struct PlotArgs {
  std::string data;
  std::vector<std::string> checkpoints;
  std::vector<std::string> labels;
  std::size_t max_points = 2000;
  std::size_t max_pairs = 10;
  std::uint64_t seed = 0;
  std::string file = "boundary.svg";
  std::string out = ".";
};

// Legend label from the training report next to the checkpoint, when present.
std::string default_label(const std::string& checkpoint) {
  const fs::path report = fs::path(checkpoint).parent_path() / "report.json";
  if (fs::exists(report)) {
    try {
      const json r = read_json(report);
      const double lambda = r.at("config").at("penalty").at("weight").get<double>();
      std::string label = "lambda=" + format_double(lambda);
      if (r.value("oracle", false)) label += " (oracle)";
      return label;
    } catch (const std::exception&) {
    }
  }
  return fs::path(checkpoint).filename().string();
}

int cmd_plot(const PlotArgs& a, const std::vector<std::string>& argv) {
  const fs::path out = prepare_out(a.out);
  if (!a.labels.empty() && a.labels.size() != a.checkpoints.size())
    throw ConfigError("give one --label per --checkpoint or none");
  std::vector<Checkpoint> cks;
  for (const auto& path : a.checkpoints) cks.push_back(load_checkpoint(path));
  std::optional<std::size_t> classes;
  if (!cks.empty()) classes = classes_of(cks.front().spec);
  const Dataset data = load_for(a.data, classes);
  if (data.dim() != 2) throw DataError("plot needs 2-D data, got dimension " + std::to_string(data.dim()));
  std::vector<PlotCurve> curves;
  for (std::size_t i = 0; i < cks.size(); ++i) {
    check_compatible(cks[i].spec, data);
    curves.push_back({cks[i].spec, cks[i].params, a.labels.empty() ? default_label(a.checkpoints[i]) : a.labels[i]});
  }
  PlotOptions opts;
  opts.max_points = a.max_points;
  opts.max_pairs = a.max_pairs;
  opts.seed = a.seed;
  write_text(out / a.file, render_svg(data, build_group_index(data), curves, opts));
  json config = {{"data", a.data}, {"checkpoints", a.checkpoints}, {"labels", a.labels},
                 {"max_points", a.max_points}, {"max_pairs", a.max_pairs}, {"seed", a.seed}, {"file", a.file}};
  write_manifest(out, "plot", argv, config, {a.file, "manifest.json"});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Conditional variance regularization: data generation, training and robustness analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate train/test data with latent sidecar");
  g->add_option("generator", gen.generator, "example1 | example2 | linear_scm")->required();
  g->add_option("--n", gen.n, "samples per split")->required();
  g->add_option("--c", gen.c, "grouped observations (example generators; linear_scm uses --id-count)");
  g->add_option("--seed", gen.seed, "random seed");
  g->add_option("--test-shift", gen.test_shift, "style intervention applied to the test split");
  g->add_option("--p", gen.p, "linear_scm: feature dimension");
  g->add_option("--q", gen.q, "linear_scm: style dimension");
  g->add_option("--style-sd", gen.style_sd, "linear_scm: style standard deviation");
  g->add_option("--id-sampler", gen.id_sampler, "linear_scm: uniform | blocked");
  g->add_option("--id-count", gen.id_count, "linear_scm: number of distinct ids");
  g->add_option("--out", gen.out, "output directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "fit a pooled or CoRe model");
  t->add_option("--data", tr.data, "training CSV")->required();
  t->add_option("--config", tr.config, "JSON training config; flags override");
  t->add_option("--model", tr.model, "linear | mlp");
  t->add_option("--hidden", tr.hidden, "mlp hidden widths, e.g. 16,16");
  t->add_option("--activation", tr.activation, "tanh | relu");
  t->add_option("--lambda", tr.lambda, "penalty weight");
  t->add_option("--penalty", tr.penalty, "f,1 | f,0.5 | l,1 | l,0.5");
  t->add_option("--ridge", tr.ridge, "ridge weight on non-bias parameters");
  t->add_option("--grouping", tr.grouping, "penalty groups: id | label | all");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--lr", tr.lr);
  t->add_option("--optimizer", tr.optimizer, "adam | sgd");
  t->add_option("--momentum", tr.momentum, "sgd momentum");
  t->add_option("--seed", tr.seed);
  t->add_flag("--oracle", tr.oracle, "train in the style-invariant subspace (needs --latents)");
  t->add_option("--latents", tr.latents, "latent sidecar JSON");
  t->add_option("--out", tr.out, "output directory");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "error rate, loss and penalty on a split");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--data", ev.data)->required();
  e->add_option("--out", ev.out, "output directory");

  ShiftArgs sh;
  auto* s = app.add_subcommand("shift-eval", "worst-case loss under style interventions");
  s->add_option("--checkpoint", sh.checkpoint)->required();
  s->add_option("--data", sh.data)->required();
  s->add_option("--latents", sh.latents, "latent sidecar JSON");
  s->add_option("--split", sh.split, "sidecar split matching --data (train | test)");
  s->add_option("--xi", sh.xi, "comma-separated shift budgets");
  s->add_option("--method", sh.method, "uniform_ball | gradient_allocation | exhaustive_tiny");
  s->add_option("--magnitudes", sh.magnitudes, "divergence probe magnitudes");
  s->add_option("--direction", sh.direction, "auto or comma-separated style vector");
  s->add_option("--direction-from", sh.direction_from, "checkpoint whose worst direction to probe");
  s->add_option("--first-order-xi", sh.first_order_xi);
  s->add_option("--seed", sh.seed);
  s->add_option("--out", sh.out, "output directory");

  PlotArgs pl;
  auto* p = app.add_subcommand("plot", "SVG scatter with decision boundaries");
  p->add_option("--data", pl.data)->required();
  p->add_option("--checkpoint", pl.checkpoints, "repeatable");
  p->add_option("--label", pl.labels, "repeatable, one per checkpoint");
  p->add_option("--max-points", pl.max_points);
  p->add_option("--max-pairs", pl.max_pairs);
  p->add_option("--seed", pl.seed);
  p->add_option("--file", pl.file, "SVG file name inside --out");
  p->add_option("--out", pl.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) return cmd_gen(gen, args);
    if (*t) return cmd_train(tr, *t, args);
    if (*e) return cmd_eval(ev, args);
    if (*s) return cmd_shift_eval(sh, args);
    if (*p) return cmd_plot(pl, args);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return err.exit_code();
  } catch (const json::exception& err) {
    std::cerr << "error: malformed JSON: " << err.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}
