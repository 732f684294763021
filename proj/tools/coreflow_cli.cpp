// Command-line driver for the full pipeline: coreset fit, closed-form
// source sampling, correction training, generation, evaluation, theory
// verification, and the one-command benchmark reproduction.
//
// Every output file embeds the resolved run configuration, the seeds, the
// content hashes of its input files, and the artifact version string, and
// contains no timestamps: re-running a command with identical inputs yields
// byte-identical payloads.  The exit status is nonzero exactly when an
// error fired or a gated verify check failed.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "coreflow/config.hpp"
#include "coreflow/coreset.hpp"
#include "coreflow/correction.hpp"
#include "coreflow/dataset.hpp"
#include "coreflow/hashing.hpp"
#include "coreflow/metrics.hpp"
#include "coreflow/pointcloud.hpp"
#include "coreflow/reports.hpp"
#include "coreflow/sampler.hpp"
#include "coreflow/theory.hpp"
#include "coreflow/velocity.hpp"

namespace {

using coreflow::RunConfig;
using Hashes = std::vector<std::pair<std::string, std::string>>;

// ---------------------------------------------------------------------------
// Option plumbing: every subcommand takes --config / --set plus natural
// flags that map onto config keys.  Precedence: flags > --set > file >
// defaults.
// ---------------------------------------------------------------------------

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> keyvals;
};

void add_cfg_opt(CLI::App* cmd, const std::shared_ptr<Common>& c,
                 const std::string& flag, const std::string& key,
                 const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [c, key](const std::string& v) { c->keyvals[key] = v; }, help);
}

void add_common(CLI::App* cmd, const std::shared_ptr<Common>& c) {
  cmd->add_option("--config", c->config_path,
                  "flat `key = value` config file (# comments allowed)");
  cmd->add_option("--set", c->sets,
                  "KEY=VALUE config override, repeatable; unknown keys are "
                  "rejected");
}

RunConfig make_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) cfg.load_file(c.config_path);
  for (const auto& s : c.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("--set expects KEY=VALUE, got '" + s + "'");
    }
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : c.keyvals) cfg.set(k, v);
  return cfg;
}

// ---------------------------------------------------------------------------
// Provenance rendering
// ---------------------------------------------------------------------------

nlohmann::ordered_json provenance_json(const RunConfig& cfg,
                                       const Hashes& hashes) {
  nlohmann::ordered_json p;
  p["version"] = coreflow::artifact_version();
  p["config"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : cfg.entries()) p["config"][k] = v;
  p["input_hashes"] = nlohmann::ordered_json::object();
  for (const auto& [name, hex] : hashes) p["input_hashes"][name] = hex;
  return p;
}

std::string provenance_block(const RunConfig& cfg, const Hashes& hashes) {
  std::string s = cfg.render();
  for (const auto& [name, hex] : hashes) {
    s += "input_hash " + name + " = " + hex + "\n";
  }
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_report(const std::string& json_text, const RunConfig& cfg,
                  const Hashes& hashes, const std::string& out_path) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::parse(json_text);
  doc["provenance"] = provenance_json(cfg, hashes);
  const std::string text = doc.dump(2) + "\n";
  std::cout << text;
  if (!out_path.empty()) {
    write_text(out_path, text);
    std::cout << "wrote " << out_path << "\n";
  }
}

bool is_builtin(const std::string& name) {
  const auto& names = coreflow::dataset_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::string builtin_list() {
  std::string s;
  for (const auto& n : coreflow::dataset_names()) {
    if (!s.empty()) s += ", ";
    s += n;
  }
  return s;
}

// Resolve --data: a builtin dataset name (synthesized pool) or a CSV path.
coreflow::PointCloud load_data(const RunConfig& cfg, const std::string& arg,
                               int n, std::uint64_t seed, Hashes& hashes) {
  const std::string name = arg.empty() ? cfg.get("dataset") : arg;
  if (is_builtin(name)) {
    return sample_target(resolve_setup(cfg, name).params, n, seed);
  }
  std::ifstream probe(name);
  if (!probe) {
    throw std::runtime_error("--data '" + name +
                             "' is neither a builtin dataset (" +
                             builtin_list() + ") nor a readable CSV file");
  }
  hashes.emplace_back("data", coreflow::file_hash_hex(name));
  return coreflow::load_csv(name);
}

coreflow::CoresetGmm load_model(const std::string& path, Hashes& hashes) {
  if (path.empty()) throw std::runtime_error("--model is required");
  hashes.emplace_back("model", coreflow::file_hash_hex(path));
  return coreflow::CoresetGmm::load(path);
}

coreflow::TrainConfig train_config_from(const RunConfig& cfg) {
  coreflow::TrainConfig tc;
  tc.iters = cfg.get_int("train_iters");
  tc.batch = cfg.get_int("batch");
  tc.learning_rate = cfg.get_double("learning_rate");
  tc.adam_beta1 = cfg.get_double("adam_beta1");
  tc.adam_beta2 = cfg.get_double("adam_beta2");
  tc.adam_eps = cfg.get_double("adam_eps");
  tc.ema_decay = cfg.get_double("ema_decay");
  tc.coupling = coreflow::coupling_from_string(cfg.get("coupling"));
  tc.train_t = cfg.get_double("train_t");
  tc.seed = cfg.get_u64("seed");
  tc.hidden_width = cfg.get_int("hidden_width");
  tc.hidden_layers = cfg.get_int("hidden_layers");
  return tc;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_fit(const Common& common, const std::string& data_arg,
            const std::string& out_path) {
  RunConfig cfg = make_config(common);
  Hashes hashes;
  const std::uint64_t seed = cfg.get_u64("seed");
  const std::string name = data_arg.empty() ? cfg.get("dataset") : data_arg;
  // "auto" fit parameters resolve against the builtin named here; file data
  // uses the config's `dataset` entry for its defaults.
  coreflow::ResolvedSetup su =
      resolve_setup(cfg, is_builtin(name) ? name : cfg.get("dataset"));
  coreflow::PointCloud data = load_data(cfg, data_arg, su.fit_pool, seed, hashes);

  coreflow::EmsResult ems = coreflow::sinkhorn_ems_fit(
      data.points, su.K, su.lambda, su.fit_iters, seed);
  coreflow::CoresetGmm model =
      coreflow::ppca_lift(data.points, ems, su.rank, su.lambda);
  model.fit_iters = su.fit_iters;
  model.fit_n = static_cast<int>(data.points.rows());
  model.fit_seed = seed;
  model.fit_dataset =
      is_builtin(name)
          ? name
          : (data.meta.count("name") ? data.meta.at("name") : std::string());
  model.validate();

  std::printf("fit: n=%d d=%d K=%d rank=%d lambda=%.6g iters=%d seed=%llu\n",
              model.fit_n, model.d, su.K, su.rank, su.lambda, su.fit_iters,
              static_cast<unsigned long long>(seed));
  if (!ems.objective_trace.empty()) {
    std::printf("objective: %.9g -> %.9g over %zu evaluations\n",
                ems.objective_trace.front(), ems.objective_trace.back(),
                ems.objective_trace.size());
  }
  for (const auto& ev : ems.repair_events) std::printf("repair: %s\n", ev.c_str());

  nlohmann::ordered_json doc = nlohmann::ordered_json::parse(model.to_json());
  doc["provenance"] = provenance_json(cfg, hashes);
  write_text(out_path, doc.dump(2) + "\n");
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int cmd_sample_stage2(const Common& common, const std::string& model_path,
                      const std::string& out_path) {
  RunConfig cfg = make_config(common);
  Hashes hashes;
  coreflow::CoresetGmm model = load_model(model_path, hashes);
  coreflow::GenConfig g;
  g.J = 1;
  g.L = 0;
  g.n = cfg.get_int("gen_n");
  g.seed = cfg.get_u64("seed");
  g.use_ema = false;
  coreflow::PointCloud cloud = coreflow::generate_one_step(model, nullptr, g);
  for (const auto& [name, hex] : hashes) cloud.meta["input_hash_" + name] = hex;
  cloud.config_block = provenance_block(cfg, hashes);
  coreflow::save_csv(cloud, out_path);
  std::printf("sample-stage2: n=%d NFE=%s -> %s\n", cloud.n(),
              cloud.meta.at("NFE").c_str(), out_path.c_str());
  return 0;
}

int cmd_train(const Common& common, const std::string& model_path,
              const std::string& data_arg, const std::string& out_path,
              const std::string& loss_out) {
  RunConfig cfg = make_config(common);
  Hashes hashes;
  coreflow::CoresetGmm model = load_model(model_path, hashes);

  // Default training pool: the model's own fit pool (same builtin, size,
  // and seed), so `fit` then `train` without --data reproduces the paired
  // pipeline.
  std::string data_name = data_arg;
  int data_n = cfg.get_int("n");
  std::uint64_t data_seed = cfg.get_u64("seed");
  if (data_name.empty() && !model.fit_dataset.empty() &&
      is_builtin(model.fit_dataset)) {
    data_name = model.fit_dataset;
    if (model.fit_n > 0) data_n = model.fit_n;
    data_seed = model.fit_seed;
  }
  coreflow::PointCloud data = load_data(cfg, data_name, data_n, data_seed, hashes);

  coreflow::TrainConfig tc = train_config_from(cfg);
  coreflow::TrainResult res = coreflow::train_correction(model, data.points, tc);
  if (res.loss_trace.empty()) {
    std::printf("train: 0 iterations; zero-correction net persisted\n");
  } else {
    double lo = res.loss_trace.front();
    for (double v : res.loss_trace) lo = std::min(lo, v);
    std::printf("train: iters=%d coupling=%s loss %.6g -> %.6g (min %.6g)\n",
                tc.iters, coupling_to_string(tc.coupling).c_str(),
                res.loss_trace.front(), res.loss_trace.back(), lo);
  }

  nlohmann::ordered_json doc = nlohmann::ordered_json::parse(res.net.to_json());
  doc["provenance"] = provenance_json(cfg, hashes);
  write_text(out_path, doc.dump(2) + "\n");
  std::printf("wrote %s\n", out_path.c_str());
  if (!loss_out.empty()) {
    std::string csv = "iter,loss\n";
    for (std::size_t i = 0; i < res.loss_trace.size(); ++i) {
      csv += std::to_string(i + 1) + "," +
             coreflow::format_double(res.loss_trace[i]) + "\n";
    }
    write_text(loss_out, csv);
    std::printf("wrote %s\n", loss_out.c_str());
  }
  return 0;
}

int cmd_generate(const Common& common, const std::string& model_path,
                 const std::string& net_path, const std::string& grid_str,
                 bool force_nested, const std::string& out_path) {
  RunConfig cfg = make_config(common);
  Hashes hashes;
  coreflow::CoresetGmm model = load_model(model_path, hashes);
  coreflow::CorrectionNet net;
  const coreflow::CorrectionNet* net_ptr = nullptr;
  if (!net_path.empty()) {
    hashes.emplace_back("net", coreflow::file_hash_hex(net_path));
    net = coreflow::CorrectionNet::load(net_path);
    net_ptr = &net;
  }
  coreflow::GenConfig g;
  g.J = cfg.get_int("J");
  g.L = cfg.get_int("L");
  g.n = cfg.get_int("gen_n");
  g.seed = cfg.get_u64("seed");
  g.use_ema = cfg.get_bool("use_ema");
  if (!grid_str.empty()) {
    std::string item;
    std::istringstream is(grid_str);
    while (std::getline(is, item, ',')) g.outer_grid.push_back(std::stod(item));
  }
  coreflow::PointCloud cloud =
      (g.J == 1 && !force_nested)
          ? coreflow::generate_one_step(model, net_ptr, g)
          : coreflow::generate_nested(model, net_ptr, g);
  for (const auto& [name, hex] : hashes) cloud.meta["input_hash_" + name] = hex;
  cloud.config_block = provenance_block(cfg, hashes);
  coreflow::save_csv(cloud, out_path);
  std::printf("generate: n=%d J=%d L=%d NFE=%s -> %s\n", cloud.n(), g.J, g.L,
              cloud.meta.at("NFE").c_str(), out_path.c_str());
  return 0;
}

int cmd_eval(const Common& common, const std::string& gen_path,
             const std::string& ref_path, const std::string& metrics_csv,
             const std::string& out_path) {
  RunConfig cfg = make_config(common);
  Hashes hashes;
  hashes.emplace_back("gen", coreflow::file_hash_hex(gen_path));
  coreflow::PointCloud gen = coreflow::load_csv(gen_path);
  coreflow::PointCloud ref;
  if (is_builtin(ref_path)) {
    // Builtin name: synthesize the reference pool on the fly.
    coreflow::ResolvedSetup su = resolve_setup(cfg, ref_path);
    ref = sample_target(su.params, su.eval_pool, cfg.get_u64("seed") + 101);
  } else {
    hashes.emplace_back("ref", coreflow::file_hash_hex(ref_path));
    ref = coreflow::load_csv(ref_path);
  }
  if (gen.d() != ref.d()) {
    throw std::runtime_error("eval: gen and ref dimensions differ");
  }

  std::vector<std::string> metrics;
  {
    std::string item;
    std::istringstream is(metrics_csv);
    while (std::getline(is, item, ',')) {
      if (!item.empty()) metrics.push_back(item);
    }
  }
  if (metrics.empty()) throw std::runtime_error("eval: empty metrics list");

  const std::uint64_t seed = cfg.get_u64("seed");
  coreflow::MetricsReport rep;
  rep.info["gen_n"] = std::to_string(gen.n());
  rep.info["ref_n"] = std::to_string(ref.n());
  rep.info["seed"] = std::to_string(seed);

  // 1-NN pools: queries from gen and from the first half of ref, support =
  // second half of ref.  Identical gen/ref files give identical query
  // pools, hence KS = W1 = 0 exactly.
  bool gof_done = false;
  double ks = 0.0, w1 = 0.0;
  auto ensure_gof = [&]() {
    if (gof_done) return;
    const int m = static_cast<int>(std::min<Eigen::Index>(
        gen.points.rows(), ref.points.rows() / 2));
    if (m < 2) throw std::runtime_error("eval: pools too small for ks/w1");
    Eigen::MatrixXd support = ref.points.bottomRows(m);
    auto res = coreflow::knn_gof(gen.points.topRows(m), support,
                                 ref.points.topRows(m), support);
    ks = res.first;
    w1 = res.second;
    rep.info["gof_pool"] = std::to_string(m);
    gof_done = true;
  };

  for (const auto& m : metrics) {
    if (m == "sw2") {
      rep.scalars["sw2"] = coreflow::sliced_w2(
          gen.points, ref.points, cfg.get_int("sw2_projections"), seed);
      rep.info["sw2_projections"] = cfg.get("sw2_projections");
    } else if (m == "ks") {
      ensure_gof();
      rep.scalars["ks"] = ks;
    } else if (m == "w1") {
      ensure_gof();
      rep.scalars["w1"] = w1;
    } else if (m == "exact_w2") {
      rep.scalars["exact_w2"] =
          coreflow::exact_w2_small(gen.points, ref.points);
    } else if (m == "mode_tv") {
      const std::string dname =
          ref.meta.count("name") ? ref.meta.at("name") : cfg.get("dataset");
      rep.scalars["mode_tv"] =
          coreflow::mode_tv(gen.points, resolve_setup(cfg, dname).params);
      rep.info["mode_dataset"] = dname;
    } else if (m == "precision" || m == "recall") {
      const int mm = static_cast<int>(
          std::min(gen.points.rows(), ref.points.rows()));
      auto pr = coreflow::precision_recall(gen.points.topRows(mm),
                                           ref.points.topRows(mm),
                                           cfg.get_int("knn_k"));
      if (m == "precision") rep.scalars["precision"] = pr.first;
      else rep.scalars["recall"] = pr.second;
    } else if (m == "helix_dist") {
      const std::string dname =
          ref.meta.count("name") ? ref.meta.at("name") : cfg.get("dataset");
      const double scale = ref.meta.count("scale")
                               ? std::stod(ref.meta.at("scale"))
                               : resolve_setup(cfg, dname).params.scale;
      rep.scalars["helix_dist"] =
          coreflow::mean_helix_distance(gen.points, scale);
    } else {
      throw std::runtime_error(
          "eval: unknown metric '" + m +
          "'; valid metrics: sw2, exact_w2, ks, w1, mode_tv, precision, "
          "recall, helix_dist");
    }
  }
  write_report(rep.to_json(), cfg, hashes, out_path);
  return 0;
}

int cmd_verify(const Common& common, const std::string& check,
               const std::string& model_path, const std::string& out_path) {
  RunConfig cfg = make_config(common);
  Hashes hashes;
  const std::uint64_t seed = cfg.get_u64("seed");
  coreflow::TheoryReport rep;

  auto fit_pool_of = [&](const coreflow::CoresetGmm& model) {
    const std::string dname =
        !model.fit_dataset.empty() && is_builtin(model.fit_dataset)
            ? model.fit_dataset
            : cfg.get("dataset");
    const int n = model.fit_n > 0 ? model.fit_n : cfg.get_int("n");
    return sample_target(resolve_setup(cfg, dname).params, n, model.fit_seed);
  };

  if (check == "thm1") {
    coreflow::CoresetGmm model = load_model(model_path, hashes);
    const std::string dname =
        !model.fit_dataset.empty() && is_builtin(model.fit_dataset)
            ? model.fit_dataset
            : cfg.get("dataset");
    const int pool = cfg.get_int("gap_pool");
    const int pairs = cfg.get_int("gap_pairs");
    const int n_target = std::max(2 * pool, cfg.get_int("n"));
    coreflow::PointCloud target =
        sample_target(resolve_setup(cfg, dname).params, n_target, seed + 5001);
    coreflow::GapEstimate ge =
        coreflow::surrogate_gap(model, target.points, pairs, pool, seed);
    const double sigma1_sq =
        target.points.squaredNorm() /
        static_cast<double>(target.points.rows() * target.points.cols());
    const double bound = coreflow::hrf2_lower_bound(sigma1_sq, model.d);
    rep.check = "thm1";
    rep.values["surrogate_gap"] = ge.gap;
    rep.values["noise_floor"] = ge.noise_floor;
    rep.values["one_step_lower_bound"] = bound;
    rep.values["sigma1_sq"] = sigma1_sq;
    rep.values["pairs"] = pairs;
    rep.values["pool"] = pool;
    rep.info["dataset"] = dname;
    rep.pass = ge.gap < bound;
  } else if (check == "marginal") {
    coreflow::CoresetGmm model = load_model(model_path, hashes);
    coreflow::PointCloud data = fit_pool_of(model);
    rep = coreflow::verify_marginal_preservation(
        model, data.points, cfg.get_int("marginal_draws"), seed);
  } else if (check == "moments") {
    coreflow::CoresetGmm model = load_model(model_path, hashes);
    coreflow::PointCloud data = fit_pool_of(model);
    rep = coreflow::verify_second_moments(model, data.points,
                                          cfg.get_int("moment_draws"), seed);
  } else if (check == "quantization") {
    coreflow::QuantizationResult qr = coreflow::quantization_rate(
        cfg.get_int("n"), {4, 16, 64, 256}, 1024, seed);
    rep.check = "quantization";
    rep.values["slope"] = qr.slope;
    for (std::size_t i = 0; i < qr.Ks.size(); ++i) {
      rep.table.push_back({{"K", static_cast<double>(qr.Ks[i])},
                           {"w2", qr.w2[i]}});
    }
    rep.pass = qr.slope >= -0.7 && qr.slope <= -0.3;
    rep.info["expected"] = "slope -1/2 in d=2, gate [-0.7, -0.3]";
  } else if (check == "decomposition") {
    rep = coreflow::decomposition_sweep(cfg.get("dataset"),
                                        {1000, 4000, 16000}, {4, 8, 16},
                                        cfg.get_int("rank"), seed);
  } else if (check == "euler") {
    // Pinned analytic case dv/dt = v: Euler reaches (1 + 1/L)^L vs e, a
    // first-order error, so the fitted slope must sit near -1.
    Eigen::VectorXd v0 = Eigen::VectorXd::Ones(2);
    coreflow::EulerRateResult er = coreflow::euler_rate_check(
        [](const Eigen::VectorXd& v, double) { return v; }, v0,
        std::exp(1.0) * v0, {2, 4, 8, 16, 32, 64});
    rep.check = "euler";
    rep.values["slope"] = er.slope;
    for (std::size_t i = 0; i < er.steps.size(); ++i) {
      rep.table.push_back({{"L", static_cast<double>(er.steps[i])},
                           {"error", er.errors[i]}});
    }
    rep.pass = std::abs(er.slope + 1.0) <= 0.15;
    rep.info["expected"] = "slope -1 +- 0.15";
  } else {
    throw std::runtime_error(
        "unknown check '" + check +
        "'; valid checks: thm1, marginal, moments, quantization, "
        "decomposition, euler");
  }

  write_report(rep.to_json(), cfg, hashes, out_path);
  std::printf("%s: %s\n", rep.check.c_str(), rep.pass ? "PASS" : "FAIL");
  return rep.pass ? 0 : 1;
}

int cmd_repro(const Common& common, const std::string& target,
              const std::string& out_path) {
  RunConfig cfg = make_config(common);
  if (target != "table5") {
    throw std::runtime_error("unknown repro target '" + target +
                             "'; valid targets: table5");
  }
  std::vector<coreflow::ToyBenchmark> benches;
  for (const auto& name : coreflow::dataset_names()) {
    benches.push_back(run_toy_benchmark(
        cfg, name,
        {coreflow::Coupling::kSinkhornAnchored, coreflow::Coupling::kIsTilted}));
    std::printf("%s pipeline finished in %.1f s\n", name.c_str(),
                benches.back().seconds);
  }
  std::string md = coreflow::render_benchmark_markdown(benches);
  md += "\n## provenance\n\n```\n" + provenance_block(cfg, {}) +
        "version = " + std::string(coreflow::artifact_version()) + "\n```\n";
  write_text(out_path, md);
  std::cout << md;
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "coreflow: coreset-compressed source models with closed-form "
      "conditional velocity sampling and learned flow corrections"};
  app.require_subcommand(1);
  int rc = 0;

  // ---- fit ----
  {
    auto c = std::make_shared<Common>();
    auto data = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "fit", "Stage I: entropic coreset fit + low-rank lift -> model JSON");
    add_common(cmd, c);
    cmd->add_option("--data", *data,
                    "builtin dataset name or CSV path (default: config "
                    "'dataset')");
    cmd->add_option("--out", *out, "output model JSON path")->required();
    add_cfg_opt(cmd, c, "--K", "K", "component count (or 'auto')");
    add_cfg_opt(cmd, c, "--rank", "rank", "factor rank r");
    add_cfg_opt(cmd, c, "--lambda", "lambda", "entropic bandwidth (or 'auto')");
    add_cfg_opt(cmd, c, "--iters", "fit_iters", "fit iterations (or 'auto')");
    add_cfg_opt(cmd, c, "--n", "n", "builtin fit pool size");
    add_cfg_opt(cmd, c, "--seed", "seed", "master seed");
    cmd->callback([=, &rc] { rc = cmd_fit(*c, *data, *out); });
  }

  // ---- sample-stage2 ----
  {
    auto c = std::make_shared<Common>();
    auto model = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "sample-stage2",
        "Stage II: one-step closed-form source sampling (J=1, L=0)");
    add_common(cmd, c);
    cmd->add_option("--model", *model, "model JSON path")->required();
    cmd->add_option("--out", *out, "output samples CSV path")->required();
    add_cfg_opt(cmd, c, "--n", "gen_n", "number of samples");
    add_cfg_opt(cmd, c, "--seed", "seed", "master seed");
    cmd->callback([=, &rc] { rc = cmd_sample_stage2(*c, *model, *out); });
  }

  // ---- train ----
  {
    auto c = std::make_shared<Common>();
    auto model = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto loss_out = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "train", "Stage III: train the correction net on surrogate pairs");
    add_common(cmd, c);
    cmd->add_option("--model", *model, "model JSON path")->required();
    cmd->add_option("--data", *data,
                    "builtin dataset or CSV path (default: the model's own "
                    "fit pool)");
    cmd->add_option("--out", *out, "output net JSON path")->required();
    cmd->add_option("--loss-out", *loss_out, "optional loss-trace CSV path");
    add_cfg_opt(cmd, c, "--iters", "train_iters", "training iterations");
    add_cfg_opt(cmd, c, "--coupling", "coupling",
                "direct_prior | sinkhorn_anchored | is_tilted | "
                "independent_gaussian");
    add_cfg_opt(cmd, c, "--lr", "learning_rate", "Adam learning rate");
    add_cfg_opt(cmd, c, "--batch", "batch", "batch size");
    add_cfg_opt(cmd, c, "--train-t", "train_t", "conditioning time t");
    add_cfg_opt(cmd, c, "--seed", "seed", "master seed");
    cmd->callback(
        [=, &rc] { rc = cmd_train(*c, *model, *data, *out, *loss_out); });
  }

  // ---- generate ----
  {
    auto c = std::make_shared<Common>();
    auto model = std::make_shared<std::string>();
    auto net = std::make_shared<std::string>();
    auto grid = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto nested = std::make_shared<bool>(false);
    auto* cmd = app.add_subcommand(
        "generate", "sample via the one-step (J=1) or nested (J>1) sampler");
    add_common(cmd, c);
    cmd->add_option("--model", *model, "model JSON path")->required();
    cmd->add_option("--net", *net, "correction net JSON (required when L>0)");
    cmd->add_option("--grid", *grid,
                    "comma-separated outer grid 0,...,1 (default uniform)");
    cmd->add_flag("--nested", *nested,
                  "use the nested code path even when J=1");
    cmd->add_option("--out", *out, "output samples CSV path")->required();
    add_cfg_opt(cmd, c, "--J", "J", "outer nodes");
    add_cfg_opt(cmd, c, "--L", "L", "Euler correction steps per node");
    add_cfg_opt(cmd, c, "--n", "gen_n", "number of samples");
    add_cfg_opt(cmd, c, "--seed", "seed", "master seed");
    add_cfg_opt(cmd, c, "--use-ema", "use_ema", "true|false: EMA weights");
    cmd->callback(
        [=, &rc] { rc = cmd_generate(*c, *model, *net, *grid, *nested, *out); });
  }

  // ---- eval ----
  {
    auto c = std::make_shared<Common>();
    auto gen = std::make_shared<std::string>();
    auto ref = std::make_shared<std::string>();
    auto metrics = std::make_shared<std::string>("sw2,ks,w1");
    auto out = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "eval", "score generated samples against a reference pool");
    add_common(cmd, c);
    cmd->add_option("--gen", *gen, "generated samples CSV")->required();
    cmd->add_option("--ref", *ref,
                    "reference samples CSV, or a builtin dataset name to "
                    "synthesize the pool")
        ->required();
    cmd->add_option("--metrics", *metrics,
                    "comma list: sw2, exact_w2, ks, w1, mode_tv, precision, "
                    "recall, helix_dist");
    cmd->add_option("--out", *out, "optional report JSON path");
    add_cfg_opt(cmd, c, "--seed", "seed", "master seed");
    cmd->callback([=, &rc] { rc = cmd_eval(*c, *gen, *ref, *metrics, *out); });
  }

  // ---- verify ----
  {
    auto c = std::make_shared<Common>();
    auto check = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "verify", "run a gated theory check (nonzero exit on failure)");
    add_common(cmd, c);
    cmd->add_option("check", *check,
                    "thm1 | marginal | moments | quantization | "
                    "decomposition | euler")
        ->required();
    cmd->add_option("--model", *model, "model JSON (thm1/marginal/moments)");
    cmd->add_option("--out", *out, "optional report JSON path");
    add_cfg_opt(cmd, c, "--seed", "seed", "master seed");
    cmd->callback([=, &rc] { rc = cmd_verify(*c, *check, *model, *out); });
  }

  // ---- repro ----
  {
    auto c = std::make_shared<Common>();
    auto target = std::make_shared<std::string>("table5");
    auto out = std::make_shared<std::string>("table5.md");
    auto* cmd = app.add_subcommand(
        "repro",
        "run the full benchmark grid and emit the markdown table");
    add_common(cmd, c);
    cmd->add_option("target", *target, "grid to reproduce (table5)");
    cmd->add_option("--out", *out, "output markdown path");
    add_cfg_opt(cmd, c, "--seed", "seed", "master seed");
    cmd->callback([=, &rc] { rc = cmd_repro(*c, *target, *out); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}
