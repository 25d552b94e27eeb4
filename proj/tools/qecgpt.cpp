// Copyright 2026 The qecgpt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// qecgpt command-line front end.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qecgpt/decoder.hpp"
#include "qecgpt/error.hpp"
#include "qecgpt/harness.hpp"
#include "qecgpt/stabilizer.hpp"
#include "qecgpt/training.hpp"

namespace {

using namespace qecgpt;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kBadFile, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split(text, ',')) {
    try {
      out.push_back(std::stod(s));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kBadConfig, "bad grid value '" + s + "'");
    }
  }
  return out;
}

std::vector<DecodeMethod> parse_methods(const std::string& text) {
  std::vector<DecodeMethod> out;
  for (const auto& s : split(text, ',')) out.push_back(parse_decode_method(s));
  return out;
}

nlohmann::json matrix_json(const gf2::BitMatrix& m) {
  auto rows = nlohmann::json::array();
  for (const auto& r : m.row_vectors()) rows.push_back(pauli_to_string(r));
  return rows;
}

gf2::BitVec parse_bits(const std::string& text, std::size_t width) {
  const auto v = gf2::BitVec::from_string(text);
  if (v.size() != width) {
    throw Error(ErrorCode::kLengthMismatch,
                "syndrome '" + text + "' has " + std::to_string(v.size()) + " bits, expected " +
                    std::to_string(width));
  }
  return v;
}

// ---- build-code -----------------------------------------------------------

struct BuildCodeArgs {
  std::string code;
  std::string kind;
  std::size_t n = 0;
  std::size_t puncture = 0;
  std::uint64_t puncture_seed = 0;
  std::string out;
};

int run_build_code(const BuildCodeArgs& a) {
  std::string spec = a.code;
  if (spec.empty()) {
    if (a.kind.empty() || a.n == 0) throw Error(ErrorCode::kBadConfig, "give --code or both --kind and --n");
    spec = a.kind + ":" + std::to_string(a.n);
  }
  if (a.puncture > 0) spec += "+puncture:" + std::to_string(a.puncture) + "@" + std::to_string(a.puncture_seed);
  const auto code = build_code(CodeSpec::parse(spec));
  const auto report = check_invariants(code);

  std::cout << code.name << ": n=" << code.n << " k=" << code.k << " m=" << code.m << '\n';
  std::cout << report.describe();
  if (!a.out.empty()) {
    nlohmann::json j{{"name", code.name},
                     {"n", code.n},
                     {"k", code.k},
                     {"m", code.m},
                     {"stabilizers", matrix_json(code.stabilizers)},
                     {"pure_errors", matrix_json(code.pure_errors)},
                     {"logicals", matrix_json(code.logicals)}};
    std::ofstream out(a.out);
    if (!out) throw Error(ErrorCode::kBadFile, "cannot write " + a.out);
    out << j.dump(2) << '\n';
    std::cout << "wrote " << a.out << '\n';
  }
  if (!report.ok()) {
    std::cerr << "invariant check failed\n";
    return 1;
  }
  std::cout << "all invariants passed\n";
  return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string code = "surface:3";
  std::string noise = "depolarizing";
  double p = 0.1;
  std::string profile = "desk";
  std::string config;
  std::optional<std::size_t> steps, batch, d_model, n_layers, d_ff, n_heads, eval_every, checkpoint_every;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string metrics;
};

int run_train(const TrainArgs& a) {
  TrainConfig tc = a.config.empty() ? TrainConfig::preset(a.profile) : train_config_from_json(read_file(a.config));
  if (a.steps) tc.steps = *a.steps;
  if (a.batch) tc.batch = *a.batch;
  if (a.d_model) tc.model.d_model = *a.d_model;
  if (a.n_layers) tc.model.n_layers = *a.n_layers;
  if (a.d_ff) tc.model.d_ff = *a.d_ff;
  if (a.n_heads) tc.model.n_heads = *a.n_heads;
  if (a.eval_every) tc.eval_every = *a.eval_every;
  if (a.checkpoint_every) tc.checkpoint_every = *a.checkpoint_every;
  if (a.lr) tc.lr = *a.lr;
  if (a.seed) tc.seed = *a.seed;
  if (!a.out.empty()) tc.checkpoint_path = a.out;
  if (!a.metrics.empty()) tc.metrics_path = a.metrics;

  const auto code = build_code(CodeSpec::parse(a.code));
  const auto noise = NoiseSpec::parse(a.noise).at(code.n, a.p);
  std::cout << "training on " << code.name << " with " << describe(noise) << '\n';
  const auto result = pretrain(code, noise, tc, [](const TrainReport& r) {
    std::printf("step %zu nll %.5f wall %.0f ms\n", r.step, r.nll, r.wall_ms);
    std::fflush(stdout);
  });
  if (std::holds_alternative<DepolarizingModel>(noise)) {
    std::printf("noise entropy %.5f nats\n", noise_entropy(noise));
  }
  if (!a.out.empty()) std::cout << "wrote " << a.out << '\n';
  return 0;
}

// ---- decode ---------------------------------------------------------------

struct DecodeArgs {
  std::string checkpoint;
  std::string code;
  std::string method = "pretrained";
  std::string syndromes;
  std::string noise = "depolarizing";
  double p = 0.1;
  std::size_t refine_samples = 64;
  std::uint64_t seed = 1;
  std::string out;
};

int run_decode(const DecodeArgs& a) {
  const auto method = parse_decode_method(a.method);
  std::optional<ModelParams<float>> params;
  CheckpointInfo info;
  if (!a.checkpoint.empty()) params = load_checkpoint(std::filesystem::path(a.checkpoint), &info);
  const std::string code_spec = !a.code.empty() ? a.code : info.code;
  if (code_spec.empty()) throw Error(ErrorCode::kBadConfig, "no code given and no checkpoint to take it from");
  const auto code = build_code(CodeSpec::parse(code_spec));
  const auto noise = NoiseSpec::parse(a.noise).at(code.n, a.p);

  std::vector<gf2::BitVec> gammas;
  std::ifstream in(a.syndromes);
  if (!in) throw Error(ErrorCode::kBadFile, "cannot open " + a.syndromes);
  for (std::string line; std::getline(in, line);) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string bits;
    for (char c : line) {
      if (c == '0' || c == '1') bits += c;
      else if (!std::isspace(static_cast<unsigned char>(c))) throw Error(ErrorCode::kBadFile, "bad syndrome line");
    }
    if (!bits.empty()) gammas.push_back(parse_bits(bits, code.m));
  }

  const auto beta = decode_syndromes(method, code, noise, params ? &*params : nullptr, gammas,
                                     DecodeOptions{a.refine_samples, a.seed});
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw Error(ErrorCode::kBadFile, "cannot write " + a.out);
  }
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << "syndrome,beta_hat,class\n";
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    out << gammas[i].to_string() << ',' << beta[i].to_string() << ',' << beta_index(beta[i]) << '\n';
  }
  return 0;
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::string code;
  std::string noise;
  std::string grid;
  std::string methods;
  std::optional<std::size_t> trials, refine_samples, steps;
  std::optional<std::uint64_t> seed;
  std::string profile;
  std::string checkpoint_dir;
  std::string out;
  bool no_timing = false;
  std::string compare;
};

int run_sweep_cmd(const SweepArgs& a) {
  ExperimentConfig c = a.config.empty() ? ExperimentConfig{} : experiment_config_from_json(read_file(a.config));
  if (!a.code.empty()) c.code = a.code;
  if (!a.noise.empty()) c.noise = NoiseSpec::parse(a.noise);
  if (!a.grid.empty()) c.grid = parse_grid(a.grid);
  if (!a.methods.empty()) c.methods = parse_methods(a.methods);
  if (!a.profile.empty()) c.train = TrainConfig::preset(a.profile);
  if (a.steps) c.train.steps = *a.steps;
  if (a.trials) c.trials = *a.trials;
  if (a.refine_samples) c.refine_samples = *a.refine_samples;
  if (a.seed) c.seed = *a.seed;
  if (!a.checkpoint_dir.empty()) c.checkpoint_dir = a.checkpoint_dir;
  if (!a.out.empty()) c.output = a.out;
  if (a.no_timing) c.record_wall_time = false;
  c.validate();

  const auto rows = run_sweep(c, {}, [](const std::string& msg) { std::cerr << msg << '\n'; });
  if (c.output.empty()) {
    write_sweep_csv(std::cout, c, rows);
  } else {
    std::ofstream out(c.output);
    if (!out) throw Error(ErrorCode::kBadFile, "cannot write " + c.output.string());
    write_sweep_csv(out, c, rows);
    std::cerr << "wrote " << c.output.string() << '\n';
  }
  if (!a.compare.empty()) {
    const auto pair = split(a.compare, ',');
    if (pair.size() != 2) throw Error(ErrorCode::kBadConfig, "--compare takes two methods, e.g. pretrained,exact_mld");
    const auto ma = parse_decode_method(pair[0]);
    const auto mb = parse_decode_method(pair[1]);
    for (const auto& cmp : compare_methods(rows, ma, mb)) {
      std::fprintf(stderr, "p=%g %s-%s difference %+.5f se %.5f ci [%+.5f, %+.5f] only_a %zu only_b %zu\n",
                   cmp.p, pair[0].c_str(), pair[1].c_str(), cmp.difference, cmp.std_error, cmp.ci_low,
                   cmp.ci_high, cmp.only_a, cmp.only_b);
    }
  }
  return 0;
}

// ---- oracle ---------------------------------------------------------------

struct OracleArgs {
  std::string code = "surface:3";
  std::string noise = "depolarizing";
  double p = 0.1;
  std::string syndrome;
  std::size_t trials = 0;
  std::uint64_t seed = 1;
};

int run_oracle(const OracleArgs& a) {
  const auto code = build_code(CodeSpec::parse(a.code));
  const auto noise = NoiseSpec::parse(a.noise).at(code.n, a.p);
  if (!a.syndrome.empty()) {
    const auto gamma = parse_bits(a.syndrome, code.m);
    const auto mld = exact_mld(code, noise, gamma);
    const auto mw = exact_minweight(code, noise, gamma);
    std::printf("class,beta,log_coset,log_best_error\n");
    for (std::size_t c = 0; c < mld.coset_logprob.size(); ++c) {
      std::printf("%zu,%s,%.10g,%.10g\n", c, beta_from_index(c, code.k).to_string().c_str(),
                  mld.coset_logprob[c], mw.coset_logprob[c]);
    }
    std::printf("exact_mld %s\nexact_minweight %s\n", mld.beta_hat.to_string().c_str(),
                mw.beta_hat.to_string().c_str());
    return 0;
  }
  if (a.trials == 0) throw Error(ErrorCode::kBadConfig, "give --syndrome or --trials");
  for (auto method : {DecodeMethod::kExactMld, DecodeMethod::kExactMinWeight}) {
    const auto r = logical_error_rate(code, noise, method, a.trials, a.seed);
    std::printf("%s rate %.6f stderr %.6f failures %zu trials %zu\n", std::string(to_string(method)).c_str(),
                r.rate, r.std_error, r.failures, r.trials);
  }
  return 0;
}

// ---- selftest -------------------------------------------------------------

int run_selftest_cmd() {
  bool ok = true;
  for (const auto& check : run_selftest()) {
    std::printf("%-4s %s%s%s\n", check.ok ? "ok" : "FAIL", check.name.c_str(), check.detail.empty() ? "" : "  ",
                check.detail.c_str());
    ok = ok && check.ok;
  }
  std::puts(ok ? "selftest passed" : "selftest failed");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qecgpt: generative decoding of stabilizer codes"};
  app.require_subcommand(1);

  BuildCodeArgs bc;
  auto* cmd_build = app.add_subcommand("build-code", "Build code tables and check their invariants");
  cmd_build->add_option("--code", bc.code, "Code spec, e.g. surface:3 or rep5+puncture:1@7");
  cmd_build->add_option("--kind", bc.kind, "surface | rotated_surface | toric | repetition");
  cmd_build->add_option("--n", bc.n, "Distance or length for --kind");
  cmd_build->add_option("--puncture", bc.puncture, "Random stabilizers to remove");
  cmd_build->add_option("--puncture-seed", bc.puncture_seed);
  cmd_build->add_option("--out", bc.out, "Write tables as JSON");

  TrainArgs tr;
  auto* cmd_train = app.add_subcommand("train", "Pretrain a model on sampled noise");
  cmd_train->add_option("--code", tr.code)->capture_default_str();
  cmd_train->add_option("--noise", tr.noise, "depolarizing | ising[:degree=D,field=F,seed=S]")->capture_default_str();
  cmd_train->add_option("--p", tr.p, "Error rate (or beta for ising)")->capture_default_str();
  cmd_train->add_option("--profile", tr.profile, "full | desk | quick")->capture_default_str();
  cmd_train->add_option("--config", tr.config, "Training config JSON");
  cmd_train->add_option("--steps", tr.steps);
  cmd_train->add_option("--batch", tr.batch);
  cmd_train->add_option("--lr", tr.lr);
  cmd_train->add_option("--d-model", tr.d_model);
  cmd_train->add_option("--n-heads", tr.n_heads);
  cmd_train->add_option("--n-layers", tr.n_layers);
  cmd_train->add_option("--d-ff", tr.d_ff);
  cmd_train->add_option("--eval-every", tr.eval_every);
  cmd_train->add_option("--checkpoint-every", tr.checkpoint_every);
  cmd_train->add_option("--seed", tr.seed);
  cmd_train->add_option("--out", tr.out, "Checkpoint path");
  cmd_train->add_option("--metrics", tr.metrics, "JSON-lines metrics path");

  DecodeArgs de;
  auto* cmd_decode = app.add_subcommand("decode", "Decode a file of syndromes");
  cmd_decode->add_option("--checkpoint", de.checkpoint);
  cmd_decode->add_option("--code", de.code, "Defaults to the checkpoint's code");
  cmd_decode->add_option("--method", de.method)->capture_default_str();
  cmd_decode->add_option("--syndromes", de.syndromes, "One bit string per line, '#' comments")->required();
  cmd_decode->add_option("--noise", de.noise)->capture_default_str();
  cmd_decode->add_option("--p", de.p)->capture_default_str();
  cmd_decode->add_option("--refine-samples", de.refine_samples)->capture_default_str();
  cmd_decode->add_option("--seed", de.seed)->capture_default_str();
  cmd_decode->add_option("--out", de.out, "CSV path (stdout if omitted)");

  SweepArgs sw;
  auto* cmd_sweep = app.add_subcommand("sweep", "Logical error rates over a grid of noise strengths");
  cmd_sweep->add_option("--config", sw.config, "Experiment config JSON");
  cmd_sweep->add_option("--code", sw.code);
  cmd_sweep->add_option("--noise", sw.noise);
  cmd_sweep->add_option("--p", sw.grid, "Comma-separated grid");
  cmd_sweep->add_option("--methods", sw.methods, "Comma-separated decoders");
  cmd_sweep->add_option("--trials", sw.trials);
  cmd_sweep->add_option("--refine-samples", sw.refine_samples);
  cmd_sweep->add_option("--seed", sw.seed);
  cmd_sweep->add_option("--profile", sw.profile);
  cmd_sweep->add_option("--steps", sw.steps, "Override training steps");
  cmd_sweep->add_option("--checkpoint-dir", sw.checkpoint_dir);
  cmd_sweep->add_option("--out", sw.out, "CSV path (stdout if omitted)");
  cmd_sweep->add_flag("--no-timing", sw.no_timing, "Write wall_ms as 0 for reproducible output");
  cmd_sweep->add_option("--compare", sw.compare, "Paired comparison a,b printed to stderr");

  OracleArgs orc;
  auto* cmd_oracle = app.add_subcommand("oracle", "Exact maximum-likelihood and minimum-weight references");
  cmd_oracle->add_option("--code", orc.code)->capture_default_str();
  cmd_oracle->add_option("--noise", orc.noise)->capture_default_str();
  cmd_oracle->add_option("--p", orc.p)->capture_default_str();
  cmd_oracle->add_option("--syndrome", orc.syndrome, "Print coset probabilities for one syndrome");
  cmd_oracle->add_option("--trials", orc.trials, "Estimate both oracle error rates");
  cmd_oracle->add_option("--seed", orc.seed)->capture_default_str();

  auto* cmd_self = app.add_subcommand("selftest", "Code invariants and normalization checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (cmd_build->parsed()) return run_build_code(bc);
    if (cmd_train->parsed()) return run_train(tr);
    if (cmd_decode->parsed()) return run_decode(de);
    if (cmd_sweep->parsed()) return run_sweep_cmd(sw);
    if (cmd_oracle->parsed()) return run_oracle(orc);
    if (cmd_self->parsed()) return run_selftest_cmd();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kTooLarge ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
