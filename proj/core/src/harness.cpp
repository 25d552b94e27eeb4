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

#include "qecgpt/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "qecgpt/error.hpp"

namespace qecgpt {

namespace {

using Json = nlohmann::json;

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

bool uses_model(DecodeMethod m) {
  return m == DecodeMethod::kPretrained || m == DecodeMethod::kRefined || m == DecodeMethod::kModelArgmax;
}

std::filesystem::path checkpoint_for(const ExperimentConfig& config, double value) {
  return config.checkpoint_dir / ("model_" + format_double("%.6g", value) + ".ckpt");
}

}  // namespace

NoiseSpec NoiseSpec::parse(std::string_view text) {
  NoiseSpec spec;
  const auto colon = text.find(':');
  spec.kind = std::string(text.substr(0, colon));
  if (spec.kind != "depolarizing" && spec.kind != "ising") {
    throw Error(ErrorCode::kBadConfig, "unknown noise kind '" + spec.kind + "'");
  }
  if (colon == std::string_view::npos) return spec;
  if (spec.kind == "depolarizing") throw Error(ErrorCode::kBadConfig, "depolarizing noise takes no options");
  std::string rest(text.substr(colon + 1));
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kBadConfig, "expected key=value in '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "degree") {
        spec.degree = std::stoul(value);
      } else if (key == "field") {
        spec.field = std::stod(value);
      } else if (key == "seed") {
        spec.graph_seed = std::stoull(value);
      } else {
        throw Error(ErrorCode::kBadConfig, "unknown ising option '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kBadConfig, "bad value for ising option '" + key + "'");
    }
  }
  return spec;
}

std::string NoiseSpec::to_string() const {
  if (!is_ising()) return kind;
  return "ising:degree=" + std::to_string(degree) + ",field=" + format_double("%g", field) +
         ",seed=" + std::to_string(graph_seed);
}

NoiseModel NoiseSpec::at(std::size_t n, double value) const {
  if (is_ising()) return IsingNoiseModel::random_regular(n, value, graph_seed, degree, field);
  return DepolarizingModel{n, value};
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw Error(ErrorCode::kBadConfig, "no decoding methods given");
  if (grid.empty()) throw Error(ErrorCode::kBadConfig, "empty parameter grid");
  if (trials == 0) throw Error(ErrorCode::kBadConfig, "trials must be positive");
  if (refine_samples == 0) throw Error(ErrorCode::kBadConfig, "refine_samples must be positive");
  for (double v : grid) {
    if (noise.is_ising() ? !(v >= 0.0 && std::isfinite(v)) : !(v > 0.0 && v < 0.5)) {
      throw Error(ErrorCode::kBadConfig, "grid value " + format_double("%g", v) + " out of range");
    }
  }
  train.validate();
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kBadConfig, std::string("experiment config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kBadConfig, "experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    c.code = j.value("code", c.code);
    if (j.contains("noise")) c.noise = NoiseSpec::parse(j.at("noise").get<std::string>());
    if (j.contains("train")) {
      c.train = train_config_from_json(j.at("train").dump());
    } else if (j.contains("profile")) {
      c.train = TrainConfig::preset(j.at("profile").get<std::string>());
    }
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) c.methods.push_back(parse_decode_method(m.get<std::string>()));
    }
    if (j.contains("grid")) c.grid = j.at("grid").get<std::vector<double>>();
    c.trials = j.value("trials", c.trials);
    c.seed = j.value("seed", c.seed);
    c.refine_samples = j.value("refine_samples", c.refine_samples);
    c.record_wall_time = j.value("record_wall_time", c.record_wall_time);
    c.output = j.value("output", c.output.string());
    c.checkpoint_dir = j.value("checkpoint_dir", c.checkpoint_dir.string());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kBadConfig, std::string("experiment config: ") + e.what());
  }
  CodeSpec::parse(c.code);
  c.validate();
  return c;
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  Json methods = Json::array();
  for (auto m : c.methods) methods.push_back(std::string(to_string(m)));
  Json j = {
      {"code", c.code},
      {"noise", c.noise.to_string()},
      {"train", Json::parse(train_config_to_json(c.train))},
      {"methods", methods},
      {"grid", c.grid},
      {"trials", c.trials},
      {"seed", c.seed},
      {"refine_samples", c.refine_samples},
      {"record_wall_time", c.record_wall_time},
      {"output", c.output.string()},
      {"checkpoint_dir", c.checkpoint_dir.string()},
  };
  return j.dump(2);
}

SweepSeeds sweep_seeds(std::uint64_t root, std::size_t index) {
  return {derive_seed(root, "noise", index), derive_seed(root, "train", index),
          derive_seed(root, "decode", index)};
}

std::size_t thread_count() {
  const char* env = std::getenv("QECGPT_THREADS");
  if (env == nullptr) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return 1;
  return static_cast<std::size_t>(v);
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const ModelProvider& provider,
                                const std::function<void(const std::string&)>& log) {
  config.validate();
  const auto code = build_code(CodeSpec::parse(config.code));
  if (!config.checkpoint_dir.empty()) std::filesystem::create_directories(config.checkpoint_dir);
  bool need_model = false;
  for (auto m : config.methods) need_model = need_model || uses_model(m);

  std::mutex log_mutex;
  auto note = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    log(msg);
  };

  const std::size_t points = config.grid.size();
  std::vector<std::vector<SweepRow>> per_point(points);
  std::vector<std::exception_ptr> errors(points);

  auto run_point = [&](std::size_t i) {
    const double value = config.grid[i];
    const auto seeds = sweep_seeds(config.seed, i);
    const NoiseModel noise = config.noise.at(code.n, value);

    ModelParams<float> owned;
    const ModelParams<float>* params = nullptr;
    if (need_model) {
      if (provider) params = provider(i, value);
      if (params == nullptr) {
        const auto path = config.checkpoint_dir.empty() ? std::filesystem::path() : checkpoint_for(config, value);
        if (!path.empty() && std::filesystem::exists(path)) {
          owned = load_checkpoint(path);
          note("loaded " + path.string());
        } else {
          TrainConfig tc = config.train;
          tc.seed = seeds.train;
          tc.checkpoint_path = path;
          tc.metrics_path.clear();
          note("training " + describe(noise));
          owned = pretrain(code, noise, tc).params;
        }
        params = &owned;
      }
      if (params->config().seq_len != 2 * code.n) {
        throw Error(ErrorCode::kShapeMismatch, "model does not match " + code.name);
      }
    }

    const auto batch = sample_errors(code, noise, config.trials, seeds.noise);
    DecodeOptions options{config.refine_samples, seeds.decode};
    for (auto method : config.methods) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto records = score(batch, decode_syndromes(method, code, noise, params, batch.gamma, options));
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      SweepRow row;
      row.p = value;
      row.method = method;
      row.trials = config.trials;
      row.wall_ms = config.record_wall_time ? ms : 0.0;
      row.error_hash = batch.hash;
      row.failed.reserve(records.size());
      std::size_t failures = 0;
      for (const auto& r : records) {
        row.failed.push_back(!r.success);
        failures += !r.success;
      }
      const auto est = RateEstimate::from_counts(failures, config.trials);
      row.logical_error_rate = est.rate;
      row.std_error = est.std_error;
      note(format_double("%g", value) + " " + std::string(to_string(method)) + " " +
           format_double("%.5f", est.rate));
      per_point[i].push_back(std::move(row));
    }
  };

  const std::size_t workers = std::min(thread_count(), points);
  if (workers <= 1) {
    for (std::size_t i = 0; i < points; ++i) run_point(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < points; i = next++) {
          try {
            run_point(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<SweepRow> rows;
  for (auto& point : per_point) {
    for (auto& r : point) rows.push_back(std::move(r));
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const ExperimentConfig& config, const std::vector<SweepRow>& rows) {
  out << "# code=" << config.code << " noise=" << config.noise.to_string() << " grid="
      << (config.noise.is_ising() ? "beta" : "p") << '\n';
  out << "# seed=" << config.seed << " streams=noise,train,decode trials=" << config.trials
      << " refine_samples=" << config.refine_samples << '\n';
  std::map<double, std::uint64_t> hashes;
  for (const auto& r : rows) hashes.emplace(r.p, r.error_hash);
  for (const auto& [p, h] : hashes) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    out << "# error_hash p=" << format_double("%g", p) << ' ' << buf << '\n';
  }
  out << "p,method,logical_error_rate,stderr,trials,wall_ms\n";
  for (const auto& r : rows) {
    out << format_double("%g", r.p) << ',' << to_string(r.method) << ','
        << format_double("%.8f", r.logical_error_rate) << ',' << format_double("%.8f", r.std_error) << ','
        << r.trials << ',' << format_double("%.1f", r.wall_ms) << '\n';
  }
}

std::string sweep_csv(const ExperimentConfig& config, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  write_sweep_csv(out, config, rows);
  return out.str();
}

std::vector<MethodComparison> compare_methods(const std::vector<SweepRow>& rows, DecodeMethod a,
                                              DecodeMethod b, double z) {
  std::map<double, const SweepRow*> ra;
  std::map<double, const SweepRow*> rb;
  for (const auto& r : rows) {
    if (r.method == a) ra[r.p] = &r;
    if (r.method == b) rb[r.p] = &r;
  }
  std::vector<MethodComparison> out;
  for (const auto& [p, x] : ra) {
    const auto it = rb.find(p);
    if (it == rb.end()) continue;
    const SweepRow* y = it->second;
    if (x->error_hash != y->error_hash || x->failed.size() != y->failed.size() || x->failed.size() != x->trials) {
      throw Error(ErrorCode::kUnpairedData, "rows at p=" + format_double("%g", p) +
                                                " were not decoded on the same error sample");
    }
    MethodComparison c;
    c.p = p;
    c.a = a;
    c.b = b;
    const auto t = static_cast<double>(x->failed.size());
    for (std::size_t i = 0; i < x->failed.size(); ++i) {
      c.only_a += x->failed[i] && !y->failed[i];
      c.only_b += !x->failed[i] && y->failed[i];
    }
    c.difference = (static_cast<double>(c.only_a) - static_cast<double>(c.only_b)) / t;
    // Variance of the mean of per-trial differences in {-1, 0, 1}.
    const double second = (static_cast<double>(c.only_a) + static_cast<double>(c.only_b)) / t;
    c.std_error = t > 1 ? std::sqrt(std::max(second - c.difference * c.difference, 0.0) / (t - 1.0)) : 0.0;
    c.ci_low = c.difference - z * c.std_error;
    c.ci_high = c.difference + z * c.std_error;
    out.push_back(c);
  }
  return out;
}

}  // namespace qecgpt

namespace qecgpt {

namespace {

PauliVec random_pauli(std::size_t n, Rng& rng) {
  PauliVec e(2 * n);
  for (std::size_t b = 0; b < 2 * n; ++b) e.set(b, rng() & 1);
  return e;
}

bool els_round_trips(const CodeTables& code, Rng& rng, std::size_t samples) {
  for (std::size_t t = 0; t < samples; ++t) {
    const auto e = random_pauli(code.n, rng);
    if (els_to_pauli(code, pauli_to_els(code, e)) != e) return false;
  }
  return true;
}

}  // namespace

std::vector<SelfTestCheck> run_selftest() {
  std::vector<SelfTestCheck> out;
  Rng rng(derive_seed(0, "selftest"));
  const std::vector<std::string> specs{"surface:3",      "rotated_surface:3", "toric:3",
                                       "repetition:3",   "repetition:5",      "surface:3+puncture:2@1",
                                       "toric:3+puncture:1@2"};
  for (const auto& spec : specs) {
    try {
      const auto code = build_code(CodeSpec::parse(spec));
      const auto report = check_invariants(code);
      out.push_back({spec + " invariants", report.ok(), report.ok() ? "" : report.describe()});
      out.push_back({spec + " ELS round trip", els_round_trips(code, rng, 200), ""});
    } catch (const Error& e) {
      out.push_back({spec, false, e.what()});
    }
  }

  // Joint normalization of a random double-precision model over 2^8 sequences.
  {
    const ModelConfig cfg{8, 8, 2, 1, 8};
    const auto params = init_params<double>(cfg, 7);
    BitRows all(256, 8);
    for (int r = 0; r < 256; ++r) {
      for (int i = 0; i < 8; ++i) all(r, i) = (r >> i) & 1;
    }
    double total = 0.0;
    for (double v : log_joint(params, all)) total += std::exp(v);
    out.push_back({"model joint normalization", std::abs(total - 1.0) < 1e-9,
                   "sum = " + std::to_string(total)});
  }

  // Exact coset probabilities over every syndrome sum to one.
  {
    const auto code = build_code(CodeSpec::parse("repetition:4"));
    const NoiseModel noise = DepolarizingModel{code.n, 0.1};
    double total = 0.0;
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << code.m); ++s) {
      gf2::BitVec gamma(code.m);
      for (std::size_t i = 0; i < code.m; ++i) gamma.set(i, (s >> i) & 1);
      for (double v : exact_mld(code, noise, gamma).coset_logprob) total += std::exp(v);
    }
    out.push_back({"exact MLD normalization", std::abs(total - 1.0) < 1e-9, "sum = " + std::to_string(total)});
  }
  return out;
}

}  // namespace qecgpt
