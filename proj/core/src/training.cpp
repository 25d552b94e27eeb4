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

#include "qecgpt/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "qecgpt/error.hpp"

namespace qecgpt {

namespace {

using Json = nlohmann::json;

CheckpointInfo info_for(const TrainConfig& config, const CodeTables& code, const NoiseModel& noise,
                        std::size_t step) {
  return {config.seed, step, code.name, describe(noise)};
}

/// All 4^n Paulis, (z|x) bits taken from the binary expansion of the index.
std::vector<PauliVec> all_paulis(std::size_t n) {
  const std::size_t total = std::size_t{1} << (2 * n);
  std::vector<PauliVec> out;
  out.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    PauliVec e(2 * n);
    for (std::size_t b = 0; b < 2 * n; ++b) e.set(b, (idx >> b) & 1);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<double> model_logq(const ModelParams<float>& params, const CodeTables& code,
                               const std::vector<PauliVec>& errors) {
  std::vector<ElsConfig> cfgs;
  cfgs.reserve(errors.size());
  for (const auto& e : errors) cfgs.push_back(pauli_to_els(code, e));
  return log_joint(params, sequence_rows(cfgs));
}

KlEstimate mean_with_error(const std::vector<double>& v) {
  KlEstimate r;
  if (v.empty()) return r;
  double sum = 0.0;
  for (double x : v) sum += x;
  r.value = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.value) * (x - r.value);
    r.std_error = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return r;
}

void check_shapes(const CodeTables& code, const NoiseModel& noise) {
  if (qubit_count(noise) != code.n) {
    throw Error(ErrorCode::kShapeMismatch, "noise model acts on " + std::to_string(qubit_count(noise)) +
                                               " qubits, code has " + std::to_string(code.n));
  }
}

}  // namespace

TrainConfig TrainConfig::preset(const std::string& name) {
  TrainConfig c;
  c.profile = name;
  if (name == "full") {
    c.model.d_model = 256;
    c.model.n_heads = 4;
    c.model.n_layers = 2;
    c.model.d_ff = 256;
    c.batch = 10000;
    c.steps = 100000;
    c.eval_every = 5000;
  } else if (name == "desk") {
    c.model.d_model = 64;
    c.model.n_heads = 4;
    c.model.n_layers = 2;
    c.model.d_ff = 64;
    c.batch = 512;
    c.steps = 20000;
    c.eval_every = 1000;
  } else if (name == "quick") {
    c.model.d_model = 64;
    c.model.n_heads = 4;
    c.model.n_layers = 2;
    c.model.d_ff = 64;
    c.batch = 256;
    c.steps = 6000;
    c.eval_every = 500;
  } else {
    throw Error(ErrorCode::kBadConfig, "unknown training profile '" + name + "'");
  }
  return c;
}

std::vector<std::string> TrainConfig::preset_names() { return {"full", "desk", "quick"}; }

void TrainConfig::validate() const {
  if (batch == 0 || steps == 0 || eval_every == 0) {
    throw Error(ErrorCode::kBadConfig, "batch, steps and eval_every must be positive");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::kBadConfig, "lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(ErrorCode::kBadConfig, "moment coefficients must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw Error(ErrorCode::kBadConfig, "eps must be positive");
  if (model.d_model == 0 || model.n_heads == 0 || model.n_layers == 0 || model.d_ff == 0 ||
      model.d_model % model.n_heads != 0) {
    throw Error(ErrorCode::kBadConfig, "invalid model dimensions");
  }
}

TrainConfig train_config_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kBadConfig, std::string("training config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kBadConfig, "training config must be a JSON object");
  try {
    TrainConfig c = TrainConfig::preset(j.value("profile", std::string("desk")));
    if (j.contains("model")) {
      const auto& m = j.at("model");
      c.model.d_model = m.value("d_model", c.model.d_model);
      c.model.n_heads = m.value("n_heads", c.model.n_heads);
      c.model.n_layers = m.value("n_layers", c.model.n_layers);
      c.model.d_ff = m.value("d_ff", c.model.d_ff);
    }
    c.batch = j.value("batch", c.batch);
    c.steps = j.value("steps", c.steps);
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.seed = j.value("seed", c.seed);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.checkpoint_path = j.value("checkpoint_path", c.checkpoint_path.string());
    c.metrics_path = j.value("metrics_path", c.metrics_path.string());
    c.validate();
    return c;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kBadConfig, std::string("training config: ") + e.what());
  }
}

std::string train_config_to_json(const TrainConfig& c) {
  Json j = {
      {"profile", c.profile},
      {"model",
       {{"d_model", c.model.d_model},
        {"n_heads", c.model.n_heads},
        {"n_layers", c.model.n_layers},
        {"d_ff", c.model.d_ff},
        {"activation", std::string(kActivation)}}},
      {"batch", c.batch},
      {"steps", c.steps},
      {"lr", c.lr},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"eps", c.eps},
      {"seed", c.seed},
      {"eval_every", c.eval_every},
      {"checkpoint_every", c.checkpoint_every},
      {"checkpoint_path", c.checkpoint_path.string()},
      {"metrics_path", c.metrics_path.string()},
  };
  return j.dump(2);
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0f), v_(size, 0.0f) {}

void Adam::step(ParamVector<float>& params, const ParamVector<float>& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer state and parameter sizes differ");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step = lr_ * std::sqrt(c2) / c1;
  const double eps_hat = eps_ * std::sqrt(c2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    const double m = beta1_ * m_[i] + (1.0 - beta1_) * g;
    const double v = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    m_[i] = static_cast<float>(m);
    v_[i] = static_cast<float>(v);
    params[i] = static_cast<float>(params[i] - step * m / (std::sqrt(v) + eps_hat));
  }
}

TrainResult pretrain(const CodeTables& code, const NoiseModel& noise, const TrainConfig& config,
                     const ReportCallback& on_report) {
  config.validate();
  check_shapes(code, noise);
  ModelConfig mc = config.model;
  mc.seq_len = 2 * code.n;
  mc.validate();

  TrainResult result{init_params<float>(mc, config.seed), {}};
  Adam adam(result.params.size(), config.lr, config.beta1, config.beta2, config.eps);
  ErrorSampler sampler(noise, derive_seed(config.seed, "train-noise"));

  std::ofstream metrics;
  if (!config.metrics_path.empty()) {
    metrics.open(config.metrics_path);
    if (!metrics) throw Error(ErrorCode::kBadFile, "cannot open metrics file " + config.metrics_path.string());
  }

  const auto t0 = std::chrono::steady_clock::now();
  double nll_sum = 0.0;
  std::size_t nll_count = 0;
  for (std::size_t step = 1; step <= config.steps; ++step) {
    const auto rows = sequence_rows(sample_training_batch(code, sampler, config.batch));
    NllGradient<float> g;
    try {
      g = grad_nll(result.params, rows);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNonFinite && !config.checkpoint_path.empty()) {
        save_checkpoint(config.checkpoint_path, result.params, info_for(config, code, noise, step - 1));
      }
      throw;
    }
    ParamVector<float> previous = result.params.values();
    adam.step(result.params.values(), g.grad.values());
    if (!result.params.all_finite()) {
      result.params.values() = std::move(previous);
      if (!config.checkpoint_path.empty()) {
        save_checkpoint(config.checkpoint_path, result.params, info_for(config, code, noise, step - 1));
      }
      throw Error(ErrorCode::kNonFinite, "parameters became non-finite at step " + std::to_string(step));
    }
    nll_sum += g.nll;
    ++nll_count;

    const bool last = step == config.steps;
    const bool want_ckpt = !config.checkpoint_path.empty() &&
                           (last || (config.checkpoint_every > 0 && step % config.checkpoint_every == 0));
    if (step % config.eval_every == 0 || last || want_ckpt) {
      TrainReport report;
      report.step = step;
      report.nll = nll_sum / static_cast<double>(nll_count);
      report.wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (want_ckpt) {
        save_checkpoint(config.checkpoint_path, result.params, info_for(config, code, noise, step));
        report.checkpoint = config.checkpoint_path;
      }
      if (step % config.eval_every == 0 || last) {
        nll_sum = 0.0;
        nll_count = 0;
      }
      if (metrics.is_open()) {
        metrics << Json{{"step", report.step}, {"nll", report.nll}, {"wall_ms", report.wall_ms}}.dump()
                << '\n';
        metrics.flush();
      }
      if (on_report) on_report(report);
      result.reports.push_back(std::move(report));
    }
  }
  return result;
}

KlEstimate evaluate_kl(const ModelParams<float>& params, const CodeTables& code, const NoiseModel& noise,
                       std::size_t samples, std::uint64_t seed) {
  check_shapes(code, noise);
  const auto logp = error_logprob(noise);
  if (2 * code.n <= 14) {
    const auto errors = all_paulis(code.n);
    const auto logq = model_logq(params, code, errors);
    double kl = 0.0;
    for (std::size_t i = 0; i < errors.size(); ++i) {
      const double lp = logp(errors[i]);
      if (lp == -std::numeric_limits<double>::infinity()) continue;
      kl += std::exp(lp) * (lp - logq[i]);
    }
    return {kl, 0.0, true};
  }
  if (samples < 2) throw Error(ErrorCode::kBadConfig, "Monte Carlo KL needs at least two samples");
  ErrorSampler sampler(noise, derive_seed(seed, "kl"));
  const auto errors = sampler.sample(samples);
  const auto logq = model_logq(params, code, errors);
  std::vector<double> terms(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) terms[i] = logp(errors[i]) - logq[i];
  return mean_with_error(terms);
}

double noise_entropy(const NoiseModel& noise) {
  const auto* d = std::get_if<DepolarizingModel>(&noise);
  if (d == nullptr) {
    throw Error(ErrorCode::kUnevaluableModel, describe(noise) + " has no closed-form entropy");
  }
  const double p = d->p;
  double h = 0.0;
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  if (p > 0.0) h -= p * std::log(p / 3.0);
  return static_cast<double>(d->n) * h;
}

KlEstimate heldout_nll(const ModelParams<float>& params, const CodeTables& code, const NoiseModel& noise,
                       std::size_t samples, std::uint64_t seed) {
  check_shapes(code, noise);
  if (samples == 0) throw Error(ErrorCode::kBadConfig, "held-out NLL needs samples");
  ErrorSampler sampler(noise, derive_seed(seed, "heldout"));
  auto logq = model_logq(params, code, sampler.sample(samples));
  for (double& v : logq) v = -v;
  return mean_with_error(logq);
}

std::vector<MismatchRow> train_mismatched(const CodeTables& code, double train_p,
                                          const std::vector<double>& eval_ps, const TrainConfig& config,
                                          std::size_t trials, std::uint64_t seed,
                                          const ModelParams<float>* mismatched,
                                          const std::map<double, ModelParams<float>>* matched) {
  auto check_rate = [](double p) {
    if (!(p > 0.0 && p < 0.5)) throw Error(ErrorCode::kBadConfig, "rates must lie in (0, 0.5)");
  };
  check_rate(train_p);
  for (double p : eval_ps) check_rate(p);

  ModelParams<float> own;
  if (mismatched == nullptr) {
    own = pretrain(code, DepolarizingModel{code.n, train_p}, config).params;
    mismatched = &own;
  }
  std::vector<MismatchRow> rows;
  for (std::size_t i = 0; i < eval_ps.size(); ++i) {
    const double p = eval_ps[i];
    const NoiseModel noise = DepolarizingModel{code.n, p};
    ModelParams<float> trained;
    const ModelParams<float>* reference = nullptr;
    if (p == train_p) {
      reference = mismatched;
    } else if (matched != nullptr && matched->count(p) > 0) {
      reference = &matched->at(p);
    } else {
      trained = pretrain(code, noise, config).params;
      reference = &trained;
    }
    const auto batch = sample_errors(code, noise, trials, derive_seed(seed, "mismatch", i));
    const auto a = score(batch, decode_syndromes(DecodeMethod::kPretrained, code, noise, mismatched, batch.gamma));
    const auto b = score(batch, decode_syndromes(DecodeMethod::kPretrained, code, noise, reference, batch.gamma));
    std::size_t fa = 0;
    std::size_t fb = 0;
    std::vector<double> diff(trials);
    for (std::size_t t = 0; t < trials; ++t) {
      fa += !a[t].success;
      fb += !b[t].success;
      diff[t] = static_cast<double>(!a[t].success) - static_cast<double>(!b[t].success);
    }
    const auto d = mean_with_error(diff);
    rows.push_back({p, RateEstimate::from_counts(fa, trials), RateEstimate::from_counts(fb, trials), d.value,
                    d.std_error});
  }
  return rows;
}

}  // namespace qecgpt
