#include "pegnet/trainer.hpp"

#include "pegnet/datagen.hpp"
#include "pegnet/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

namespace pegnet {

namespace fs = std::filesystem;

// --- config ---------------------------------------------------------------------

void TrainConfig::validate() const {
  auto finite_nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
  if (!(std::isfinite(peak_lr) && peak_lr > 0.0)) throw ConfigError("peak_lr must be > 0");
  if (!finite_nonneg(weight_decay)) throw ConfigError("weight_decay must be >= 0");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
  if (total_steps < 0) throw ConfigError("total_steps must be >= 0");
  if (total_steps > 0 && total_steps <= warmup_steps) throw ConfigError("total_steps must exceed warmup_steps");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!finite_nonneg(input_noise_std)) throw ConfigError("input_noise_std must be >= 0");
  weights().validate();
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (latent < 1 || mlp_hidden < 1 || hidden_layers < 0) throw ConfigError("model sizes are invalid");
  if (checkpoint_every < 0 || validate_every < 0 || patience < 0 || max_val_pairs < 1) {
    throw ConfigError("checkpoint/validation cadence is invalid");
  }
}

std::string TrainConfig::variant() const {
  if (no_physics_loss && generic_mp) return "model-c";
  if (generic_mp) return "model-b";
  if (no_physics_loss) return "model-a";
  return "ours";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config key " + key + ": bad value '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key " + key + ": expected true/false, got '" + v + "'");
}

using Setter = std::function<void(TrainConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto dbl = [](double TrainConfig::*m) {
      return [m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = parse_number<double>(k, v); };
    };
    auto integer = [](int TrainConfig::*m) {
      return [m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = parse_number<int>(k, v); };
    };
    auto flag = [](bool TrainConfig::*m) {
      return [m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = parse_bool(k, v); };
    };
    t["peak_lr"] = dbl(&TrainConfig::peak_lr);
    t["weight_decay"] = dbl(&TrainConfig::weight_decay);
    t["warmup_steps"] = integer(&TrainConfig::warmup_steps);
    t["total_steps"] = integer(&TrainConfig::total_steps);
    t["batch_size"] = integer(&TrainConfig::batch_size);
    t["lambda_div"] = dbl(&TrainConfig::lambda_div);
    t["lambda_mass"] = dbl(&TrainConfig::lambda_mass);
    t["input_noise_std"] = dbl(&TrainConfig::input_noise_std);
    t["seed"] = [](TrainConfig& c, const std::string& k, const std::string& v) {
      c.seed = parse_number<std::uint64_t>(k, v);
    };
    t["no_physics_loss"] = flag(&TrainConfig::no_physics_loss);
    t["generic_mp"] = flag(&TrainConfig::generic_mp);
    t["depth"] = integer(&TrainConfig::depth);
    t["latent"] = integer(&TrainConfig::latent);
    t["mlp_hidden"] = integer(&TrainConfig::mlp_hidden);
    t["hidden_layers"] = integer(&TrainConfig::hidden_layers);
    t["checkpoint_every"] = integer(&TrainConfig::checkpoint_every);
    t["validate_every"] = integer(&TrainConfig::validate_every);
    t["patience"] = integer(&TrainConfig::patience);
    t["max_val_pairs"] = integer(&TrainConfig::max_val_pairs);
    return t;
  }();
  return table;
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

}  // namespace

TrainConfig parse_train_config(std::string_view text) {
  TrainConfig c;
  std::map<std::string, bool> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (seen[key]) throw ConfigError("config line " + std::to_string(line_no) + ": repeated key '" + key + "'");
    seen[key] = true;
    it->second(c, key, value);
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"peak_lr", c.peak_lr},
          {"weight_decay", c.weight_decay},
          {"warmup_steps", c.warmup_steps},
          {"total_steps", c.total_steps},
          {"batch_size", c.batch_size},
          {"lambda_div", c.lambda_div},
          {"lambda_mass", c.lambda_mass},
          {"input_noise_std", c.input_noise_std},
          {"seed", c.seed},
          {"no_physics_loss", c.no_physics_loss},
          {"generic_mp", c.generic_mp},
          {"depth", c.depth},
          {"latent", c.latent},
          {"mlp_hidden", c.mlp_hidden},
          {"hidden_layers", c.hidden_layers},
          {"checkpoint_every", c.checkpoint_every},
          {"validate_every", c.validate_every},
          {"patience", c.patience},
          {"max_val_pairs", c.max_val_pairs},
          {"variant", c.variant()}};
}

std::string to_text(const TrainConfig& c) {
  std::ostringstream out;
  const nlohmann::json j = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (key == "variant") continue;
    out << key << " = " << (value.is_number_float() ? fmt(value.get<double>()) : value.dump()) << '\n';
  }
  return out.str();
}

// --- optimizer ------------------------------------------------------------------

double lr_schedule(std::int64_t t, const TrainConfig& c) {
  if (t <= 0) return 0.0;
  if (t <= c.warmup_steps) return c.peak_lr * static_cast<double>(t) / c.warmup_steps;
  if (t >= c.total_steps) return 0.0;
  const double frac = static_cast<double>(t - c.warmup_steps) / (c.total_steps - c.warmup_steps);
  return c.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void adamw_step(ParamStore& params, const Gradients& grads, AdamState& s, double lr, double wd, const AdamHyper& h) {
  if (grads.size() != params.size()) throw ShapeError("adamw: gradient count mismatch");
  if (s.m.empty()) {
    s.m = params.zeros_like();
    s.v = params.zeros_like();
  }
  ++s.t;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params.value(i);
    const Tensor& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols()) throw ShapeError("adamw: gradient shape mismatch");
    s.m[i] = h.beta1 * s.m[i] + (1.0 - h.beta1) * g;
    s.v[i] = h.beta2 * s.v[i] + (1.0 - h.beta2) * g.cwiseProduct(g);
    const auto m_hat = s.m[i].array() / c1;
    const auto v_hat = s.v[i].array() / c2;
    p.array() -= lr * (m_hat / (v_hat.sqrt() + h.eps) + wd * p.array());
  }
}

// --- sampling ---------------------------------------------------------------------

std::vector<Pair> sample_pairs(const std::vector<int>& trajectories, int steps, int batch, std::mt19937_64& rng) {
  if (trajectories.empty()) throw ConfigError("no trajectories to sample from");
  if (steps < 2) throw ConfigError("trajectories need at least 2 frames to form pairs");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  const std::int64_t per = steps - 1;
  std::uniform_int_distribution<std::int64_t> flat(0, static_cast<std::int64_t>(trajectories.size()) * per - 1);
  std::vector<Pair> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    const std::int64_t k = flat(rng);
    out.emplace_back(trajectories[static_cast<std::size_t>(k / per)], static_cast<int>(k % per));
  }
  return out;
}

Split split_trajectories(int n) {
  Split s;
  const int held = n / 10;
  for (int i = 0; i < n; ++i) (i < n - held ? s.train : s.val).push_back(i);
  return s;
}

bool plateau_reached(const std::vector<double>& h, int patience) {
  if (patience < 2 || static_cast<int>(h.size()) < patience) return false;
  const int recent = std::max(1, static_cast<int>(std::ceil(0.2 * patience)));
  const auto begin = h.end() - patience;
  const auto split = h.end() - recent;
  const double best_before = *std::min_element(begin, split);
  const double best_recent = *std::min_element(split, h.end());
  return best_recent > best_before * (1.0 - 0.01);
}

// --- loss -------------------------------------------------------------------------

namespace {

Tensor hstack(const std::vector<Tensor>& parts) {
  Index cols = 0;
  for (const auto& p : parts) cols += p.cols();
  Tensor out(parts.front().rows(), cols);
  Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p;
    c += p.cols();
  }
  return out;
}

Tensor broadcast_row(const Eigen::RowVectorXd& row, Index rows) { return row.replicate(rows, 1); }

}  // namespace

SampleLoss record_sample_loss(Tape& tape, const Model& model, const Normalizer& normalizer, const SimContext& ctx,
                              const std::vector<Tensor>& x0, const std::vector<Tensor>& x1, double dt,
                              const LossSettings& settings, const std::vector<Tensor>& noise) {
  const TaskSpec& task = model.task();
  const std::size_t nf = task.fields.size();
  if (x0.size() != nf || x1.size() != nf) throw ShapeError("sample loss: field count mismatch");
  if (!noise.empty() && noise.size() != nf) throw ShapeError("sample loss: noise field count mismatch");
  if (!(dt > 0.0)) throw ConfigError("training dt must be > 0");
  normalizer.check(task);
  const Index n = ctx.hierarchy.levels.front().num_nodes();

  // Noise is applied in normalized units; the targets follow the noisy input.
  std::vector<Tensor> base(nf);
  std::vector<Var> inputs;
  for (std::size_t k = 0; k < nf; ++k) {
    Tensor xn = normalizer.normalize(k, x0[k]);
    base[k] = x0[k];
    if (!noise.empty()) {
      xn += noise[k];
      base[k] += (noise[k].array().rowwise() * normalizer.at(k).std.array()).matrix();
    }
    inputs.push_back(tape.constant(std::move(xn)));
  }
  const std::vector<Var> out = model.forward(tape, ctx.hierarchy, inputs, tape.constant(ctx.node_one_hot));

  std::vector<Tensor> targets;
  for (std::size_t k = 0; k < nf; ++k) {
    if (task.fields[k].integrated) {
      targets.push_back(((x1[k] - base[k]) / dt).array().rowwise() / normalizer.at(k).rate_scale.array());
    } else {
      targets.push_back(normalizer.normalize(k, x1[k]));
    }
  }
  SampleLoss loss;
  loss.pred = l_pred(tape, tape.concat(std::span<const Var>(out)), tape.constant(hstack(targets)));

  if (settings.physics) {
    auto physical = [&](std::size_t k) {
      const Var step = tape.mul(out[k], tape.constant(broadcast_row(dt * normalizer.at(k).rate_scale, n)));
      return tape.add(tape.constant(base[k]), step);
    };
    const int vel = task.field_index("velocity");
    const int conc = task.field_index("concentration");
    if (vel >= 0) {
      const StencilVars stencil = record_stencil(tape, ctx.hierarchy.levels.front());
      const auto kv = static_cast<std::size_t>(vel);
      const Var v1 = physical(kv);
      const double sv2 = normalizer.at(kv).std.squaredNorm() / static_cast<double>(task.fields[kv].width);
      loss.div = tape.scale(l_div(tape, v1, stencil), 1.0 / sv2);
      if (conc >= 0) {
        const auto kc = static_cast<std::size_t>(conc);
        const double sc2 = normalizer.at(kc).std.squaredNorm();
        loss.mass = tape.scale(l_mass(tape, tape.constant(base[kc]), physical(kc), v1, stencil), 1.0 / sc2);
      }
    }
  }
  loss.total = total_loss(tape, loss.pred, loss.div, loss.mass, settings.weights);
  return loss;
}

// --- training ---------------------------------------------------------------------

int env_threads() {
  const char* s = std::getenv("PEGNET_THREADS");
  if (s == nullptr) return 1;
  int n = 0;
  const auto [ptr, ec] = std::from_chars(s, s + std::strlen(s), n);
  if (ec != std::errc() || n < 1) return 1;
  return n;
}

ModelConfig model_config_for(const TrainConfig& c, const DatasetMeta& meta) {
  ModelConfig m;
  m.task = meta.task().kind;
  m.dim = meta.dim;
  m.num_node_types = kNumNodeTypes;
  m.latent = c.latent;
  m.mlp_hidden = c.mlp_hidden;
  m.hidden_layers = c.hidden_layers;
  m.depth = c.depth;
  m.generic_mp = c.generic_mp;
  m.seed = derive_seed(c.seed, 1);
  return m;
}

namespace {

struct SampleResult {
  Gradients grads;
  double total = 0.0, pred = 0.0, div = 0.0, mass = 0.0;
};

double scalar(const Tape& tape, Var v) { return v.valid() ? tape.value(v)(0, 0) : 0.0; }

template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

void write_train_log(const fs::path& path, const std::vector<LogRow>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "step,lr,loss,pred,div,mass,val_mse\n";
  for (const auto& r : log) {
    out << r.step << ',' << fmt(r.lr) << ',' << fmt(r.loss) << ',' << fmt(r.pred) << ',' << fmt(r.div) << ','
        << fmt(r.mass) << ',' << fmt(r.val_mse) << '\n';
  }
}

TrainResult train(const TrainConfig& config, const Dataset& data, const TrainIo& io) {
  config.validate();
  validate_dataset(data);
  const DatasetMeta& meta = data.meta;
  if (meta.steps < 2) throw DataError("training needs trajectories of at least 2 frames");
  const TaskSpec task = meta.task();

  TrainResult result;
  result.split = split_trajectories(meta.num_trajectories);
  if (result.split.train.empty()) throw DataError("no training trajectories");

  NormalizerBuilder nb(task);
  for (int i : result.split.train) nb.add_trajectory(data.trajectories[static_cast<std::size_t>(i)].fields, meta.dt);
  result.normalizer = nb.finish();
  result.model = std::make_unique<Model>(model_config_for(config, meta));
  Model& model = *result.model;

  std::vector<SimContext> contexts;
  for (const auto& t : data.trajectories) contexts.push_back(SimContext::build(t.mesh, model.config()));

  std::mt19937_64 sample_rng(derive_seed(config.seed, 2));
  std::mt19937_64 noise_rng(derive_seed(config.seed, 3));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const LossSettings settings{config.weights(), !config.no_physics_loss};
  const int threads = io.threads > 0 ? io.threads : env_threads();

  std::vector<Pair> val_pairs;
  if (!result.split.val.empty() && config.validate_every > 0) {
    std::mt19937_64 val_rng(derive_seed(config.seed, 4));
    val_pairs = sample_pairs(result.split.val, meta.steps, config.max_val_pairs, val_rng);
  }

  auto save = [&](const fs::path& p, int step) { save_checkpoint(p, model, result.normalizer, step, to_json(config)); };
  if (io.out_dir) fs::create_directories(*io.out_dir);

  auto run_sample = [&](const Pair& pr, const std::vector<Tensor>& noise, const LossSettings& s, bool need_grads) {
    const Trajectory& t = data.trajectories[static_cast<std::size_t>(pr.first)];
    Tape tape(&model.params());
    const SampleLoss l = record_sample_loss(tape, model, result.normalizer, contexts[static_cast<std::size_t>(pr.first)],
                                            t.state(pr.second), t.state(pr.second + 1), meta.dt, s, noise);
    SampleResult r{{}, scalar(tape, l.total), scalar(tape, l.pred), scalar(tape, l.div), scalar(tape, l.mass)};
    if (need_grads) {
      tape.backward(l.total);
      r.grads = tape.param_grads();
    }
    return r;
  };

  AdamState adam;
  std::vector<double> val_history;
  for (int step = 1; step <= config.total_steps; ++step) {
    const double lr = lr_schedule(step, config);
    const std::vector<Pair> batch = sample_pairs(result.split.train, meta.steps, config.batch_size, sample_rng);

    std::vector<std::vector<Tensor>> noise(batch.size());
    if (config.input_noise_std > 0.0) {
      for (auto& per_sample : noise) {
        for (const auto& f : task.fields) {
          Tensor z(meta.num_nodes, f.width);
          for (Index i = 0; i < z.size(); ++i) z.data()[i] = config.input_noise_std * gauss(noise_rng);
          per_sample.push_back(std::move(z));
        }
      }
    }

    std::vector<SampleResult> samples(batch.size());
    parallel_for(static_cast<int>(batch.size()), threads, [&](int b) {
      const auto bi = static_cast<std::size_t>(b);
      samples[bi] = run_sample(batch[bi], noise[bi], settings, true);
    });

    // Fixed-order reduction keeps the update independent of the thread count.
    LogRow row;
    row.step = step;
    row.lr = lr;
    row.val_mse = std::numeric_limits<double>::quiet_NaN();
    Gradients grads = model.params().zeros_like();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const auto& s : samples) {
      accumulate(grads, s.grads);
      row.loss += s.total * inv_b;
      row.pred += s.pred * inv_b;
      row.div += s.div * inv_b;
      row.mass += s.mass * inv_b;
    }
    if (!std::isfinite(row.loss)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << " (pred " << row.pred << ", div " << row.div << ", mass "
          << row.mass << ", lr " << lr << "); samples:";
      for (const auto& [ti, tt] : batch) msg << " (" << ti << "," << tt << ")";
      throw NumericError(msg.str());
    }
    for (auto& g : grads) g *= inv_b;
    adamw_step(model.params(), grads, adam, lr, config.weight_decay);

    if (!val_pairs.empty() && step % config.validate_every == 0) {
      std::vector<SampleResult> vs(val_pairs.size());
      const LossSettings pred_only{config.weights(), false};
      parallel_for(static_cast<int>(val_pairs.size()), threads, [&](int i) {
        vs[static_cast<std::size_t>(i)] = run_sample(val_pairs[static_cast<std::size_t>(i)], {}, pred_only, false);
      });
      double mse = 0.0;
      for (const auto& v : vs) mse += v.pred / static_cast<double>(vs.size());
      row.val_mse = mse;
      val_history.push_back(mse);
    }
    result.log.push_back(row);
    result.steps_done = step;
    if (io.on_log) io.on_log(row);
    if (io.out_dir && config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
      save(*io.out_dir / ("ckpt_" + std::to_string(step) + ".ckpt"), step);
    }
    if (config.patience > 0 && plateau_reached(val_history, config.patience)) {
      result.converged = true;
      break;
    }
  }

  if (io.out_dir) {
    save(*io.out_dir / "model.ckpt", result.steps_done);
    write_train_log(*io.out_dir / "train_log.csv", result.log);
  }
  return result;
}

// --- checkpoints -----------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'P', 'E', 'G', 'N', 'E', 'T', 'C', 'K'};

template <typename T>
void put_le(std::vector<char>& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get_le(const std::vector<char>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("checkpoint truncated");
  char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

nlohmann::json param_manifest(const ParamStore& params) {
  nlohmann::json m = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    m.push_back({{"name", params.name(i)}, {"rows", params.value(i).rows()}, {"cols", params.value(i).cols()}});
  }
  return m;
}

}  // namespace

std::vector<char> serialize_checkpoint(const Model& model, const Normalizer& normalizer, std::int64_t step,
                                       const nlohmann::json& train_config) {
  normalizer.check(model.task());
  const nlohmann::json header = {{"format", "pegnet-checkpoint"},
                                 {"version", kCheckpointVersion},
                                 {"model", to_json(model.config())},
                                 {"normalizer", to_json(normalizer)},
                                 {"step", step},
                                 {"train_config", train_config},
                                 {"manifest", param_manifest(model.params())}};
  const std::string text = header.dump();
  const Eigen::VectorXd flat = model.params().flatten();
  std::vector<char> out(kMagic, kMagic + sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(flat.size()));
  for (Index i = 0; i < flat.size(); ++i) put_le<double>(out, flat(i));
  return out;
}

void save_checkpoint(const fs::path& path, const Model& model, const Normalizer& normalizer, std::int64_t step,
                     const nlohmann::json& train_config) {
  write_file_bytes(path, serialize_checkpoint(model, normalizer, step, train_config));
}

Checkpoint parse_checkpoint(const std::vector<char>& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(bytes, pos);
  if (header_len > bytes.size() - pos) throw DataError("checkpoint truncated in header");
  Checkpoint c;
  try {
    const nlohmann::json h = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
    if (h.at("format") != "pegnet-checkpoint" || h.at("version").get<std::uint32_t>() != version) {
      throw DataError("checkpoint header does not match its preamble");
    }
    c.model = model_config_from_json(h.at("model"));
    c.normalizer = normalizer_from_json(h.at("normalizer"));
    c.step = h.at("step").get<std::int64_t>();
    c.train_config = h.at("train_config");
    c.manifest = h.at("manifest");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }
  pos += header_len;
  const auto count = get_le<std::uint64_t>(bytes, pos);
  if (count > (bytes.size() - pos) / 8 || bytes.size() - pos != count * 8) {
    throw DataError("checkpoint parameter blob has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                    std::to_string(count * 8));
  }
  c.values.resize(static_cast<Index>(count));
  for (Index i = 0; i < c.values.size(); ++i) c.values(i) = get_le<double>(bytes, pos);
  return c;
}

Checkpoint load_checkpoint(const fs::path& path) { return parse_checkpoint(read_file_bytes(path)); }

void load_params(Model& model, const Checkpoint& c) {
  if (c.model.task != model.config().task || c.model.dim != model.config().dim) {
    throw ConfigError("checkpoint task " + to_string(c.model.task) + " does not match model task " +
                      to_string(model.config().task));
  }
  if (c.manifest != param_manifest(model.params())) throw DataError("checkpoint parameter manifest does not match model");
  if (c.values.size() != model.params().numel()) throw DataError("checkpoint parameter count does not match model");
  c.normalizer.check(model.task());
  model.params().assign_flat(c.values);
}

std::unique_ptr<Model> restore_model(const Checkpoint& c) {
  auto model = std::make_unique<Model>(c.model);
  load_params(*model, c);
  return model;
}

}  // namespace pegnet
