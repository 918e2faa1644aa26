#ifndef PEGNET_TRAINER_HPP_
#define PEGNET_TRAINER_HPP_

#include "pegnet/dataset.hpp"
#include "pegnet/model.hpp"
#include "pegnet/normalizer.hpp"
#include "pegnet/physloss.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pegnet {

struct TrainConfig {
  double peak_lr = 1e-4;
  double weight_decay = 1e-4;
  int warmup_steps = 2000;
  int total_steps = 10000;
  int batch_size = 4;
  double lambda_div = 1e-2;
  double lambda_mass = 1e-2;
  double input_noise_std = 0.0;
  std::uint64_t seed = 0;
  bool no_physics_loss = false;
  bool generic_mp = false;
  int depth = 5;
  int latent = 64;
  int mlp_hidden = 64;
  int hidden_layers = 3;
  /// 0 writes only the final checkpoint.
  int checkpoint_every = 0;
  /// Validation cadence in steps; 0 disables validation and the plateau stop.
  int validate_every = 0;
  /// Plateau window length in validations; 0 disables early stopping.
  int patience = 0;
  /// Upper bound on validation pairs (a fixed seeded subset).
  int max_val_pairs = 32;

  /// Throws ConfigError. total_steps may be 0 (no updates); otherwise it
  /// must exceed warmup_steps.
  void validate() const;
  LossWeights weights() const { return {lambda_div, lambda_mass}; }
  /// Ablation label: ours, model-a, model-b or model-c.
  std::string variant() const;
};

/// Flat `key = value` text, one pair per line, `#` starts a comment. Unknown
/// keys, repeated keys and malformed values throw ConfigError.
TrainConfig parse_train_config(std::string_view text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string to_text(const TrainConfig& config);
nlohmann::json to_json(const TrainConfig& config);

/// Warmup then cosine decay; t counts optimizer updates from 1.
double lr_schedule(std::int64_t t, const TrainConfig& config);

struct AdamState {
  Gradients m;
  Gradients v;
  std::int64_t t = 0;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One AdamW update with bias-corrected moments and decoupled decay
/// p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
void adamw_step(ParamStore& params, const Gradients& grads, AdamState& state, double lr, double weight_decay,
                const AdamHyper& hyper = {});

/// (trajectory, t) with t in [0, steps - 2]; uniform over all such pairs.
using Pair = std::pair<int, int>;
std::vector<Pair> sample_pairs(const std::vector<int>& trajectories, int steps, int batch, std::mt19937_64& rng);

/// Validation holdout: the last floor(n / 10) trajectories.
struct Split {
  std::vector<int> train;
  std::vector<int> val;
};
Split split_trajectories(int num_trajectories);

struct LossSettings {
  LossWeights weights;
  bool physics = true;
};

/// Loss terms of one (x_t, x_{t+1}) sample recorded on a tape. Physics terms
/// are invalid Vars when absent.
struct SampleLoss {
  Var total;
  Var pred;
  Var div;
  Var mass;
};

/// Targets live in decoder output space: normalized rates for integrated
/// fields, normalized values for pressure. The regularizers act on the
/// predicted physical fields divided by the field std (no mean shift).
/// `noise`, when non-empty, is added to the normalized inputs.
SampleLoss record_sample_loss(Tape& tape, const Model& model, const Normalizer& normalizer, const SimContext& context,
                              const std::vector<Tensor>& x0, const std::vector<Tensor>& x1, double dt,
                              const LossSettings& settings, const std::vector<Tensor>& noise = {});

struct LogRow {
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double pred = 0.0;
  double div = 0.0;
  double mass = 0.0;
  double val_mse = 0.0;  // NaN when not evaluated at this step
};

struct TrainResult {
  std::unique_ptr<Model> model;
  Normalizer normalizer;
  std::vector<LogRow> log;
  int steps_done = 0;
  bool converged = false;
  Split split;
};

struct TrainIo {
  /// Checkpoints (model.ckpt, ckpt_<step>.ckpt) and train_log.csv go here.
  std::optional<std::filesystem::path> out_dir;
  std::function<void(const LogRow&)> on_log;
  /// Worker threads for batch members; 0 reads PEGNET_THREADS (default 1).
  int threads = 0;
};

/// Early-stop rule over validation MSEs: with a window of the last `patience`
/// values, stop when the best of its final 20% improves on the best of the
/// rest by less than 1% (relative).
bool plateau_reached(const std::vector<double>& val_history, int patience);

ModelConfig model_config_for(const TrainConfig& config, const DatasetMeta& meta);

/// Throws NumericError with diagnostics when the loss becomes non-finite.
TrainResult train(const TrainConfig& config, const Dataset& data, const TrainIo& io = {});

void write_train_log(const std::filesystem::path& path, const std::vector<LogRow>& log);

// ---------------------------------------------------------------------------
// Checkpoints: magic, u32 version, u64 header length, JSON header, u64 value
// count, float64 little-endian parameter blob.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  Normalizer normalizer;
  std::int64_t step = 0;
  nlohmann::json train_config = nlohmann::json::object();
  nlohmann::json manifest = nlohmann::json::array();  // [{name, rows, cols}]
  Eigen::VectorXd values;
};

std::vector<char> serialize_checkpoint(const Model& model, const Normalizer& normalizer, std::int64_t step,
                                       const nlohmann::json& train_config);
void save_checkpoint(const std::filesystem::path& path, const Model& model, const Normalizer& normalizer,
                     std::int64_t step, const nlohmann::json& train_config);
/// Throws DataError on bad magic, version, header or blob size.
Checkpoint parse_checkpoint(const std::vector<char>& bytes);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Copies values into `model`; throws DataError when the manifest does not
/// match the model's parameters and ConfigError when the task differs.
void load_params(Model& model, const Checkpoint& checkpoint);
std::unique_ptr<Model> restore_model(const Checkpoint& checkpoint);

/// Worker count from PEGNET_THREADS (>= 1; unset or invalid means 1).
int env_threads();

}  // namespace pegnet

#endif  // PEGNET_TRAINER_HPP_
