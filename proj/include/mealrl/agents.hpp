#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdp.hpp"
#include "neural.hpp"
#include "policy.hpp"
#include "replay.hpp"

namespace mealrl {

enum class Algorithm { Dqn, Ddqn };
enum class TargetUpdate { Hard, Soft };

struct AgentConfig {
  Algorithm algorithm = Algorithm::Ddqn;
  bool dueling = false;
  bool per = true;
  TargetUpdate update = TargetUpdate::Hard;
  int hard_update_every = 100;  // U, in gradient steps
  double tau = 0.5;
  double gamma = 0.9;
  int batch_size = 128;
  int memory_size = 20000;
  double alpha = 0.6;
  double beta0 = 0.4;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.6;  // of training days
  double step_size = 1e-3;
  std::vector<int> hidden{64, 128, 128, 64};
  bool huber = false;

  friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

/// The eight compared variants: {dqn, ddqn} x {h, s} without replay
/// priorities, and {ddqn, d3qn} x {h, s} with them ("_per").
inline const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{"dqn_h",      "dqn_s",      "ddqn_h",     "ddqn_s",
                                              "ddqn_h_per", "ddqn_s_per", "d3qn_h_per", "d3qn_s_per"};
  return names;
}

inline bool is_variant(const std::string& name) {
  const auto& v = variant_names();
  return std::find(v.begin(), v.end(), name) != v.end();
}

inline AgentConfig apply_variant(AgentConfig cfg, const std::string& name) {
  if (!is_variant(name)) throw ConfigError("unknown algorithm variant '" + name + "'");
  cfg.algorithm = name.rfind("dqn_", 0) == 0 ? Algorithm::Dqn : Algorithm::Ddqn;
  cfg.dueling = name.rfind("d3qn", 0) == 0;
  cfg.per = name.ends_with("_per");
  cfg.update = name.find("_h") != std::string::npos ? TargetUpdate::Hard : TargetUpdate::Soft;
  return cfg;
}

inline nlohmann::json to_json(const AgentConfig& c) {
  return {{"algorithm", c.algorithm == Algorithm::Dqn ? "dqn" : "ddqn"},
          {"dueling", c.dueling},
          {"per", c.per},
          {"update", c.update == TargetUpdate::Hard ? "hard" : "soft"},
          {"hard_update_every", c.hard_update_every},
          {"tau", c.tau},
          {"gamma", c.gamma},
          {"batch_size", c.batch_size},
          {"memory_size", c.memory_size},
          {"alpha", c.alpha},
          {"beta0", c.beta0},
          {"epsilon_start", c.epsilon_start},
          {"epsilon_end", c.epsilon_end},
          {"epsilon_decay_fraction", c.epsilon_decay_fraction},
          {"step_size", c.step_size},
          {"hidden", c.hidden},
          {"huber", c.huber}};
}

inline AgentConfig agent_config_from_json(const nlohmann::json& j, AgentConfig c = {}) {
  try {
    if (j.contains("algorithm")) {
      const auto a = j["algorithm"].get<std::string>();
      if (a != "dqn" && a != "ddqn") throw ConfigError("agent: field 'algorithm' must be dqn or ddqn");
      c.algorithm = a == "dqn" ? Algorithm::Dqn : Algorithm::Ddqn;
    }
    if (j.contains("update")) {
      const auto u = j["update"].get<std::string>();
      if (u != "hard" && u != "soft") throw ConfigError("agent: field 'update' must be hard or soft");
      c.update = u == "hard" ? TargetUpdate::Hard : TargetUpdate::Soft;
    }
    c.dueling = j.value("dueling", c.dueling);
    c.per = j.value("per", c.per);
    c.hard_update_every = j.value("hard_update_every", c.hard_update_every);
    c.tau = j.value("tau", c.tau);
    c.gamma = j.value("gamma", c.gamma);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.memory_size = j.value("memory_size", c.memory_size);
    c.alpha = j.value("alpha", c.alpha);
    c.beta0 = j.value("beta0", c.beta0);
    c.epsilon_start = j.value("epsilon_start", c.epsilon_start);
    c.epsilon_end = j.value("epsilon_end", c.epsilon_end);
    c.epsilon_decay_fraction = j.value("epsilon_decay_fraction", c.epsilon_decay_fraction);
    c.step_size = j.value("step_size", c.step_size);
    c.hidden = j.value("hidden", c.hidden);
    c.huber = j.value("huber", c.huber);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("agent: ") + e.what());
  }
  if (c.batch_size < 1) throw ConfigError("agent: field 'batch_size' must be positive");
  if (c.memory_size < c.batch_size) throw ConfigError("agent: field 'memory_size' must be at least batch_size");
  if (c.hard_update_every < 1) throw ConfigError("agent: field 'hard_update_every' must be positive");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) throw ConfigError("agent: field 'tau' must be in (0, 1]");
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw ConfigError("agent: field 'gamma' must be in [0, 1]");
  return c;
}

/// Linear decay from start to end over the first `fraction` of the days, then flat.
inline double epsilon_for_day(const AgentConfig& c, int day, int total_days) {
  const double horizon = c.epsilon_decay_fraction * total_days;
  if (horizon <= 0.0) return c.epsilon_end;
  const double frac = day / horizon;
  if (frac >= 1.0) return c.epsilon_end;
  return c.epsilon_start + (c.epsilon_end - c.epsilon_start) * frac;
}

/// Index of the largest entry among feasible ones; ties go to the lowest index.
inline int masked_argmax(std::span<const double> q, const FeasibilityMask& mask) {
  int best = -1;
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (mask[a] && (best < 0 || q[a] > q[static_cast<std::size_t>(best)])) best = static_cast<int>(a);
  }
  return best;
}

/// Uniform draw among feasible actions with probability epsilon, otherwise
/// the masked greedy action.
inline int epsilon_greedy(std::span<const double> q, const FeasibilityMask& mask, double epsilon, Rng& rng) {
  std::vector<int> feasible;
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (mask[a]) feasible.push_back(static_cast<int>(a));
  }
  if (feasible.empty()) throw std::invalid_argument("select_action: no feasible action");
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < epsilon) {
    return feasible[std::uniform_int_distribution<std::size_t>(0, feasible.size() - 1)(rng)];
  }
  return masked_argmax(q, mask);
}

/// DQN-family learner: online and target networks, optimizer and replay memory.
class DqnAgent {
 public:
  DqnAgent(int inputs, int actions, AgentConfig config, std::uint64_t seed)
      : config_(std::move(config)),
        online_(NetworkShape{inputs, config_.hidden, actions, config_.dueling}, seed),
        target_(online_),
        optimizer_(online_),
        buffer_(config_.memory_size, config_.per ? config_.alpha : 0.0),
        rng_(seed ^ 0x9e3779b97f4a7c15ULL),
        beta_(config_.per ? config_.beta0 : 0.0) {}

  Vector q_values(std::span<const double> features) const { return forward(online_, features); }

  int select_action(std::span<const double> features, const FeasibilityMask& mask, double epsilon, Rng& rng) const {
    const Vector q = q_values(features);
    return epsilon_greedy(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())), mask, epsilon, rng);
  }

  /// y = R for terminal transitions; otherwise R + gamma * Q_target(S', a*)
  /// with a* the masked argmax of the target (DQN) or online (DDQN) network.
  double td_target(const Transition& t) const {
    if (t.terminal) return t.reward;
    const Vector qt = forward(target_, t.next_state);
    const Vector qo = config_.algorithm == Algorithm::Ddqn ? forward(online_, t.next_state) : qt;
    return bootstrap(t, qt.data(), qo.data());
  }

  void remember(Transition t) { buffer_.push(std::move(t)); }

  /// One gradient step on a sampled batch; returns the weighted loss.
  double train_step() {
    const int b = config_.batch_size;
    if (buffer_.size() < b) throw std::logic_error("train_step: replay memory smaller than the batch size");
    const ReplaySample sample = buffer_.sample(b, beta_, rng_);

    const int inputs = online_.shape().inputs;
    Matrix next(inputs, b);
    for (int i = 0; i < b; ++i) {
      const auto& t = buffer_.at(sample.handles[static_cast<std::size_t>(i)]);
      next.col(i) = Eigen::Map<const Vector>(t.next_state.data(), inputs);
    }
    const Matrix qt = forward(target_, next);
    const Matrix qo = config_.algorithm == Algorithm::Ddqn ? forward(online_, next) : qt;

    std::vector<TrainingSample> batch;
    batch.reserve(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
      const auto& t = buffer_.at(sample.handles[static_cast<std::size_t>(i)]);
      const double y = t.terminal ? t.reward : bootstrap(t, qt.col(i).data(), qo.col(i).data());
      batch.push_back({t.state, t.action, y, sample.weights[static_cast<std::size_t>(i)]});
    }
    BackwardResult result = backward(online_, batch, config_.huber);
    optimizer_.step(online_, result.gradients, config_.step_size);
    if (config_.per) {
      for (auto& e : result.td_errors) e = std::abs(e);
      buffer_.update_priorities(sample.handles, result.td_errors);
    }
    ++steps_;
    if (config_.update == TargetUpdate::Hard) {
      if (steps_ % config_.hard_update_every == 0) target_ = online_;
    } else {
      target_.blend_from(online_, config_.tau);
    }
    return result.loss;
  }

  bool ready_to_train() const noexcept { return buffer_.size() >= config_.batch_size; }
  void set_beta(double beta) noexcept { beta_ = config_.per ? beta : 0.0; }

  const AgentConfig& config() const noexcept { return config_; }
  const NetworkParams& online() const noexcept { return online_; }
  const NetworkParams& target() const noexcept { return target_; }
  NetworkParams& online_mut() noexcept { return online_; }
  NetworkParams& target_mut() noexcept { return target_; }
  const PrioritizedBuffer& buffer() const noexcept { return buffer_; }
  long long gradient_steps() const noexcept { return steps_; }

 private:
  double bootstrap(const Transition& t, const double* q_target, const double* q_select) const {
    const int n = online_.shape().outputs;
    const int a = masked_argmax(std::span<const double>(q_select, static_cast<std::size_t>(n)), t.next_mask);
    if (a < 0) return t.reward;
    return t.reward + config_.gamma * q_target[a];
  }

  AgentConfig config_;
  NetworkParams online_;
  NetworkParams target_;
  AdamOptimizer optimizer_;
  PrioritizedBuffer buffer_;
  Rng rng_;
  double beta_;
  long long steps_ = 0;
};

enum class TrainingMode { Single, Multi };

inline const char* to_string(TrainingMode m) { return m == TrainingMode::Single ? "single" : "multi"; }

/// Trained network plus everything needed to rebuild its input layout.
struct Checkpoint {
  std::string variant;
  AgentConfig agent;
  TrainingMode mode = TrainingMode::Multi;
  int couriers = 1;  // couriers in the trained layout (1 in single mode)
  int restaurants = 1;
  int max_queue = 2;
  FeatureScaling scaling;
  std::uint64_t seed = 0;
  long long steps = 0;
  NetworkParams params;

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.variant == b.variant && a.agent == b.agent && a.mode == b.mode && a.couriers == b.couriers &&
           a.restaurants == b.restaurants && a.max_queue == b.max_queue &&
           a.scaling.distance_scale == b.scaling.distance_scale && a.scaling.delta_scale == b.scaling.delta_scale &&
           a.seed == b.seed && a.steps == b.steps && a.params == b.params;
  }
};

inline constexpr const char* kCheckpointMagic = "MEALRL-CHECKPOINT 1";

/// Layout: magic line, one JSON header line, then the parameters as raw doubles.
inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  nlohmann::json header{{"variant", ck.variant},
                        {"agent", to_json(ck.agent)},
                        {"mode", to_string(ck.mode)},
                        {"couriers", ck.couriers},
                        {"restaurants", ck.restaurants},
                        {"max_queue", ck.max_queue},
                        {"distance_scale", ck.scaling.distance_scale},
                        {"delta_scale", ck.scaling.delta_scale},
                        {"inputs", ck.params.shape().inputs},
                        {"outputs", ck.params.shape().outputs},
                        {"hidden", ck.params.shape().hidden},
                        {"dueling", ck.params.shape().dueling},
                        {"seed", ck.seed},
                        {"steps", ck.steps},
                        {"parameters", ck.params.parameter_count()}};
  out << kCheckpointMagic << '\n' << header.dump() << '\n';
  write_parameters(out, ck.params);
  if (!out) throw ConfigError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint not found: '" + path + "'");
  std::string magic, header_line;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) throw ConfigError("'" + path + "' is not a checkpoint file");
  std::getline(in, header_line);
  const auto h = parse_json_text(header_line, path);
  Checkpoint ck;
  try {
    ck.variant = h.at("variant").get<std::string>();
    ck.agent = agent_config_from_json(h.at("agent"));
    ck.mode = h.at("mode").get<std::string>() == "single" ? TrainingMode::Single : TrainingMode::Multi;
    ck.couriers = h.at("couriers").get<int>();
    ck.restaurants = h.at("restaurants").get<int>();
    ck.max_queue = h.at("max_queue").get<int>();
    ck.scaling = {h.at("distance_scale").get<double>(), h.at("delta_scale").get<double>()};
    ck.seed = h.at("seed").get<std::uint64_t>();
    ck.steps = h.at("steps").get<long long>();
    NetworkShape shape{h.at("inputs").get<int>(), h.at("hidden").get<std::vector<int>>(), h.at("outputs").get<int>(),
                       h.at("dueling").get<bool>()};
    ck.params = NetworkParams::zeros_like(NetworkParams(shape, 0));
    if (ck.params.parameter_count() != h.at("parameters").get<std::size_t>()) {
      throw ConfigError("checkpoint '" + path + "': parameter count does not match layer sizes");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint '" + path + "': bad header: " + e.what());
  }
  read_parameters(in, ck.params);
  return ck;
}

/// Greedy policy backed by a trained network. Multi-courier checkpoints
/// score the joint layout directly. Single-courier checkpoints are shared:
/// each courier's view is scored and the best masked value over all
/// couriers wins.
class NetworkPolicy final : public Policy {
 public:
  explicit NetworkPolicy(Checkpoint ck) : ck_(std::move(ck)) {}

  Action decide(const World& world, const SimEvent& event) override {
    if (world.region().num_restaurants() != ck_.restaurants || world.max_queue() != ck_.max_queue) {
      throw ConfigError("checkpoint layout does not match the region (restaurants / max_queue)");
    }
    if (ck_.mode == TrainingMode::Multi) {
      if (world.num_couriers() != ck_.couriers) {
        throw ConfigError("multi-courier checkpoint trained for " + std::to_string(ck_.couriers) +
                          " couriers, world has " + std::to_string(world.num_couriers()));
      }
      const auto obs = encode_state(world, event);
      const Vector q = forward(ck_.params, to_input(obs.features, ck_.scaling));
      const int a = masked_argmax(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())), obs.mask);
      return ActionLayout{world.num_couriers(), ck_.restaurants}.decode(a, event);
    }
    const ActionLayout single{1, ck_.restaurants};
    if (event.kind == EventKind::CourierIdle) {
      const auto obs = encode_courier_view(world, event, event.courier_id);
      const Vector q = forward(ck_.params, to_input(obs.features, ck_.scaling));
      const int a = masked_argmax(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())), obs.mask);
      return single.decode(a, event);
    }
    Action best{ActionKind::Reject, -1, -1};
    double best_q = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < world.num_couriers(); ++c) {
      const auto obs = encode_courier_view(world, event, c);
      const Vector q = forward(ck_.params, to_input(obs.features, ck_.scaling));
      if (obs.mask[static_cast<std::size_t>(single.assign(0))] && q[single.assign(0)] > best_q) {
        best_q = q[single.assign(0)];
        best = {ActionKind::Assign, c, -1};
      }
      if (q[single.reject()] > best_q) {
        best_q = q[single.reject()];
        best = {ActionKind::Reject, -1, -1};
      }
    }
    return best;
  }

  std::string name() const override { return ck_.variant.empty() ? "learned" : ck_.variant; }
  const Checkpoint& checkpoint() const noexcept { return ck_; }

 private:
  Checkpoint ck_;
};

}  // namespace mealrl
