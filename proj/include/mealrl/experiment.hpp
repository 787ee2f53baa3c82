#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agents.hpp"
#include "baselines.hpp"
#include "demand.hpp"
#include "mdp.hpp"
#include "region.hpp"
#include "simulation.hpp"

namespace mealrl {

struct ExperimentConfig {
  RegionConfig region = generate_synthetic_region(10, 10, 7, 1);
  HourlyProfile profile = default_hourly_profile();
  int daily_orders = 163;
  int couriers = 5;
  int max_queue = 2;
  double reward_target = kDefaultRewardTarget;
  std::string policy = "ddqn_h_per";
  TrainingMode mode = TrainingMode::Multi;
  int training_days = 500;
  int test_days = 100;
  std::uint64_t seed = 1;
  AgentConfig agent;
  double cart_probability = 0.0;

  bool learned() const { return is_variant(policy); }

  void validate() const {
    region.validate();
    profile.validate();
    if (daily_orders < 0) throw ConfigError("config: field 'daily_orders' must be nonnegative");
    if (couriers < 1) throw ConfigError("config: field 'couriers' must be positive");
    if (max_queue < 1) throw ConfigError("config: field 'max_queue' must be positive");
    if (training_days < 0) throw ConfigError("config: field 'training_days' must be nonnegative");
    if (test_days < 0) throw ConfigError("config: field 'test_days' must be nonnegative");
    if (!(cart_probability >= 0.0 && cart_probability <= 1.0)) {
      throw ConfigError("config: field 'cart_probability' must be in [0, 1]");
    }
    if (!learned() && policy != "p45" && policy != "p60") {
      throw ConfigError("config: field 'policy' must be p45, p60 or one of the algorithm variants");
    }
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"region", to_json(c.region)},
          {"profile", to_json(c.profile)},
          {"daily_orders", c.daily_orders},
          {"couriers", c.couriers},
          {"max_queue", c.max_queue},
          {"reward_target", c.reward_target},
          {"policy", c.policy},
          {"mode", to_string(c.mode)},
          {"training_days", c.training_days},
          {"test_days", c.test_days},
          {"seed", c.seed},
          {"agent", to_json(c.agent)},
          {"cart_probability", c.cart_probability}};
}

/// Accepts a config document or a run manifest (which embeds one under
/// "config"). Relative file references resolve against `base_dir`.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& doc, const std::string& base_dir = ".") {
  const nlohmann::json& j = doc.contains("config") && doc["config"].is_object() ? doc["config"] : doc;
  if (!j.is_object()) throw ConfigError("config: document must be an object");
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path.string() : (std::filesystem::path(base_dir) / path).string();
  };
  ExperimentConfig c;
  try {
    if (j.contains("region")) {
      const auto& r = j["region"];
      if (r.is_string()) {
        c.region = load_region(resolve(r.get<std::string>()));
      } else if (r.contains("synthetic")) {
        const auto& s = r["synthetic"];
        c.region = generate_synthetic_region(s.value("height", 10), s.value("width", 10), s.value("restaurants", 7),
                                             s.value("seed", std::uint64_t{1}));
      } else {
        c.region = region_from_json(r);
      }
    }
    if (j.contains("profile")) {
      const auto& p = j["profile"];
      if (p.is_string()) {
        c.profile = p.get<std::string>() == "default" ? default_hourly_profile()
                                                       : load_profile(resolve(p.get<std::string>()));
      } else {
        c.profile = profile_from_json(p);
      }
    }
    c.daily_orders = j.value("daily_orders", c.daily_orders);
    c.couriers = j.value("couriers", c.couriers);
    c.max_queue = j.value("max_queue", c.max_queue);
    c.reward_target = j.value("reward_target", c.reward_target);
    c.policy = j.value("policy", c.policy);
    if (j.contains("mode")) {
      const auto m = j["mode"].get<std::string>();
      if (m != "single" && m != "multi") throw ConfigError("config: field 'mode' must be single or multi");
      c.mode = m == "single" ? TrainingMode::Single : TrainingMode::Multi;
    }
    c.training_days = j.value("training_days", c.training_days);
    c.test_days = j.value("test_days", c.test_days);
    c.seed = j.value("seed", c.seed);
    c.cart_probability = j.value("cart_probability", c.cart_probability);
    c.agent = agent_config_from_json(j.value("agent", nlohmann::json::object()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (is_variant(c.policy)) c.agent = apply_variant(c.agent, c.policy);
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  const auto doc = parse_json_text(read_text_file(path), path);
  return experiment_config_from_json(doc, std::filesystem::path(path).parent_path().string());
}

enum class SeedStream : std::uint64_t { TrainDays = 1, TestDays = 2, AgentInit = 3, Exploration = 4 };

/// Independent, reproducible sub-stream for (experiment seed, purpose, index).
inline std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline std::vector<Order> day_orders(const ExperimentConfig& c, SeedStream stream, int day, int daily_orders) {
  Rng rng(derive_seed(c.seed, stream, static_cast<std::uint64_t>(day)));
  return generate_day_orders(c.region, c.profile, daily_orders, rng, c.cart_probability);
}

inline std::vector<Order> day_orders(const ExperimentConfig& c, SeedStream stream, int day) {
  return day_orders(c, stream, day, c.daily_orders);
}

/// Daily order count seen during training. A single-courier learner gets
/// one courier's share of the demand so its load matches test conditions.
inline int training_daily_orders(const ExperimentConfig& c) {
  if (c.mode == TrainingMode::Multi) return c.daily_orders;
  return static_cast<int>(std::lround(static_cast<double>(c.daily_orders) / c.couriers));
}

struct DayOutcome {
  double cumulative_reward = 0.0;
  int decisions = 0;
};

/// Plays one day: every decision event inside the shift goes to `decide`,
/// whose action is applied and rewarded. After the shift the world keeps
/// running until accepted orders are delivered; idle events then need no
/// decision.
template <typename Decide>
DayOutcome simulate_day(World& world, std::vector<Order> orders, int day, double reward_target, Decide&& decide) {
  DayOutcome out;
  auto events = world.begin_day(std::move(orders), day);
  for (;;) {
    for (const auto& ev : events) {
      if (!world.in_shift(ev.minute)) continue;
      const Observation obs = encode_state(world, ev);
      const Action action = decide(world, ev, obs);
      out.cumulative_reward += reward(action, obs.features, reward_target);
      apply_action(world, ev, action);
      ++out.decisions;
    }
    if (world.finished()) break;
    events = world.tick();
  }
  return out;
}

struct TrainingLogRow {
  int day = 0;
  double cumulative_reward = 0.0;
  double mean_loss = std::numeric_limits<double>::quiet_NaN();  // NaN before the first gradient step
  double epsilon = 0.0;
  int rejected = 0;
  int train_steps = 0;
};

struct TrainingResult {
  Checkpoint checkpoint;
  std::vector<TrainingLogRow> log;
};

inline std::string format_number(double v, int digits = 6) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string training_log_csv(const std::vector<TrainingLogRow>& rows) {
  std::ostringstream out;
  out << "day,cumulative_reward,mean_loss,epsilon,rejected,train_steps\n";
  for (const auto& r : rows) {
    out << r.day << ',' << format_number(r.cumulative_reward) << ',' << format_number(r.mean_loss) << ','
        << format_number(r.epsilon) << ',' << r.rejected << ',' << r.train_steps << '\n';
  }
  return out.str();
}

/// Trains the configured variant. Single mode learns on a one-courier world;
/// multi mode on the full courier count. One gradient step follows every
/// stored transition once the memory holds a full batch.
inline TrainingResult run_training(const ExperimentConfig& cfg,
                                   const std::function<void(const TrainingLogRow&)>& on_day = {}) {
  cfg.validate();
  if (!cfg.learned()) throw ConfigError("run_training: policy '" + cfg.policy + "' is not a learning variant");
  const int train_couriers = cfg.mode == TrainingMode::Single ? 1 : cfg.couriers;
  const ActionLayout layout{train_couriers, cfg.region.num_restaurants()};
  const int inputs = input_size(train_couriers, cfg.region.num_restaurants());
  const FeatureScaling scaling = FeatureScaling::for_region(cfg.region, cfg.max_queue);
  const std::uint64_t init_seed = derive_seed(cfg.seed, SeedStream::AgentInit);

  DqnAgent agent(inputs, layout.size(), cfg.agent, init_seed);
  Rng explore(derive_seed(cfg.seed, SeedStream::Exploration));
  World world(cfg.region, cfg.profile, {train_couriers, cfg.max_queue});

  TrainingResult result;
  for (int day = 0; day < cfg.training_days; ++day) {
    TrainingLogRow row;
    row.day = day;
    row.epsilon = epsilon_for_day(cfg.agent, day, cfg.training_days);
    agent.set_beta(annealed_beta(cfg.agent.beta0, day, cfg.training_days));
    double loss_sum = 0.0;

    std::optional<Transition> pending;
    auto store_and_learn = [&](Transition t) {
      agent.remember(std::move(t));
      if (agent.ready_to_train()) {
        loss_sum += agent.train_step();
        ++row.train_steps;
      }
    };

    const auto outcome = simulate_day(
        world, day_orders(cfg, SeedStream::TrainDays, day, training_daily_orders(cfg)), day, cfg.reward_target,
        [&](const World&, const SimEvent& ev, const Observation& obs) {
          auto x = to_input(obs.features, scaling);
          if (pending) {
            pending->next_state = x;
            pending->next_mask = obs.mask;
            store_and_learn(std::move(*pending));
          }
          const int a = agent.select_action(x, obs.mask, row.epsilon, explore);
          const Action action = layout.decode(a, ev);
          pending = Transition{std::move(x), a, reward(action, obs.features, cfg.reward_target), {}, {}, false};
          return action;
        });
    if (pending) {
      pending->next_state.assign(static_cast<std::size_t>(inputs), 0.0);
      pending->next_mask.assign(static_cast<std::size_t>(layout.size()), 0);
      pending->terminal = true;
      store_and_learn(std::move(*pending));
    }
    row.cumulative_reward = outcome.cumulative_reward;
    row.rejected = static_cast<int>(std::count_if(world.orders().begin(), world.orders().end(), [](const Order& o) {
      return o.status == OrderStatus::Rejected;
    }));
    if (row.train_steps > 0) row.mean_loss = loss_sum / row.train_steps;
    result.log.push_back(row);
    if (on_day) on_day(row);
  }

  auto& ck = result.checkpoint;
  ck.variant = cfg.policy;
  ck.agent = cfg.agent;
  ck.mode = cfg.mode;
  ck.couriers = train_couriers;
  ck.restaurants = cfg.region.num_restaurants();
  ck.max_queue = cfg.max_queue;
  ck.scaling = scaling;
  ck.seed = init_seed;
  ck.steps = agent.gradient_steps();
  ck.params = agent.online();
  return result;
}

/// Summary statistics for one or more simulated days.
struct EpisodeMetrics {
  double cumulative_reward = 0.0;  // mean over days
  int days = 0;
  long long generated = 0;
  long long delivered = 0;
  long long rejected = 0;
  long long in_progress = 0;
  double rejected_pct = 0.0;
  double dt_min = 0.0, dt_max = 0.0, dt_mean = 0.0, dt_median = 0.0, dt_std = 0.0;
  // Percent of delivered orders: <=25, (25,45], (45,60], >60 minutes.
  double share_le25 = 0.0, share_25_45 = 0.0, share_45_60 = 0.0, share_gt60 = 0.0;
  std::vector<double> hourly_delivered = std::vector<double>(24, 0.0);  // mean per day
  std::vector<double> busy_minutes;                                      // mean per day, per courier
  std::vector<double> utilization;                                       // per courier
};

inline double utilization(const CourierDayLog& log, int shift_minutes) {
  if (shift_minutes <= 0) return 0.0;
  return std::clamp(static_cast<double>(log.busy_minutes) / shift_minutes, 0.0, 1.0);
}

struct DeliveryStats {
  double min = 0.0, max = 0.0, mean = 0.0, median = 0.0, std = 0.0;
  double le25 = 0.0, b25_45 = 0.0, b45_60 = 0.0, gt60 = 0.0;
};

/// Descriptive statistics of delivery times (sample standard deviation).
inline DeliveryStats delivery_stats(std::vector<int> times) {
  DeliveryStats s;
  if (times.empty()) return s;
  std::sort(times.begin(), times.end());
  const auto n = times.size();
  s.min = times.front();
  s.max = times.back();
  s.mean = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(n);
  s.median = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
  double ss = 0.0;
  for (int t : times) ss += (t - s.mean) * (t - s.mean);
  s.std = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  double c[4] = {0, 0, 0, 0};
  for (int t : times) ++c[t <= 25 ? 0 : t <= 45 ? 1 : t <= 60 ? 2 : 3];
  s.le25 = 100.0 * c[0] / static_cast<double>(n);
  s.b25_45 = 100.0 * c[1] / static_cast<double>(n);
  s.b45_60 = 100.0 * c[2] / static_cast<double>(n);
  s.gt60 = 100.0 * c[3] / static_cast<double>(n);
  return s;
}

/// Folds finished days into aggregate metrics.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(int couriers) { m_.busy_minutes.assign(static_cast<std::size_t>(couriers), 0.0); }

  void add_day(const World& world, double cumulative_reward) {
    ++m_.days;
    reward_sum_ += cumulative_reward;
    for (const auto& o : world.orders()) {
      ++m_.generated;
      switch (o.status) {
        case OrderStatus::Delivered: {
          ++m_.delivered;
          times_.push_back(*o.delivery_time());
          const int hour = std::min(23, *o.delivered_minute / 60);
          hourly_sum_[static_cast<std::size_t>(hour)] += 1.0;
          break;
        }
        case OrderStatus::Rejected: ++m_.rejected; break;
        default: ++m_.in_progress; break;
      }
    }
    for (const auto& c : world.couriers()) {
      busy_sum_.resize(std::max(busy_sum_.size(), static_cast<std::size_t>(c.id + 1)), 0.0);
      busy_sum_[static_cast<std::size_t>(c.id)] += c.log.busy_minutes;
    }
    shift_minutes_ = world.profile().day_length();
  }

  EpisodeMetrics finish() const {
    EpisodeMetrics m = m_;
    if (m.days == 0) return m;
    m.cumulative_reward = reward_sum_ / m.days;
    m.rejected_pct = m.generated ? 100.0 * static_cast<double>(m.rejected) / static_cast<double>(m.generated) : 0.0;
    const auto s = delivery_stats(times_);
    m.dt_min = s.min, m.dt_max = s.max, m.dt_mean = s.mean, m.dt_median = s.median, m.dt_std = s.std;
    m.share_le25 = s.le25, m.share_25_45 = s.b25_45, m.share_45_60 = s.b45_60, m.share_gt60 = s.gt60;
    for (std::size_t h = 0; h < 24; ++h) m.hourly_delivered[h] = hourly_sum_[h] / m.days;
    m.busy_minutes.assign(busy_sum_.size(), 0.0);
    m.utilization.assign(busy_sum_.size(), 0.0);
    for (std::size_t c = 0; c < busy_sum_.size(); ++c) {
      m.busy_minutes[c] = busy_sum_[c] / m.days;
      m.utilization[c] = shift_minutes_ > 0 ? std::min(1.0, m.busy_minutes[c] / shift_minutes_) : 0.0;
    }
    return m;
  }

 private:
  EpisodeMetrics m_;
  double reward_sum_ = 0.0;
  std::vector<int> times_;
  std::vector<double> hourly_sum_ = std::vector<double>(24, 0.0);
  std::vector<double> busy_sum_;
  int shift_minutes_ = 0;
};

struct EvaluationResult {
  EpisodeMetrics aggregate;
  std::vector<EpisodeMetrics> per_day;
  std::vector<std::vector<Order>> order_logs;  // kept when requested
};

/// Greedy play of `policy` over the configured test days. Every policy sees
/// the same order streams for a given experiment seed.
inline EvaluationResult run_evaluation(const ExperimentConfig& cfg, Policy& policy, bool keep_order_logs = false,
                                       const std::function<void(const TraceRow&)>& trace = {}) {
  cfg.validate();
  World world(cfg.region, cfg.profile, {cfg.couriers, cfg.max_queue});
  if (trace) world.set_trace(trace);
  EvaluationResult result;
  MetricsAccumulator total(cfg.couriers);
  for (int day = 0; day < cfg.test_days; ++day) {
    const auto outcome = simulate_day(world, day_orders(cfg, SeedStream::TestDays, day), day, cfg.reward_target,
                                      [&](const World& w, const SimEvent& ev, const Observation&) {
                                        return policy.decide(w, ev);
                                      });
    MetricsAccumulator one(cfg.couriers);
    one.add_day(world, outcome.cumulative_reward);
    total.add_day(world, outcome.cumulative_reward);
    result.per_day.push_back(one.finish());
    if (keep_order_logs) result.order_logs.push_back(world.orders());
  }
  result.aggregate = total.finish();
  return result;
}

inline std::unique_ptr<Policy> make_policy(const std::string& name, const std::string& checkpoint_path = {}) {
  if (name == "p45") return std::make_unique<ThresholdPolicy>(45);
  if (name == "p60") return std::make_unique<ThresholdPolicy>(60);
  if (checkpoint_path.empty()) throw ConfigError("policy '" + name + "' needs a checkpoint");
  auto ck = load_checkpoint(checkpoint_path);
  return std::make_unique<NetworkPolicy>(std::move(ck));
}

inline const char* kMetricsCsvHeader =
    "policy,avg_cum_reward,pct_rejected,dt_min,dt_max,dt_mean,dt_median,dt_std,share_le25,share_25_45,share_45_60,"
    "share_gt60";

inline std::string metrics_csv_row(const std::string& label, const EpisodeMetrics& m) {
  std::ostringstream out;
  out << label << ',' << format_number(m.cumulative_reward, 3) << ',' << format_number(m.rejected_pct, 3) << ','
      << format_number(m.dt_min, 0) << ',' << format_number(m.dt_max, 0) << ',' << format_number(m.dt_mean, 3) << ','
      << format_number(m.dt_median, 1) << ',' << format_number(m.dt_std, 3) << ','
      << format_number(m.share_le25, 3) << ',' << format_number(m.share_25_45, 3) << ','
      << format_number(m.share_45_60, 3) << ',' << format_number(m.share_gt60, 3);
  return out.str();
}

inline nlohmann::json to_json(const EpisodeMetrics& m) {
  return {{"avg_cum_reward", m.cumulative_reward},
          {"days", m.days},
          {"generated", m.generated},
          {"delivered", m.delivered},
          {"rejected", m.rejected},
          {"in_progress", m.in_progress},
          {"pct_rejected", m.rejected_pct},
          {"delivery_time",
           {{"min", m.dt_min}, {"max", m.dt_max}, {"mean", m.dt_mean}, {"median", m.dt_median}, {"std", m.dt_std}}},
          {"share_pct",
           {{"le25", m.share_le25}, {"25_45", m.share_25_45}, {"45_60", m.share_45_60}, {"gt60", m.share_gt60}}},
          {"hourly_delivered", m.hourly_delivered},
          {"busy_minutes", m.busy_minutes},
          {"utilization", m.utilization}};
}

/// One axis of a sweep: a JSON pointer into the config document and its values.
struct SweepAxis {
  std::string pointer;
  std::vector<nlohmann::json> values;
};

struct SweepRow {
  nlohmann::json settings;  // pointer -> value for this cell
  EpisodeMetrics metrics;
  std::string error;        // empty on success
};

/// Hyperparameter grid: gamma x memory x batch x target-update period (16 cells).
inline std::vector<SweepAxis> hyperparameter_grid() {
  return {{"/agent/gamma", {0.9, 0.1}},
          {"/agent/memory_size", {20000, 30000}},
          {"/agent/batch_size", {128, 64}},
          {"/agent/hard_update_every", {100, 200}}};
}

/// Sensitivity grid: reward target x daily order count (9 cells).
inline std::vector<SweepAxis> sensitivity_grid() {
  return {{"/reward_target", {30, 45, 60}}, {"/daily_orders", {120, 170, 220}}};
}

inline std::vector<nlohmann::json> expand_grid(const std::vector<SweepAxis>& axes) {
  std::vector<nlohmann::json> cells{nlohmann::json::object()};
  for (const auto& axis : axes) {
    if (axis.values.empty()) throw ConfigError("sweep: axis '" + axis.pointer + "' has no values");
    std::vector<nlohmann::json> next;
    for (const auto& cell : cells) {
      for (const auto& v : axis.values) {
        auto c = cell;
        c[axis.pointer] = v;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

inline ExperimentConfig apply_settings(const ExperimentConfig& base, const nlohmann::json& settings) {
  auto doc = to_json(base);
  for (const auto& [pointer, value] : settings.items()) doc[nlohmann::json::json_pointer(pointer)] = value;
  return experiment_config_from_json(doc);
}

/// Trains (when needed) and evaluates one configuration.
inline EpisodeMetrics train_and_evaluate(const ExperimentConfig& cfg) {
  if (!cfg.learned()) {
    auto policy = make_policy(cfg.policy);
    return run_evaluation(cfg, *policy).aggregate;
  }
  NetworkPolicy policy(run_training(cfg).checkpoint);
  return run_evaluation(cfg, policy).aggregate;
}

/// Runs every grid cell with the base seed (shared random numbers across
/// cells). Cells run on up to `jobs` threads; a failing cell records its
/// error and the sweep continues. Rows come back in grid order.
inline std::vector<SweepRow> run_sweep(
    const ExperimentConfig& base, const std::vector<SweepAxis>& axes, int jobs = 1,
    const std::function<EpisodeMetrics(const ExperimentConfig&)>& runner = train_and_evaluate) {
  const auto cells = expand_grid(axes);
  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      rows[i].settings = cells[i];
      try {
        rows[i].metrics = runner(apply_settings(base, cells[i]));
      } catch (const std::exception& e) {
        rows[i].error = e.what();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepAxis>& axes, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  for (const auto& a : axes) out << a.pointer << ',';
  out << std::string(kMetricsCsvHeader).substr(std::string("policy,").size()) << ",error\n";
  for (const auto& r : rows) {
    for (const auto& a : axes) out << r.settings.at(a.pointer).dump() << ',';
    const auto line = metrics_csv_row("", r.metrics);
    out << line.substr(1) << ',' << r.error << '\n';
  }
  return out.str();
}

}  // namespace mealrl
