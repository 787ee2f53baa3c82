#include <gtest/gtest.h>

#include "support.hpp"

using namespace mealrl;

namespace {

AgentConfig small_config() {
  AgentConfig c;
  c.hidden = {8, 8};
  c.batch_size = 4;
  c.memory_size = 64;
  return c;
}

// 2 inputs -> identity rectifier layer -> 2 outputs given by `out`.
void set_linear(NetworkParams& p, double a, double b) {
  auto& l = p.layers();
  l[0].weights = Matrix::Identity(2, 2);
  l[0].bias.setZero();
  l[1].weights << a, 0, 0, b;
  l[1].bias.setZero();
}

Transition transition(std::vector<double> next, double reward, FeasibilityMask mask = {1, 1}, bool terminal = false) {
  Transition t;
  t.state = {0.5, 0.5};
  t.action = 0;
  t.reward = reward;
  t.next_state = std::move(next);
  t.next_mask = std::move(mask);
  t.terminal = terminal;
  return t;
}

DqnAgent hand_agent(Algorithm algo, double gamma) {
  AgentConfig c;
  c.algorithm = algo;
  c.hidden = {2};
  c.gamma = gamma;
  DqnAgent agent(2, 2, c, 1);
  set_linear(agent.online_mut(), 1.0, 1.0);
  set_linear(agent.target_mut(), 3.0, 0.5);
  return agent;
}

void fill_random(DqnAgent& agent, int n, int inputs, int actions, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    Transition t;
    for (int k = 0; k < inputs; ++k) {
      t.state.push_back(u(rng));
      t.next_state.push_back(u(rng));
    }
    t.action = static_cast<int>(rng() % static_cast<unsigned>(actions));
    t.reward = u(rng) * 10 - 5;
    t.next_mask.assign(static_cast<std::size_t>(actions), 1);
    t.next_mask[rng() % static_cast<unsigned>(actions)] = 0;
    t.terminal = i % 7 == 6;
    agent.remember(std::move(t));
  }
}

}  // namespace

TEST(SelectAction, SingleFeasibleActionAlwaysChosen) {
  const std::vector<double> q{9, 1, 5, 7};
  Rng rng(1);
  for (double eps : {0.0, 0.5, 1.0})
    for (int i = 0; i < 100; ++i) EXPECT_EQ(epsilon_greedy(q, {0, 1, 0, 0}, eps, rng), 1);
}

TEST(SelectAction, GreedyPicksMaskedArgmax) {
  Rng rng(1);
  EXPECT_EQ(epsilon_greedy(std::vector<double>{3, 8, 2}, {1, 1, 1}, 0.0, rng), 1);  // reject is index 1 for C=1
  EXPECT_EQ(epsilon_greedy(std::vector<double>{3, 8, 2}, {1, 0, 1}, 0.0, rng), 0);
  EXPECT_EQ(masked_argmax(std::vector<double>{4, 4, 1}, {1, 1, 1}), 0);
  EXPECT_EQ(masked_argmax(std::vector<double>{4, 4, 1}, {0, 0, 0}), -1);
  EXPECT_THROW(epsilon_greedy(std::vector<double>{1, 2}, {0, 0}, 0.3, rng), std::invalid_argument);
}

TEST(SelectAction, FullExplorationIsUniformOverFeasible) {
  const std::vector<double> q{0, 100, 0, 0, 0};
  const FeasibilityMask mask{1, 0, 1, 1, 1};
  Rng rng(8);
  std::vector<int> counts(5, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(epsilon_greedy(q, mask, 1.0, rng))];
  EXPECT_EQ(counts[1], 0);
  for (int a : {0, 2, 3, 4}) EXPECT_NEAR(counts[static_cast<std::size_t>(a)] / double(draws), 0.25, 0.02 * 0.25);
}

TEST(SelectAction, NeverInfeasibleAtAnyEpsilon) {
  DqnAgent agent(6, 5, small_config(), 3);
  Rng rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 5000; ++i) {
    std::vector<double> x(6);
    for (auto& v : x) v = u(rng);
    FeasibilityMask mask(5, 0);
    mask[rng() % 5] = 1;
    for (auto& m : mask) m = m || (rng() % 3 == 0);
    const double eps = (i % 11) / 10.0;
    ASSERT_TRUE(mask[static_cast<std::size_t>(agent.select_action(x, mask, eps, rng))]);
  }
}

TEST(TdTarget, TerminalAndMyopicCases) {
  auto agent = hand_agent(Algorithm::Ddqn, 0.9);
  EXPECT_EQ(agent.td_target(transition({1, 2}, -15, {1, 1}, true)), -15.0);
  auto myopic = hand_agent(Algorithm::Dqn, 0.0);
  EXPECT_EQ(myopic.td_target(transition({1, 2}, 7.5)), 7.5);
}

TEST(TdTarget, HandComputedDqnVersusDdqn) {
  // s1' = (1,2): online Q = (1,2) -> argmax 1; target Q = (3,1) -> max 3
  // s2' = (2,1): online Q = (2,1) -> argmax 0; target Q = (6,0.5)
  auto dqn = hand_agent(Algorithm::Dqn, 0.9);
  auto ddqn = hand_agent(Algorithm::Ddqn, 0.9);
  EXPECT_DOUBLE_EQ(dqn.td_target(transition({1, 2}, 2)), 2 + 0.9 * 3);
  EXPECT_DOUBLE_EQ(ddqn.td_target(transition({1, 2}, 2)), 2 + 0.9 * 1);
  EXPECT_DOUBLE_EQ(dqn.td_target(transition({2, 1}, 2)), 2 + 0.9 * 6);
  EXPECT_DOUBLE_EQ(ddqn.td_target(transition({2, 1}, 2)), 2 + 0.9 * 6);
  // masking action 0 leaves only action 1 for both
  EXPECT_DOUBLE_EQ(dqn.td_target(transition({1, 2}, 2, {0, 1})), 2 + 0.9 * 1);
  EXPECT_DOUBLE_EQ(ddqn.td_target(transition({2, 1}, 2, {0, 1})), 2 + 0.9 * 0.5);
}

TEST(TdTarget, DdqnEqualsDqnWhenNetworksCoincide) {
  AgentConfig c = small_config();
  c.algorithm = Algorithm::Dqn;
  DqnAgent dqn(6, 5, c, 11);
  c.algorithm = Algorithm::Ddqn;
  DqnAgent ddqn(6, 5, c, 11);
  Rng rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> next(6);
    for (auto& v : next) v = u(rng);
    FeasibilityMask mask(5, 1);
    mask[rng() % 5] = 0;
    Transition t;
    t.next_state = next;
    t.next_mask = mask;
    t.reward = u(rng);
    ASSERT_EQ(dqn.td_target(t), ddqn.td_target(t));
  }
}

TEST(TrainStep, HardUpdateCopiesAfterExactlyUSteps) {
  AgentConfig c = small_config();
  c.update = TargetUpdate::Hard;
  c.hard_update_every = 5;
  DqnAgent agent(6, 5, c, 7);
  fill_random(agent, 20, 6, 5, 1);
  const auto initial_target = agent.target();
  for (int i = 0; i < 4; ++i) agent.train_step();
  EXPECT_EQ(agent.target(), initial_target);
  EXPECT_FALSE(agent.target() == agent.online());
  agent.train_step();
  EXPECT_EQ(agent.gradient_steps(), 5);
  EXPECT_EQ(agent.target(), agent.online());
}

TEST(TrainStep, SoftUpdateIsConvexCombination) {
  auto p = NetworkParams::zeros_like(NetworkParams({2, {2}, 2, false}, 1));
  auto theta = p;
  for (auto& l : theta.layers()) {
    l.weights.setConstant(2.0);
    l.bias.setConstant(2.0);
  }
  p.blend_from(theta, 0.5);
  for (double v : p.flatten()) EXPECT_EQ(v, 1.0);

  AgentConfig c = small_config();
  c.update = TargetUpdate::Soft;
  c.tau = 0.5;
  DqnAgent agent(6, 5, c, 7);
  fill_random(agent, 20, 6, 5, 1);
  agent.target_mut() = NetworkParams::zeros_like(agent.online());
  agent.train_step();
  const auto on = agent.online().flatten();
  const auto tg = agent.target().flatten();
  for (std::size_t i = 0; i < on.size(); ++i) ASSERT_DOUBLE_EQ(tg[i], 0.5 * on[i]);
}

TEST(TrainStep, UniformPerMatchesPlainReplayLossSequence) {
  AgentConfig plain = small_config();
  plain.per = false;
  AgentConfig uniform_per = plain;
  uniform_per.per = true;
  uniform_per.alpha = 0.0;
  DqnAgent a(6, 5, plain, 21), b(6, 5, uniform_per, 21);
  fill_random(a, 40, 6, 5, 2);
  fill_random(b, 40, 6, 5, 2);
  for (int i = 0; i < 50; ++i) {
    b.set_beta(0.4 + i * 0.01);
    ASSERT_EQ(a.train_step(), b.train_step()) << "step " << i;
  }
  EXPECT_EQ(a.online(), b.online());
}

TEST(TrainStep, ReducesLossOnAFixedRegressionTarget) {
  AgentConfig c = small_config();
  c.gamma = 0.0;  // targets are the rewards
  c.per = false;
  c.batch_size = 16;
  c.memory_size = 16;
  c.step_size = 1e-2;
  DqnAgent agent(6, 5, c, 5);
  fill_random(agent, 16, 6, 5, 3);
  double first = 0, last = 0;
  for (int i = 0; i < 400; ++i) {
    const double loss = agent.train_step();
    if (i == 0) first = loss;
    last = loss;
  }
  EXPECT_LT(last, 0.1 * first);
}

TEST(TrainStep, NeedsAFullBatch) {
  DqnAgent agent(6, 5, small_config(), 1);
  fill_random(agent, 3, 6, 5, 1);
  EXPECT_FALSE(agent.ready_to_train());
  EXPECT_THROW(agent.train_step(), std::logic_error);
}

TEST(AgentConfig, DefaultsAndVariants) {
  const AgentConfig d;
  EXPECT_EQ(d.gamma, 0.9);
  EXPECT_EQ(d.alpha, 0.6);
  EXPECT_EQ(d.beta0, 0.4);
  EXPECT_EQ(d.tau, 0.5);
  EXPECT_EQ(d.batch_size, 128);
  EXPECT_EQ(d.memory_size, 20000);
  EXPECT_EQ(d.hard_update_every, 100);
  EXPECT_EQ(d.hidden, (std::vector<int>{64, 128, 128, 64}));

  EXPECT_EQ(variant_names().size(), 8u);
  const auto v = apply_variant(d, "dqn_s");
  EXPECT_EQ(v.algorithm, Algorithm::Dqn);
  EXPECT_FALSE(v.per);
  EXPECT_EQ(v.update, TargetUpdate::Soft);
  const auto w = apply_variant(d, "d3qn_h_per");
  EXPECT_EQ(w.algorithm, Algorithm::Ddqn);
  EXPECT_TRUE(w.dueling);
  EXPECT_TRUE(w.per);
  EXPECT_EQ(w.update, TargetUpdate::Hard);
  EXPECT_THROW(apply_variant(d, "a3c"), ConfigError);

  EXPECT_EQ(agent_config_from_json(to_json(w)), w);
  EXPECT_THROW(agent_config_from_json({{"tau", 0.0}}), ConfigError);
  EXPECT_THROW(agent_config_from_json({{"algorithm", "sarsa"}}), ConfigError);
  EXPECT_THROW(agent_config_from_json({{"batch_size", "big"}}), ConfigError);
}

TEST(EpsilonSchedule, LinearThenFlat) {
  const AgentConfig c;
  EXPECT_DOUBLE_EQ(epsilon_for_day(c, 0, 100), 1.0);
  EXPECT_DOUBLE_EQ(epsilon_for_day(c, 30, 100), 0.525);
  EXPECT_DOUBLE_EQ(epsilon_for_day(c, 60, 100), 0.05);
  EXPECT_DOUBLE_EQ(epsilon_for_day(c, 99, 100), 0.05);
}

TEST(Checkpoint, SaveLoadIsExact) {
  const auto dir = fixtures::scratch_dir("ckpt");
  for (bool dueling : {false, true}) {
    Checkpoint ck;
    ck.variant = dueling ? "d3qn_s_per" : "ddqn_h";
    ck.agent = apply_variant(AgentConfig{}, ck.variant);
    ck.mode = dueling ? TrainingMode::Single : TrainingMode::Multi;
    ck.couriers = dueling ? 1 : 5;
    ck.restaurants = 7;
    ck.max_queue = 2;
    ck.scaling = {18, 18};
    ck.seed = 123456789012345ULL;
    ck.steps = 4242;
    ck.params = NetworkParams({input_size(ck.couriers, 7), ck.agent.hidden, ck.couriers + 9, dueling}, 3);
    const auto path = (dir / (ck.variant + ".bin")).string();
    save_checkpoint(ck, path);
    EXPECT_EQ(load_checkpoint(path), ck);
  }
}

TEST(Checkpoint, LoadErrorsNameTheFile) {
  const auto dir = fixtures::scratch_dir("ckpt-bad");
  try {
    load_checkpoint((dir / "missing.bin").string());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.bin"), std::string::npos);
  }
  write_text_file((dir / "junk.bin").string(), "hello\n");
  EXPECT_THROW(load_checkpoint((dir / "junk.bin").string()), ConfigError);
}

TEST(NetworkPolicy, SharedSingleCourierPolicyTakesGlobalArgmax) {
  auto scene = fixtures::example_assignment_scene();
  Checkpoint ck;
  ck.mode = TrainingMode::Single;
  ck.couriers = 1;
  ck.restaurants = 2;
  ck.max_queue = 2;
  ck.scaling = FeatureScaling::for_region(scene.world.region(), 2);
  // Q(assign) = -delta_scaled, Q(reject) = -2: picks the courier with the smaller delta
  ck.params = NetworkParams::zeros_like(NetworkParams({input_size(1, 2), {1}, 5, false}, 1));
  auto& l = ck.params.layers();
  l[0].weights(0, 0) = 1.0;  // hidden = relu(delta feature)
  l[1].weights(0, 0) = -1.0;
  l[1].bias(1) = -2.0;
  l[1].bias(2) = -10.0;
  l[1].bias(3) = -10.0;
  l[1].bias(4) = -10.0;
  NetworkPolicy policy(ck);
  EXPECT_EQ(policy.decide(scene.world, scene.event), (Action{ActionKind::Assign, 0, -1}));

  l[1].bias(1) = 0.5;  // reject now beats every assignment
  NetworkPolicy rejecting(ck);
  EXPECT_EQ(rejecting.decide(scene.world, scene.event).kind, ActionKind::Reject);

  auto idle = fixtures::example_idle_scene();
  const auto move = rejecting.decide(idle.world, idle.event);
  EXPECT_EQ(move.courier, 0);
  EXPECT_TRUE(move.kind == ActionKind::GoDepot || move.kind == ActionKind::GoRestaurant);
}

TEST(NetworkPolicy, LayoutMismatchIsAConfigError) {
  auto scene = fixtures::example_assignment_scene();
  Checkpoint ck;
  ck.mode = TrainingMode::Multi;
  ck.couriers = 3;
  ck.restaurants = 2;
  ck.max_queue = 2;
  ck.params = NetworkParams({input_size(3, 2), {4}, 7, false}, 1);
  NetworkPolicy policy(ck);
  EXPECT_THROW(policy.decide(scene.world, scene.event), ConfigError);
}
