/*
 * Copyright 2026 The crowdnav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "crowdnav/world.hpp"

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "gtest/gtest.h"

namespace crowdnav {
namespace {

bool SameWorld(const WorldState& a, const WorldState& b) {
  if (a.tick != b.tick || a.agents.size() != b.agents.size()) return false;
  if (a.robot.position != b.robot.position || a.robot.heading != b.robot.heading)
    return false;
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    if (a.agents[i].position != b.agents[i].position ||
        a.agents[i].velocity != b.agents[i].velocity)
      return false;
  }
  return true;
}

TEST(WorldTest, SpawnIsDeterministic) {
  ScenarioConfig c;
  c.rng_seed = 7;
  EXPECT_TRUE(SameWorld(SpawnScenario(c), SpawnScenario(c)));
  ScenarioConfig d = c;
  d.rng_seed = 8;
  EXPECT_FALSE(SameWorld(SpawnScenario(c), SpawnScenario(d)));
}

TEST(WorldTest, SpawnFiftyAgentsInRange) {
  ScenarioConfig c;
  c.n_agents = 50;
  const WorldState w = SpawnScenario(c);
  ASSERT_EQ(w.agents.size(), 50u);
  for (const AgentTruth& a : w.agents) {
    EXPECT_DOUBLE_EQ(a.radius, 0.05);
    EXPECT_GE(a.velocity.norm(), 5e-3 - 1e-15);
    EXPECT_LE(a.velocity.norm(), 2e-2 + 1e-15);
    EXPECT_TRUE(w.bounds.Contains(a.position));
    EXPECT_GE((a.position - c.robot_start).norm(), c.spawn_clearance);
  }
  EXPECT_EQ(w.robot.position, c.robot_start);
}

TEST(WorldTest, SpawnEmptyWorld) {
  ScenarioConfig c;
  c.n_agents = 0;
  EXPECT_TRUE(SpawnScenario(c).agents.empty());
}

TEST(WorldTest, ValidateRejectsBadConfig) {
  ScenarioConfig c;
  c.agent_speed_lo = 0.5;
  EXPECT_THROW(c.Validate(), Error);
  c = ScenarioConfig{};
  c.agent_radius = 0.0;
  EXPECT_THROW(c.Validate(), Error);
  c = ScenarioConfig{};
  c.goal = Vec2(3.0, 0.0);
  EXPECT_THROW(c.Validate(), Error);
  try {
    c.Validate();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), Error::Kind::kConfig);
  }
}

WorldState OneAgent(const Vec2& p, const Vec2& v) {
  WorldState w;
  w.agents.push_back(AgentTruth{0, p, v, 0.05});
  return w;
}

TEST(WorldTest, AgentPureIntegration) {
  Rng rng(1);
  const WorldState w = OneAgent(Vec2(0.0, 0.0), Vec2(0.01, 0.0));
  const WorldState n = StepAgents(w, AgentMotion{0.0, BoundaryPolicy::kReflect}, rng);
  EXPECT_EQ(n.tick, 1);
  EXPECT_DOUBLE_EQ(n.agents[0].position.x(), 0.01);
  EXPECT_DOUBLE_EQ(n.agents[0].position.y(), 0.0);
}

TEST(WorldTest, ReflectAtBoundary) {
  Rng rng(1);
  const WorldState w = OneAgent(Vec2(0.995, 0.5), Vec2(0.02, 0.01));
  const WorldState n = StepAgents(w, AgentMotion{0.0, BoundaryPolicy::kReflect}, rng);
  // 0.995 + 0.02 = 1.015 mirrors to 2 * 1 - 1.015 = 0.985.
  EXPECT_NEAR(n.agents[0].position.x(), 0.985, 1e-15);
  EXPECT_NEAR(n.agents[0].position.y(), 0.51, 1e-15);
  EXPECT_DOUBLE_EQ(n.agents[0].velocity.x(), -0.02);
  EXPECT_DOUBLE_EQ(n.agents[0].velocity.y(), 0.01);
}

TEST(WorldTest, WrapAtBoundary) {
  Rng rng(1);
  const WorldState w = OneAgent(Vec2(-0.995, 0.0), Vec2(-0.02, 0.0));
  const WorldState n = StepAgents(w, AgentMotion{0.0, BoundaryPolicy::kWrap}, rng);
  EXPECT_NEAR(n.agents[0].position.x(), 0.985, 1e-12);
  EXPECT_DOUBLE_EQ(n.agents[0].velocity.x(), -0.02);
}

TEST(WorldTest, SpeedConservedWithoutPerturbation) {
  ScenarioConfig c;
  c.n_agents = 30;
  WorldState w = SpawnScenario(c);
  std::vector<double> speeds;
  for (const AgentTruth& a : w.agents) speeds.push_back(a.velocity.norm());
  Rng rng(3);
  for (int t = 0; t < 500; ++t) {
    w = StepAgents(w, AgentMotion{0.0, BoundaryPolicy::kReflect}, rng);
    for (std::size_t i = 0; i < w.agents.size(); ++i) {
      EXPECT_NEAR(w.agents[i].velocity.norm(), speeds[i], 1e-15);
      EXPECT_TRUE(w.bounds.Contains(w.agents[i].position));
    }
  }
}

TEST(WorldTest, HeadingNoiseKeepsSpeed) {
  ScenarioConfig c;
  WorldState w = SpawnScenario(c);
  std::vector<double> speeds;
  for (const AgentTruth& a : w.agents) speeds.push_back(a.velocity.norm());
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    w = StepAgents(w, AgentMotion{0.3, BoundaryPolicy::kReflect}, rng);
  }
  for (std::size_t i = 0; i < w.agents.size(); ++i) {
    EXPECT_NEAR(w.agents[i].velocity.norm(), speeds[i], 1e-12);
  }
}

TEST(WorldTest, UnicycleStraightLine) {
  RobotState s;
  s.model = RobotModel::kSecondOrderUnicycle;
  s.linear_speed = 0.01;
  const RobotState n = StepRobot(s, Vec2::Zero(), 1.0, ControlLimits{});
  EXPECT_DOUBLE_EQ(n.position.x(), 0.01);
  EXPECT_DOUBLE_EQ(n.position.y(), 0.0);
}

TEST(WorldTest, UnicycleSpeedClamp) {
  RobotState s;
  s.model = RobotModel::kSecondOrderUnicycle;
  s.linear_speed = 0.019;
  const RobotState n = StepRobot(s, Vec2(0.005, 0.0), 1.0, ControlLimits{});
  EXPECT_EQ(n.linear_speed, 2e-2);
  const RobotState back = StepRobot(s, Vec2(-0.05, 0.0), 1.0, ControlLimits{});
  EXPECT_EQ(back.linear_speed, 0.0);
}

TEST(WorldTest, DoubleIntegratorSemiImplicit) {
  RobotState s;
  s.model = RobotModel::kDoubleIntegrator;
  const RobotState n = StepRobot(s, Vec2(0.001, 0.0), 1.0, ControlLimits{});
  EXPECT_DOUBLE_EQ(n.velocity().x(), 0.001);
  EXPECT_NEAR(n.velocity().y(), 0.0, 1e-18);
  // Velocity first, then position.
  EXPECT_DOUBLE_EQ(n.position.x(), 0.001);
}

TEST(WorldTest, SpeedStaysWithinLimitsUnderRandomControl) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  const ControlLimits lim;
  for (RobotModel m : {RobotModel::kDoubleIntegrator, RobotModel::kSecondOrderUnicycle}) {
    RobotState s;
    s.model = m;
    for (int t = 0; t < 5000; ++t) {
      s = StepRobot(s, Vec2(u(rng), u(rng)), 1.0, lim);
      EXPECT_GE(s.linear_speed, 0.0);
      EXPECT_LE(s.linear_speed, lim.v_max);
      EXPECT_GT(s.heading, -kPi);
      EXPECT_LE(s.heading, kPi);
    }
  }
}

TEST(WorldTest, CollisionBoundaries) {
  WorldState w;
  w.agents = {AgentTruth{0, Vec2(0.049, 0.0), Vec2::Zero(), 0.05}};
  EXPECT_TRUE(CheckCollision(w).any());
  w.agents = {AgentTruth{0, Vec2(0.05, 0.0), Vec2::Zero(), 0.05}};
  EXPECT_FALSE(CheckCollision(w).any());
  w.agents = {AgentTruth{3, Vec2(0.04, 0.0), Vec2::Zero(), 0.05},
              AgentTruth{4, Vec2(0.0, 0.2), Vec2::Zero(), 0.05},
              AgentTruth{5, Vec2(-0.3, 0.0), Vec2::Zero(), 0.05}};
  EXPECT_EQ(CheckCollision(w).agent_ids, std::vector<int>{3});
}

TEST(WorldTest, CollisionMatchesBruteForceOnRollout) {
  ScenarioConfig c;
  c.n_agents = 50;
  c.rng_seed = 11;
  WorldState w = SpawnScenario(c);
  Rng rng = MakeRng(c.rng_seed, 2);
  std::mt19937_64 ctl(6);
  std::uniform_real_distribution<double> u(-2e-3, 2e-3);
  int hits = 0;
  for (int t = 0; t < 1000; ++t) {
    w = StepAgents(w, AgentMotion{}, rng);
    w.robot = StepRobot(w.robot, Vec2(u(ctl), u(ctl)), 1.0, ControlLimits{});
    std::vector<int> brute;
    for (const AgentTruth& a : w.agents) {
      const double dx = w.robot.position.x() - a.position.x();
      const double dy = w.robot.position.y() - a.position.y();
      if (dx * dx + dy * dy < a.radius * a.radius) brute.push_back(a.id);
    }
    const auto report = CheckCollision(w).agent_ids;
    EXPECT_EQ(report, brute);
    hits += static_cast<int>(brute.size());
  }
  EXPECT_GT(hits, 0);
}

std::string Rollout() {
  ScenarioConfig c;
  c.rng_seed = 2024;
  WorldState w = SpawnScenario(c);
  Rng rng = MakeRng(c.rng_seed, 2);
  std::ostringstream out;
  WriteTraceHeader(out);
  WriteTraceRows(out, w);
  for (int t = 0; t < 100; ++t) {
    w = StepAgents(w, AgentMotion{c.heading_noise_std, c.boundary}, rng);
    w.robot = StepRobot(w.robot, Vec2(0.0, 1e-3), 1.0, ControlLimits{});
    WriteTraceRows(out, w);
  }
  return out.str();
}

TEST(WorldTest, RolloutMatchesGoldenTrace) {
  const std::string path = std::string(CROWDNAV_GOLDEN_DIR) + "/world_rollout.csv";
  const std::string trace = Rollout();
  EXPECT_EQ(trace, Rollout());
  const char* update = std::getenv("CROWDNAV_UPDATE_GOLDEN");
  if (update && std::string(update) == "1") {
    std::ofstream(path) << trace;
    GTEST_SKIP() << "golden trace rewritten";
  }
  std::ifstream in(path);
  ASSERT_TRUE(in.good()) << "missing " << path;
  std::stringstream golden;
  golden << in.rdbuf();
  EXPECT_EQ(trace, golden.str());
}

}  // namespace
}  // namespace crowdnav
