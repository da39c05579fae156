#pragma once

// Offline training of the local agents on one cordon edge. Agents act
// epsilon-greedily every action step without any perimeter feedback; the rest
// of the network runs the fixed plan. Each agent owns its replay memory and
// its online/target networks.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "pclab/agent.hpp"
#include "pclab/controllers.hpp"
#include "pclab/demand.hpp"
#include "pclab/mlp.hpp"
#include "pclab/runner.hpp"

namespace pclab {

struct TrainConfig {
  std::vector<int> hidden{64, 64};
  int episodes = 20;
  int epsilon_decay_episodes = 14;
  double epsilon_start = 1.0;
  double epsilon_floor = 0.02;
  double gamma = 0.95;
  OptimizerConfig optimizer;
  int updates_per_episode = 800;
  int batch_size = 64;
  std::size_t replay_capacity = 50000;
  int target_copy_every = 100;
  std::uint64_t seed = 1;           // network initialisation and exploration
  std::uint64_t demand_seed = 1000;  // episode e uses demand_seed + e
  Heading trained_edge = Heading::north;
  AgentConfig agent;
  FixedPlan plan;
  RunOptions run;
};

struct TrainResult {
  std::vector<NodeId> agents;            // trained signals in edge order
  std::vector<Mlp> nets;                 // online nets, same order
  std::vector<std::vector<double>> mean_reward;  // [episode][agent]
  std::vector<std::vector<double>> mean_loss;    // [episode][agent]
  std::vector<std::uint64_t> target_copies;      // per agent
  std::vector<std::uint64_t> train_calls;        // per agent
};

namespace detail {

/// Drives the training episode: learning agents on one edge, fixed plan elsewhere.
class TrainingController : public Controller {
public:
  TrainingController(const Network& net, const std::vector<NodeId>& agents, std::vector<Mlp>& nets,
                     std::vector<ReplayBuffer>& buffers, const TrainConfig& cfg, double epsilon, std::mt19937_64& rng)
      : agents_(agents), nets_(nets), buffers_(buffers), cfg_(cfg), epsilon_(epsilon), rng_(rng),
        observer_(net, cfg.agent), prev_state_(agents.size()), prev_action_(agents.size(), -1),
        reward_sum_(agents.size(), 0.0), reward_count_(agents.size(), 0) {
    for (std::size_t i = 0; i < agents.size(); ++i) is_agent_[agents[i]] = i;
  }

  std::string name() const override { return "training"; }

  void act(Simulation& sim, const ControlContext& ctx) override {
    const auto& net = sim.network();
    drive_interior(sim, ctx.t, cfg_.plan);
    observer_.begin_step(sim);
    const bool last = ctx.t + cfg_.run.action_step >= cfg_.run.horizon;
    for (NodeId s : net.cordon_signals()) {
      auto it = is_agent_.find(s);
      int action;
      if (it == is_agent_.end()) {
        action = fixed_plan(ctx.t, cfg_.plan).phase;
      } else {
        const std::size_t i = it->second;
        auto state = observer_.state(s);
        if (prev_action_[i] >= 0) {
          const double r = observer_.reward(s);
          reward_sum_[i] += r;
          ++reward_count_[i];
          buffers_[i].push({prev_state_[i], prev_action_[i], r, state, last});
        }
        const auto q = nets_[i].forward(state);
        action = select_action(q, epsilon_, rng_);
        prev_state_[i] = std::move(state);
        prev_action_[i] = action;
      }
      const bool interlock = sim.apply_control(s, action);
      commands_.push_back({ctx.t, s, action});
      observer_.record_action(s, action, interlock);
    }
    observer_.commit();
  }

  double mean_reward(std::size_t i) const { return reward_count_[i] ? reward_sum_[i] / reward_count_[i] : 0.0; }

private:
  const std::vector<NodeId>& agents_;
  std::vector<Mlp>& nets_;
  std::vector<ReplayBuffer>& buffers_;
  const TrainConfig& cfg_;
  double epsilon_;
  std::mt19937_64& rng_;
  CordonObserver observer_;
  std::map<NodeId, std::size_t> is_agent_;
  std::vector<std::vector<double>> prev_state_;
  std::vector<int> prev_action_;
  std::vector<double> reward_sum_;
  std::vector<int> reward_count_;
};

}  // namespace detail

using TrainProgress = std::function<void(int episode, const std::vector<double>& mean_reward, const std::vector<double>& mean_loss)>;

inline TrainResult train_agents(const Network& net, const DemandSchedule& schedule, const TrainConfig& cfg,
                                const TrainProgress& progress = {}) {
  if (cfg.episodes < 0) throw ConfigError("episode count must be nonnegative");
  if (cfg.batch_size <= 0 || cfg.target_copy_every <= 0 || cfg.updates_per_episode < 0)
    throw ConfigError("batch size, target copy interval and update count must be positive");
  if (cfg.gamma < 0 || cfg.gamma > 1) throw ConfigError("discount factor must lie in [0, 1]");
  TrainResult res;
  res.agents = net.cordon_edge(cfg.trained_edge);
  if (res.agents.empty()) throw ConfigError("trained edge has no cordon signals");

  std::vector<int> dims{kStateDim};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(kActionCount);

  std::vector<Mlp> targets;
  std::vector<Trainer> trainers;
  std::vector<ReplayBuffer> buffers;
  std::vector<std::mt19937_64> update_rngs;
  for (std::size_t i = 0; i < res.agents.size(); ++i) {
    res.nets.push_back(Mlp::initialised(dims, cfg.seed * 7919 + i));
    targets.push_back(res.nets.back());
    trainers.emplace_back(cfg.optimizer);
    buffers.emplace_back(cfg.replay_capacity);
    update_rngs.emplace_back(cfg.seed * 104729 + 17 * i + 1);
  }
  res.target_copies.assign(res.agents.size(), 0);
  res.train_calls.assign(res.agents.size(), 0);
  std::mt19937_64 act_rng(cfg.seed);

  for (int e = 0; e < cfg.episodes; ++e) {
    const double eps = epsilon_at(e, cfg.epsilon_decay_episodes, cfg.epsilon_start, cfg.epsilon_floor);
    const auto trips = generate_demand(net, schedule, cfg.demand_seed + static_cast<std::uint64_t>(e));
    detail::TrainingController ctl(net, res.agents, res.nets, buffers, cfg, eps, act_rng);
    run_controller(net, trips, ctl, cfg.run);

    std::vector<double> rewards, losses;
    for (std::size_t i = 0; i < res.agents.size(); ++i) {
      rewards.push_back(ctl.mean_reward(i));
      double loss_sum = 0.0;
      for (int u = 0; u < cfg.updates_per_episode && buffers[i].size() > 0; ++u) {
        const auto picks = buffers[i].sample(static_cast<std::size_t>(cfg.batch_size), update_rngs[i]);
        std::vector<Sample> batch;
        batch.reserve(picks.size());
        for (const Transition* tr : picks)
          batch.push_back({tr->state, tr->action, ddqn_target(*tr, res.nets[i], targets[i], cfg.gamma)});
        const double loss = trainers[i].train_batch(res.nets[i], batch);
        if (!std::isfinite(loss))
          throw MlpError("non-finite loss for agent " + std::to_string(i) + " in episode " + std::to_string(e));
        loss_sum += loss;
        if (++res.train_calls[i] % static_cast<std::uint64_t>(cfg.target_copy_every) == 0) {
          copy_into(res.nets[i], targets[i]);
          ++res.target_copies[i];
        }
      }
      losses.push_back(cfg.updates_per_episode > 0 ? loss_sum / cfg.updates_per_episode : 0.0);
    }
    res.mean_reward.push_back(rewards);
    res.mean_loss.push_back(losses);
    if (progress) progress(e, rewards, losses);
  }
  return res;
}

inline void write_reward_curve_csv(std::ostream& os, const TrainResult& r) {
  os << "# " << kCsvSchema << " rewards\n";
  os << "episode,agent,signal,mean_reward,mean_loss\n";
  os.precision(17);
  for (std::size_t e = 0; e < r.mean_reward.size(); ++e)
    for (std::size_t i = 0; i < r.agents.size(); ++i)
      os << e << ',' << i << ',' << r.agents[i] << ',' << r.mean_reward[e][i] << ',' << r.mean_loss[e][i] << '\n';
}

}  // namespace pclab
