#include "dmsb/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dmsb/chart.hpp"

namespace dmsb::exp {

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

bool feasible(const auction::AuctionOutcome& outcome) {
  int winners = 0;
  for (const int x : outcome.allocation) winners += x;
  if (winners != 1 || outcome.winner < 0 ||
      outcome.winner >= static_cast<int>(outcome.allocation.size()) ||
      outcome.allocation[static_cast<std::size_t>(outcome.winner)] != 1) {
    return false;
  }
  for (std::size_t i = 0; i < outcome.payments.size(); ++i) {
    const bool is_winner = static_cast<int>(i) == outcome.winner;
    if (!is_winner && outcome.payments[i] != 0.0) return false;
    if (is_winner && !(outcome.payments[i] >= 0.0)) return false;
  }
  return true;
}

constexpr std::uint64_t kEvalEnvStream = 701;
constexpr std::uint64_t kEvalAgentStream = 809;

}  // namespace

std::string to_string(Mechanism m) {
  switch (m) {
    case Mechanism::kDmsb: return "dmsb";
    case Mechanism::kSpa: return "spa";
    case Mechanism::kMyopicMsb: return "myopic";
    case Mechanism::kOptimalMsb: return "optimal";
  }
  throw std::logic_error("unknown mechanism");
}

std::string to_string(AgentKind a) {
  switch (a) {
    case AgentKind::kDiffusion: return "diffusion";
    case AgentKind::kPpo: return "ppo";
    case AgentKind::kGreedy: return "greedy";
    case AgentKind::kRandom: return "random";
  }
  throw std::logic_error("unknown agent kind");
}

std::string to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::kNone: return "none";
    case SweepVariable::kBandwidth: return "bandwidth";
    case SweepVariable::kVtSize: return "vt_size";
    case SweepVariable::kNumBs: return "num_bs";
  }
  throw std::logic_error("unknown sweep variable");
}

Mechanism parse_mechanism(const std::string& s) {
  if (s == "dmsb") return Mechanism::kDmsb;
  if (s == "spa") return Mechanism::kSpa;
  if (s == "myopic") return Mechanism::kMyopicMsb;
  if (s == "optimal") return Mechanism::kOptimalMsb;
  throw std::invalid_argument("unknown mechanism: " + s);
}

AgentKind parse_agent(const std::string& s) {
  if (s == "diffusion") return AgentKind::kDiffusion;
  if (s == "ppo") return AgentKind::kPpo;
  if (s == "greedy") return AgentKind::kGreedy;
  if (s == "random") return AgentKind::kRandom;
  throw std::invalid_argument("unknown agent: " + s);
}

SweepVariable parse_sweep(const std::string& s) {
  if (s == "none") return SweepVariable::kNone;
  if (s == "bandwidth") return SweepVariable::kBandwidth;
  if (s == "vt_size") return SweepVariable::kVtSize;
  if (s == "num_bs") return SweepVariable::kNumBs;
  throw std::invalid_argument("unknown sweep variable: " + s);
}

ExperimentSpec ExperimentSpec::load(const std::string& path) {
  return from_config(kv::parse_file(path));
}

ExperimentSpec ExperimentSpec::from_config(const kv::Config& config) {
  ExperimentSpec spec;
  for (const auto& [key, value] : config.entries) {
    spec.apply(key, value);
  }
  spec.validate();
  return spec;
}

void ExperimentSpec::apply(const std::string& key, const std::string& value) {
  using kv::to_double;
  using kv::to_int;
  using kv::to_u64;

  const auto as_int = [&](auto& field) { field = static_cast<int>(to_int(value, key)); };
  const auto as_double = [&](auto& field) { field = to_double(value, key); };

  if (key == "name") name = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "seed") seed = to_u64(value, key);
  else if (key == "repetitions") as_int(repetitions);

  else if (key == "scenario.num_bs") as_int(scenario.num_bs);
  else if (key == "scenario.task_size_min_mb") as_double(scenario.task_size_min_mb);
  else if (key == "scenario.task_size_max_mb") as_double(scenario.task_size_max_mb);
  else if (key == "scenario.bandwidth_min_hz") as_double(scenario.bandwidth_min_hz);
  else if (key == "scenario.bandwidth_max_hz") as_double(scenario.bandwidth_max_hz);
  else if (key == "scenario.compute_units_min") as_double(scenario.compute_units_min);
  else if (key == "scenario.compute_units_max") as_double(scenario.compute_units_max);
  else if (key == "scenario.compute_unit_hz") as_double(scenario.compute_unit_hz);
  else if (key == "scenario.gpu_cycles_per_bit") as_double(scenario.gpu_cycles_per_bit);
  else if (key == "scenario.power_min") as_double(scenario.power_min);
  else if (key == "scenario.power_max") as_double(scenario.power_max);
  else if (key == "scenario.noise_power") as_double(scenario.noise_power);
  else if (key == "scenario.gain_min") as_double(scenario.gain_min);
  else if (key == "scenario.gain_max") as_double(scenario.gain_max);
  else if (key == "scenario.accuracy_mean_min") as_double(scenario.accuracy_mean_min);
  else if (key == "scenario.accuracy_mean_max") as_double(scenario.accuracy_mean_max);
  else if (key == "scenario.accuracy_concentration") as_double(scenario.accuracy_concentration);
  else if (key == "scenario.accuracy_floor") as_double(scenario.accuracy_floor);
  else if (key == "scenario.accuracy_ceiling") as_double(scenario.accuracy_ceiling);
  else if (key == "scenario.pixel_count") scenario.pixel_count = to_int(value, key);
  else if (key == "scenario.omega1") as_double(scenario.omega1);
  else if (key == "scenario.omega2") as_double(scenario.omega2);
  else if (key == "scenario.beta") as_double(scenario.beta);
  else if (key == "scenario.history_window") as_int(scenario.history_window);
  else if (key == "scenario.zeta") as_double(scenario.zeta);
  else if (key == "scenario.action_count") as_int(scenario.action_count);
  else if (key == "scenario.max_providers") as_int(scenario.max_providers);
  else if (key == "scenario.contracted_grid_points") as_int(scenario.contracted_grid_points);

  else if (key == "trainer.episodes") as_int(trainer.episodes);
  else if (key == "trainer.rounds_per_episode") as_int(trainer.rounds_per_episode);
  else if (key == "trainer.steps") requested_steps = to_int(value, key);
  else if (key == "trainer.diffusion_steps") as_int(trainer.diffusion_steps);
  else if (key == "trainer.eta_min") as_double(trainer.eta_min);
  else if (key == "trainer.eta_max") as_double(trainer.eta_max);
  else if (key == "trainer.soft_update_rate") as_double(trainer.soft_update_rate);
  else if (key == "trainer.discount") as_double(trainer.discount);
  else if (key == "trainer.batch_size") as_int(trainer.batch_size);
  else if (key == "trainer.temperature") as_double(trainer.temperature);
  else if (key == "trainer.learning_rate") as_double(trainer.learning_rate);
  else if (key == "trainer.buffer_capacity") {
    trainer.buffer_capacity = static_cast<std::size_t>(to_int(value, key));
  } else if (key == "trainer.warmup_transitions") {
    as_int(trainer.warmup_transitions);
  } else if (key == "trainer.hidden") {
    trainer.hidden.clear();
    for (const double h : kv::to_double_list(value, key)) {
      trainer.hidden.push_back(static_cast<int>(h));
    }
  } else if (key == "trainer.critic_hidden") {
    trainer.critic_hidden.clear();
    for (const double h : kv::to_double_list(value, key)) {
      trainer.critic_hidden.push_back(static_cast<int>(h));
    }
  } else if (key == "trainer.step_embed_dim") {
    as_int(trainer.step_embed_dim);
  } else if (key == "trainer.checkpoint_every") {
    as_int(trainer.checkpoint_every);
  }

  else if (key == "ppo.rollout_length") as_int(ppo.rollout_length);
  else if (key == "ppo.epochs") as_int(ppo.epochs);
  else if (key == "ppo.minibatch") as_int(ppo.minibatch);
  else if (key == "ppo.clip") as_double(ppo.clip);
  else if (key == "ppo.discount") as_double(ppo.discount);
  else if (key == "ppo.gae_lambda") as_double(ppo.gae_lambda);
  else if (key == "ppo.learning_rate") as_double(ppo.learning_rate);
  else if (key == "ppo.entropy_coef") as_double(ppo.entropy_coef);
  else if (key == "ppo.hidden") {
    ppo.hidden.clear();
    for (const double h : kv::to_double_list(value, key)) ppo.hidden.push_back(static_cast<int>(h));
  }

  else if (key == "experiment.mechanisms") {
    mechanisms.clear();
    for (const auto& m : kv::to_list(value)) mechanisms.push_back(parse_mechanism(m));
  } else if (key == "experiment.agents") {
    agents.clear();
    for (const auto& a : kv::to_list(value)) agents.push_back(parse_agent(a));
  } else if (key == "experiment.sweep") {
    sweep = parse_sweep(value);
  } else if (key == "experiment.sweep_grid") {
    sweep_grid = kv::to_double_list(value, key);
  } else if (key == "experiment.eval_rounds") {
    as_int(eval_rounds);
  } else if (key == "experiment.smoothing_window") {
    as_int(smoothing_window);
  } else if (key == "experiment.log_every") {
    as_int(log_every);
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

void ExperimentSpec::validate() const {
  if (name.empty()) throw std::invalid_argument("experiment name must not be empty");
  if (out_dir.empty()) throw std::invalid_argument("out_dir must not be empty");
  if (repetitions < 1) throw std::invalid_argument("repetitions must be positive");
  if (eval_rounds < 1) throw std::invalid_argument("eval_rounds must be positive");
  if (smoothing_window < 1) throw std::invalid_argument("smoothing_window must be positive");
  if (log_every < 1) throw std::invalid_argument("log_every must be positive");
  if (sweep != SweepVariable::kNone && sweep_grid.empty()) {
    throw std::invalid_argument("sweep requested but sweep_grid is empty");
  }
  if (mechanisms.empty() && agents.empty()) {
    throw std::invalid_argument("nothing to compare: no mechanisms and no agents");
  }
  scenario.validate();
  trainer_for_rep(0).validate();
  ppo.validate();
}

rl::TrainerConfig ExperimentSpec::trainer_for_rep(int rep) const {
  rl::TrainerConfig cfg = trainer;
  if (requested_steps > 0) {
    cfg.episodes = static_cast<int>(
        (requested_steps + cfg.rounds_per_episode - 1) / cfg.rounds_per_episode);
  }
  cfg.seed = rep_seed(rep);
  return cfg;
}

std::string ExperimentSpec::policy_path(int rep) const {
  return out_dir + "/policy_diffusion_seed" + std::to_string(rep_seed(rep)) + ".bin";
}

std::string ExperimentSpec::ppo_path(int rep) const {
  return out_dir + "/policy_ppo_seed" + std::to_string(rep_seed(rep)) + ".bin";
}

void write_results_csv(const std::string& path, const std::string& experiment,
                       const std::vector<ResultRow>& rows) {
  std::ofstream out = open_out(path);
  out << "# dmsb-csv v1 kind=results experiment=" << experiment << "\n";
  out << "experiment,sweep_value,series,seed,mean_total_surplus,uav_surplus,bs_surplus,"
         "mean_total_latency_s,steps\n";
  for (const auto& r : rows) {
    out << r.experiment << "," << fmt(r.sweep_value) << "," << r.series << "," << r.seed << ","
        << fmt(r.mean_total_surplus) << "," << fmt(r.uav_surplus) << "," << fmt(r.bs_surplus)
        << "," << fmt(r.mean_total_latency_s) << "," << r.steps << "\n";
  }
  if (!out) throw std::runtime_error("failed to write " + path);
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<ResultRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::istringstream ls(line);
    std::string field;
    ResultRow r;
    std::getline(ls, r.experiment, ',');
    std::getline(ls, field, ',');
    r.sweep_value = std::stod(field);
    std::getline(ls, r.series, ',');
    std::getline(ls, field, ',');
    r.seed = std::stoull(field);
    std::getline(ls, field, ',');
    r.mean_total_surplus = std::stod(field);
    std::getline(ls, field, ',');
    r.uav_surplus = std::stod(field);
    std::getline(ls, field, ',');
    r.bs_surplus = std::stod(field);
    std::getline(ls, field, ',');
    r.mean_total_latency_s = std::stod(field);
    std::getline(ls, field, ',');
    r.steps = std::stoll(field);
    rows.push_back(std::move(r));
  }
  return rows;
}

env::ScenarioConfig apply_sweep(const env::ScenarioConfig& base, SweepVariable variable,
                                double value) {
  env::ScenarioConfig cfg = base;
  switch (variable) {
    case SweepVariable::kNone:
      break;
    case SweepVariable::kBandwidth:
      cfg.bandwidth_min_hz = value;
      cfg.bandwidth_max_hz = value;
      break;
    case SweepVariable::kVtSize:
      cfg.task_size_min_mb = value;
      cfg.task_size_max_mb = value;
      break;
    case SweepVariable::kNumBs:
      cfg.num_bs = static_cast<int>(value);
      break;
  }
  cfg.validate();
  return cfg;
}

ResultRow evaluate_msb_agent(const std::string& experiment, const std::string& series,
                             rl::Agent& agent, const env::ScenarioConfig& scenario,
                             std::uint64_t env_seed, std::uint64_t agent_seed, int rounds,
                             double sweep_value, std::uint64_t seed_label) {
  constexpr int kRoundsPerEpisode = 100;
  env::AuctionEnv environment(scenario, env::episode_seed(env_seed, 0));
  Rng agent_rng(agent_seed);

  double total = 0.0;
  double uav = 0.0;
  double bs = 0.0;
  double latency = 0.0;
  for (int i = 0; i < rounds; ++i) {
    if (i % kRoundsPerEpisode == 0) {
      environment.reset(env::episode_seed(env_seed, i / kRoundsPerEpisode));
    }
    const int action = agent.act(environment.state(), agent_rng);
    const env::StepInfo info = environment.step(action);
    total += info.reward;
    uav += scenario.zeta * info.uav_surplus;
    bs += info.bs_surplus;
    latency += info.winner_latency_s;
  }
  const double n = static_cast<double>(rounds);
  return {experiment, sweep_value, series,   seed_label, total / n,
          uav / n,    bs / n,      latency / n, rounds};
}

ResultRow evaluate_mechanism(const std::string& experiment, Mechanism mechanism,
                             const env::ScenarioConfig& scenario, std::uint64_t env_seed,
                             int rounds, double sweep_value, std::uint64_t seed_label) {
  if (mechanism == Mechanism::kDmsb) {
    throw std::invalid_argument("the DMSB mechanism needs a trained policy agent");
  }
  constexpr int kRoundsPerEpisode = 100;
  env::AuctionEnv environment(scenario, env::episode_seed(env_seed, 0));
  const auction::SurplusWeights weights{scenario.zeta};

  std::vector<auction::BidVector> bid_history;
  double total = 0.0;
  double uav = 0.0;
  double bs = 0.0;
  double latency = 0.0;
  for (int i = 0; i < rounds; ++i) {
    if (i % kRoundsPerEpisode == 0) {
      environment.reset(env::episode_seed(env_seed, i / kRoundsPerEpisode));
    }
    const env::Round& round = environment.round();
    auction::AuctionOutcome outcome;
    switch (mechanism) {
      case Mechanism::kSpa:
        outcome = auction::spa(round.bids);
        break;
      case Mechanism::kMyopicMsb:
        outcome = auction::msb_run(round.bids, auction::myopic_rho(round.bids));
        break;
      case Mechanism::kOptimalMsb:
        bid_history.push_back(round.bids);
        outcome = auction::msb_run(round.bids, auction::optimal_rho(bid_history));
        break;
      case Mechanism::kDmsb:
        break;  // unreachable
    }
    auction::realize_surplus(outcome, round.valuations);
    total += auction::surplus(outcome, round.valuations, weights);
    uav += weights.zeta * outcome.uav_surplus;
    bs += outcome.bs_surplus;
    latency += round.latencies[static_cast<std::size_t>(outcome.winner)];
    environment.step(0);  // advance; the generated next round is action-independent
  }
  const double n = static_cast<double>(rounds);
  return {experiment, sweep_value, to_string(mechanism), seed_label, total / n,
          uav / n,    bs / n,      latency / n,          rounds};
}

namespace {

struct SmoothedPoint {
  std::string agent;
  std::uint64_t seed = 0;
  long long step = 0;
  double surplus_smoothed = 0.0;
};

// Streams per-step training rows and maintains the trailing-window mean.
class ConvergenceRecorder {
 public:
  ConvergenceRecorder(std::string agent, std::uint64_t seed, int window, int log_every,
                      std::vector<SmoothedPoint>& sink)
      : agent_(std::move(agent)), seed_(seed), window_(window), log_every_(log_every),
        sink_(sink) {}

  void operator()(const rl::StepLog& log) {
    window_sum_ += log.reward;
    recent_.push_back(log.reward);
    if (static_cast<int>(recent_.size()) > window_) {
      window_sum_ -= recent_.front();
      recent_.pop_front();
    }
    if (log.step % log_every_ == 0) {
      sink_.push_back({agent_, seed_, log.step,
                       window_sum_ / static_cast<double>(recent_.size())});
    }
  }

 private:
  std::string agent_;
  std::uint64_t seed_;
  int window_;
  int log_every_;
  std::vector<SmoothedPoint>& sink_;
  std::deque<double> recent_;
  double window_sum_ = 0.0;
};

std::ofstream open_train_log(const std::string& out_dir, const std::string& agent,
                             std::uint64_t seed) {
  std::ofstream out =
      open_out(out_dir + "/train_" + agent + "_seed" + std::to_string(seed) + ".csv");
  out << "# dmsb-csv v1 kind=train agent=" << agent << " seed=" << seed << "\n";
  out << "step,reward,actor_loss,critic1_loss,critic2_loss,entropy,rho\n";
  return out;
}

void append_train_row(std::ofstream& out, const rl::StepLog& log) {
  out << log.step << "," << fmt(log.reward) << "," << fmt(log.actor_objective) << ","
      << fmt(log.critic1_loss) << "," << fmt(log.critic2_loss) << "," << fmt(log.entropy) << ","
      << fmt(log.rho) << "\n";
}

}  // namespace

std::string run_train(const ExperimentSpec& spec) {
  spec.validate();
  std::filesystem::create_directories(spec.out_dir);

  std::vector<SmoothedPoint> curve;
  for (int rep = 0; rep < spec.repetitions; ++rep) {
    const std::uint64_t seed = spec.rep_seed(rep);
    const rl::TrainerConfig tcfg = spec.trainer_for_rep(rep);
    const long long steps = tcfg.total_steps();

    for (const AgentKind kind : spec.agents) {
      if (kind == AgentKind::kDiffusion) {
        std::ofstream log = open_train_log(spec.out_dir, "diffusion", seed);
        ConvergenceRecorder record("diffusion", seed, spec.smoothing_window, spec.log_every,
                                   curve);
        rl::Trainer trainer(spec.scenario, tcfg);
        const std::string final_path = spec.policy_path(rep);
        rl::TrainResult result = trainer.run(
            [&](const rl::StepLog& l) {
              append_train_row(log, l);
              record(l);
            },
            [&](const diffusion::DiffusionActor& actor, const env::RunningNorm& norm,
                long long step) {
              const std::string path =
                  step >= steps ? final_path
                                : final_path + ".step" + std::to_string(step);
              rl::save_policy(path, actor, norm);
            });
      } else if (kind == AgentKind::kPpo) {
        std::ofstream log = open_train_log(spec.out_dir, "ppo", seed);
        ConvergenceRecorder record("ppo", seed, spec.smoothing_window, spec.log_every, curve);
        rl::PpoConfig pcfg = spec.ppo;
        pcfg.seed = seed;
        env::AuctionEnv environment(spec.scenario, env::episode_seed(seed, 0));
        rl::PpoAgent agent(environment.state_dimension(), environment.action_count(), pcfg);
        agent.train(environment, steps, tcfg.rounds_per_episode, [&](const rl::StepLog& l) {
          append_train_row(log, l);
          record(l);
        });
        agent.save(spec.ppo_path(rep));
      } else {
        // Non-learning agents: roll them over the same market stream so the
        // convergence chart has their reference level.
        const std::string name = to_string(kind);
        ConvergenceRecorder record(name, seed, spec.smoothing_window, spec.log_every, curve);
        std::unique_ptr<rl::Agent> agent =
            kind == AgentKind::kGreedy
                ? rl::make_greedy_agent(spec.scenario.action_count, spec.scenario.zeta)
                : rl::make_random_agent(spec.scenario.action_count);
        env::AuctionEnv environment(spec.scenario, env::episode_seed(seed, 0));
        Rng agent_rng = Rng::derive(seed, kEvalAgentStream + static_cast<int>(kind));
        long long step = 0;
        for (int episode = 0; step < steps; ++episode) {
          environment.reset(env::episode_seed(seed, episode));
          for (int round = 0; round < tcfg.rounds_per_episode && step < steps; ++round) {
            ++step;
            const int action = agent->act(environment.state(), agent_rng);
            const env::StepInfo info = environment.step(action);
            rl::StepLog l;
            l.step = step;
            l.reward = info.reward;
            l.rho = info.rho;
            record(l);
          }
        }
      }
    }
  }

  const std::string path = spec.out_dir + "/convergence.csv";
  std::ofstream out = open_out(path);
  out << "# dmsb-csv v1 kind=convergence experiment=" << spec.name
      << " smoothing_window=" << spec.smoothing_window << " log_every=" << spec.log_every
      << "\n";
  out << "agent,seed,step,surplus_smoothed\n";
  for (const auto& p : curve) {
    out << p.agent << "," << p.seed << "," << p.step << "," << fmt(p.surplus_smoothed) << "\n";
  }
  if (!out) throw std::runtime_error("failed to write " + path);
  return path;
}

namespace {

// Builds the frozen-policy agent for a series, loading checkpoints written
// by run_train.
std::unique_ptr<rl::Agent> make_series_agent(const ExperimentSpec& spec, AgentKind kind,
                                             int rep) {
  switch (kind) {
    case AgentKind::kDiffusion: {
      rl::PolicyCheckpoint ckpt = rl::load_policy(spec.policy_path(rep));
      return std::make_unique<rl::DiffusionPolicyAgent>(
          std::move(ckpt.actor), std::move(ckpt.normalizer), diffusion::SampleMode::kGreedy);
    }
    case AgentKind::kPpo:
      return std::make_unique<rl::PpoAgent>(rl::PpoAgent::load(spec.ppo_path(rep), spec.ppo));
    case AgentKind::kGreedy:
      return rl::make_greedy_agent(spec.scenario.action_count, spec.scenario.zeta);
    case AgentKind::kRandom:
      return rl::make_random_agent(spec.scenario.action_count);
  }
  throw std::logic_error("unknown agent kind");
}

std::vector<ResultRow> evaluate_point(const ExperimentSpec& spec,
                                      const env::ScenarioConfig& scenario, double sweep_value) {
  std::vector<ResultRow> rows;
  for (int rep = 0; rep < spec.repetitions; ++rep) {
    const std::uint64_t seed = spec.rep_seed(rep);
    const std::uint64_t env_seed = Rng::derive(seed, kEvalEnvStream).next_u64();
    int series_index = 0;
    for (const Mechanism m : spec.mechanisms) {
      if (m == Mechanism::kDmsb) {
        auto agent = make_series_agent(spec, AgentKind::kDiffusion, rep);
        rows.push_back(evaluate_msb_agent(
            spec.name, "dmsb", *agent, scenario, env_seed,
            Rng::derive(seed, kEvalAgentStream + series_index).next_u64(), spec.eval_rounds,
            sweep_value, seed));
      } else {
        rows.push_back(evaluate_mechanism(spec.name, m, scenario, env_seed, spec.eval_rounds,
                                          sweep_value, seed));
      }
      ++series_index;
    }
    for (const AgentKind a : spec.agents) {
      auto agent = make_series_agent(spec, a, rep);
      rows.push_back(evaluate_msb_agent(
          spec.name, to_string(a), *agent, scenario, env_seed,
          Rng::derive(seed, kEvalAgentStream + series_index).next_u64(), spec.eval_rounds,
          sweep_value, seed));
      ++series_index;
    }
  }
  return rows;
}

}  // namespace

std::string run_evaluate(const ExperimentSpec& spec) {
  spec.validate();
  std::filesystem::create_directories(spec.out_dir);
  const std::vector<ResultRow> rows = evaluate_point(spec, spec.scenario, 0.0);
  const std::string path = spec.out_dir + "/evaluation.csv";
  write_results_csv(path, spec.name, rows);
  return path;
}

std::string run_sweep(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.sweep == SweepVariable::kNone) {
    throw std::invalid_argument("spec has no sweep variable");
  }
  std::filesystem::create_directories(spec.out_dir);
  std::vector<ResultRow> rows;
  for (const double value : spec.sweep_grid) {
    const env::ScenarioConfig scenario = apply_sweep(spec.scenario, spec.sweep, value);
    std::vector<ResultRow> point = evaluate_point(spec, scenario, value);
    rows.insert(rows.end(), point.begin(), point.end());
  }
  const std::string path = spec.out_dir + "/sweep_" + to_string(spec.sweep) + ".csv";
  write_results_csv(path, spec.name, rows);
  return path;
}

auction::MarketInstance random_market(Rng& rng, int num_bs) {
  env::ScenarioConfig cfg;
  cfg.num_bs = num_bs;
  env::AuctionEnv environment(cfg, rng.next_u64());
  const env::Round& round = environment.round();
  return {round.valuations, round.bids.uav_bid};
}

PropertyReport run_property_check(std::uint64_t seed, int markets, int deviations_per_bidder,
                                  int homogeneity_trials) {
  if (deviations_per_bidder < 2) throw std::invalid_argument("need at least two deviations");
  PropertyReport report;
  Rng rng(seed);

  for (int i = 0; i < markets; ++i) {
    const int num_bs = rng.uniform_int(1, 8);
    const auction::MarketInstance market = random_market(rng, num_bs);
    const double rho = rng.uniform(1.0, 10.0);
    ++report.markets;

    auction::BidVector bids;
    bids.uav_bid = market.uav_contracted_bid;
    bids.bs_bids.assign(market.valuations.begin() + 1, market.valuations.end());
    double max_bid = bids.uav_bid;
    for (const double b : bids.bs_bids) max_bid = std::max(max_bid, b);

    std::vector<double> grid(static_cast<std::size_t>(deviations_per_bidder));
    const double hi = 1.05 * rho * max_bid;
    for (int g = 0; g < deviations_per_bidder; ++g) {
      grid[static_cast<std::size_t>(g)] =
          hi * static_cast<double>(g) / static_cast<double>(deviations_per_bidder - 1);
    }
    const auction::TruthfulnessResult result = auction::check_truthfulness(market, rho, grid);
    if (!result.passed) ++report.truthfulness_violations;

    const auction::AuctionOutcome outcome = auction::msb_run(bids, rho);
    ++report.feasibility_checks;
    if (!feasible(outcome)) ++report.feasibility_violations;
  }

  for (int i = 0; i < homogeneity_trials; ++i) {
    const int n = rng.uniform_int(2, 9);
    std::vector<double> others(static_cast<std::size_t>(n));
    for (auto& b : others) b = rng.uniform(0.0, 100.0);
    const double theta = rng.uniform(1e-6, 100.0);
    const double rho = rng.uniform(1.0, 10.0);
    ++report.homogeneity_trials;

    const double psi = auction::critical_payment(others, rho);
    std::vector<double> scaled = others;
    for (auto& b : scaled) b *= theta;
    const double psi_scaled = auction::critical_payment(scaled, rho);
    const double err = std::abs(psi_scaled - theta * psi);
    if (err > 1e-12 * std::max(std::abs(theta * psi), 1e-300)) {
      ++report.homogeneity_violations;
    }

    // Winner invariance under common positive scaling of every bid.
    auction::BidVector bids;
    bids.uav_bid = others[0];
    bids.bs_bids.assign(others.begin() + 1, others.end());
    auction::BidVector bids_scaled;
    bids_scaled.uav_bid = bids.uav_bid * theta;
    bids_scaled.bs_bids = bids.bs_bids;
    for (auto& b : bids_scaled.bs_bids) b *= theta;
    const auction::AuctionOutcome a = auction::msb_run(bids, rho);
    const auction::AuctionOutcome b = auction::msb_run(bids_scaled, rho);
    ++report.feasibility_checks;
    if (!feasible(a) || !feasible(b)) ++report.feasibility_violations;
    if (a.winner != b.winner) ++report.homogeneity_violations;
  }

  return report;
}

}  // namespace dmsb::exp
