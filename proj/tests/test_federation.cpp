#include <cmath>
#include <optional>
#include <vector>

#include "doctest.h"
#include "ppfl/federation.hpp"
#include "ppfl/rng.hpp"

using namespace ppfl;
using namespace ppfl::federation;
using numkit::Batch;
using numkit::Matrix;
using numkit::ModelSpec;
using numkit::ParamVector;

namespace {

ModelSpec tiny_softmax() {
  ModelSpec s;
  s.kind = numkit::ModelKind::SoftmaxRegression;
  s.input_dim = 2;
  s.num_classes = 2;
  return s;
}

privacy::PrivacyBudget pl_budget(double chi) {
  privacy::PrivacyBudget b;
  b.chi = chi;
  b.framework = privacy::Framework::DistributionFree;
  return b;
}

// Two axis-aligned clusters, class c concentrated at the unit vector e_c.
ClientState separable_client(int id, int per_class, double jitter, std::uint64_t seed) {
  RngStream rng(seed);
  ClientState c;
  c.id = id;
  const int n = 2 * per_class;
  c.inputs = Matrix(n, 2);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    const int cls = i % 2;
    labels[i] = cls;
    c.inputs.at(i, 0) = (cls == 0 ? 1.0 : 0.0) + jitter * rng.normal();
    c.inputs.at(i, 1) = (cls == 1 ? 1.0 : 0.0) + jitter * rng.normal();
  }
  c.labels = numkit::one_hot(labels, 2);
  return c;
}

FedConfig base_config(int rounds) {
  FedConfig cfg;
  cfg.model = tiny_softmax();
  cfg.rounds = rounds;
  cfg.batch_size = 4;
  cfg.eta = 0.5;
  cfg.protect = false;
  cfg.seed = 77;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("federation");

TEST_CASE("budget schedules address by round") {
  ClientState c;
  c.budget_schedule = {pl_budget(0.1), pl_budget(0.2), pl_budget(0.3)};
  CHECK(c.budget_at(1).chi == 0.1);
  CHECK(c.budget_at(3).chi == 0.3);
  CHECK_THROWS_AS(c.budget_at(4), ParamError);

  ClientState single;
  single.budget_schedule = {pl_budget(0.6)};
  CHECK(single.budget_at(1).chi == 0.6);
  CHECK(single.budget_at(250).chi == 0.6);

  ClientState empty;
  CHECK_THROWS_AS(empty.budget_at(1), ParamError);
}

TEST_CASE("local step walks against the gradient") {
  const ParamVector w({1.0, 1.0});
  const ParamVector g({1.0, 2.0});
  const ParamVector next = local_step(w, g, 0.1, std::nullopt);
  CHECK(next[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(next[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK_THROWS_AS(local_step(w, g, 0.0, std::nullopt), ParamError);
}

TEST_CASE("local step honors the clip threshold") {
  const ParamVector w({0.0, 0.0});
  const ParamVector g({3.0, 4.0});
  const ParamVector next = local_step(w, g, 1.0, 2.5);
  CHECK(next.norm() == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(next[0] == doctest::Approx(-1.5).epsilon(1e-12));
  const ParamVector loose = local_step(w, g, 1.0, 100.0);
  CHECK(loose[0] == doctest::Approx(-3.0));
}

TEST_CASE("client_local_step composes backward with the update") {
  const ModelSpec spec = tiny_softmax();
  RngStream rng(3);
  Batch b;
  b.inputs = Matrix(2, 2);
  b.inputs.at(0, 0) = 0.9;
  b.inputs.at(1, 1) = 0.8;
  b.labels = numkit::one_hot({0, 1}, 2);
  ParamVector w = spec.zero_params();
  for (auto& v : w.data) v = 0.3 * rng.normal();
  const ParamVector via_helper = client_local_step(spec, w, b, 0.2, std::nullopt);
  const ParamVector direct = local_step(w, numkit::backward(spec, w, b), 0.2, std::nullopt);
  CHECK(via_helper.data == direct.data);
}

TEST_CASE("server aggregation is a weighted mean") {
  const ParamVector a({1.0, 0.0});
  const ParamVector b({0.0, 1.0});
  const ParamVector avg = server_aggregate({a, b}, {1.0, 3.0});
  CHECK(avg[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(avg[1] == doctest::Approx(0.75).epsilon(1e-15));

  const ParamVector solo = server_aggregate({a}, {42.0});
  CHECK(solo.data == a.data);

  const ParamVector same = server_aggregate({a, a, a}, {1.0, 2.0, 3.0});
  CHECK(same[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("server aggregation validates shapes and weights") {
  const ParamVector a({1.0, 0.0});
  CHECK_THROWS_AS(server_aggregate({}, {}), ParamError);
  CHECK_THROWS_AS(server_aggregate({a}, {1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(server_aggregate({a, ParamVector({1.0})}, {1.0, 1.0}), ShapeError);
  CHECK_THROWS_AS(server_aggregate({a}, {-1.0}), ParamError);
  CHECK_THROWS_AS(server_aggregate({a, a}, {0.0, 0.0}), ParamError);
}

TEST_CASE("aggregation is affine in its inputs") {
  RngStream rng(9);
  std::vector<ParamVector> params;
  std::vector<double> weights{2.0, 5.0, 3.0};
  for (int k = 0; k < 3; ++k) {
    ParamVector p = ParamVector::zeros(6);
    for (std::size_t i = 0; i < 6; ++i) p[i] = rng.normal();
    params.push_back(p);
  }
  ParamVector shift = ParamVector::zeros(6);
  for (std::size_t i = 0; i < 6; ++i) shift[i] = rng.normal();

  std::vector<ParamVector> shifted = params;
  for (auto& p : shifted) p += shift;
  const ParamVector lhs = server_aggregate(shifted, weights);
  const ParamVector rhs = server_aggregate(params, weights) + shift;
  for (std::size_t i = 0; i < 6; ++i) CHECK(lhs[i] == doctest::Approx(rhs[i]).epsilon(1e-12));
}

TEST_CASE("unprotected rounds leave no gap to the shadow aggregate") {
  std::vector<ClientState> clients{separable_client(0, 4, 0.05, 10),
                                   separable_client(1, 4, 0.05, 11)};
  FedConfig cfg = base_config(1);
  const ParamVector w0 = cfg.model.zero_params();
  const RoundResult r = run_round(clients, w0, 1, cfg);
  CHECK(r.w_next.data == r.w_shadow.data);
  for (const auto& c : r.record.clients) {
    CHECK(c.utility_loss == 0.0);
    CHECK(c.distortion_norm == 0.0);
  }
}

TEST_CASE("a budget at the leakage intercept disables the distortion") {
  std::vector<ClientState> clients{separable_client(0, 4, 0.05, 20),
                                   separable_client(1, 4, 0.05, 21)};
  for (auto& c : clients) c.budget_schedule = {pl_budget(0.9875)};
  FedConfig cfg = base_config(3);
  cfg.protect = true;
  cfg.mechanism = distortion::MechanismKind::PlLearn;
  const Trajectory traj = run_training(cfg, clients, Matrix(), {});
  CHECK(traj.mean_utility_loss == 0.0);
  CHECK(traj.mean_distortion_norm == 0.0);
}

TEST_CASE("with one client the aggregate gap is the distortion") {
  std::vector<ClientState> clients{separable_client(0, 6, 0.05, 30)};
  clients[0].budget_schedule = {pl_budget(0.5)};
  FedConfig cfg = base_config(1);
  cfg.protect = true;
  cfg.mechanism = distortion::MechanismKind::PlIdentical;
  const ParamVector w0 = cfg.model.zero_params();
  const RoundResult r = run_round(clients, w0, 1, cfg);
  ParamVector gap = r.w_next - r.w_shadow;
  CHECK(gap.norm() == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(r.record.clients[0].distortion_norm == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(r.record.clients[0].shell_lower == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(r.record.clients[0].shell_upper == doctest::Approx(1.95).epsilon(1e-12));
  CHECK(r.record.aggregate_distortion_norm == doctest::Approx(0.975).epsilon(1e-12));
}

TEST_CASE("the live gradient decomposition closes") {
  std::vector<ClientState> clients{separable_client(0, 6, 0.2, 40),
                                   separable_client(1, 6, 0.2, 41),
                                   separable_client(2, 6, 0.2, 42)};
  FedConfig cfg = base_config(1);
  RngStream rng(50);
  ParamVector w = cfg.model.zero_params();
  for (auto& v : w.data) v = 0.4 * rng.normal();
  const RoundResult r = run_round(clients, w, 1, cfg);
  CHECK(r.record.identity_residual <= 1e-9);
  CHECK(r.record.grad_norm_sq >= 0.0);
  CHECK(r.record.agg_grad_norm >= 0.0);
}

TEST_CASE("training runs are bit-reproducible") {
  std::vector<ClientState> clients{separable_client(0, 6, 0.1, 60),
                                   separable_client(1, 6, 0.1, 61)};
  for (auto& c : clients) c.budget_schedule = {pl_budget(0.6)};
  FedConfig cfg = base_config(5);
  cfg.protect = true;
  cfg.mechanism = distortion::MechanismKind::PlLearn;

  Matrix test(2, 2);
  test.at(0, 0) = 1.0;
  test.at(1, 1) = 1.0;
  const std::vector<int> test_labels{0, 1};

  const Trajectory a = run_training(cfg, clients, test, test_labels);
  const Trajectory b = run_training(cfg, clients, test, test_labels);
  CHECK(a.final_params.data == b.final_params.data);
  CHECK(a.mean_utility_loss == b.mean_utility_loss);
  CHECK(a.final_global_loss == b.final_global_loss);
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (std::size_t t = 0; t < a.rounds.size(); ++t) {
    CHECK(a.rounds[t].global_loss == b.rounds[t].global_loss);
    CHECK(a.rounds[t].aggregate_distortion_norm == b.rounds[t].aggregate_distortion_norm);
  }
}

TEST_CASE("unprotected training solves an easy separable problem") {
  std::vector<ClientState> clients{separable_client(0, 8, 0.05, 70),
                                   separable_client(1, 8, 0.05, 71)};
  FedConfig cfg = base_config(30);
  Matrix test(2, 2);
  test.at(0, 0) = 1.0;
  test.at(1, 1) = 1.0;
  const Trajectory traj = run_training(cfg, clients, test, {0, 1});
  CHECK(traj.final_test_accuracy == 1.0);
  CHECK(traj.final_global_loss < traj.initial_global_loss);
  CHECK(traj.max_param_drift > 0.0);
}

TEST_CASE("captures record the requested round") {
  std::vector<ClientState> clients{separable_client(0, 6, 0.1, 80),
                                   separable_client(1, 6, 0.1, 81)};
  FedConfig cfg = base_config(3);
  cfg.capture_round = 2;
  const Trajectory traj = run_training(cfg, clients, Matrix(), {});
  REQUIRE(traj.captures.size() == 2);
  for (const auto& cap : traj.captures) {
    CHECK(cap.round == 2);
    CHECK(cap.w_prev.size() == cfg.model.param_count());
    CHECK(cap.w_upload.size() == cfg.model.param_count());
    CHECK(cap.batch.inputs.rows == cfg.batch_size);
  }
  CHECK(traj.captures[0].client != traj.captures[1].client);
}

TEST_CASE("the optimal-distortion probe reports only when enabled") {
  std::vector<ClientState> clients{separable_client(0, 6, 0.1, 90)};
  clients[0].budget_schedule = {pl_budget(0.5)};
  FedConfig cfg = base_config(1);
  cfg.protect = true;
  cfg.mechanism = distortion::MechanismKind::PlIdentical;

  const Trajectory off = run_training(cfg, clients, Matrix(), {});
  CHECK(off.rounds[0].oracle_delta_norm_sq == -1.0);

  cfg.oracle_samples = 40;
  cfg.oracle_refine_steps = 5;
  const Trajectory on = run_training(cfg, clients, Matrix(), {});
  CHECK(on.rounds[0].oracle_delta_norm_sq >= 0.0);
}

TEST_CASE("round preconditions are enforced") {
  FedConfig cfg = base_config(1);
  const ParamVector w0 = cfg.model.zero_params();
  CHECK_THROWS_AS(run_round({}, w0, 1, cfg), ParamError);
  std::vector<ClientState> clients{separable_client(0, 4, 0.1, 100)};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(run_round(clients, w0, 1, cfg), ParamError);
  cfg = base_config(0);
  CHECK_THROWS_AS(run_training(cfg, clients, Matrix(), {}), ParamError);
}

TEST_SUITE_END();
