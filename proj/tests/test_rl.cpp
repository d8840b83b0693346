#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "rl.hpp"
#include "rng.hpp"

using namespace ivy;

namespace {

const std::vector<std::string> kPool{"safe_filter", "probe_max",
                                     "loss_tolerant"};

void zero_net(Mlp& net) {
  for (auto& layer : net.w) std::fill(layer.begin(), layer.end(), 0.0f);
  for (auto& layer : net.b) std::fill(layer.begin(), layer.end(), 0.0f);
}

Checkpoint zero_checkpoint(const IqlConfig& cfg) {
  Checkpoint ck = init_checkpoint(kMetaStateDim, kPool, 6.0, cfg);
  zero_net(ck.actor);
  zero_net(ck.q);
  zero_net(ck.v);
  zero_net(ck.q_target);
  return ck;
}

// rewards 1..4, mixed actions, last transition terminal
std::vector<Transition> oracle_batch() {
  std::vector<Transition> ts(4);
  int actions[] = {0, 1, 2, 0};
  for (int i = 0; i < 4; ++i) {
    ts[i].s.fill(0.1f * float(i));
    ts[i].s2.fill(0.05f * float(i));
    ts[i].a = actions[i];
    ts[i].r = float(i + 1);
    ts[i].done = i == 3;
    ts[i].call = "c0-x";
  }
  return ts;
}

std::vector<const Transition*> ptrs(const std::vector<Transition>& ts) {
  std::vector<const Transition*> p;
  for (const Transition& t : ts) p.push_back(&t);
  return p;
}

bool nets_equal(const Mlp& a, const Mlp& b) {
  return a.sizes == b.sizes && a.w == b.w && a.b == b.b;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

Dataset tiny_dataset() {
  Dataset ds;
  ds.pool_size = 3;
  ds.interval_s = 6.0;
  Rng rng(31);
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < 5; ++i) {
      Transition t;
      for (auto& v : t.s) v = float(rng.uniform(0, 1));
      for (auto& v : t.s2) v = float(rng.uniform(0, 1));
      t.a = int(rng.uniform_int(3));
      t.r = float(rng.uniform(1, 5));
      t.done = i == 4;
      t.call = "c" + std::to_string(c) + "-x";
      ds.transitions.push_back(t);
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("mlp creation: shapes, bounds, determinism") {
  Rng rng(7);
  Mlp net = Mlp::create({65, 128, 128, 3}, rng);
  CHECK(net.in_dim() == 65);
  CHECK(net.out_dim() == 3);
  CHECK(net.param_count() == 65 * 128 + 128 + 128 * 128 + 128 + 128 * 3 + 3);
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    double bound = 1.0 / std::sqrt(double(net.sizes[l]));
    for (float v : net.w[l]) CHECK(std::abs(v) <= bound);
    for (float v : net.b[l]) CHECK(std::abs(v) <= bound);
  }
  Rng rng2(7);
  Mlp net2 = Mlp::create({65, 128, 128, 3}, rng2);
  CHECK(nets_equal(net, net2));
  Rng rng3;
  CHECK_THROWS_AS(Mlp::create({5}, rng3), Error);
  CHECK_THROWS_AS(Mlp::create({5, 0, 2}, rng3), Error);
}

TEST_CASE("forward pass matches a hand computation") {
  Rng rng(1);
  Mlp net = Mlp::create({2, 2, 1}, rng);
  net.w[0] = {1.0f, -1.0f, 0.0f, 2.0f};  // row-major [out][in]
  net.b[0] = {0.5f, -1.0f};
  net.w[1] = {1.0f, 1.0f};
  net.b[1] = {0.25f};
  MlpCache cache;
  mlp_forward(net, {1, 2, 0, 0}, 2, cache);
  // row 1: relu(-0.5, 3) = (0, 3) -> 3.25; row 2: relu(0.5, -1) -> 0.75
  CHECK(cache.acts.back()[0] == doctest::Approx(3.25));
  CHECK(cache.acts.back()[1] == doctest::Approx(0.75));
  CHECK_THROWS_AS(mlp_forward(net, {1, 2, 3}, 2, cache), Error);
}

TEST_CASE("backward pass and sgd on a one-weight net") {
  Rng rng(1);
  Mlp net = Mlp::create({1, 1}, rng);
  net.w[0] = {2.0f};
  net.b[0] = {0.0f};
  MlpCache cache;
  mlp_forward(net, {3.0}, 1, cache);
  CHECK(cache.acts.back()[0] == doctest::Approx(6.0));
  MlpGrads grads;
  mlp_backward(net, cache, {1.0}, grads);
  CHECK(grads.w[0][0] == doctest::Approx(3.0));
  CHECK(grads.b[0][0] == doctest::Approx(1.0));
  sgd_update(net, grads, 0.1);
  CHECK(net.w[0][0] == doctest::Approx(1.7f));
  CHECK(net.b[0][0] == doctest::Approx(-0.1f));
}

TEST_CASE("analytic gradients match central finite differences") {
  // loss L = sum over batch and outputs of out^2 / 2, so dL/dout = out.
  // The finite-difference slope divides by the realized float32 delta, so
  // weight quantization does not bias the check.
  Rng rng(12345);
  double worst = 0;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<int> sizes =
        rep % 2 ? std::vector<int>{5, 6, 2} : std::vector<int>{4, 7, 6, 3};
    Mlp net = Mlp::create(sizes, rng);
    int batch = 3;
    std::vector<double> x(std::size_t(batch) * net.in_dim());
    for (double& v : x) v = rng.uniform(-1, 1);

    auto loss_of = [&](const Mlp& m) {
      MlpCache c;
      mlp_forward(m, x, batch, c);
      double L = 0;
      for (double o : c.acts.back()) L += 0.5 * o * o;
      return L;
    };

    MlpCache cache;
    mlp_forward(net, x, batch, cache);
    MlpGrads grads;
    mlp_backward(net, cache, cache.acts.back(), grads);

    const double h = 1e-4;
    for (std::size_t l = 0; l < net.w.size(); ++l) {
      for (std::size_t i = 0; i < net.w[l].size(); ++i) {
        Mlp pert = net;
        float orig = net.w[l][i];
        pert.w[l][i] = float(double(orig) + h);
        double up = loss_of(pert);
        pert.w[l][i] = float(double(orig) - h);
        double dn = loss_of(pert);
        double delta = double(float(double(orig) + h)) -
                       double(float(double(orig) - h));
        double fd = (up - dn) / delta;
        double scale = std::max({1.0, std::abs(fd), std::abs(grads.w[l][i])});
        worst = std::max(worst, std::abs(fd - grads.w[l][i]) / scale);
      }
      for (std::size_t i = 0; i < net.b[l].size(); ++i) {
        Mlp pert = net;
        float orig = net.b[l][i];
        pert.b[l][i] = float(double(orig) + h);
        double up = loss_of(pert);
        pert.b[l][i] = float(double(orig) - h);
        double dn = loss_of(pert);
        double delta = double(float(double(orig) + h)) -
                       double(float(double(orig) - h));
        double fd = (up - dn) / delta;
        double scale = std::max({1.0, std::abs(fd), std::abs(grads.b[l][i])});
        worst = std::max(worst, std::abs(fd - grads.b[l][i]) / scale);
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("softmax is shift-safe and normalized") {
  std::vector<double> p = softmax({0, 0, 0});
  CHECK(p[0] == doctest::Approx(1.0 / 3));
  CHECK(p[1] == doctest::Approx(1.0 / 3));
  p = softmax({1000, 0, -2000});
  CHECK(std::isfinite(p[0]));
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
}

TEST_CASE("checkpoint init wires shapes and target copy") {
  IqlConfig cfg;
  cfg.seed = 9;
  Checkpoint ck = init_checkpoint(kMetaStateDim, kPool, 6.0, cfg);
  CHECK(ck.actor.sizes == std::vector<int>({65, 128, 128, 3}));
  CHECK(ck.q.sizes == std::vector<int>({65, 128, 128, 3}));
  CHECK(ck.v.sizes == std::vector<int>({65, 128, 128, 1}));
  CHECK(nets_equal(ck.q, ck.q_target));
  CHECK_FALSE(nets_equal(ck.q, ck.actor));
  Checkpoint again = init_checkpoint(kMetaStateDim, kPool, 6.0, cfg);
  CHECK(nets_equal(ck.actor, again.actor));
  CHECK(nets_equal(ck.v, again.v));
  cfg.seed = 10;
  Checkpoint other = init_checkpoint(kMetaStateDim, kPool, 6.0, cfg);
  CHECK_FALSE(nets_equal(ck.actor, other.actor));
  CHECK_THROWS_AS(init_checkpoint(65, {"safe_filter"}, 6.0, cfg), Error);
}

TEST_CASE("zero-net losses have closed forms") {
  IqlConfig cfg;
  Checkpoint ck = zero_checkpoint(cfg);
  std::vector<Transition> ts = oracle_batch();
  IqlLosses l = iql_losses(ck, ptrs(ts), nullptr);
  // u = 0 everywhere, targets reduce to the reward
  CHECK(l.loss_v == doctest::Approx(0.0));
  CHECK(l.loss_q == doctest::Approx((1.0 + 4.0 + 9.0 + 16.0) / 4));
  // uniform logits, unit weights: cross entropy is log(pool size)
  CHECK(l.loss_pi == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("expectile loss is asymmetric around the value estimate") {
  IqlConfig cfg;
  std::vector<Transition> ts = oracle_batch();
  // value sits one above target-Q: u = -1, weighted by 1 - tau
  Checkpoint ck = zero_checkpoint(cfg);
  ck.v.b.back()[0] = 1.0f;
  IqlLosses l = iql_losses(ck, ptrs(ts), nullptr);
  CHECK(l.loss_v == doctest::Approx(1.0 - cfg.tau).epsilon(1e-12));
  CHECK(l.loss_pi ==
        doctest::Approx(std::exp(-cfg.beta) * std::log(3.0)).epsilon(1e-9));
  // value one below: u = +1, weighted by tau, advantage weight e^beta
  ck.v.b.back()[0] = -1.0f;
  l = iql_losses(ck, ptrs(ts), nullptr);
  CHECK(l.loss_v == doctest::Approx(cfg.tau).epsilon(1e-12));
  CHECK(l.loss_pi ==
        doctest::Approx(std::exp(cfg.beta) * std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("advantage weights clip at the configured bound") {
  IqlConfig cfg;
  Checkpoint ck = zero_checkpoint(cfg);
  ck.cfg.beta = 10.0;  // e^10 far beyond the clip of 100
  ck.v.b.back()[0] = -1.0f;
  std::vector<Transition> ts = oracle_batch();
  IqlLosses l = iql_losses(ck, ptrs(ts), nullptr);
  CHECK(l.loss_pi == doctest::Approx(100.0 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("advantages come from the target network, TD from the live one") {
  IqlConfig cfg;
  Checkpoint ck = zero_checkpoint(cfg);
  for (float& b : ck.q.b.back()) b = 5.0f;  // live Q biased, target still zero
  std::vector<Transition> ts = oracle_batch();
  IqlLosses l = iql_losses(ck, ptrs(ts), nullptr);
  // u = q_target - v = 0 despite the biased live net
  CHECK(l.loss_v == doctest::Approx(0.0));
  CHECK(l.loss_pi == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  // TD error is (5 - r)^2 against the live net
  CHECK(l.loss_q == doctest::Approx((16.0 + 9.0 + 4.0 + 1.0) / 4));
}

TEST_CASE("actor gradient favors observed actions") {
  IqlConfig cfg;
  cfg.lr = 0.1;
  Checkpoint ck = zero_checkpoint(cfg);
  ck.cfg.lr = 0.1;
  std::vector<Transition> ts(1);
  ts[0].s.fill(0.0f);
  ts[0].s2.fill(0.0f);
  ts[0].a = 1;
  ts[0].r = 1.0f;
  iql_step(ck, ptrs(ts));
  // only the output bias can move on an all-zero net; it moves toward a=1
  std::vector<double> p = actor_probs(ck, ts[0].s);
  CHECK(p[1] > p[0]);
  CHECK(p[1] > p[2]);
  CHECK(act(ck, ts[0].s) == 1);
}

TEST_CASE("greedy action breaks ties toward the lowest index") {
  IqlConfig cfg;
  Checkpoint ck = zero_checkpoint(cfg);
  MetaState s{};
  std::vector<double> p = actor_probs(ck, s);
  CHECK(p[0] == doctest::Approx(1.0 / 3));
  CHECK(act(ck, s) == 0);
}

TEST_CASE("one training step applies sgd plus a polyak target update") {
  IqlConfig cfg;
  cfg.seed = 21;
  Checkpoint ck = init_checkpoint(kMetaStateDim, kPool, 6.0, cfg);
  Checkpoint before = ck;
  std::vector<Transition> ts = oracle_batch();
  iql_step(ck, ptrs(ts));
  CHECK_FALSE(nets_equal(ck.q, before.q));
  CHECK_FALSE(nets_equal(ck.v, before.v));
  CHECK_FALSE(nets_equal(ck.actor, before.actor));
  double rho = cfg.polyak;
  for (std::size_t l = 0; l < ck.q.w.size(); ++l)
    for (std::size_t i = 0; i < ck.q.w[l].size(); ++i) {
      float expect = float((1.0 - rho) * double(before.q_target.w[l][i]) +
                           rho * double(ck.q.w[l][i]));
      CHECK(ck.q_target.w[l][i] == expect);
    }
}

TEST_CASE("training is deterministic and resumable") {
  Dataset ds = tiny_dataset();
  IqlConfig cfg;
  cfg.hidden = 8;
  cfg.batch = 4;
  cfg.epochs = 3;
  cfg.seed = 5;

  Checkpoint a = init_checkpoint(kMetaStateDim, kPool, 6.0, cfg);
  std::vector<EpochLoss> ha = train(a, ds);
  REQUIRE(ha.size() == 3);
  CHECK(ha[0].epoch == 0);
  CHECK(a.epochs_done == 3);

  Checkpoint b = init_checkpoint(kMetaStateDim, kPool, 6.0, cfg);
  train(b, ds);
  CHECK(nets_equal(a.actor, b.actor));
  CHECK(nets_equal(a.q, b.q));
  CHECK(nets_equal(a.v, b.v));
  CHECK(nets_equal(a.q_target, b.q_target));

  // stopping after one epoch and resuming replays the same schedule
  IqlConfig cfg1 = cfg;
  cfg1.epochs = 1;
  Checkpoint c = init_checkpoint(kMetaStateDim, kPool, 6.0, cfg1);
  std::vector<EpochLoss> hc = train(c, ds);
  REQUIRE(hc.size() == 1);
  CHECK(hc[0].loss_q == doctest::Approx(ha[0].loss_q));
  c.cfg.epochs = 3;
  std::vector<EpochLoss> hc2 = train(c, ds);
  REQUIRE(hc2.size() == 2);
  CHECK(hc2[0].epoch == 1);
  CHECK(nets_equal(a.actor, c.actor));
  CHECK(nets_equal(a.q, c.q));
  CHECK(nets_equal(a.q_target, c.q_target));

  // a different seed trains different weights
  IqlConfig cfg2 = cfg;
  cfg2.seed = 6;
  Checkpoint d = init_checkpoint(kMetaStateDim, kPool, 6.0, cfg2);
  train(d, ds);
  CHECK_FALSE(nets_equal(a.actor, d.actor));
}

TEST_CASE("training rejects contract violations") {
  IqlConfig cfg;
  cfg.hidden = 8;
  Checkpoint ck = init_checkpoint(kMetaStateDim, kPool, 6.0, cfg);
  Dataset empty;
  empty.pool_size = 3;
  CHECK_THROWS_AS(train(ck, empty), Error);
  Dataset ds = tiny_dataset();
  ds.pool_size = 2;
  CHECK_THROWS_AS(train(ck, ds), Error);
  ds.pool_size = 3;
  ck.cfg.batch = 0;
  CHECK_THROWS_AS(train(ck, ds), Error);
  ck.cfg.batch = 4;
  ds.transitions[0].a = 7;
  CHECK_THROWS_AS(train(ck, ds), Error);
}

TEST_CASE("checkpoint save/load round trip is exact") {
  const char* path = "test_rl_tmp.ivc";
  Dataset ds = tiny_dataset();
  IqlConfig cfg;
  cfg.hidden = 8;
  cfg.batch = 4;
  cfg.epochs = 2;
  cfg.seed = 17;
  Checkpoint ck = init_checkpoint(kMetaStateDim, kPool, 6.0, cfg);
  train(ck, ds);
  save_checkpoint(ck, path);

  Checkpoint back = load_checkpoint(path);
  CHECK(back.pool == ck.pool);
  CHECK(back.interval_s == ck.interval_s);
  CHECK(back.epochs_done == 2);
  CHECK(back.cfg.gamma == ck.cfg.gamma);
  CHECK(back.cfg.tau == ck.cfg.tau);
  CHECK(back.cfg.beta == ck.cfg.beta);
  CHECK(back.cfg.lr == ck.cfg.lr);
  CHECK(back.cfg.seed == ck.cfg.seed);
  CHECK(back.cfg.hidden == 8);
  CHECK(nets_equal(back.actor, ck.actor));
  CHECK(nets_equal(back.q, ck.q));
  CHECK(nets_equal(back.v, ck.v));
  CHECK(nets_equal(back.q_target, ck.q_target));

  std::string first = slurp(path);
  save_checkpoint(back, path);
  CHECK(slurp(path) == first);

  // loaded checkpoints act identically
  MetaState s;
  s.fill(0.25f);
  CHECK(act(back, s) == act(ck, s));
}

TEST_CASE("corrupt checkpoints are rejected") {
  const char* path = "test_rl_tmp.ivc";
  IqlConfig cfg;
  cfg.hidden = 8;
  Checkpoint ck = init_checkpoint(kMetaStateDim, kPool, 6.0, cfg);
  save_checkpoint(ck, path);
  std::string good = slurp(path);

  try {
    load_checkpoint("no_such.ivc");
    FAIL_CHECK("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kMissingInput);
  }

  spit(path, "IVYDATA v1\n" + good.substr(good.find('\n') + 1));
  CHECK_THROWS_AS(load_checkpoint(path), Error);

  spit(path, good.substr(0, good.size() - 4));  // truncated blob
  CHECK_THROWS_AS(load_checkpoint(path), Error);

  spit(path, good + "x");  // trailing bytes
  CHECK_THROWS_AS(load_checkpoint(path), Error);

  std::string tampered = good;
  tampered.replace(tampered.find("pool=safe_filter,probe_max,loss_tolerant"),
                   std::string("pool=safe_filter,probe_max,loss_tolerant")
                       .size(),
                   "pool=safe_filter");
  spit(path, tampered);
  CHECK_THROWS_AS(load_checkpoint(path), Error);

  spit(path, good);  // untouched copy still loads
  CHECK(load_checkpoint(path).pool.size() == 3);
}
