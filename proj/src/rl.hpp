#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "meta_state.hpp"
#include "rng.hpp"

namespace ivy {

// Fully connected net, ReLU on hidden layers, linear head. Weights are
// stored as float32 (the checkpoint precision); all arithmetic runs in
// double and results round back to float32 after each update, so a
// save/load round trip is exactly a no-op for training.
struct Mlp {
  std::vector<int> sizes;               // e.g. {65,128,128,3}
  std::vector<std::vector<float>> w;    // per layer, row-major [out][in]
  std::vector<std::vector<float>> b;    // per layer

  static Mlp create(const std::vector<int>& sizes, Rng& rng);
  int in_dim() const { return sizes.front(); }
  int out_dim() const { return sizes.back(); }
  std::size_t param_count() const;
};

struct MlpCache {
  int batch = 0;
  // acts[0] is the input, acts[L] the linear output; batch-major rows.
  std::vector<std::vector<double>> acts;
};

// x: batch rows of in_dim doubles. Returns the output activations in
// cache.acts.back().
void mlp_forward(const Mlp& net, const std::vector<double>& x, int batch,
                 MlpCache& cache);

struct MlpGrads {
  std::vector<std::vector<double>> w, b;
  void init_like(const Mlp& net);
  void add_scaled(const MlpGrads& other, double scale);
};

// dout: dL/d(output), batch-major. Accumulates into grads.
void mlp_backward(const Mlp& net, const MlpCache& cache,
                  const std::vector<double>& dout, MlpGrads& grads);

void sgd_update(Mlp& net, const MlpGrads& grads, double lr);

// Numerically safe softmax (max-subtracted).
std::vector<double> softmax(const std::vector<double>& logits);

struct IqlConfig {
  double gamma = 0.99;
  double tau = 0.7;       // expectile
  double beta = 3.0;      // advantage temperature
  double adv_clip = 100.0;
  double lr = 3e-4;
  double polyak = 0.005;
  int batch = 128;
  int epochs = 200;
  int hidden = 128;
  std::uint64_t seed = 1;
};

struct Checkpoint {
  std::vector<std::string> pool;  // estimator names, actor output order
  double interval_s = 0;
  IqlConfig cfg;
  int epochs_done = 0;
  Mlp actor, q, v, q_target;
};

Checkpoint init_checkpoint(int state_dim, const std::vector<std::string>& pool,
                           double interval_s, const IqlConfig& cfg);

struct IqlLosses {
  double loss_v = 0;
  double loss_q = 0;
  double loss_pi = 0;
};

struct IqlGrads {
  MlpGrads actor, q, v;
};

// Joint losses and per-net gradients at the current parameters. The value
// net's regression target (target-Q) and the actor's advantage weights are
// treated as constants. grads may be null for loss-only evaluation.
IqlLosses iql_losses(const Checkpoint& ck,
                     const std::vector<const Transition*>& batch,
                     IqlGrads* grads);

// One SGD step on all three nets from a batch, then a Polyak update of
// the target Q net.
IqlLosses iql_step(Checkpoint& ck, const std::vector<const Transition*>& batch);

struct EpochLoss {
  int epoch = 0;
  double loss_v = 0;
  double loss_q = 0;
  double loss_pi = 0;
};

// Runs epochs [ck.epochs_done, ck.cfg.epochs). Shuffling is grouped by
// call: call order is permuted per epoch, transitions stay in call order.
std::vector<EpochLoss> train(Checkpoint& ck, const Dataset& ds);

std::vector<double> actor_probs(const Checkpoint& ck, const MetaState& s);
// Greedy argmax over actor probabilities; ties break to the lowest index.
int act(const Checkpoint& ck, const MetaState& s);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ivy
