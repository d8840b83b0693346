#include "rl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "error.hpp"

namespace ivy {

namespace {

const std::uint64_t kInitSalt = 0x1417ULL;
const std::uint64_t kEpochSalt = 0xE90CULL;

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) fail_config("net needs at least input and output");
  for (int s : sizes)
    if (s < 1) fail_config("net layer sizes must be positive");
}

}  // namespace

Mlp Mlp::create(const std::vector<int>& sizes, Rng& rng) {
  check_sizes(sizes);
  Mlp net;
  net.sizes = sizes;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    int in = sizes[l], out = sizes[l + 1];
    double bound = 1.0 / std::sqrt(double(in));
    std::vector<float> w(std::size_t(in) * out), b(out);
    for (float& x : w) x = float(rng.uniform(-bound, bound));
    for (float& x : b) x = float(rng.uniform(-bound, bound));
    net.w.push_back(std::move(w));
    net.b.push_back(std::move(b));
  }
  return net;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < w.size(); ++l) n += w[l].size() + b[l].size();
  return n;
}

void mlp_forward(const Mlp& net, const std::vector<double>& x, int batch,
                 MlpCache& cache) {
  int in_dim = net.in_dim();
  if (int(x.size()) != batch * in_dim)
    fail_config("forward input size mismatch");
  cache.batch = batch;
  cache.acts.assign(net.sizes.size(), {});
  cache.acts[0] = x;
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    int in = net.sizes[l], out = net.sizes[l + 1];
    const std::vector<double>& src = cache.acts[l];
    std::vector<double>& dst = cache.acts[l + 1];
    dst.assign(std::size_t(batch) * out, 0.0);
    bool hidden = l + 1 < net.w.size();
    for (int n = 0; n < batch; ++n) {
      const double* xin = &src[std::size_t(n) * in];
      double* xout = &dst[std::size_t(n) * out];
      for (int j = 0; j < out; ++j) {
        const float* wr = &net.w[l][std::size_t(j) * in];
        double acc = net.b[l][j];
        for (int i = 0; i < in; ++i) acc += double(wr[i]) * xin[i];
        xout[j] = hidden ? std::max(0.0, acc) : acc;
      }
    }
  }
}

void MlpGrads::init_like(const Mlp& net) {
  w.assign(net.w.size(), {});
  b.assign(net.b.size(), {});
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    w[l].assign(net.w[l].size(), 0.0);
    b[l].assign(net.b[l].size(), 0.0);
  }
}

void MlpGrads::add_scaled(const MlpGrads& other, double scale) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    for (std::size_t i = 0; i < w[l].size(); ++i)
      w[l][i] += scale * other.w[l][i];
    for (std::size_t i = 0; i < b[l].size(); ++i)
      b[l][i] += scale * other.b[l][i];
  }
}

void mlp_backward(const Mlp& net, const MlpCache& cache,
                  const std::vector<double>& dout, MlpGrads& grads) {
  int batch = cache.batch;
  if (int(dout.size()) != batch * net.out_dim())
    fail_config("backward gradient size mismatch");
  if (grads.w.empty()) grads.init_like(net);

  std::vector<double> delta = dout;
  for (int l = int(net.w.size()) - 1; l >= 0; --l) {
    int in = net.sizes[l], out = net.sizes[l + 1];
    const std::vector<double>& acts_in = cache.acts[l];
    // ReLU mask of this layer's own output, for hidden layers.
    if (l + 1 < int(net.w.size())) {
      const std::vector<double>& acts_out = cache.acts[l + 1];
      for (std::size_t i = 0; i < delta.size(); ++i)
        if (acts_out[i] <= 0.0) delta[i] = 0.0;
    }
    for (int n = 0; n < batch; ++n) {
      const double* xin = &acts_in[std::size_t(n) * in];
      const double* d = &delta[std::size_t(n) * out];
      for (int j = 0; j < out; ++j) {
        double dj = d[j];
        if (dj == 0.0) continue;
        grads.b[l][j] += dj;
        double* gw = &grads.w[l][std::size_t(j) * in];
        for (int i = 0; i < in; ++i) gw[i] += dj * xin[i];
      }
    }
    if (l > 0) {
      std::vector<double> prev(std::size_t(batch) * in, 0.0);
      for (int n = 0; n < batch; ++n) {
        const double* d = &delta[std::size_t(n) * out];
        double* p = &prev[std::size_t(n) * in];
        for (int j = 0; j < out; ++j) {
          double dj = d[j];
          if (dj == 0.0) continue;
          const float* wr = &net.w[l][std::size_t(j) * in];
          for (int i = 0; i < in; ++i) p[i] += dj * double(wr[i]);
        }
      }
      delta.swap(prev);
    }
  }
}

void sgd_update(Mlp& net, const MlpGrads& grads, double lr) {
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    for (std::size_t i = 0; i < net.w[l].size(); ++i)
      net.w[l][i] = float(double(net.w[l][i]) - lr * grads.w[l][i]);
    for (std::size_t i = 0; i < net.b[l].size(); ++i)
      net.b[l][i] = float(double(net.b[l][i]) - lr * grads.b[l][i]);
  }
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

Checkpoint init_checkpoint(int state_dim, const std::vector<std::string>& pool,
                           double interval_s, const IqlConfig& cfg) {
  if (pool.size() < 2) fail_config("pool must have at least two estimators");
  Checkpoint ck;
  ck.pool = pool;
  ck.interval_s = interval_s;
  ck.cfg = cfg;
  int out = int(pool.size());
  Rng rng(mix_seed(cfg.seed, kInitSalt));
  std::vector<int> head = {state_dim, cfg.hidden, cfg.hidden, out};
  std::vector<int> vshape = {state_dim, cfg.hidden, cfg.hidden, 1};
  ck.actor = Mlp::create(head, rng);
  ck.q = Mlp::create(head, rng);
  ck.v = Mlp::create(vshape, rng);
  ck.q_target = ck.q;
  return ck;
}

IqlLosses iql_losses(const Checkpoint& ck,
                     const std::vector<const Transition*>& batch,
                     IqlGrads* grads) {
  int n = int(batch.size());
  if (n == 0) fail_config("empty batch");
  int dim = ck.q.in_dim();
  int na = ck.q.out_dim();

  std::vector<double> xs(std::size_t(n) * dim), xs2(std::size_t(n) * dim);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) {
      xs[std::size_t(i) * dim + d] = batch[i]->s[d];
      xs2[std::size_t(i) * dim + d] = batch[i]->s2[d];
    }
    if (batch[i]->a < 0 || batch[i]->a >= na)
      fail_config("transition action outside actor head");
  }

  MlpCache cv, cv2, cq, cqt, cpi;
  mlp_forward(ck.v, xs, n, cv);
  mlp_forward(ck.v, xs2, n, cv2);
  mlp_forward(ck.q, xs, n, cq);
  mlp_forward(ck.q_target, xs, n, cqt);
  mlp_forward(ck.actor, xs, n, cpi);

  const std::vector<double>& v_s = cv.acts.back();
  const std::vector<double>& v_s2 = cv2.acts.back();
  const std::vector<double>& q_all = cq.acts.back();
  const std::vector<double>& qt_all = cqt.acts.back();
  const std::vector<double>& logits = cpi.acts.back();

  IqlLosses out;
  std::vector<double> dv(n, 0.0), dq(std::size_t(n) * na, 0.0),
      dpi(std::size_t(n) * na, 0.0);
  double tau = ck.cfg.tau, gamma = ck.cfg.gamma, beta = ck.cfg.beta;

  for (int i = 0; i < n; ++i) {
    int a = batch[i]->a;
    double qt_sa = qt_all[std::size_t(i) * na + a];
    double q_sa = q_all[std::size_t(i) * na + a];

    // expectile value regression toward target-Q
    double u = qt_sa - v_s[i];
    double wexp = u < 0 ? 1.0 - tau : tau;
    out.loss_v += wexp * u * u;
    dv[i] = -2.0 * wexp * u / n;

    // TD fit of Q toward r + gamma * V(s')
    double y = batch[i]->r + gamma * (batch[i]->done ? 0.0 : v_s2[i]);
    double td = q_sa - y;
    out.loss_q += td * td;
    dq[std::size_t(i) * na + a] = 2.0 * td / n;

    // advantage-weighted likelihood for the actor
    double w = std::min(std::exp(beta * u), ck.cfg.adv_clip);
    std::vector<double> row(logits.begin() + std::size_t(i) * na,
                            logits.begin() + std::size_t(i + 1) * na);
    std::vector<double> p = softmax(row);
    out.loss_pi += w * -std::log(std::max(p[a], 1e-300));
    for (int j = 0; j < na; ++j)
      dpi[std::size_t(i) * na + j] = w * (p[j] - (j == a ? 1.0 : 0.0)) / n;
  }
  out.loss_v /= n;
  out.loss_q /= n;
  out.loss_pi /= n;

  if (grads) {
    grads->v.init_like(ck.v);
    grads->q.init_like(ck.q);
    grads->actor.init_like(ck.actor);
    mlp_backward(ck.v, cv, dv, grads->v);
    mlp_backward(ck.q, cq, dq, grads->q);
    mlp_backward(ck.actor, cpi, dpi, grads->actor);
  }
  return out;
}

IqlLosses iql_step(Checkpoint& ck,
                   const std::vector<const Transition*>& batch) {
  IqlGrads grads;
  IqlLosses losses = iql_losses(ck, batch, &grads);
  if (!std::isfinite(losses.loss_v) || !std::isfinite(losses.loss_q) ||
      !std::isfinite(losses.loss_pi))
    fail_numeric("non-finite loss during training step");
  sgd_update(ck.v, grads.v, ck.cfg.lr);
  sgd_update(ck.q, grads.q, ck.cfg.lr);
  sgd_update(ck.actor, grads.actor, ck.cfg.lr);
  double rho = ck.cfg.polyak;
  for (std::size_t l = 0; l < ck.q.w.size(); ++l) {
    for (std::size_t i = 0; i < ck.q.w[l].size(); ++i)
      ck.q_target.w[l][i] = float((1.0 - rho) * double(ck.q_target.w[l][i]) +
                                  rho * double(ck.q.w[l][i]));
    for (std::size_t i = 0; i < ck.q.b[l].size(); ++i)
      ck.q_target.b[l][i] = float((1.0 - rho) * double(ck.q_target.b[l][i]) +
                                  rho * double(ck.q.b[l][i]));
  }
  return losses;
}

std::vector<EpochLoss> train(Checkpoint& ck, const Dataset& ds) {
  if (ds.transitions.empty()) fail_input("dataset has no transitions");
  if (int(ck.pool.size()) != ds.pool_size)
    fail_config("checkpoint pool size does not match dataset");
  if (ck.cfg.batch < 1) fail_config("batch size must be positive");

  // Contiguous runs of the same call id form the shuffling groups.
  std::vector<std::pair<std::size_t, std::size_t>> groups;  // start, len
  for (std::size_t i = 0; i < ds.transitions.size();) {
    std::size_t j = i;
    while (j < ds.transitions.size() &&
           ds.transitions[j].call == ds.transitions[i].call)
      ++j;
    groups.push_back({i, j - i});
    i = j;
  }

  std::vector<EpochLoss> trace;
  for (int epoch = ck.epochs_done; epoch < ck.cfg.epochs; ++epoch) {
    Rng rng(mix_seed(mix_seed(ck.cfg.seed, kEpochSalt), std::uint64_t(epoch)));
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(std::uint32_t(i))]);

    std::vector<const Transition*> sched;
    sched.reserve(ds.transitions.size());
    for (std::size_t g : order)
      for (std::size_t k = 0; k < groups[g].second; ++k)
        sched.push_back(&ds.transitions[groups[g].first + k]);

    EpochLoss el;
    el.epoch = epoch;
    int steps = 0;
    for (std::size_t off = 0; off < sched.size();
         off += std::size_t(ck.cfg.batch)) {
      std::size_t end = std::min(sched.size(), off + std::size_t(ck.cfg.batch));
      std::vector<const Transition*> batch(sched.begin() + off,
                                           sched.begin() + end);
      IqlLosses l = iql_step(ck, batch);
      el.loss_v += l.loss_v;
      el.loss_q += l.loss_q;
      el.loss_pi += l.loss_pi;
      ++steps;
    }
    el.loss_v /= steps;
    el.loss_q /= steps;
    el.loss_pi /= steps;
    trace.push_back(el);
  }
  ck.epochs_done = std::max(ck.epochs_done, ck.cfg.epochs);
  return trace;
}

std::vector<double> actor_probs(const Checkpoint& ck, const MetaState& s) {
  int dim = ck.actor.in_dim();
  if (dim != int(s.size())) fail_config("state dimension mismatch");
  std::vector<double> x(s.begin(), s.end());
  MlpCache c;
  mlp_forward(ck.actor, x, 1, c);
  return softmax(c.acts.back());
}

int act(const Checkpoint& ck, const MetaState& s) {
  std::vector<double> p = actor_probs(ck, s);
  int best = 0;
  for (int i = 1; i < int(p.size()); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

namespace {

std::string join_csv(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(',');
    out += parts[i];
  }
  return out;
}

std::string shape_csv(const Mlp& net) {
  std::string out;
  for (std::size_t i = 0; i < net.sizes.size(); ++i) {
    if (i) out.push_back(',');
    out += std::to_string(net.sizes[i]);
  }
  return out;
}

std::vector<int> parse_shape(const std::string& text, const std::string& path) {
  std::vector<int> sizes;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      sizes.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      fail_input(path + ": bad layer size '" + tok + "'");
    }
  }
  check_sizes(sizes);
  return sizes;
}

void write_net(std::ostream& out, const Mlp& net) {
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    out.write(reinterpret_cast<const char*>(net.w[l].data()),
              std::streamsize(net.w[l].size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(net.b[l].data()),
              std::streamsize(net.b[l].size() * sizeof(float)));
  }
}

void read_net(std::istream& in, Mlp& net, const std::string& path) {
  for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
    int ins = net.sizes[l], outs = net.sizes[l + 1];
    std::vector<float> w(std::size_t(ins) * outs), b(outs);
    in.read(reinterpret_cast<char*>(w.data()),
            std::streamsize(w.size() * sizeof(float)));
    in.read(reinterpret_cast<char*>(b.data()),
            std::streamsize(b.size() * sizeof(float)));
    if (!in) fail_input(path + ": truncated weight block");
    net.w.push_back(std::move(w));
    net.b.push_back(std::move(b));
  }
}

std::size_t blob_bytes(const Mlp& net) {
  return net.param_count() * sizeof(float);
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ostringstream head;
  char buf[512];
  head << "IVYCKPT v1\n";
  head << "pool=" << join_csv(ck.pool) << "\n";
  std::snprintf(buf, sizeof buf, "interval=%.17g\n", ck.interval_s);
  head << buf;
  std::snprintf(buf, sizeof buf,
                "gamma=%.17g tau=%.17g beta=%.17g adv_clip=%.17g lr=%.17g "
                "polyak=%.17g batch=%d epochs=%d hidden=%d seed=%llu "
                "epochs_done=%d\n",
                ck.cfg.gamma, ck.cfg.tau, ck.cfg.beta, ck.cfg.adv_clip,
                ck.cfg.lr, ck.cfg.polyak, ck.cfg.batch, ck.cfg.epochs,
                ck.cfg.hidden, (unsigned long long)ck.cfg.seed,
                ck.epochs_done);
  head << buf;
  head << "actor=" << shape_csv(ck.actor) << "\n";
  head << "q=" << shape_csv(ck.q) << "\n";
  head << "v=" << shape_csv(ck.v) << "\n";
  head << "q_target=" << shape_csv(ck.q_target) << "\n";
  std::size_t nbytes = blob_bytes(ck.actor) + blob_bytes(ck.q) +
                       blob_bytes(ck.v) + blob_bytes(ck.q_target);
  head << "blob=" << nbytes << "\n";

  std::ofstream f(path, std::ios::binary);
  if (!f) fail_input("cannot open '" + path + "' for writing");
  f << head.str();
  write_net(f, ck.actor);
  write_net(f, ck.q);
  write_net(f, ck.v);
  write_net(f, ck.q_target);
  if (!f.good()) fail_input("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_input("cannot open checkpoint file '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line != "IVYCKPT v1")
    fail_input(path + ": expected magic 'IVYCKPT v1'");

  Checkpoint ck;
  std::size_t nbytes = 0;
  bool got_blob = false;
  while (!got_blob && std::getline(f, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail_input(path + ": malformed header line '" + line + "'");
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "pool") {
      std::stringstream ss(val);
      std::string tok;
      while (std::getline(ss, tok, ',')) ck.pool.push_back(tok);
      if (ck.pool.size() < 2) fail_input(path + ": pool too small");
    } else if (key == "interval") {
      ck.interval_s = std::stod(val);
    } else if (key == "gamma") {
      unsigned long long seed = 0;
      if (std::sscanf(line.c_str(),
                      "gamma=%lf tau=%lf beta=%lf adv_clip=%lf lr=%lf "
                      "polyak=%lf batch=%d epochs=%d hidden=%d seed=%llu "
                      "epochs_done=%d",
                      &ck.cfg.gamma, &ck.cfg.tau, &ck.cfg.beta,
                      &ck.cfg.adv_clip, &ck.cfg.lr, &ck.cfg.polyak,
                      &ck.cfg.batch, &ck.cfg.epochs, &ck.cfg.hidden, &seed,
                      &ck.epochs_done) != 11)
        fail_input(path + ": malformed training config line");
      ck.cfg.seed = seed;
    } else if (key == "actor") {
      ck.actor.sizes = parse_shape(val, path);
    } else if (key == "q") {
      ck.q.sizes = parse_shape(val, path);
    } else if (key == "v") {
      ck.v.sizes = parse_shape(val, path);
    } else if (key == "q_target") {
      ck.q_target.sizes = parse_shape(val, path);
    } else if (key == "blob") {
      nbytes = std::stoull(val);
      got_blob = true;
    } else {
      fail_input(path + ": unknown header key '" + key + "'");
    }
  }
  if (!got_blob) fail_input(path + ": missing blob header");
  if (ck.actor.sizes.empty() || ck.q.sizes.empty() || ck.v.sizes.empty() ||
      ck.q_target.sizes.empty())
    fail_input(path + ": missing net shapes");
  if (ck.actor.out_dim() != int(ck.pool.size()) ||
      ck.q.out_dim() != int(ck.pool.size()) ||
      ck.q_target.out_dim() != int(ck.pool.size()) || ck.v.out_dim() != 1 ||
      ck.actor.in_dim() != ck.q.in_dim() || ck.q.in_dim() != ck.v.in_dim())
    fail_input(path + ": inconsistent net shapes");

  read_net(f, ck.actor, path);
  read_net(f, ck.q, path);
  read_net(f, ck.v, path);
  read_net(f, ck.q_target, path);
  std::size_t expect = blob_bytes(ck.actor) + blob_bytes(ck.q) +
                       blob_bytes(ck.v) + blob_bytes(ck.q_target);
  if (expect != nbytes) fail_input(path + ": blob size mismatch");
  char extra;
  if (f.read(&extra, 1)) fail_input(path + ": trailing bytes after blob");
  return ck;
}

}  // namespace ivy
