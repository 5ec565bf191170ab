#include "driverid/net.hpp"

#include <cmath>
#include <limits>

namespace driverid {

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  // 53 random bits -> [0,1)
  double u = double(rng() >> 11) * (1.0 / 9007199254740992.0);
  return lo + u * (hi - lo);
}

double normal_real(std::mt19937_64& rng, double mean, double std) {
  // Box-Muller, one value per call
  double u1 = uniform_real(rng, std::numeric_limits<double>::min(), 1.0);
  double u2 = uniform_real(rng, 0.0, 1.0);
  return mean + std * std::sqrt(-2.0 * std::log(u1)) *
                    std::cos(2.0 * M_PI * u2);
}

CellKind parse_cell(const std::string& name) {
  if (name == "gru" || name == "GRU") return CellKind::GRU;
  if (name == "lstm" || name == "LSTM") return CellKind::LSTM;
  throw ValidationError("unknown cell '" + name + "' (gru|lstm)");
}

std::string cell_name(CellKind kind) {
  return kind == CellKind::GRU ? "gru" : "lstm";
}

const char* RnnCellParams::gate_label(CellKind kind, int g) {
  static const char* gru[] = {"z", "r", "h"};
  static const char* lstm[] = {"i", "f", "o", "g"};
  return kind == CellKind::GRU ? gru[g] : lstm[g];
}

RnnCellParams init_cell(CellKind kind, int in_dim, int hidden,
                        std::mt19937_64& rng) {
  RnnCellParams p;
  p.kind = kind;
  p.in_dim = in_dim;
  p.hidden = hidden;
  const int gates = p.gate_count();
  auto glorot = [&](int rows, int cols) {
    double bound = std::sqrt(6.0 / double(rows + cols));
    MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = uniform_real(rng, -bound, bound);
    return m;
  };
  for (int g = 0; g < gates; ++g) {
    p.W.push_back(glorot(hidden, in_dim));
    p.U.push_back(glorot(hidden, hidden));
    p.b.push_back(MatrixXd::Zero(hidden, 1));
  }
  if (kind == CellKind::LSTM) p.b[1].setOnes(); // forget gate bias
  return p;
}

namespace {

inline MatrixXd sigmoid(const MatrixXd& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

inline MatrixXd preact(const RnnCellParams& p, int g, const MatrixXd& x,
                       const MatrixXd& h) {
  MatrixXd a = x * p.W[g].transpose() + h * p.U[g].transpose();
  a.rowwise() += p.b[g].col(0).transpose();
  return a;
}

void check_dims(const RnnCellParams& p, const MatrixXd& x, const MatrixXd& h) {
  if (x.cols() != p.in_dim || h.cols() != p.hidden || x.rows() != h.rows())
    throw DimensionMismatch("rnn step: x " + std::to_string(x.rows()) + "x" +
                            std::to_string(x.cols()) + ", h " +
                            std::to_string(h.rows()) + "x" +
                            std::to_string(h.cols()));
}

}  // namespace

MatrixXd gru_step(const RnnCellParams& p, const MatrixXd& x_t,
                  const MatrixXd& h_prev) {
  check_dims(p, x_t, h_prev);
  MatrixXd z = sigmoid(preact(p, 0, x_t, h_prev));
  MatrixXd r = sigmoid(preact(p, 1, x_t, h_prev));
  MatrixXd hc =
      preact(p, 2, x_t, (r.array() * h_prev.array()).matrix()).array().tanh();
  return ((1.0 - z.array()) * h_prev.array() + z.array() * hc.array()).matrix();
}

std::pair<MatrixXd, MatrixXd> lstm_step(const RnnCellParams& p,
                                        const MatrixXd& x_t,
                                        const MatrixXd& h_prev,
                                        const MatrixXd& c_prev) {
  check_dims(p, x_t, h_prev);
  MatrixXd i = sigmoid(preact(p, 0, x_t, h_prev));
  MatrixXd f = sigmoid(preact(p, 1, x_t, h_prev));
  MatrixXd o = sigmoid(preact(p, 2, x_t, h_prev));
  MatrixXd g = preact(p, 3, x_t, h_prev).array().tanh();
  MatrixXd c = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
  MatrixXd h = (o.array() * c.array().tanh()).matrix();
  return {h, c};
}

RnnCache rnn_forward(const RnnCellParams& p, const std::vector<MatrixXd>& xs) {
  RnnCache cache;
  const int T = static_cast<int>(xs.size());
  const long B = xs.empty() ? 0 : xs[0].rows();
  MatrixXd h = MatrixXd::Zero(B, p.hidden);
  MatrixXd c = MatrixXd::Zero(B, p.hidden);
  cache.H.reserve(T);
  cache.gates.reserve(T);
  for (int t = 0; t < T; ++t) {
    check_dims(p, xs[t], h);
    if (p.kind == CellKind::GRU) {
      MatrixXd z = sigmoid(preact(p, 0, xs[t], h));
      MatrixXd r = sigmoid(preact(p, 1, xs[t], h));
      MatrixXd hc =
          preact(p, 2, xs[t], (r.array() * h.array()).matrix()).array().tanh();
      h = ((1.0 - z.array()) * h.array() + z.array() * hc.array()).matrix();
      cache.gates.push_back({std::move(z), std::move(r), std::move(hc)});
    } else {
      MatrixXd i = sigmoid(preact(p, 0, xs[t], h));
      MatrixXd f = sigmoid(preact(p, 1, xs[t], h));
      MatrixXd o = sigmoid(preact(p, 2, xs[t], h));
      MatrixXd g = preact(p, 3, xs[t], h).array().tanh();
      c = (f.array() * c.array() + i.array() * g.array()).matrix();
      MatrixXd tc = c.array().tanh().matrix();
      h = (o.array() * tc.array()).matrix();
      cache.C.push_back(c);
      cache.tanh_c.push_back(std::move(tc));
      cache.gates.push_back({std::move(i), std::move(f), std::move(o), std::move(g)});
    }
    cache.H.push_back(h);
  }
  return cache;
}

RnnGrads RnnGrads::zeros(const RnnCellParams& p) {
  RnnGrads g;
  for (int i = 0; i < p.gate_count(); ++i) {
    g.dW.push_back(MatrixXd::Zero(p.hidden, p.in_dim));
    g.dU.push_back(MatrixXd::Zero(p.hidden, p.hidden));
    g.db.push_back(MatrixXd::Zero(p.hidden, 1));
  }
  return g;
}

std::vector<MatrixXd> rnn_backward(const RnnCellParams& p,
                                   const std::vector<MatrixXd>& xs,
                                   const RnnCache& cache,
                                   const std::vector<MatrixXd>& dHs,
                                   RnnGrads& grads) {
  const int T = static_cast<int>(xs.size());
  const long B = xs.empty() ? 0 : xs[0].rows();
  std::vector<MatrixXd> dXs(T);
  MatrixXd dh_carry = MatrixXd::Zero(B, p.hidden);
  MatrixXd dc_carry = MatrixXd::Zero(B, p.hidden);
  const MatrixXd zero_state = MatrixXd::Zero(B, p.hidden);

  for (int t = T - 1; t >= 0; --t) {
    const MatrixXd& h_prev = t > 0 ? cache.H[t - 1] : zero_state;
    MatrixXd dh_total = dHs[t] + dh_carry;

    if (p.kind == CellKind::GRU) {
      const MatrixXd& z = cache.gates[t][0];
      const MatrixXd& r = cache.gates[t][1];
      const MatrixXd& hc = cache.gates[t][2];

      MatrixXd dz = (dh_total.array() * (hc.array() - h_prev.array())).matrix();
      MatrixXd da_h = (dh_total.array() * z.array() *
                       (1.0 - hc.array().square())).matrix();
      MatrixXd dh_prev = (dh_total.array() * (1.0 - z.array())).matrix();

      MatrixXd rh = (r.array() * h_prev.array()).matrix();
      grads.dW[2].noalias() += da_h.transpose() * xs[t];
      grads.dU[2].noalias() += da_h.transpose() * rh;
      grads.db[2] += da_h.colwise().sum().transpose();

      MatrixXd d_rh = da_h * p.U[2];
      MatrixXd dr = (d_rh.array() * h_prev.array()).matrix();
      dh_prev.array() += d_rh.array() * r.array();

      MatrixXd da_z = (dz.array() * z.array() * (1.0 - z.array())).matrix();
      MatrixXd da_r = (dr.array() * r.array() * (1.0 - r.array())).matrix();
      grads.dW[0].noalias() += da_z.transpose() * xs[t];
      grads.dU[0].noalias() += da_z.transpose() * h_prev;
      grads.db[0] += da_z.colwise().sum().transpose();
      grads.dW[1].noalias() += da_r.transpose() * xs[t];
      grads.dU[1].noalias() += da_r.transpose() * h_prev;
      grads.db[1] += da_r.colwise().sum().transpose();

      dXs[t] = da_z * p.W[0] + da_r * p.W[1] + da_h * p.W[2];
      dh_carry = dh_prev + da_z * p.U[0] + da_r * p.U[1];
    } else {
      const MatrixXd& i = cache.gates[t][0];
      const MatrixXd& f = cache.gates[t][1];
      const MatrixXd& o = cache.gates[t][2];
      const MatrixXd& g = cache.gates[t][3];
      const MatrixXd& tc = cache.tanh_c[t];
      const MatrixXd& c_prev = t > 0 ? cache.C[t - 1] : zero_state;

      MatrixXd do_ = (dh_total.array() * tc.array()).matrix();
      MatrixXd dc = dc_carry +
                    (dh_total.array() * o.array() * (1.0 - tc.array().square()))
                        .matrix();
      MatrixXd da_i = (dc.array() * g.array() * i.array() * (1.0 - i.array())).matrix();
      MatrixXd da_f = (dc.array() * c_prev.array() * f.array() * (1.0 - f.array())).matrix();
      MatrixXd da_o = (do_.array() * o.array() * (1.0 - o.array())).matrix();
      MatrixXd da_g = (dc.array() * i.array() * (1.0 - g.array().square())).matrix();
      dc_carry = (dc.array() * f.array()).matrix();

      const MatrixXd* das[] = {&da_i, &da_f, &da_o, &da_g};
      dXs[t] = MatrixXd::Zero(B, p.in_dim);
      dh_carry.setZero();
      for (int gate = 0; gate < 4; ++gate) {
        grads.dW[gate].noalias() += das[gate]->transpose() * xs[t];
        grads.dU[gate].noalias() += das[gate]->transpose() * h_prev;
        grads.db[gate] += das[gate]->colwise().sum().transpose();
        dXs[t].noalias() += (*das[gate]) * p.W[gate];
        dh_carry.noalias() += (*das[gate]) * p.U[gate];
      }
    }
  }
  return dXs;
}

MatrixXd dense_softmax(const MatrixXd& W, const MatrixXd& b,
                       const MatrixXd& e) {
  if (e.cols() != W.cols() || b.rows() != W.rows())
    throw DimensionMismatch("dense_softmax shapes");
  MatrixXd logits = e * W.transpose();
  logits.rowwise() += b.col(0).transpose();
  for (int r = 0; r < logits.rows(); ++r) {
    double mx = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - mx).exp();
    logits.row(r) /= logits.row(r).sum();
  }
  return logits;
}

double cross_entropy(const MatrixXd& q, const std::vector<int>& labels) {
  if (static_cast<long>(labels.size()) != q.rows())
    throw DimensionMismatch("cross_entropy: labels vs rows");
  double total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    total -= std::log(std::max(q(static_cast<long>(i), labels[i]), 1e-15));
  return total / double(labels.size());
}

double mse(const std::vector<MatrixXd>& x, const std::vector<MatrixXd>& xr) {
  if (x.size() != xr.size()) throw DimensionMismatch("mse: timestep count");
  double total = 0;
  long n = 0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    total += (x[t] - xr[t]).array().square().sum();
    n += x[t].size();
  }
  return n == 0 ? 0.0 : total / double(n);
}

std::vector<ParamRef> cell_param_refs(RnnCellParams& p,
                                      const std::string& prefix) {
  std::vector<ParamRef> refs;
  for (int g = 0; g < p.gate_count(); ++g) {
    std::string gate = RnnCellParams::gate_label(p.kind, g);
    refs.push_back({prefix + ".W_" + gate, &p.W[g]});
    refs.push_back({prefix + ".U_" + gate, &p.U[g]});
    refs.push_back({prefix + ".b_" + gate, &p.b[g]});
  }
  return refs;
}

AdamState init_adam(const std::vector<ParamRef>& params, AdamConfig cfg) {
  AdamState st;
  st.cfg = cfg;
  for (const auto& ref : params) {
    st.m.push_back(MatrixXd::Zero(ref.m->rows(), ref.m->cols()));
    st.v.push_back(MatrixXd::Zero(ref.m->rows(), ref.m->cols()));
  }
  return st;
}

void adam_update(std::vector<ParamRef>& params,
                 const std::vector<MatrixXd>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw DimensionMismatch("adam_update: parameter/gradient count");
  ++state.step;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, double(state.step));
  const double bc2 = 1.0 - std::pow(b2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
    state.v[i] = (b2 * state.v[i].array() +
                  (1.0 - b2) * grads[i].array().square()).matrix();
    params[i].m->array() -=
        state.cfg.lr * (state.m[i].array() / bc1) /
        ((state.v[i].array() / bc2).sqrt() + state.cfg.eps);
  }
}

void clip_gradients(std::vector<MatrixXd>& grads, double max_norm) {
  double sq = 0;
  for (const auto& g : grads) sq += g.squaredNorm();
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0)
    for (auto& g : grads) g *= max_norm / norm;
}

GradCheckReport grad_check(const std::vector<ParamRef>& params,
                           const std::vector<MatrixXd>& analytic,
                           const std::function<double()>& loss_fn,
                           double eps, double tolerance) {
  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    MatrixXd& m = *params[i].m;
    for (long k = 0; k < m.size(); ++k) {
      double saved = m.data()[k];
      m.data()[k] = saved + eps;
      double up = loss_fn();
      m.data()[k] = saved - eps;
      double down = loss_fn();
      m.data()[k] = saved;
      double gf = (up - down) / (2.0 * eps);
      double ga = analytic[i].data()[k];
      // Differences below the double-precision noise of the central
      // difference itself (~1e-11 here) cannot distinguish a correct
      // gradient from a wrong one; treat them as matching so ~1e-9
      // magnitude gradients don't trip the relative test.
      double diff = std::abs(ga - gf);
      double rel = diff <= 1e-9
                       ? 0.0
                       : diff / std::max(1e-8, std::abs(ga) + std::abs(gf));
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = params[i].name + "[" + std::to_string(k) + "]";
      }
    }
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace driverid
