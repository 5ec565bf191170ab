#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "driverid/errors.hpp"

namespace driverid {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Portable uniform in [lo, hi) from the raw 64-bit stream, so seeded runs
// are reproducible independent of the standard library's distributions.
double uniform_real(std::mt19937_64& rng, double lo, double hi);
double normal_real(std::mt19937_64& rng, double mean, double std);

enum class CellKind { GRU, LSTM };

CellKind parse_cell(const std::string& name);
std::string cell_name(CellKind kind);

// One recurrent cell. Gate order is z,r,h for GRU and i,f,o,g for LSTM;
// W[g] maps input, U[g] maps the previous hidden state, b[g] is hidden x 1.
struct RnnCellParams {
  CellKind kind = CellKind::GRU;
  int in_dim = 0;
  int hidden = 0;
  std::vector<MatrixXd> W; // hidden x in_dim per gate
  std::vector<MatrixXd> U; // hidden x hidden per gate
  std::vector<MatrixXd> b; // hidden x 1 per gate

  int gate_count() const { return kind == CellKind::GRU ? 3 : 4; }
  static const char* gate_label(CellKind kind, int g);
};

// Glorot-uniform weights, zero biases; LSTM forget-gate bias set to 1.
RnnCellParams init_cell(CellKind kind, int in_dim, int hidden,
                        std::mt19937_64& rng);

// Single-step interfaces (batch rows). h_prev/c_prev: B x hidden.
MatrixXd gru_step(const RnnCellParams& p, const MatrixXd& x_t,
                  const MatrixXd& h_prev);
std::pair<MatrixXd, MatrixXd> lstm_step(const RnnCellParams& p,
                                        const MatrixXd& x_t,
                                        const MatrixXd& h_prev,
                                        const MatrixXd& c_prev);

// Everything the backward pass needs from one unrolled forward run.
struct RnnCache {
  std::vector<MatrixXd> H;                  // T entries, B x hidden
  std::vector<std::vector<MatrixXd>> gates; // per t, per gate activation
  std::vector<MatrixXd> C;                  // LSTM cell states
  std::vector<MatrixXd> tanh_c;             // LSTM tanh(c_t)
};

// Unrolls the cell over xs (T entries of B x in_dim) from a zero state.
RnnCache rnn_forward(const RnnCellParams& p, const std::vector<MatrixXd>& xs);

struct RnnGrads {
  std::vector<MatrixXd> dW, dU, db;
  static RnnGrads zeros(const RnnCellParams& p);
};

// BPTT. dHs[t] is the loss gradient w.r.t. H[t] arriving from outside the
// recurrence (zero matrices where unused). Returns gradients w.r.t. xs.
std::vector<MatrixXd> rnn_backward(const RnnCellParams& p,
                                   const std::vector<MatrixXd>& xs,
                                   const RnnCache& cache,
                                   const std::vector<MatrixXd>& dHs,
                                   RnnGrads& grads);

// Rowwise softmax(e W^T + b^T) with max-subtraction. W: c x d, b: c x 1.
MatrixXd dense_softmax(const MatrixXd& W, const MatrixXd& b,
                       const MatrixXd& e);

// Mean over the batch of -ln q[i, y_i]; probabilities floored at 1e-15.
double cross_entropy(const MatrixXd& q, const std::vector<int>& labels);
// Mean squared elementwise error over all entries of all timesteps.
double mse(const std::vector<MatrixXd>& x, const std::vector<MatrixXd>& xr);

// Named handle onto one parameter matrix, for the optimizer, the gradient
// checker and serialization.
struct ParamRef {
  std::string name;
  MatrixXd* m = nullptr;
};

std::vector<ParamRef> cell_param_refs(RnnCellParams& p,
                                      const std::string& prefix);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::vector<MatrixXd> m, v; // aligned with the parameter list
  long step = 0;
};

AdamState init_adam(const std::vector<ParamRef>& params, AdamConfig cfg = {});
void adam_update(std::vector<ParamRef>& params,
                 const std::vector<MatrixXd>& grads, AdamState& state);

// Scales grads in place so their global L2 norm is at most max_norm.
void clip_gradients(std::vector<MatrixXd>& grads, double max_norm);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  bool pass = false;
};

// Central finite differences of loss_fn against the analytic gradients.
// Relative error per entry: |ga - gf| / max(1e-8, |ga| + |gf|); absolute
// differences at or below 1e-9 count as zero (finite-difference noise).
GradCheckReport grad_check(const std::vector<ParamRef>& params,
                           const std::vector<MatrixXd>& analytic,
                           const std::function<double()>& loss_fn,
                           double eps = 1e-5, double tolerance = 1e-4);

}  // namespace driverid
