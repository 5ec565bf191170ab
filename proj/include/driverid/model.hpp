#pragma once
#include <optional>
#include <string>
#include <vector>

#include "driverid/net.hpp"
#include "driverid/patterns.hpp"

namespace driverid {

// Preprocessing settings a saved model carries so `predict` can re-encode
// raw CSV exactly the way the training data was encoded.
struct PipelineConfig {
  WindowConfig window;
  PatternOptions options;
};

struct ModelConfig {
  CellKind cell = CellKind::GRU;
  int embedding = 100;
  bool residual = true;
  bool decoder = true;
  double lambda = 0.5; // reconstruction weight in L_u = L_c + lambda * L_r
  int classes = 0;
  int timesteps = 0;   // T
  int features = 0;    // M
  PatternMode mode = PatternMode::FUSED;

  void validate() const;
};

// Residual recurrent autoencoder-regularized classifier.
// Encoder: x -> ReLU(rnn1(x)) (+x) -> rnn2 -> last hidden = embedding.
// Head: dense + softmax. Decoder mirrors the encoder on the embedding
// repeated T times; its second block emits the reconstruction directly.
struct ModelParams {
  RnnCellParams enc1; // hidden = M (residual add requires matching shape)
  RnnCellParams enc2; // hidden = embedding
  RnnCellParams dec1; // hidden = embedding
  RnnCellParams dec2; // hidden = M
  MatrixXd head_w;    // classes x embedding
  MatrixXd head_b;    // classes x 1
  FeatureScaler scaler;
  std::vector<std::string> label_map; // class index -> driver_id
};

ModelParams build_model(const ModelConfig& cfg, std::uint64_t seed);

std::vector<ParamRef> model_param_refs(ModelParams& p, bool include_decoder);

// Mini-batch as T matrices of shape B x M (timestep-major), which keeps
// every matrix product a single GEMM.
struct Batch {
  std::vector<MatrixXd> xs; // T entries, B x M
  std::vector<int> labels;  // B
  int size() const { return labels.empty() ? 0 : static_cast<int>(labels.size()); }
};

Batch make_batch(const std::vector<PatternSequence>& seqs,
                 const std::vector<int>& indices);

struct ForwardResult {
  MatrixXd embedding;            // B x embedding
  MatrixXd probs;                // B x classes
  std::vector<MatrixXd> recon;   // T entries, B x M (empty without decoder)
  // caches for the backward pass
  RnnCache enc1_cache, enc2_cache, dec1_cache, dec2_cache;
  std::vector<MatrixXd> enc2_in; // A = x + ReLU(S1)
  std::vector<MatrixXd> dec_in;  // R = embedding repeated
  std::vector<MatrixXd> dec2_in; // B = R + ReLU(D1)
};

ForwardResult forward(const ModelParams& p, const ModelConfig& cfg,
                      const Batch& batch, bool need_cache = true);

struct LossBreakdown {
  double total = 0, classification = 0, reconstruction = 0;
};

LossBreakdown unified_loss(const ModelParams& p, const ModelConfig& cfg,
                           const Batch& batch);

// Full reverse-mode gradients of L_u over the batch. Gradient order matches
// model_param_refs(p, /*include_decoder=*/true).
LossBreakdown compute_gradients(ModelParams& p, const ModelConfig& cfg,
                                const Batch& batch,
                                std::vector<MatrixXd>& grads);

struct Prediction {
  int label = -1;
  std::vector<std::pair<int, double>> topk; // (class, probability), sorted
};

// argmax with ties broken toward the smaller class index; topk sorted by
// descending probability then ascending class index.
Prediction predict_row(const MatrixXd& probs, int row, int k);
std::vector<Prediction> predict(const ModelParams& p, const ModelConfig& cfg,
                                const std::vector<PatternSequence>& seqs,
                                int k = 3);

void save_model(const ModelParams& p, const ModelConfig& cfg,
                const PipelineConfig& pipe, const std::string& path);

struct LoadedModel {
  ModelParams params;
  ModelConfig config;
  PipelineConfig pipeline;
};

LoadedModel load_model(const std::string& path);

}  // namespace driverid
