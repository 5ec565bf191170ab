#include "driverid/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "driverid/io.hpp"

namespace driverid {

using nlohmann::json;

void ModelConfig::validate() const {
  if (embedding < 1) throw ValidationError("embedding dim must be >= 1");
  if (classes < 2) throw ValidationError("class count must be >= 2");
  if (lambda < 0.0 || lambda > 1.0) throw ValidationError("lambda must be in [0,1]");
  if (timesteps < 1 || features < 1)
    throw ValidationError("input dims (T, M) must be positive");
}

ModelParams build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.enc1 = init_cell(cfg.cell, cfg.features, cfg.features, rng);
  p.enc2 = init_cell(cfg.cell, cfg.features, cfg.embedding, rng);
  p.dec1 = init_cell(cfg.cell, cfg.embedding, cfg.embedding, rng);
  p.dec2 = init_cell(cfg.cell, cfg.embedding, cfg.features, rng);
  double bound = std::sqrt(6.0 / double(cfg.classes + cfg.embedding));
  p.head_w.resize(cfg.classes, cfg.embedding);
  for (int i = 0; i < p.head_w.rows(); ++i)
    for (int j = 0; j < p.head_w.cols(); ++j)
      p.head_w(i, j) = uniform_real(rng, -bound, bound);
  p.head_b = MatrixXd::Zero(cfg.classes, 1);
  return p;
}

std::vector<ParamRef> model_param_refs(ModelParams& p, bool include_decoder) {
  std::vector<ParamRef> refs = cell_param_refs(p.enc1, "enc1");
  auto enc2 = cell_param_refs(p.enc2, "enc2");
  refs.insert(refs.end(), enc2.begin(), enc2.end());
  if (include_decoder) {
    auto dec1 = cell_param_refs(p.dec1, "dec1");
    auto dec2 = cell_param_refs(p.dec2, "dec2");
    refs.insert(refs.end(), dec1.begin(), dec1.end());
    refs.insert(refs.end(), dec2.begin(), dec2.end());
  }
  refs.push_back({"head.W", &p.head_w});
  refs.push_back({"head.b", &p.head_b});
  return refs;
}

Batch make_batch(const std::vector<PatternSequence>& seqs,
                 const std::vector<int>& indices) {
  if (indices.empty()) throw ValidationError("empty batch");
  const long T = seqs[indices[0]].x.rows();
  const long M = seqs[indices[0]].x.cols();
  Batch batch;
  batch.xs.assign(T, MatrixXd(static_cast<long>(indices.size()), M));
  batch.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const PatternSequence& s = seqs[indices[i]];
    if (s.x.rows() != T || s.x.cols() != M)
      throw DimensionMismatch("inconsistent sample shapes in batch");
    for (long t = 0; t < T; ++t)
      batch.xs[t].row(static_cast<long>(i)) = s.x.row(t);
    batch.labels.push_back(s.y);
  }
  return batch;
}

namespace {

inline MatrixXd relu(const MatrixXd& m) { return m.cwiseMax(0.0); }

}  // namespace

ForwardResult forward(const ModelParams& p, const ModelConfig& cfg,
                      const Batch& batch, bool need_cache) {
  const int T = static_cast<int>(batch.xs.size());
  ForwardResult r;
  r.enc1_cache = rnn_forward(p.enc1, batch.xs);
  r.enc2_in.resize(T);
  for (int t = 0; t < T; ++t) {
    r.enc2_in[t] = relu(r.enc1_cache.H[t]);
    if (cfg.residual) r.enc2_in[t] += batch.xs[t];
  }
  r.enc2_cache = rnn_forward(p.enc2, r.enc2_in);
  r.embedding = r.enc2_cache.H.back();
  r.probs = dense_softmax(p.head_w, p.head_b, r.embedding);

  if (cfg.decoder) {
    r.dec_in.assign(T, r.embedding);
    r.dec1_cache = rnn_forward(p.dec1, r.dec_in);
    r.dec2_in.resize(T);
    for (int t = 0; t < T; ++t) {
      r.dec2_in[t] = relu(r.dec1_cache.H[t]);
      if (cfg.residual) r.dec2_in[t] += r.dec_in[t];
    }
    r.dec2_cache = rnn_forward(p.dec2, r.dec2_in);
    r.recon = r.dec2_cache.H;
  }
  if (!need_cache) {
    r.enc1_cache = RnnCache{};
    r.enc2_cache = RnnCache{};
    r.dec1_cache = RnnCache{};
    r.dec2_cache = RnnCache{};
  }
  return r;
}

LossBreakdown unified_loss(const ModelParams& p, const ModelConfig& cfg,
                           const Batch& batch) {
  if (batch.size() == 0) throw ValidationError("empty batch");
  ForwardResult fwd = forward(p, cfg, batch, false);
  LossBreakdown loss;
  loss.classification = cross_entropy(fwd.probs, batch.labels);
  loss.reconstruction = cfg.decoder ? mse(batch.xs, fwd.recon) : 0.0;
  loss.total = loss.classification + cfg.lambda * loss.reconstruction;
  if (!std::isfinite(loss.total)) throw NonFiniteLoss("non-finite loss");
  return loss;
}

LossBreakdown compute_gradients(ModelParams& p, const ModelConfig& cfg,
                                const Batch& batch,
                                std::vector<MatrixXd>& grads) {
  const int T = static_cast<int>(batch.xs.size());
  const long B = batch.xs[0].rows();
  const long M = batch.xs[0].cols();

  ForwardResult fwd = forward(p, cfg, batch, true);
  LossBreakdown loss;
  loss.classification = cross_entropy(fwd.probs, batch.labels);
  loss.reconstruction = cfg.decoder ? mse(batch.xs, fwd.recon) : 0.0;
  loss.total = loss.classification + cfg.lambda * loss.reconstruction;
  if (!std::isfinite(loss.total)) throw NonFiniteLoss("non-finite loss");

  // head: dL_c/dlogits = (q - onehot)/B
  MatrixXd dlogits = fwd.probs;
  for (long i = 0; i < B; ++i) dlogits(i, batch.labels[i]) -= 1.0;
  dlogits /= double(B);
  MatrixXd d_head_w = dlogits.transpose() * fwd.embedding;
  MatrixXd d_head_b = dlogits.colwise().sum().transpose();
  MatrixXd d_embedding = dlogits * p.head_w;

  RnnGrads g_enc1 = RnnGrads::zeros(p.enc1);
  RnnGrads g_enc2 = RnnGrads::zeros(p.enc2);
  RnnGrads g_dec1 = RnnGrads::zeros(p.dec1);
  RnnGrads g_dec2 = RnnGrads::zeros(p.dec2);

  if (cfg.decoder && cfg.lambda > 0.0) {
    const double scale = cfg.lambda * 2.0 / double(B * T * M);
    std::vector<MatrixXd> d_recon(T);
    for (int t = 0; t < T; ++t)
      d_recon[t] = scale * (fwd.recon[t] - batch.xs[t]);
    std::vector<MatrixXd> d_dec2_in =
        rnn_backward(p.dec2, fwd.dec2_in, fwd.dec2_cache, d_recon, g_dec2);
    std::vector<MatrixXd> d_d1(T);
    for (int t = 0; t < T; ++t) {
      d_d1[t] = (d_dec2_in[t].array() *
                 (fwd.dec1_cache.H[t].array() > 0.0).cast<double>()).matrix();
    }
    std::vector<MatrixXd> d_dec_in =
        rnn_backward(p.dec1, fwd.dec_in, fwd.dec1_cache, d_d1, g_dec1);
    for (int t = 0; t < T; ++t) {
      d_embedding += d_dec_in[t];
      if (cfg.residual) d_embedding += d_dec2_in[t];
    }
  }

  std::vector<MatrixXd> d_enc2_h(T, MatrixXd::Zero(B, p.enc2.hidden));
  d_enc2_h[T - 1] = d_embedding;
  std::vector<MatrixXd> d_enc2_in =
      rnn_backward(p.enc2, fwd.enc2_in, fwd.enc2_cache, d_enc2_h, g_enc2);
  std::vector<MatrixXd> d_s1(T);
  for (int t = 0; t < T; ++t)
    d_s1[t] = (d_enc2_in[t].array() *
               (fwd.enc1_cache.H[t].array() > 0.0).cast<double>()).matrix();
  rnn_backward(p.enc1, batch.xs, fwd.enc1_cache, d_s1, g_enc1);

  grads.clear();
  auto append = [&](RnnGrads& g, int gates) {
    for (int i = 0; i < gates; ++i) {
      grads.push_back(std::move(g.dW[i]));
      grads.push_back(std::move(g.dU[i]));
      grads.push_back(std::move(g.db[i]));
    }
  };
  append(g_enc1, p.enc1.gate_count());
  append(g_enc2, p.enc2.gate_count());
  append(g_dec1, p.dec1.gate_count());
  append(g_dec2, p.dec2.gate_count());
  grads.push_back(std::move(d_head_w));
  grads.push_back(std::move(d_head_b));
  return loss;
}

Prediction predict_row(const MatrixXd& probs, int row, int k) {
  const int c = static_cast<int>(probs.cols());
  std::vector<int> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return probs(row, a) > probs(row, b); // stable: ties keep smaller index
  });
  Prediction pred;
  pred.label = order[0];
  for (int i = 0; i < std::min(k, c); ++i)
    pred.topk.emplace_back(order[i], probs(row, order[i]));
  return pred;
}

std::vector<Prediction> predict(const ModelParams& p, const ModelConfig& cfg,
                                const std::vector<PatternSequence>& seqs,
                                int k) {
  if (seqs.empty()) return {};
  std::vector<int> indices(seqs.size());
  std::iota(indices.begin(), indices.end(), 0);
  Batch batch = make_batch(seqs, indices);
  ModelConfig no_decoder = cfg;
  no_decoder.decoder = false; // reconstruction not needed for prediction
  ForwardResult fwd = forward(p, no_decoder, batch, false);
  std::vector<Prediction> out;
  out.reserve(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i)
    out.push_back(predict_row(fwd.probs, static_cast<int>(i), k));
  return out;
}

namespace {

json matrix_to_json(const MatrixXd& m) {
  json data = json::array();
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

MatrixXd matrix_from_json(const json& j) {
  MatrixXd m(j.at("rows").get<long>(), j.at("cols").get<long>());
  const auto& data = j.at("data");
  if (static_cast<long>(data.size()) != m.size())
    throw ValidationError("FormatVersionMismatch: bad matrix payload");
  long k = 0;
  for (int i = 0; i < m.rows(); ++i)
    for (int jj = 0; jj < m.cols(); ++jj) m(i, jj) = data[k++].get<double>();
  return m;
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

constexpr int kFormatVersion = 1;

}  // namespace

void save_model(const ModelParams& p, const ModelConfig& cfg,
                const PipelineConfig& pipe, const std::string& path) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["config"] = {{"cell", cell_name(cfg.cell)},
                   {"embedding", cfg.embedding},
                   {"residual", cfg.residual},
                   {"decoder", cfg.decoder},
                   {"lambda", cfg.lambda},
                   {"classes", cfg.classes},
                   {"timesteps", cfg.timesteps},
                   {"features", cfg.features},
                   {"mode", mode_name(cfg.mode)},
                   {"ls", pipe.window.ls},
                   {"lf", pipe.window.lf},
                   {"dv", pipe.options.thresholds.dv},
                   {"db", pipe.options.thresholds.db},
                   {"wrap_st_bearing", pipe.options.wrap_st_bearing},
                   {"scale_st_only", pipe.options.scale_st_only}};
  doc["label_map"] = p.label_map;
  doc["scaler"] = {{"min", std::vector<double>(p.scaler.min.data(),
                                               p.scaler.min.data() + p.scaler.min.size())},
                   {"max", std::vector<double>(p.scaler.max.data(),
                                               p.scaler.max.data() + p.scaler.max.size())},
                   {"st_only", p.scaler.st_only},
                   {"st_offset", p.scaler.st_offset}};
  json params = json::object();
  ModelParams& mutable_p = const_cast<ModelParams&>(p);
  for (const auto& ref : model_param_refs(mutable_p, true))
    params[ref.name] = matrix_to_json(*ref.m);
  doc["checksum"] = fnv1a_hex(params.dump());
  doc["params"] = std::move(params);

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << doc.dump();
  out << "\n";
  if (!out) throw IoError("write failed: " + path);
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("FormatVersionMismatch: unreadable model file (") +
                          e.what() + ")");
  }
  try {
    if (doc.at("format_version").get<int>() != kFormatVersion)
      throw ValidationError("FormatVersionMismatch: unsupported version");
    ModelConfig cfg;
    const json& jc = doc.at("config");
    cfg.cell = parse_cell(jc.at("cell").get<std::string>());
    cfg.embedding = jc.at("embedding").get<int>();
    cfg.residual = jc.at("residual").get<bool>();
    cfg.decoder = jc.at("decoder").get<bool>();
    cfg.lambda = jc.at("lambda").get<double>();
    cfg.classes = jc.at("classes").get<int>();
    cfg.timesteps = jc.at("timesteps").get<int>();
    cfg.features = jc.at("features").get<int>();
    cfg.mode = parse_mode(jc.at("mode").get<std::string>());
    PipelineConfig pipe;
    pipe.window.ls = jc.at("ls").get<int>();
    pipe.window.lf = jc.at("lf").get<int>();
    pipe.options.thresholds.dv = jc.at("dv").get<double>();
    pipe.options.thresholds.db = jc.at("db").get<double>();
    pipe.options.wrap_st_bearing = jc.at("wrap_st_bearing").get<bool>();
    pipe.options.scale_st_only = jc.at("scale_st_only").get<bool>();

    if (fnv1a_hex(doc.at("params").dump()) !=
        doc.at("checksum").get<std::string>())
      throw ValidationError("ChecksumMismatch: model parameters corrupted");

    ModelParams p = build_model(cfg, 0);
    p.label_map = doc.at("label_map").get<std::vector<std::string>>();
    const json& js = doc.at("scaler");
    auto mins = js.at("min").get<std::vector<double>>();
    auto maxs = js.at("max").get<std::vector<double>>();
    p.scaler.min = Eigen::Map<VectorXd>(mins.data(), static_cast<long>(mins.size()));
    p.scaler.max = Eigen::Map<VectorXd>(maxs.data(), static_cast<long>(maxs.size()));
    p.scaler.st_only = js.at("st_only").get<bool>();
    p.scaler.st_offset = js.at("st_offset").get<int>();
    for (const auto& ref : model_param_refs(p, true))
      *ref.m = matrix_from_json(doc.at("params").at(ref.name));
    return {std::move(p), cfg, pipe};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("FormatVersionMismatch: missing field (") +
                          e.what() + ")");
  }
}

}  // namespace driverid
