#include "uavbc/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "uavbc/config.hpp"
#include "uavbc/rng.hpp"

namespace uavbc {

using nlohmann::json;

int argmax(std::span<const double> v) {
  return static_cast<int>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

std::vector<double> softmax(std::span<const double> theta) {
  if (theta.empty()) throw std::invalid_argument("softmax of an empty vector");
  for (double v : theta)
    if (!std::isfinite(v)) throw std::invalid_argument("softmax input is not finite");
  const double m = *std::max_element(theta.begin(), theta.end());
  std::vector<double> out(theta.size());
  double sum = 0;
  for (std::size_t i = 0; i < theta.size(); ++i) sum += out[i] = std::exp(theta[i] - m);
  for (double& v : out) v /= sum;
  return out;
}

namespace {

// In-place column-wise softmax of logits (classes x batch).
void softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    auto col = z.col(c);
    col.array() -= col.maxCoeff();
    col = col.array().exp();
    col /= col.sum();
  }
}

double clipped_log(double p) { return std::log(std::clamp(p, kProbClip, 1.0)); }

}  // namespace

LossValue ce_loss(const Eigen::MatrixXd& y_true, const Eigen::MatrixXd& y_pred) {
  if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols())
    throw std::invalid_argument("ce_loss: shape mismatch");
  LossValue out;
  for (Eigen::Index c = 0; c < y_true.cols(); ++c)
    for (Eigen::Index k = 0; k < y_true.rows(); ++k)
      if (y_true(k, c) != 0) out.sum -= y_true(k, c) * clipped_log(y_pred(k, c));
  out.mean = y_true.cols() > 0 ? out.sum / static_cast<double>(y_true.cols()) : 0.0;
  return out;
}

void MlpModel::validate() const {
  if (dims.size() < 2) throw DataError("model needs at least an input and an output dimension");
  if (layers.size() != dims.size() - 1)
    throw DataError("model has " + std::to_string(layers.size()) + " layers for " + std::to_string(dims.size()) +
                    " dims");
  if (dims.front() != spec.feature_dim())
    throw DataError("input dim " + std::to_string(dims.front()) + " does not match feature spec width " +
                    std::to_string(spec.feature_dim()));
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.w.rows() != dims[k + 1] || l.w.cols() != dims[k] || l.b.size() != dims[k + 1])
      throw DataError("layer " + std::to_string(k) + ": shape does not chain " + std::to_string(dims[k]) + " -> " +
                      std::to_string(dims[k + 1]));
    if (!l.w.allFinite() || !l.b.allFinite()) throw DataError("layer " + std::to_string(k) + ": non-finite parameter");
  }
}

MlpModel make_model(const FeatureSpec& spec, const std::vector<int>& hidden, int n_classes) {
  MlpModel m;
  m.spec = spec;
  m.dims.push_back(spec.feature_dim());
  m.dims.insert(m.dims.end(), hidden.begin(), hidden.end());
  m.dims.push_back(n_classes);
  for (std::size_t k = 0; k + 1 < m.dims.size(); ++k) {
    if (m.dims[k + 1] < 1) throw ConfigError("layer widths must be >= 1");
    m.layers.push_back({Eigen::MatrixXd::Zero(m.dims[k + 1], m.dims[k]), Eigen::VectorXd::Zero(m.dims[k + 1])});
  }
  return m;
}

void init_he_uniform(MlpModel& model, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0, Stream::kInit);
  for (auto& l : model.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.w.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index r = 0; r < l.w.rows(); ++r)
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = u(rng);
    l.b.setZero();
  }
}

Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& x) {
  if (x.rows() != model.dims.front())
    throw std::invalid_argument("forward: input has " + std::to_string(x.rows()) + " features, model expects " +
                                std::to_string(model.dims.front()));
  Eigen::MatrixXd a = x;
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    const auto& l = model.layers[k];
    Eigen::MatrixXd z = l.w * a;
    z.colwise() += l.b;
    if (k + 1 < model.layers.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  softmax_columns(a);
  return a;
}

std::vector<double> forward(const MlpModel& model, std::span<const double> x) {
  const Eigen::Map<const Eigen::VectorXd> in(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::MatrixXd p = forward_batch(model, in);
  return {p.data(), p.data() + p.size()};
}

double Gradients::squared_norm() const {
  double s = 0;
  for (const auto& w : dw) s += w.squaredNorm();
  for (const auto& b : db) s += b.squaredNorm();
  return s;
}

double batch_loss(const MlpModel& model, const Eigen::MatrixXd& x, std::span<const int> labels) {
  const Eigen::MatrixXd p = forward_batch(model, x);
  double sum = 0;
  for (Eigen::Index c = 0; c < p.cols(); ++c) sum -= clipped_log(p(labels[static_cast<std::size_t>(c)], c));
  return sum / static_cast<double>(p.cols());
}

Gradients backward(const MlpModel& model, const Eigen::MatrixXd& x, std::span<const int> labels, double* mean_loss) {
  const auto batch = x.cols();
  if (static_cast<std::size_t>(batch) != labels.size()) throw std::invalid_argument("backward: label count mismatch");
  if (batch == 0) throw std::invalid_argument("backward: empty batch");
  const std::size_t n_layers = model.layers.size();

  // Keep every layer's output; hidden ones post-ReLU.
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(n_layers + 1);
  acts.push_back(x);
  for (std::size_t k = 0; k < n_layers; ++k) {
    const auto& l = model.layers[k];
    Eigen::MatrixXd z = l.w * acts.back();
    z.colwise() += l.b;
    if (k + 1 < n_layers) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  Eigen::MatrixXd delta = std::move(acts.back());
  softmax_columns(delta);

  double loss = 0;
  for (Eigen::Index c = 0; c < batch; ++c) {
    const int y = labels[static_cast<std::size_t>(c)];
    if (y < 0 || y >= delta.rows()) throw std::out_of_range("backward: label out of range");
    loss -= clipped_log(delta(y, c));
    delta(y, c) -= 1.0;
  }
  if (mean_loss) *mean_loss = loss / static_cast<double>(batch);
  delta /= static_cast<double>(batch);

  Gradients g;
  g.dw.resize(n_layers);
  g.db.resize(n_layers);
  for (std::size_t k = n_layers; k-- > 0;) {
    g.dw[k].noalias() = delta * acts[k].transpose();
    g.db[k] = delta.rowwise().sum();
    if (k > 0) {
      Eigen::MatrixXd prev = model.layers[k].w.transpose() * delta;
      prev.array() *= (acts[k].array() > 0.0).cast<double>();
      delta = std::move(prev);
    }
  }
  return g;
}

AdamState make_adam_state(const MlpModel& model) {
  AdamState s;
  for (const auto& l : model.layers) {
    s.mw.push_back(Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()));
    s.vw.push_back(Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()));
    s.mb.push_back(Eigen::VectorXd::Zero(l.b.size()));
    s.vb.push_back(Eigen::VectorXd::Zero(l.b.size()));
  }
  return s;
}

namespace {

template <typename P>
void adam_update(P& param, const P& grad, P& m, P& v, double lr, double c1, double c2, const AdamConfig& cfg) {
  m = cfg.beta1 * m + (1 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1 - cfg.beta2) * grad.cwiseProduct(grad);
  param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
}

}  // namespace

void adam_step(MlpModel& model, const Gradients& g, AdamState& s, double lr, const AdamConfig& cfg) {
  ++s.t;
  const double c1 = 1 - std::pow(cfg.beta1, static_cast<double>(s.t));
  const double c2 = 1 - std::pow(cfg.beta2, static_cast<double>(s.t));
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    adam_update(model.layers[k].w, g.dw[k], s.mw[k], s.vw[k], lr, c1, c2, cfg);
    adam_update(model.layers[k].b, g.db[k], s.mb[k], s.vb[k], lr, c1, c2, cfg);
  }
}

double TrainConfig::learning_rate(int epoch) const {
  const double decay = lr0 / epochs;
  return lr0 / (1.0 + decay * epoch);
}

Dataset make_dataset(const std::vector<TrajectoryRecord>& records, const FeatureSpec& spec) {
  Dataset d;
  d.x.resize(spec.feature_dim(), static_cast<Eigen::Index>(records.size()));
  d.labels.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    encode_state_into(r.q, r.active_ue, spec, {d.x.col(static_cast<Eigen::Index>(i)).data(),
                                               static_cast<std::size_t>(spec.feature_dim())});
    if (r.a1 < 0 || r.a1 >= spec.n_ues) throw DataError("label a1 out of range at record " + std::to_string(i));
    d.labels.push_back(r.a1);
  }
  return d;
}

EvalReport evaluate(const MlpModel& model, const Dataset& data) {
  if (data.labels.empty()) throw DataError("cannot evaluate on an empty dataset");
  if (data.x.rows() != model.dims.front()) throw DataError("dataset features do not match the model's feature spec");
  EvalReport rep;
  const int k = model.n_classes();
  rep.samples = static_cast<std::int64_t>(data.labels.size());
  rep.confusion.assign(static_cast<std::size_t>(k), std::vector<std::int64_t>(static_cast<std::size_t>(k), 0));
  constexpr Eigen::Index kChunk = 4096;
  double loss = 0;
  std::int64_t correct = 0;
  for (Eigen::Index start = 0; start < data.x.cols(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, data.x.cols() - start);
    const Eigen::MatrixXd p = forward_batch(model, data.x.middleCols(start, n));
    for (Eigen::Index c = 0; c < n; ++c) {
      const int y = data.labels[static_cast<std::size_t>(start + c)];
      if (y < 0 || y >= k) throw DataError("label out of range for the model's class count");
      Eigen::Index pred = 0;
      p.col(c).maxCoeff(&pred);
      loss -= clipped_log(p(y, c));
      ++rep.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(pred)];
      if (pred == y) ++correct;
    }
  }
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(rep.samples);
  rep.mean_loss = loss / static_cast<double>(rep.samples);
  return rep;
}

EvalReport evaluate(const MlpModel& model, const std::vector<TrajectoryRecord>& records) {
  if (records.empty()) throw DataError("cannot evaluate on an empty dataset");
  for (const auto& r : records)
    if (static_cast<int>(r.q.size()) != model.spec.n_ues)
      throw DataError("trajectory has " + std::to_string(r.q.size()) + " UEs, model was trained on " +
                      std::to_string(model.spec.n_ues));
  return evaluate(model, make_dataset(records, model.spec));
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const FeatureSpec& spec, int n_classes,
                  const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(cfg.lr0 > 0)) throw ConfigError("lr0 must be > 0");
  if (train_set.labels.empty()) throw DataError("training set is empty");
  if (train_set.x.rows() != spec.feature_dim()) throw DataError("training features do not match the feature spec");

  TrainResult res{make_model(spec, cfg.hidden, n_classes), {}};
  init_he_uniform(res.model, cfg.seed);
  AdamState adam = make_adam_state(res.model);

  const auto n = static_cast<Eigen::Index>(train_set.labels.size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  Eigen::MatrixXd xb(train_set.x.rows(), cfg.batch_size);
  std::vector<int> yb;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(epoch), Stream::kShuffle);
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = cfg.learning_rate(epoch);

    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(cfg.batch_size, n - start);
      xb.resize(train_set.x.rows(), b);
      yb.resize(static_cast<std::size_t>(b));
      for (Eigen::Index c = 0; c < b; ++c) {
        const auto src = order[static_cast<std::size_t>(start + c)];
        xb.col(c) = train_set.x.col(src);
        yb[static_cast<std::size_t>(c)] = train_set.labels[static_cast<std::size_t>(src)];
      }
      const Gradients g = backward(res.model, xb, yb);
      adam_step(res.model, g, adam, lr, cfg.adam);
    }

    EpochStats st;
    st.epoch = epoch + 1;
    const EvalReport tr = evaluate(res.model, train_set);
    st.train_loss = tr.mean_loss;
    st.train_acc = tr.accuracy;
    if (!val_set.labels.empty()) {
      const EvalReport va = evaluate(res.model, val_set);
      st.val_loss = va.mean_loss;
      st.val_acc = va.accuracy;
    }
    res.history.push_back(st);
  }
  return res;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  model.validate();
  nlohmann::ordered_json j;
  j["feature_spec"] = {{"n_ues", model.spec.n_ues},
                       {"normalize_by", model.spec.normalize_by},
                       {"include_active_ue_onehot", model.spec.include_active_ue_onehot}};
  j["dims"] = model.dims;
  j["layers"] = json::array();
  for (const auto& l : model.layers) {
    json w = json::array();
    for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(l.w.cols()));
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) row[static_cast<std::size_t>(c)] = l.w(r, c);
      w.push_back(row);
    }
    j["layers"].push_back({{"w", w}, {"b", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << j.dump() << '\n';
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("model file " + path.string() + ": " + e.what());
  }
  MlpModel m;
  try {
    const auto& fs = j.at("feature_spec");
    m.spec.n_ues = fs.at("n_ues").get<int>();
    m.spec.normalize_by = fs.at("normalize_by").get<int>();
    m.spec.include_active_ue_onehot = fs.at("include_active_ue_onehot").get<bool>();
    m.dims = j.at("dims").get<std::vector<int>>();
    const auto& layers = j.at("layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto rows = layers[k].at("w").get<std::vector<std::vector<double>>>();
      const auto bias = layers[k].at("b").get<std::vector<double>>();
      DenseLayer l;
      const auto cols = rows.empty() ? 0 : rows.front().size();
      l.w.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) throw DataError("layer " + std::to_string(k) + ": ragged weight matrix");
        for (std::size_t c = 0; c < cols; ++c)
          l.w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      }
      l.b = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));
      m.layers.push_back(std::move(l));
    }
  } catch (const json::exception& e) {
    throw DataError("model file " + path.string() + ": " + e.what());
  }
  m.validate();
  if (m.n_classes() != m.spec.n_ues) throw DataError("output layer width does not equal n_ues");
  return m;
}

ClonePolicy::ClonePolicy(MlpModel model) : model_(std::move(model)) {
  model_.validate();
  features_.resize(static_cast<std::size_t>(model_.spec.feature_dim()));
}

Decision ClonePolicy::decide(const PolicyInput& in) {
  // Queue lengths past the normalizer (larger-limit worlds) saturate at 1.
  std::vector<int> q(in.qlens.begin(), in.qlens.end());
  for (int& v : q) v = std::min(v, model_.spec.normalize_by);
  encode_state_into(q, in.active_ue, model_.spec, features_);
  return decide_with_movement(argmax(forward(model_, features_)), in);
}

}  // namespace uavbc
