#include "segdiscover/model/model.hpp"

#include <cmath>
#include <string>

namespace segdiscover {

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument("ModelConfig: " + what);
  };
  need(n_states >= 1, "n_states must be >= 1");
  need(rules_per_state >= 2, "rules_per_state must be >= 2");
  need(k >= 1, "k must be >= 1");
  need(state_dim >= 1 && hidden_dim >= 1, "state_dim and hidden_dim must be >= 1");
  need(feature_dim >= 1, "feature_dim must be >= 1");
  need(temperature > 0.0, "temperature must be > 0");
  need(M >= 1, "M must be >= 1");
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.next_state_table != b.next_state_table) return false;
  std::vector<const Matrix*> pa = param_pointers(a), pb = param_pointers(b);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->rows() != pb[i]->rows() || pa[i]->cols() != pb[i]->cols() || *pa[i] != *pb[i]) return false;
  }
  return true;
}

std::vector<Matrix*> param_pointers(ModelParams& p) {
  std::vector<Matrix*> out;
  p.visit([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<const Matrix*> param_pointers(const ModelParams& p) {
  std::vector<const Matrix*> out;
  p.visit([&](const std::string&, const Matrix& m) { out.push_back(&m); });
  return out;
}

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

Mlp<double> init_mlp(int in, int hidden, int out, Rng& rng) {
  return {uniform_matrix(hidden, in, 1.0 / std::sqrt(in), rng), Matrix::Zero(1, hidden),
          uniform_matrix(out, hidden, 1.0 / std::sqrt(hidden), rng), Matrix::Zero(1, out)};
}

}  // namespace

ModelParams init_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const int R = cfg.rules_per_state;
  const int S = cfg.state_dim;
  const int D = cfg.feature_dim;
  ModelParams p;
  // Embeddings are scaled like a weight row fed by S inputs.
  const double es = 1.0 / std::sqrt(static_cast<double>(S));
  p.state_embeddings = uniform_matrix(cfg.n_states, S, es, rng);
  p.rule_embeddings = uniform_matrix(static_cast<Eigen::Index>(cfg.n_states) * R, S, es, rng);
  p.rule_selector = init_mlp(S + D, cfg.hidden_dim, R, rng);
  p.action_head = init_mlp(S + D + S, cfg.hidden_dim, cfg.num_symbols(), rng);
  p.classification_head = init_mlp(D, cfg.hidden_dim, cfg.num_symbols(), rng);
  p.next_state_table.resize(static_cast<std::size_t>(cfg.n_states) * R);
  for (int& next : p.next_state_table) next = static_cast<int>(rng.index(static_cast<std::size_t>(cfg.n_states)));
  return p;
}

StepResult step(const ModelParams& params, const ModelConfig& cfg, int state, const Vector& f_t, Rng* rng,
                bool stochastic) {
  if (state < 0 || state >= cfg.n_states) throw InvalidArgument("step: state " + std::to_string(state) + " out of range");
  if (f_t.size() != cfg.feature_dim) throw InvalidArgument("step: feature has wrong dimension");
  if (stochastic && rng == nullptr) throw InvalidArgument("step: stochastic step needs an rng");
  const int R = cfg.rules_per_state;
  Vector s = params.state_embeddings.row(state).transpose();
  Vector sf(s.size() + f_t.size());
  sf << s, f_t;
  const auto& rs = params.rule_selector;
  Vector logits = affine(fast_tanh(affine(sf, rs.W1, rs.b1).array()).matrix(), rs.W2, rs.b2);

  StepResult out;
  if (stochastic) {
    out.rule = static_cast<int>(gumbel_softmax_sample(logits, cfg.temperature, *rng).index);
  } else {
    out.rule = static_cast<int>(argmax(logits));
  }
  const int row = state * R + out.rule;
  out.next_state = params.next_state_table[static_cast<std::size_t>(row)];

  Vector x(sf.size() + s.size());
  x << sf, params.rule_embeddings.row(row).transpose();
  const auto& ah = params.action_head;
  out.action_dist = softmax(affine(fast_tanh(affine(x, ah.W1, ah.b1).array()).matrix(), ah.W2, ah.b2));
  return out;
}

RolloutEngine::RolloutEngine(const ModelParams& params, const ModelConfig& cfg) : params_(params), cfg_(cfg) {
  const int S = cfg.state_dim;
  const auto& rs = params.rule_selector;
  const auto& ah = params.action_head;
  rule_state_ = params.state_embeddings * rs.W1.leftCols(S).transpose();
  rule_state_.rowwise() += rs.b1.row(0);
  action_state_ = params.state_embeddings * ah.W1.leftCols(S).transpose();
  action_state_.rowwise() += ah.b1.row(0);
  action_rule_ = params.rule_embeddings * ah.W1.rightCols(S).transpose();
}

RolloutEngine::VideoCache RolloutEngine::prepare(const Matrix& features) const {
  if (features.cols() != cfg_.feature_dim) throw InvalidArgument("RolloutEngine: feature dim mismatch");
  const int S = cfg_.state_dim;
  const int D = cfg_.feature_dim;
  VideoCache c;
  c.rule_feature = features * params_.rule_selector.W1.middleCols(S, D).transpose();
  c.action_feature = features * params_.action_head.W1.middleCols(S, D).transpose();
  return c;
}

Rollout RolloutEngine::run(const VideoCache& cache, Rng* rng) const {
  const Eigen::Index T = cache.rule_feature.rows();
  const int R = cfg_.rules_per_state;
  const int K = cfg_.num_symbols();
  const auto& rs = params_.rule_selector;
  const auto& ah = params_.action_head;

  Rollout out;
  out.symbols.resize(static_cast<std::size_t>(T));
  out.rule_choices.resize(static_cast<std::size_t>(T));
  out.state_path.resize(static_cast<std::size_t>(T) + 1);
  out.action_dists.resize(T, K);
  out.gumbel_noise = Matrix::Zero(T, R);

  RowVector hidden(cfg_.hidden_dim);
  RowVector rule_logits(R);
  RowVector action_logits(K);
  int state = 0;
  out.state_path[0] = state;
  for (Eigen::Index t = 0; t < T; ++t) {
    hidden = fast_tanh((rule_state_.row(state) + cache.rule_feature.row(t)).array());
    rule_logits.noalias() = hidden * rs.W2.transpose();
    rule_logits += rs.b2.row(0);
    if (rng) {
      for (int r = 0; r < R; ++r) out.gumbel_noise(t, r) = rng->gumbel();
      rule_logits += out.gumbel_noise.row(t);
    }
    Eigen::Index rule = 0;
    rule_logits.maxCoeff(&rule);
    const Eigen::Index row = state * R + rule;

    hidden = fast_tanh((action_state_.row(state) + cache.action_feature.row(t) + action_rule_.row(row)).array());
    action_logits.noalias() = hidden * ah.W2.transpose();
    action_logits += ah.b2.row(0);
    Eigen::Index symbol = 0;
    const double top = action_logits.maxCoeff(&symbol);
    auto dist = out.action_dists.row(t);
    dist = (action_logits.array() - top).exp().matrix();
    dist /= dist.sum();

    const auto ti = static_cast<std::size_t>(t);
    out.symbols[ti] = static_cast<int>(symbol);
    out.rule_choices[ti] = static_cast<int>(rule);
    state = params_.next_state_table[static_cast<std::size_t>(row)];
    out.state_path[ti + 1] = state;
  }
  return out;
}

std::vector<Rollout> generate_candidates(const ModelParams& params, const ModelConfig& cfg, const Matrix& features,
                                         int M, const Rng& rng, bool stochastic) {
  if (M < 1) throw InvalidArgument("generate_candidates: M must be >= 1");
  RolloutEngine engine(params, cfg);
  const auto cache = engine.prepare(features);
  std::vector<Rollout> out;
  out.reserve(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    Rng sub = rng.split(static_cast<std::uint64_t>(m));
    out.push_back(engine.run(cache, stochastic ? &sub : nullptr));
  }
  return out;
}

Rollout greedy_segment(const ModelParams& params, const ModelConfig& cfg, const Matrix& features) {
  RolloutEngine engine(params, cfg);
  return engine.run(engine.prepare(features), nullptr);
}

Matrix classification_hidden(const ModelParams& params, const Matrix& features) {
  const auto& ch = params.classification_head;
  if (features.cols() != ch.W1.cols()) throw InvalidArgument("classify_frames: feature dim mismatch");
  Matrix h = features * ch.W1.transpose();
  h.rowwise() += ch.b1.row(0);
  return fast_tanh(h.array()).matrix();
}

Matrix classify_frames(const ModelParams& params, const Matrix& features) {
  const auto& ch = params.classification_head;
  Matrix logits = classification_hidden(params, features) * ch.W2.transpose();
  logits.rowwise() += ch.b2.row(0);
  return softmax_rows(logits);
}

}  // namespace segdiscover
