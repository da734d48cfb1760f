#pragma once

#include <string>
#include <vector>

#include "segdiscover/numcore/functions.hpp"
#include "segdiscover/numcore/matrix.hpp"
#include "segdiscover/numcore/rng.hpp"
#include "segdiscover/numcore/tape.hpp"

namespace segdiscover {

struct ModelConfig {
  int n_states = 50;
  int rules_per_state = 3;
  int k = 5;
  bool use_null = false;
  int state_dim = 64;
  int hidden_dim = 64;
  int feature_dim = 16;
  double temperature = 1.0;
  int M = 32;

  /// Output classes of both heads: k actions plus the optional null symbol.
  int num_symbols() const { return k + (use_null ? 1 : 0); }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Two affine layers with a tanh in between. Biases are 1 x n rows.
template <typename Scalar>
struct Mlp {
  MatrixX<Scalar> W1, b1, W2, b2;

  template <typename T>
  Mlp<T> cast() const {
    return {W1.template cast<T>(), b1.template cast<T>(), W2.template cast<T>(), b2.template cast<T>()};
  }
};

/// Learnable arrays of the state model plus the fixed transition table.
///
/// A rule r of state s emits an action distribution computed from
/// [state_emb(s) | f_t | rule_emb(s, r)] and moves to
/// next_state_table[s * rules_per_state + r].
template <typename Scalar>
struct BasicModelParams {
  MatrixX<Scalar> state_embeddings;  // n_states x state_dim
  MatrixX<Scalar> rule_embeddings;   // (n_states * rules_per_state) x state_dim
  Mlp<Scalar> rule_selector;         // [state | feature] -> rule logits
  Mlp<Scalar> action_head;           // [state | feature | rule] -> symbol logits
  Mlp<Scalar> classification_head;   // feature -> symbol logits
  std::vector<int> next_state_table;

  /// Visits learnable arrays in their fixed serialization order.
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  template <typename T>
  BasicModelParams<T> cast() const {
    return {state_embeddings.template cast<T>(), rule_embeddings.template cast<T>(),
            rule_selector.template cast<T>(),    action_head.template cast<T>(),
            classification_head.template cast<T>(), next_state_table};
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& p, F& f) {
    f("state_embeddings", p.state_embeddings);
    f("rule_embeddings", p.rule_embeddings);
    for (auto [name, mlp] : {std::pair{"rule_selector", &p.rule_selector}, std::pair{"action_head", &p.action_head},
                             std::pair{"classification_head", &p.classification_head}}) {
      const std::string n(name);
      f(n + ".W1", mlp->W1);
      f(n + ".b1", mlp->b1);
      f(n + ".W2", mlp->W2);
      f(n + ".b2", mlp->b2);
    }
  }
};

using ModelParams = BasicModelParams<double>;

bool operator==(const ModelParams& a, const ModelParams& b);

ModelParams init_model(const ModelConfig& cfg, Rng& rng);

std::vector<Matrix*> param_pointers(ModelParams& p);
std::vector<const Matrix*> param_pointers(const ModelParams& p);

template <typename Scalar>
VectorX<Scalar> flatten(const BasicModelParams<Scalar>& p) {
  Eigen::Index n = 0;
  p.visit([&](const std::string&, const MatrixX<Scalar>& m) { n += m.size(); });
  VectorX<Scalar> out(n);
  Eigen::Index at = 0;
  p.visit([&](const std::string&, const MatrixX<Scalar>& m) {
    out.segment(at, m.size()) = m.template reshaped<Eigen::RowMajor>();
    at += m.size();
  });
  return out;
}

/// Overwrites the learnable arrays of p (shapes kept) from a flat vector.
template <typename Scalar>
void unflatten(const VectorX<Scalar>& flat, BasicModelParams<Scalar>& p) {
  Eigen::Index at = 0;
  p.visit([&](const std::string&, MatrixX<Scalar>& m) {
    m = flat.segment(at, m.size()).template reshaped<Eigen::RowMajor>(m.rows(), m.cols());
    at += m.size();
  });
  if (at != flat.size()) throw InvalidArgument("unflatten: size mismatch");
}

/// One pass of the model over a video.
struct Rollout {
  std::vector<int> symbols;       // argmax of each action_dists row
  Matrix action_dists;            // T x num_symbols
  std::vector<int> rule_choices;  // T
  std::vector<int> state_path;    // T + 1, starts at state 0
  Matrix gumbel_noise;            // T x rules_per_state; zero for greedy passes

  int length() const { return static_cast<int>(symbols.size()); }
};

struct StepResult {
  Vector action_dist;
  int rule = 0;
  int next_state = 0;
};

/// Single transition from `state` on frame feature f_t. Rules are sampled
/// with Gumbel noise when `stochastic`, otherwise the most probable rule is
/// taken.
StepResult step(const ModelParams& params, const ModelConfig& cfg, int state, const Vector& f_t, Rng* rng,
                bool stochastic);

/// Precomputes the per-state parts of both first layers so candidate
/// rollouts cost one hidden-width add per frame. Holds a reference to the
/// params, which must outlive it and stay unchanged.
class RolloutEngine {
 public:
  RolloutEngine(const ModelParams& params, const ModelConfig& cfg);

  struct VideoCache {
    Matrix rule_feature;    // T x hidden: feature part of the rule selector's first layer
    Matrix action_feature;  // T x hidden: feature part of the action head's first layer
  };

  VideoCache prepare(const Matrix& features) const;

  /// rng == nullptr runs greedily.
  Rollout run(const VideoCache& cache, Rng* rng) const;

 private:
  const ModelParams& params_;
  ModelConfig cfg_;
  Matrix rule_state_;    // n_states x hidden, includes bias
  Matrix action_state_;  // n_states x hidden, includes bias
  Matrix action_rule_;   // (n_states * R) x hidden
};

/// M independent stochastic rollouts; candidate m draws from rng.split(m).
std::vector<Rollout> generate_candidates(const ModelParams& params, const ModelConfig& cfg, const Matrix& features,
                                         int M, const Rng& rng, bool stochastic = true);

Rollout greedy_segment(const ModelParams& params, const ModelConfig& cfg, const Matrix& features);

/// Per-frame p(a | f_t) from the classification head, T x num_symbols.
Matrix classify_frames(const ModelParams& params, const Matrix& features);

/// Penultimate activations of the classification head, T x hidden.
Matrix classification_hidden(const ModelParams& params, const Matrix& features);

// ---- differentiable replay ---------------------------------------------

template <typename Scalar>
struct MlpVars {
  typename Tape<Scalar>::Var W1, b1, W2, b2;
};

/// Tape handles for every learnable array, in visit() order.
template <typename Scalar>
struct ParamVars {
  typename Tape<Scalar>::Var state_embeddings, rule_embeddings;
  MlpVars<Scalar> rule_selector, action_head, classification_head;

  std::vector<typename Tape<Scalar>::Var> all() const {
    std::vector<typename Tape<Scalar>::Var> v{state_embeddings, rule_embeddings};
    for (const auto* m : {&rule_selector, &action_head, &classification_head}) {
      v.insert(v.end(), {m->W1, m->b1, m->W2, m->b2});
    }
    return v;
  }
};

template <typename Scalar>
ParamVars<Scalar> bind_params(Tape<Scalar>& tape, const BasicModelParams<Scalar>& p) {
  auto bind = [&](const Mlp<Scalar>& m) {
    return MlpVars<Scalar>{tape.variable(m.W1), tape.variable(m.b1), tape.variable(m.W2), tape.variable(m.b2)};
  };
  ParamVars<Scalar> v;
  v.state_embeddings = tape.variable(p.state_embeddings);
  v.rule_embeddings = tape.variable(p.rule_embeddings);
  v.rule_selector = bind(p.rule_selector);
  v.action_head = bind(p.action_head);
  v.classification_head = bind(p.classification_head);
  return v;
}

template <typename Scalar>
typename Tape<Scalar>::Var mlp_forward(Tape<Scalar>& tape, const MlpVars<Scalar>& m, typename Tape<Scalar>::Var x,
                                       typename Tape<Scalar>::Var* hidden = nullptr) {
  auto h = tape.tanh(tape.affine(x, m.W1, m.b1));
  if (hidden) *hidden = h;
  return tape.affine(h, m.W2, m.b2);
}

template <typename Scalar>
struct RolloutVars {
  typename Tape<Scalar>::Var action_probs;  // A: T x num_symbols
  typename Tape<Scalar>::Var class_probs;   // P: T x num_symbols
  typename Tape<Scalar>::Var class_hidden;  // T x hidden
  typename Tape<Scalar>::Var rule_soft;     // T x R relaxed rule weights
};

/// Replays a recorded rollout on the tape. The state path and rule choices
/// are taken from the rollout; the chosen rule enters the action head
/// through a straight-through one-hot so the rule selector receives
/// gradient. `frozen_soft` switches the straight-through node to its
/// finite-difference-checkable form (see Tape::straight_through).
template <typename Scalar>
RolloutVars<Scalar> replay_rollout(Tape<Scalar>& tape, const ParamVars<Scalar>& pv, const ModelConfig& cfg,
                                   const MatrixX<Scalar>& features, const Rollout& rollout,
                                   const MatrixX<Scalar>* frozen_soft = nullptr) {
  const Eigen::Index T = features.rows();
  const int R = cfg.rules_per_state;
  if (rollout.length() != T) throw InvalidArgument("replay_rollout: rollout length differs from video length");
  std::vector<Eigen::Index> states(static_cast<std::size_t>(T)), bases(static_cast<std::size_t>(T));
  MatrixX<Scalar> hard = MatrixX<Scalar>::Zero(T, R);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto i = static_cast<std::size_t>(t);
    states[i] = rollout.state_path[i];
    bases[i] = states[i] * R;
    hard(t, rollout.rule_choices[i]) = Scalar(1);
  }
  auto f = tape.constant(features);
  auto s = tape.gather_rows(pv.state_embeddings, states);
  auto rule_logits = mlp_forward(tape, pv.rule_selector, tape.hconcat({s, f}));
  MatrixX<Scalar> noise = rollout.gumbel_noise.template cast<Scalar>();
  if (noise.rows() != T || noise.cols() != R) noise = MatrixX<Scalar>::Zero(T, R);
  auto soft = tape.softmax_rows(tape.scale(tape.add_constant(rule_logits, noise), Scalar(1) / Scalar(cfg.temperature)));
  auto onehot = tape.straight_through(hard, soft, frozen_soft);
  auto rule_emb = tape.mix_rows(onehot, pv.rule_embeddings, bases);
  auto action_logits = mlp_forward(tape, pv.action_head, tape.hconcat({s, f, rule_emb}));
  RolloutVars<Scalar> out;
  out.rule_soft = soft;
  out.action_probs = tape.softmax_rows(action_logits);
  out.class_probs = tape.softmax_rows(mlp_forward(tape, pv.classification_head, f, &out.class_hidden));
  return out;
}

/// Per-frame self-labeling loss of one video: cross-entropy of both the
/// rollout's action distributions and the classification rows against
/// the targets, summed over the two terms and averaged over frames.
template <typename Scalar>
typename Tape<Scalar>::Var self_label_loss(Tape<Scalar>& tape, const RolloutVars<Scalar>& rv,
                                           const std::vector<int>& targets) {
  std::vector<Eigen::Index> idx(targets.begin(), targets.end());
  auto total = tape.add(tape.cross_entropy_rows(rv.action_probs, idx), tape.cross_entropy_rows(rv.class_probs, idx));
  return tape.scale(total, Scalar(1) / Scalar(targets.size()));
}

}  // namespace segdiscover
