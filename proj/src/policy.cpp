#include "mbpg/policy.hpp"

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

namespace mbpg {

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::TabularSoftmax: return "tabular-softmax";
    case PolicyKind::LinearSoftmax: return "linear-softmax";
    case PolicyKind::MlpSoftmax: return "mlp-softmax";
    case PolicyKind::LinearGaussian: return "linear-gaussian";
    case PolicyKind::MlpGaussian: return "mlp-gaussian";
  }
  return "unknown";
}

PolicyKind policy_kind_from_string(const std::string& name) {
  for (auto k : {PolicyKind::TabularSoftmax, PolicyKind::LinearSoftmax, PolicyKind::MlpSoftmax,
                 PolicyKind::LinearGaussian, PolicyKind::MlpGaussian})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown policy kind: " + name);
}

void PolicyArchitecture::validate() const {
  if (input_dim < 1) throw ConfigError("policy input dimension must be >= 1");
  if (action_dim < 1) throw ConfigError("policy action dimension must be >= 1");
  const bool mlp = kind == PolicyKind::MlpSoftmax || kind == PolicyKind::MlpGaussian;
  if (mlp && hidden.empty()) throw ConfigError("mlp policies need at least one hidden layer");
  if (!mlp && !hidden.empty()) throw ConfigError("hidden layers given for a non-mlp policy");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden layer widths must be >= 1");
}

void Policy::check_dim(const ParamVector& theta) const {
  if (theta.size() != dim())
    throw ParameterShapeError("parameter vector has dimension " + std::to_string(theta.size()) +
                              ", policy expects " + std::to_string(dim()));
}

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;  // log(2 pi)

/// Log-softmax via the shifted log-sum-exp.
Vector log_softmax(const Vector& logits) {
  const double max = logits.maxCoeff();
  const double lse = max + std::log((logits.array() - max).exp().sum());
  return logits.array() - lse;
}

int sample_categorical(const Vector& probs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

// Fully connected tanh network with a linear output layer. Parameters are laid
// out per layer as W (row-major, out x in) followed by b.
class Mlp {
 public:
  Mlp(int input, const std::vector<int>& hidden, int output) {
    sizes_.push_back(input);
    for (int h : hidden) sizes_.push_back(h);
    sizes_.push_back(output);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(dim_);
      dim_ += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
    }
  }

  int dim() const { return dim_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }

  struct Cache {
    std::vector<Vector> activations;  // input, hidden tanh outputs..., final linear output
  };

  Vector forward(const double* theta, const Vector& x, Cache* cache = nullptr) const {
    Vector a = x;
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(a);
    }
    const std::size_t layers = offsets_.size();
    for (std::size_t l = 0; l < layers; ++l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      const double* p = theta + offsets_[l];
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
          p, out, in);
      Eigen::Map<const Vector> b(p + out * in, out);
      Vector z = W * a + b;
      if (l + 1 < layers) z = z.array().tanh();
      a = std::move(z);
      if (cache) cache->activations.push_back(a);
    }
    return a;
  }

  /// Accumulates d(output . upstream)/d theta into grad.
  void backward(const double* theta, const Cache& cache, Vector upstream, double* grad) const {
    const std::size_t layers = offsets_.size();
    for (std::size_t l = layers; l-- > 0;) {
      const int in = sizes_[l], out = sizes_[l + 1];
      const double* p = theta + offsets_[l];
      double* g = grad + offsets_[l];
      const Vector& input = cache.activations[l];
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gW(g, out,
                                                                                              in);
      Eigen::Map<Vector> gb(g + out * in, out);
      gW.noalias() += upstream * input.transpose();
      gb += upstream;
      if (l == 0) break;
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
          p, out, in);
      Vector down = W.transpose() * upstream;
      // input is tanh(z) for hidden layers
      upstream = down.array() * (1.0 - input.array().square());
    }
  }

  void initialize(double* theta, Rng& rng) const {
    for (std::size_t l = 0; l < offsets_.size(); ++l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      double* p = theta + offsets_[l];
      for (int i = 0; i < out * in; ++i) p[i] = dist(rng);
      for (int i = 0; i < out; ++i) p[out * in + i] = 0.0;
    }
  }

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  int dim_ = 0;
};

// ---------------------------------------------------------------------------

class TabularSoftmaxPolicy final : public Policy {
 public:
  explicit TabularSoftmaxPolicy(PolicyArchitecture arch) : arch_(std::move(arch)) {}

  const PolicyArchitecture& architecture() const override { return arch_; }
  int dim() const override { return arch_.input_dim * arch_.action_dim; }

  ParamVector initial_parameters(Rng&) const override { return ParamVector::Zero(dim()); }

  double log_prob(const ParamVector& theta, const Observation& s, const Action& a) const override {
    check_dim(theta);
    check_action(a);
    return log_softmax(logits(theta, s))[a.id];
  }

  std::pair<Action, double> sample(const ParamVector& theta, const Observation& s,
                                   Rng& rng) const override {
    check_dim(theta);
    const Vector lp = log_softmax(logits(theta, s));
    const int a = sample_categorical(lp.array().exp(), rng);
    return {Action::discrete(a), lp[a]};
  }

  ParamVector score(const ParamVector& theta, const Observation& s, const Action& a) const override {
    check_dim(theta);
    check_action(a);
    const int state = state_index(s);
    const Vector pi = log_softmax(logits(theta, s)).array().exp();
    ParamVector g = ParamVector::Zero(dim());
    g.segment(state * arch_.action_dim, arch_.action_dim) = -pi;
    g[state * arch_.action_dim + a.id] += 1.0;
    return g;
  }

  std::optional<Matrix> log_prob_hessian(const ParamVector& theta, const Observation& s,
                                         const Action& a) const override {
    check_dim(theta);
    check_action(a);
    const int state = state_index(s);
    const Vector pi = log_softmax(logits(theta, s)).array().exp();
    Matrix h = Matrix::Zero(dim(), dim());
    const int n = arch_.action_dim;
    h.block(state * n, state * n, n, n) = pi * pi.transpose();
    h.block(state * n, state * n, n, n).diagonal() -= pi;
    return h;
  }

  std::optional<Vector> action_probabilities(const ParamVector& theta,
                                             const Observation& s) const override {
    check_dim(theta);
    return Vector(log_softmax(logits(theta, s)).array().exp());
  }

 private:
  int state_index(const Observation& s) const {
    if (s.index < 0 || s.index >= arch_.input_dim)
      throw DomainError("tabular policy needs a state index in [0, " +
                        std::to_string(arch_.input_dim) + ")");
    return s.index;
  }
  void check_action(const Action& a) const {
    if (a.id < 0 || a.id >= arch_.action_dim)
      throw DomainError("action id out of range: " + std::to_string(a.id));
  }
  Vector logits(const ParamVector& theta, const Observation& s) const {
    return theta.segment(state_index(s) * arch_.action_dim, arch_.action_dim);
  }

  PolicyArchitecture arch_;
};

class NetworkSoftmaxPolicy final : public Policy {
 public:
  explicit NetworkSoftmaxPolicy(PolicyArchitecture arch)
      : arch_(std::move(arch)), net_(arch_.input_dim, arch_.hidden, arch_.action_dim) {}

  const PolicyArchitecture& architecture() const override { return arch_; }
  int dim() const override { return net_.dim(); }

  ParamVector initial_parameters(Rng& rng) const override {
    ParamVector theta(dim());
    net_.initialize(theta.data(), rng);
    return theta;
  }

  double log_prob(const ParamVector& theta, const Observation& s, const Action& a) const override {
    check_dim(theta);
    check_action(a);
    return log_softmax(net_.forward(theta.data(), features(s)))[a.id];
  }

  std::pair<Action, double> sample(const ParamVector& theta, const Observation& s,
                                   Rng& rng) const override {
    check_dim(theta);
    const Vector lp = log_softmax(net_.forward(theta.data(), features(s)));
    const int a = sample_categorical(lp.array().exp(), rng);
    return {Action::discrete(a), lp[a]};
  }

  ParamVector score(const ParamVector& theta, const Observation& s, const Action& a) const override {
    check_dim(theta);
    check_action(a);
    Mlp::Cache cache;
    const Vector out = net_.forward(theta.data(), features(s), &cache);
    Vector upstream = -Vector(log_softmax(out).array().exp());
    upstream[a.id] += 1.0;
    ParamVector g = ParamVector::Zero(dim());
    net_.backward(theta.data(), cache, std::move(upstream), g.data());
    return g;
  }

  std::optional<Vector> action_probabilities(const ParamVector& theta,
                                             const Observation& s) const override {
    check_dim(theta);
    return Vector(log_softmax(net_.forward(theta.data(), features(s))).array().exp());
  }

 private:
  const Vector& features(const Observation& s) const {
    if (s.features.size() != net_.input_dim())
      throw ParameterShapeError("observation has " + std::to_string(s.features.size()) +
                                " features, policy expects " + std::to_string(net_.input_dim()));
    return s.features;
  }
  void check_action(const Action& a) const {
    if (a.id < 0 || a.id >= arch_.action_dim)
      throw DomainError("action id out of range: " + std::to_string(a.id));
  }

  PolicyArchitecture arch_;
  Mlp net_;
};

// Diagonal Gaussian: mean from a linear map or MLP, state-independent log-std
// appended after the network parameters.
class GaussianPolicy final : public Policy {
 public:
  explicit GaussianPolicy(PolicyArchitecture arch)
      : arch_(std::move(arch)), net_(arch_.input_dim, arch_.hidden, arch_.action_dim) {}

  const PolicyArchitecture& architecture() const override { return arch_; }
  int dim() const override { return net_.dim() + arch_.action_dim; }

  ParamVector initial_parameters(Rng& rng) const override {
    ParamVector theta = ParamVector::Zero(dim());
    net_.initialize(theta.data(), rng);
    return theta;
  }

  double log_prob(const ParamVector& theta, const Observation& s, const Action& a) const override {
    check_dim(theta);
    check_action(a);
    const Vector mean = net_.forward(theta.data(), features(s));
    const auto log_std = theta.tail(arch_.action_dim).array();
    const auto z = (a.value - mean).array() / log_std.exp();
    return (-0.5 * z.square() - log_std - 0.5 * kLogTwoPi).sum();
  }

  std::pair<Action, double> sample(const ParamVector& theta, const Observation& s,
                                   Rng& rng) const override {
    check_dim(theta);
    const Vector mean = net_.forward(theta.data(), features(s));
    const Vector log_std = theta.tail(arch_.action_dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector noise(arch_.action_dim);
    for (int i = 0; i < arch_.action_dim; ++i) noise[i] = normal(rng);
    Vector value = mean.array() + log_std.array().exp() * noise.array();
    const double lp = (-0.5 * noise.array().square() - log_std.array() - 0.5 * kLogTwoPi).sum();
    return {Action::continuous(std::move(value)), lp};
  }

  ParamVector score(const ParamVector& theta, const Observation& s, const Action& a) const override {
    check_dim(theta);
    check_action(a);
    Mlp::Cache cache;
    const Vector mean = net_.forward(theta.data(), features(s), &cache);
    const Vector inv_var = (-2.0 * theta.tail(arch_.action_dim).array()).exp();
    const Vector diff = a.value - mean;
    ParamVector g = ParamVector::Zero(dim());
    net_.backward(theta.data(), cache, Vector(diff.array() * inv_var.array()), g.data());
    g.tail(arch_.action_dim) = diff.array().square() * inv_var.array() - 1.0;
    return g;
  }

 private:
  const Vector& features(const Observation& s) const {
    if (s.features.size() != net_.input_dim())
      throw ParameterShapeError("observation has " + std::to_string(s.features.size()) +
                                " features, policy expects " + std::to_string(net_.input_dim()));
    return s.features;
  }
  void check_action(const Action& a) const {
    if (a.value.size() != arch_.action_dim || !a.value.allFinite())
      throw DomainError("continuous action must be a finite vector of dimension " +
                        std::to_string(arch_.action_dim));
  }

  PolicyArchitecture arch_;
  Mlp net_;
};

}  // namespace

std::shared_ptr<const Policy> make_policy(const PolicyArchitecture& arch) {
  arch.validate();
  switch (arch.kind) {
    case PolicyKind::TabularSoftmax:
      return std::make_shared<TabularSoftmaxPolicy>(arch);
    case PolicyKind::LinearSoftmax:
    case PolicyKind::MlpSoftmax:
      return std::make_shared<NetworkSoftmaxPolicy>(arch);
    case PolicyKind::LinearGaussian:
    case PolicyKind::MlpGaussian:
      return std::make_shared<GaussianPolicy>(arch);
  }
  throw ConfigError("unsupported policy architecture");
}

ParamVector trajectory_score(const Policy& policy, const ParamVector& theta, const Trajectory& traj) {
  policy.check_dim(theta);
  ParamVector total = ParamVector::Zero(policy.dim());
  for (const auto& s : traj.steps) total += policy.score(theta, s.state, s.action);
  return total;
}

double trajectory_log_prob(const Policy& policy, const ParamVector& theta, const Trajectory& traj) {
  double total = 0.0;
  for (const auto& s : traj.steps) total += policy.log_prob(theta, s.state, s.action);
  return total;
}

std::string checkpoint_to_json(const PolicyArchitecture& arch, const ParamVector& theta) {
  nlohmann::json j;
  j["architecture"] = {{"kind", to_string(arch.kind)},
                       {"input_dim", arch.input_dim},
                       {"action_dim", arch.action_dim},
                       {"hidden", arch.hidden}};
  j["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
  return j.dump();
}

std::pair<PolicyArchitecture, ParamVector> checkpoint_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    PolicyArchitecture arch;
    const auto& a = j.at("architecture");
    arch.kind = policy_kind_from_string(a.at("kind").get<std::string>());
    arch.input_dim = a.at("input_dim").get<int>();
    arch.action_dim = a.at("action_dim").get<int>();
    arch.hidden = a.at("hidden").get<std::vector<int>>();
    const auto values = j.at("theta").get<std::vector<double>>();
    ParamVector theta = Eigen::Map<const ParamVector>(values.data(), static_cast<Eigen::Index>(values.size()));
    auto policy = make_policy(arch);
    policy->check_dim(theta);
    if (!theta.allFinite()) throw ConfigError("checkpoint contains non-finite parameters");
    return {arch, theta};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace mbpg
