#include "semv2x/probe.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "semv2x/csv.hpp"
#include "semv2x/errors.hpp"
#include "semv2x/rng.hpp"

namespace semv2x {

// --- parameters ---------------------------------------------------------------

ProbeParams ProbeParams::zeros(std::size_t dim, std::size_t classes, std::size_t hidden,
                               Activation act) {
  ProbeParams p;
  p.query.assign(dim, 0.0);
  p.w_key = Matrix(dim, dim);
  p.w_value = Matrix(dim, dim);
  p.w_mlp1 = Matrix(dim, hidden);
  p.b_mlp1.assign(hidden, 0.0);
  p.w_mlp2 = Matrix(hidden, dim);
  p.b_mlp2.assign(dim, 0.0);
  p.w_cls = Matrix(dim, classes);
  p.b_cls.assign(classes, 0.0);
  p.activation = act;
  return p;
}

std::vector<std::span<double>> ProbeParams::tensors() {
  return {query, w_key.values(), w_value.values(), w_mlp1.values(), b_mlp1,
          w_mlp2.values(), b_mlp2, w_cls.values(), b_cls};
}

std::vector<std::span<const double>> ProbeParams::tensors() const {
  return {query, w_key.values(), w_value.values(), w_mlp1.values(), b_mlp1,
          w_mlp2.values(), b_mlp2, w_cls.values(), b_cls};
}

std::size_t ProbeParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

ProbeParams init_probe(std::size_t dim, std::size_t classes, std::size_t hidden, Activation act,
                       std::uint64_t seed) {
  if (dim == 0 || classes == 0 || hidden == 0) throw DomainError("init_probe: empty shape");
  ProbeParams p = ProbeParams::zeros(dim, classes, hidden, act);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  auto fill = [&](std::span<double> t) {
    for (auto& v : t) v = rng.uniform(-bound, bound);
  };
  fill(p.query);
  fill(p.w_key.values());
  fill(p.w_value.values());
  fill(p.w_mlp1.values());
  fill(p.w_mlp2.values());
  fill(p.w_cls.values());
  return p;
}

ProbeParams init_probe(const ProbeSpec& spec, std::size_t dim, std::uint64_t seed) {
  const auto hidden = spec.hidden_dim > 0 ? static_cast<std::size_t>(spec.hidden_dim) : dim;
  return init_probe(dim, static_cast<std::size_t>(spec.n_classes), hidden, spec.activation, seed);
}

// --- forward ------------------------------------------------------------------

namespace {

void check_tokens(const TokenMatrix& tokens, std::size_t dim) {
  if (tokens.rows() == 0) throw DomainError("attention over an empty token matrix");
  if (tokens.cols() != dim)
    throw DomainError("token dimension " + std::to_string(tokens.cols()) +
                      " does not match query dimension " + std::to_string(dim));
  if (!all_finite(tokens.values())) throw DomainError("non-finite token embedding");
}

void check_shapes(const ProbeParams& p) {
  const auto d = p.dim(), h = p.hidden(), c = p.classes();
  if (p.w_key.rows() != d || p.w_key.cols() != d || p.w_value.rows() != d ||
      p.w_value.cols() != d || p.w_mlp1.rows() != d || p.w_mlp1.cols() != h ||
      p.w_mlp2.rows() != h || p.w_mlp2.cols() != d || p.b_mlp2.size() != d ||
      p.w_cls.rows() != d || p.w_cls.cols() != c)
    throw DomainError("probe parameters have inconsistent shapes");
}

// weights = softmax(Z key / sqrt(D)); mixed = weights^T Z.
AttentionResult attend(const TokenMatrix& tokens, std::span<const double> key) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(tokens.cols()));
  std::vector<double> scores(tokens.rows());
  for (std::size_t i = 0; i < tokens.rows(); ++i) scores[i] = dot(tokens.row(i), key) * inv_sqrt_d;
  AttentionResult r;
  r.weights = softmax(scores);
  r.pooled = vec_mat(r.weights, tokens);
  return r;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

double activate(Activation a, double x) {
  if (a == Activation::RELU) return x > 0.0 ? x : 0.0;
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
}

double activate_grad(Activation a, double x) {
  if (a == Activation::RELU) return x > 0.0 ? 1.0 : 0.0;
  const double inner = kGeluC * (x + 0.044715 * x * x * x);
  const double t = std::tanh(inner);
  const double dinner = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner;
}

struct HeadTrace {
  std::vector<double> pre;      // pooled W1 + b1
  std::vector<double> hidden;   // act(pre)
  std::vector<double> feature;  // hidden W2 + b2
  HeadOutput out;
};

HeadTrace run_head(const ProbeParams& p, std::span<const double> pooled) {
  if (pooled.size() != p.dim()) throw DomainError("pooled vector has the wrong dimension");
  HeadTrace t;
  t.pre = vec_mat(pooled, p.w_mlp1);
  for (std::size_t j = 0; j < t.pre.size(); ++j) t.pre[j] += p.b_mlp1[j];
  t.hidden.resize(t.pre.size());
  for (std::size_t j = 0; j < t.pre.size(); ++j) t.hidden[j] = activate(p.activation, t.pre[j]);
  t.feature = vec_mat(t.hidden, p.w_mlp2);
  for (std::size_t j = 0; j < t.feature.size(); ++j) t.feature[j] += p.b_mlp2[j];
  t.out.logits = vec_mat(t.feature, p.w_cls);
  for (std::size_t j = 0; j < t.out.logits.size(); ++j) t.out.logits[j] += p.b_cls[j];
  t.out.probs = softmax(t.out.logits);
  return t;
}

}  // namespace

AttentionResult cross_attention(std::span<const double> query, const TokenMatrix& tokens) {
  check_tokens(tokens, query.size());
  if (!all_finite(query)) throw DomainError("non-finite query");
  return attend(tokens, query);
}

AttentionResult probe_pool(const ProbeParams& params, const TokenMatrix& tokens) {
  check_shapes(params);
  check_tokens(tokens, params.dim());
  // (Z Wk) q = Z (Wk q) and weights^T (Z Wv) = (weights^T Z) Wv.
  const auto key = mat_vec(params.w_key, params.query);
  auto r = attend(tokens, key);
  r.pooled = vec_mat(r.pooled, params.w_value);
  return r;
}

HeadOutput probe_head(const ProbeParams& params, std::span<const double> pooled) {
  check_shapes(params);
  return run_head(params, pooled).out;
}

ProbeOutput probe_forward(const ProbeParams& params, const TokenMatrix& tokens) {
  auto pool = probe_pool(params, tokens);
  auto head = run_head(params, pool.pooled).out;
  return {std::move(pool.pooled), std::move(pool.weights), std::move(head.logits),
          std::move(head.probs)};
}

double probe_loss(const ProbeParams& params, const TokenMatrix& tokens, std::size_t label) {
  const auto out = probe_forward(params, tokens);
  if (label >= out.probs.size()) throw DomainError("label out of range");
  // log-softmax directly, so saturated probabilities do not yield -log(0).
  const double hi = *std::max_element(out.logits.begin(), out.logits.end());
  double total = 0.0;
  for (double z : out.logits) total += std::exp(z - hi);
  return -(out.logits[label] - hi - std::log(total));
}

// --- backward -----------------------------------------------------------------

ProbeGrads probe_backward(const ProbeParams& params, const TokenMatrix& tokens, std::size_t label,
                          double* loss) {
  check_shapes(params);
  check_tokens(tokens, params.dim());
  if (label >= params.classes()) throw DomainError("label out of range");

  const std::size_t d = params.dim();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  // Forward, keeping intermediates.
  const auto key = mat_vec(params.w_key, params.query);  // Wk q
  const auto att = attend(tokens, key);                   // weights, mixed = weights^T Z
  const auto& weights = att.weights;
  const auto& mixed = att.pooled;
  const auto pooled = vec_mat(mixed, params.w_value);
  const auto head = run_head(params, pooled);

  if (loss != nullptr) {
    const auto& z = head.out.logits;
    const double hi = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double v : z) total += std::exp(v - hi);
    *loss = -(z[label] - hi - std::log(total));
  }

  ProbeGrads g = ProbeParams::zeros(d, params.classes(), params.hidden(), params.activation);

  // Classifier: dlogits = probs - onehot.
  auto dlogits = head.out.probs;
  dlogits[label] -= 1.0;
  add_outer(g.w_cls, head.feature, dlogits);
  g.b_cls = dlogits;
  const auto dfeature = mat_vec(params.w_cls, dlogits);

  // MLP.
  add_outer(g.w_mlp2, head.hidden, dfeature);
  g.b_mlp2 = dfeature;
  auto dpre = mat_vec(params.w_mlp2, dfeature);
  for (std::size_t j = 0; j < dpre.size(); ++j) dpre[j] *= activate_grad(params.activation, head.pre[j]);
  add_outer(g.w_mlp1, pooled, dpre);
  g.b_mlp1 = dpre;
  const auto dpooled = mat_vec(params.w_mlp1, dpre);

  // Value projection: pooled = mixed Wv.
  add_outer(g.w_value, mixed, dpooled);
  const auto dmixed = mat_vec(params.w_value, dpooled);

  // Softmax over scores s_i = z_i . key / sqrt(D), mixed = sum_i w_i z_i.
  std::vector<double> dweights(tokens.rows());
  for (std::size_t i = 0; i < tokens.rows(); ++i) dweights[i] = dot(tokens.row(i), dmixed);
  const double mean_dw = dot(weights, dweights);
  std::vector<double> dscores(tokens.rows());
  for (std::size_t i = 0; i < tokens.rows(); ++i)
    dscores[i] = weights[i] * (dweights[i] - mean_dw) * inv_sqrt_d;
  // dkey = Z^T dscores; key = Wk q.
  const auto dkey = vec_mat(dscores, tokens);
  add_outer(g.w_key, dkey, params.query);
  g.query = vec_mat(dkey, params.w_key);
  return g;
}

// --- classification -------------------------------------------------------------

std::size_t argmax(std::span<const double> probs) {
  if (probs.empty()) throw DomainError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[best]) best = i;
  return best;
}

Classification classify(const ProbeParams& params, const TokenMatrix& tokens) {
  auto out = probe_forward(params, tokens);
  return {argmax(out.probs), std::move(out.probs)};
}

Classification classify_pooled(const ProbeParams& params, std::span<const double> pooled) {
  auto out = probe_head(params, pooled);
  return {argmax(out.probs), std::move(out.probs)};
}

// --- training -------------------------------------------------------------------

double mean_loss(const ProbeParams& params, std::span<const Sample> data) {
  if (data.empty()) throw DomainError("mean_loss over an empty dataset");
  double total = 0.0;
  for (const auto& s : data) total += probe_loss(params, s.tokens, s.label);
  return total / static_cast<double>(data.size());
}

double accuracy(const ProbeParams& params, std::span<const Sample> data) {
  if (data.empty()) throw DomainError("accuracy over an empty dataset");
  std::size_t hits = 0;
  for (const auto& s : data) hits += classify(params, s.tokens).label == s.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult train_probe(std::span<const Sample> data, ProbeParams init, const TrainSpec& spec) {
  if (data.empty()) throw DomainError("train_probe: empty dataset");
  for (const auto& s : data)
    if (s.label >= init.classes()) throw DomainError("train_probe: label out of range");
  if (spec.batch < 1) throw DomainError("train_probe: batch must be >= 1");

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  TrainResult result{std::move(init), {}};
  auto& params = result.params;

  auto m = ProbeParams::zeros(params.dim(), params.classes(), params.hidden());
  auto v = m;
  auto p_t = params.tensors();
  auto m_t = m.tensors();
  auto v_t = v.tensors();

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(spec.batch);
  std::int64_t step = 0;

  for (std::int64_t epoch = 0; epoch < spec.epochs; ++epoch) {
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order.begin(), order.end());

    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      auto grad = ProbeParams::zeros(params.dim(), params.classes(), params.hidden());
      auto g_t = grad.tensors();
      for (std::size_t k = start; k < stop; ++k) {
        const auto& s = data[order[k]];
        const auto g = probe_backward(params, s.tokens, s.label);
        const auto gs = g.tensors();
        for (std::size_t t = 0; t < g_t.size(); ++t)
          for (std::size_t i = 0; i < g_t[t].size(); ++i) g_t[t][i] += gs[t][i];
      }
      const double inv_n = 1.0 / static_cast<double>(stop - start);

      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t t = 0; t < p_t.size(); ++t) {
        for (std::size_t i = 0; i < p_t[t].size(); ++i) {
          const double gi = g_t[t][i] * inv_n;
          m_t[t][i] = beta1 * m_t[t][i] + (1.0 - beta1) * gi;
          v_t[t][i] = beta2 * v_t[t][i] + (1.0 - beta2) * gi * gi;
          const double update = (m_t[t][i] / c1) / (std::sqrt(v_t[t][i] / c2) + eps);
          p_t[t][i] -= spec.lr * (update + spec.weight_decay * p_t[t][i]);
        }
      }
    }
    result.loss_history.push_back(mean_loss(params, data));
  }
  return result;
}

// --- checkpoint -----------------------------------------------------------------

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ProbeParams& params) {
  put_u64(out, params.dim());
  put_u64(out, params.classes());
  put_u64(out, params.hidden());
  for (const auto& t : params.tensors())
    for (double x : t) put_u64(out, std::bit_cast<std::uint64_t>(x));
}

ProbeParams read_checkpoint(std::istream& in, Activation act) {
  const auto d = get_u64(in), c = get_u64(in), h = get_u64(in);
  constexpr std::uint64_t kMaxDim = 1 << 20;
  if (d == 0 || c == 0 || h == 0 || d > kMaxDim || c > kMaxDim || h > kMaxDim)
    throw FormatError("checkpoint header has an invalid shape");
  auto p = ProbeParams::zeros(d, c, h, act);
  for (auto t : p.tensors())
    for (auto& x : t) x = std::bit_cast<double>(get_u64(in));
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint has trailing bytes");
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ProbeParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(out, params);
}

ProbeParams load_checkpoint(const std::filesystem::path& path, Activation act) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path.string() + "'");
  return read_checkpoint(in, act);
}

std::string loss_history_csv(std::span<const double> history) {
  CsvWriter csv({"epoch", "loss"});
  for (std::size_t e = 0; e < history.size(); ++e)
    csv.row({std::to_string(e + 1), fmt_sig(history[e], 17)});
  return csv.str();
}

}  // namespace semv2x
