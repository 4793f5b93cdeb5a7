#include "nlyap/net.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "nlyap/errors.hpp"
#include "nlyap/rng.hpp"
#include "nlyap/zubov.hpp"

namespace nlyap {

namespace {

bool is_hidden(const NetParams& net, std::size_t l) { return l + 1 < net.layer_count(); }

double activate(const NetParams& net, std::size_t l, double z) {
  if (is_hidden(net, l)) return std::tanh(z);
  return net.head == OutputHead::Affine ? z : 1.0 / (1.0 + std::exp(-z));
}

// sigma' and sigma'' in terms of the activation value a = sigma(z).
double d1(const NetParams& net, std::size_t l, double a) {
  if (is_hidden(net, l)) return 1.0 - a * a;
  return net.head == OutputHead::Affine ? 1.0 : a * (1.0 - a);
}

double d2(const NetParams& net, std::size_t l, double a) {
  if (is_hidden(net, l)) return -2.0 * a * (1.0 - a * a);
  return net.head == OutputHead::Affine ? 0.0 : a * (1.0 - a) * (1.0 - 2.0 * a);
}

Interval activate(const NetParams& net, std::size_t l, const Interval& z) {
  if (is_hidden(net, l)) return tanh(z);
  if (net.head == OutputHead::Affine) return z;
  // The logistic function is increasing.
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double lo = round_down(round_down(sig(z.lo())));
  const double hi = round_up(round_up(sig(z.hi())));
  return {std::max(0.0, lo), std::min(1.0, hi)};
}

Interval d1(const NetParams& net, std::size_t l, const Interval& a) {
  if (is_hidden(net, l)) {
    const Interval s = Interval(1.0) - sqr(a);
    return {std::max(0.0, s.lo()), std::min(1.0, s.hi())};
  }
  if (net.head == OutputHead::Affine) return Interval(1.0);
  return a * (Interval(1.0) - a);
}

// Transposed mat-vec: out = Hᵀ in, H rows x cols.
void transposed_multiply(const std::vector<double>& H, std::size_t rows, std::size_t cols,
                         std::span<const double> in, std::vector<double>& out) {
  out.assign(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* h = H.data() + i * cols;
    const double s = in[i];
    for (std::size_t j = 0; j < cols; ++j) out[j] += h[j] * s;
  }
}

}  // namespace

std::string to_string(OutputHead h) { return h == OutputHead::Affine ? "affine" : "sigmoid"; }

OutputHead output_head_from_string(const std::string& s) {
  if (s == "affine") return OutputHead::Affine;
  if (s == "sigmoid") return OutputHead::Sigmoid;
  throw ArgumentError("unknown output head '" + s + "' (expected affine or sigmoid)");
}

void NetParams::validate() const {
  if (layer_dims.size() < 2) throw ArgumentError("NetParams: need at least input and output layers");
  if (layer_dims.back() != 1) throw ArgumentError("NetParams: output layer must have width 1");
  for (auto d : layer_dims)
    if (d == 0) throw ArgumentError("NetParams: zero layer width");
  const std::size_t L = layer_dims.size() - 1;
  if (weights.size() != L || biases.size() != L) throw ArgumentError("NetParams: layer count mismatch");
  for (std::size_t l = 0; l < L; ++l) {
    if (weights[l].size() != layer_dims[l + 1] * layer_dims[l])
      throw ArgumentError("NetParams: weight shape mismatch at layer " + std::to_string(l));
    if (biases[l].size() != layer_dims[l + 1])
      throw ArgumentError("NetParams: bias shape mismatch at layer " + std::to_string(l));
    for (double v : weights[l])
      if (!std::isfinite(v)) throw ArgumentError("NetParams: non-finite weight");
    for (double v : biases[l])
      if (!std::isfinite(v)) throw ArgumentError("NetParams: non-finite bias");
  }
}

std::size_t NetParams::param_count() const {
  std::size_t c = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) c += weights[l].size() + biases[l].size();
  return c;
}

std::vector<double> NetParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.insert(flat.end(), weights[l].begin(), weights[l].end());
    flat.insert(flat.end(), biases[l].begin(), biases[l].end());
  }
  return flat;
}

void NetParams::assign(std::span<const double> flat) {
  if (flat.size() != param_count()) throw ArgumentError("NetParams::assign: size mismatch");
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (auto& v : weights[l]) v = flat[k++];
    for (auto& v : biases[l]) v = flat[k++];
  }
}

NetParams NetParams::zeros(std::vector<std::size_t> dims, OutputHead head) {
  NetParams net;
  net.layer_dims = std::move(dims);
  net.head = head;
  if (net.layer_dims.size() < 2) throw ArgumentError("NetParams: need at least two layers");
  for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
    net.weights.emplace_back(net.layer_dims[l + 1] * net.layer_dims[l], 0.0);
    net.biases.emplace_back(net.layer_dims[l + 1], 0.0);
  }
  net.validate();
  return net;
}

NetParams NetParams::xavier(std::vector<std::size_t> dims, std::uint64_t seed, OutputHead head) {
  NetParams net = zeros(std::move(dims), head);
  Rng rng(stream_seed(seed, 0x5eed));
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const double fan = static_cast<double>(net.layer_dims[l] + net.layer_dims[l + 1]);
    const double a = std::sqrt(6.0 / fan);
    for (auto& v : net.weights[l]) v = rng.uniform(-a, a);
  }
  return net;
}

double forward(const NetParams& net, std::span<const double> x, ForwardTape& tape) {
  if (x.size() != net.input_dim()) throw ArgumentError("forward: input dimension mismatch");
  const std::size_t L = net.layer_count();
  tape.pre.resize(L);
  tape.act.resize(L + 1);
  tape.act[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t rows = net.layer_dims[l + 1], cols = net.layer_dims[l];
    const auto& H = net.weights[l];
    const auto& in = tape.act[l];
    auto& z = tape.pre[l];
    auto& a = tape.act[l + 1];
    z.resize(rows);
    a.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      const double* h = H.data() + i * cols;
      double s = net.biases[l][i];
      for (std::size_t j = 0; j < cols; ++j) s += h[j] * in[j];
      z[i] = s;
      a[i] = activate(net, l, s);
      if (!std::isfinite(a[i]))
        throw NumericError("forward: non-finite activation at layer " + std::to_string(l));
    }
  }
  return tape.output();
}

std::pair<double, ForwardTape> forward(const NetParams& net, std::span<const double> x) {
  ForwardTape tape;
  const double w = forward(net, x, tape);
  return {w, std::move(tape)};
}

std::vector<double> input_gradient(const NetParams& net, const ForwardTape& tape) {
  const std::size_t L = net.layer_count();
  std::vector<double> adj{1.0}, zbar, next;
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t rows = net.layer_dims[l + 1], cols = net.layer_dims[l];
    zbar.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) zbar[i] = d1(net, l, tape.act[l + 1][i]) * adj[i];
    transposed_multiply(net.weights[l], rows, cols, zbar, next);
    adj.swap(next);
  }
  return adj;
}

double directional_forward(const NetParams& net, const ForwardTape& tape,
                           std::span<const double> v, TangentTape& tangent) {
  if (v.size() != net.input_dim()) throw ArgumentError("directional_forward: direction dimension");
  const std::size_t L = net.layer_count();
  tangent.pre.resize(L);
  tangent.act.resize(L + 1);
  tangent.act[0].assign(v.begin(), v.end());
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t rows = net.layer_dims[l + 1], cols = net.layer_dims[l];
    const auto& H = net.weights[l];
    const auto& in = tangent.act[l];
    auto& zd = tangent.pre[l];
    auto& ad = tangent.act[l + 1];
    zd.resize(rows);
    ad.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      const double* h = H.data() + i * cols;
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += h[j] * in[j];
      zd[i] = s;
      ad[i] = d1(net, l, tape.act[l + 1][i]) * s;
    }
  }
  return tangent.output();
}

void accumulate_param_gradient(const NetParams& net, const ForwardTape& tape,
                               const TangentTape& tangent, double value_seed,
                               double directional_seed, std::span<double> grad) {
  if (grad.size() != net.param_count()) throw ArgumentError("accumulate_param_gradient: size");
  const std::size_t L = net.layer_count();
  const bool second_order = directional_seed != 0.0;
  // Offsets of each layer's block in the flat vector.
  thread_local std::vector<std::size_t> offset;
  offset.assign(L, 0);
  for (std::size_t l = 1; l < L; ++l)
    offset[l] = offset[l - 1] + net.weights[l - 1].size() + net.biases[l - 1].size();

  // adj: adjoint of act[l+1]; adj_dot: adjoint of the tangent act[l+1].
  thread_local std::vector<double> adj, adj_dot, zbar, zdbar, next;
  adj.assign(1, value_seed);
  adj_dot.assign(1, directional_seed);
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t rows = net.layer_dims[l + 1], cols = net.layer_dims[l];
    zbar.resize(rows);
    zdbar.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      const double a = tape.act[l + 1][i];
      const double s1 = d1(net, l, a);
      zbar[i] = s1 * adj[i];
      zdbar[i] = 0.0;
      if (second_order) {
        zdbar[i] = s1 * adj_dot[i];
        zbar[i] += d2(net, l, a) * tangent.pre[l][i] * adj_dot[i];
      }
    }
    double* gW = grad.data() + offset[l];
    double* gb = gW + rows * cols;
    const auto& in = tape.act[l];
    for (std::size_t i = 0; i < rows; ++i) {
      double* row = gW + i * cols;
      const double zb = zbar[i];
      for (std::size_t j = 0; j < cols; ++j) row[j] += zb * in[j];
      if (second_order) {
        const double zdb = zdbar[i];
        const auto& in_dot = tangent.act[l];
        for (std::size_t j = 0; j < cols; ++j) row[j] += zdb * in_dot[j];
      }
      gb[i] += zb;
    }
    if (l == 0) break;
    transposed_multiply(net.weights[l], rows, cols, zbar, next);
    adj.swap(next);
    if (second_order) {
      transposed_multiply(net.weights[l], rows, cols, zdbar, next);
      adj_dot.swap(next);
    }
  }
}

std::vector<double> param_gradient_output(const NetParams& net, const ForwardTape& tape) {
  std::vector<double> grad(net.param_count(), 0.0);
  accumulate_param_gradient(net, tape, TangentTape{}, 1.0, 0.0, grad);
  return grad;
}

std::vector<double> param_gradient_directional_input_grad(const NetParams& net,
                                                          const ForwardTape& tape,
                                                          std::span<const double> v) {
  TangentTape tangent;
  directional_forward(net, tape, v, tangent);
  std::vector<double> grad(net.param_count(), 0.0);
  accumulate_param_gradient(net, tape, tangent, 0.0, 1.0, grad);
  return grad;
}

// ---------------------------------------------------------------------------

namespace {

// Plain interval forward sweep; `pre` receives the pre-activations.
void natural_forward(const NetParams& net, std::span<const Interval> box,
                     std::vector<std::vector<Interval>>& act,
                     std::vector<std::vector<Interval>>& pre) {
  const std::size_t L = net.layer_count();
  act.resize(L + 1);
  pre.resize(L);
  act[0].assign(box.begin(), box.end());
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t rows = net.layer_dims[l + 1], cols = net.layer_dims[l];
    pre[l].resize(rows);
    affine_enclosure(net.weights[l], net.biases[l], rows, cols, act[l], pre[l]);
    act[l + 1].resize(rows);
    for (std::size_t i = 0; i < rows; ++i) act[l + 1][i] = activate(net, l, pre[l][i]);
  }
}

// Interval forward sweep in which every pre-activation is intersected with
// its layer-wise mean-value form z(m) + (H_l A_{l-1}(box)) (box - m), where
// A_l encloses the Jacobian da_l/dx on the box (forward mode, one column per
// input) and m is the box midpoint.
void interval_forward(const NetParams& net, std::span<const Interval> box,
                      std::vector<std::vector<Interval>>& act,
                      std::vector<Interval>* forward_gradient = nullptr) {
  if (box.size() != net.input_dim()) throw ArgumentError("enclose: box dimension mismatch");
  thread_local std::vector<std::vector<Interval>> pre, act_mid, pre_mid;
  thread_local std::vector<Interval> mid, delta, A, HA, col_in, col_out;
  thread_local std::vector<double> zero;
  const std::size_t n = box.size();
  bool point = true;
  for (const auto& b : box) point = point && b.is_point();
  if (point) {
    natural_forward(net, box, act, pre);
    if (forward_gradient) forward_gradient->clear();
    return;
  }
  mid.resize(n);
  delta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    mid[i] = Interval(box[i].mid());
    delta[i] = box[i] - mid[i];
  }
  natural_forward(net, mid, act_mid, pre_mid);

  const std::size_t L = net.layer_count();
  act.resize(L + 1);
  act[0].assign(box.begin(), box.end());
  A.assign(n * n, Interval(0.0));  // row-major, rows x n
  for (std::size_t i = 0; i < n; ++i) A[i * n + i] = Interval(1.0);
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t rows = net.layer_dims[l + 1], cols = net.layer_dims[l];
    zero.assign(rows, 0.0);
    HA.resize(rows * n);
    col_in.resize(cols);
    col_out.resize(rows);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < cols; ++j) col_in[j] = A[j * n + k];
      affine_enclosure(net.weights[l], zero, rows, cols, col_in, col_out);
      for (std::size_t i = 0; i < rows; ++i) HA[i * n + k] = col_out[i];
    }
    act[l + 1].resize(rows);
    affine_enclosure(net.weights[l], net.biases[l], rows, cols, act[l], act[l + 1]);
    for (std::size_t i = 0; i < rows; ++i) {
      Interval z = pre_mid[l][i];
      for (std::size_t k = 0; k < n; ++k) z += HA[i * n + k] * delta[k];
      act[l + 1][i] = activate(net, l, intersect(act[l + 1][i], z));
    }
    A.resize(rows * n);
    for (std::size_t i = 0; i < rows; ++i) {
      const Interval s = d1(net, l, act[l + 1][i]);
      for (std::size_t k = 0; k < n; ++k) A[i * n + k] = s * HA[i * n + k];
    }
  }
  if (forward_gradient) forward_gradient->assign(A.begin(), A.end());
}

}  // namespace

Interval enclose_output(const NetParams& net, std::span<const Interval> box) {
  thread_local std::vector<std::vector<Interval>> act;
  interval_forward(net, box, act);
  return act.back()[0];
}

Interval enclose_output_and_gradient(const NetParams& net, std::span<const Interval> box,
                                     std::span<Interval> grad) {
  thread_local std::vector<std::vector<Interval>> act;
  thread_local std::vector<Interval> adj, zbar, next, fwd;
  interval_forward(net, box, act, &fwd);
  const std::size_t L = net.layer_count();
  adj.assign(1, Interval(1.0));
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t rows = net.layer_dims[l + 1], cols = net.layer_dims[l];
    zbar.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) zbar[i] = d1(net, l, act[l + 1][i]) * adj[i];
    next.resize(cols);
    transposed_enclosure(net.weights[l], rows, cols, zbar, next);
    adj.swap(next);
  }
  if (grad.size() != adj.size()) throw ArgumentError("enclose: gradient size mismatch");
  for (std::size_t i = 0; i < adj.size(); ++i) grad[i] = fwd.empty() ? adj[i] : intersect(adj[i], fwd[i]);
  return act.back()[0];
}

NetCandidate::NetCandidate(NetParams net) : net_(std::move(net)) { net_.validate(); }

double NetCandidate::value(std::span<const double> x) const {
  thread_local ForwardTape tape;
  return forward(net_, x, tape);
}

double NetCandidate::value_and_gradient(std::span<const double> x, std::span<double> grad) const {
  thread_local ForwardTape tape;
  const double w = forward(net_, x, tape);
  const auto g = input_gradient(net_, tape);
  std::copy(g.begin(), g.end(), grad.begin());
  return w;
}

Interval NetCandidate::enclose_value(std::span<const Interval> box) const {
  return enclose_output(net_, box);
}

Interval NetCandidate::enclose_value_and_gradient(std::span<const Interval> box,
                                                  std::span<Interval> grad) const {
  return enclose_output_and_gradient(net_, box, grad);
}

std::string NetCandidate::describe() const {
  std::ostringstream os;
  os << "tanh_mlp[";
  for (std::size_t i = 0; i < net_.layer_dims.size(); ++i)
    os << (i ? "," : "") << net_.layer_dims[i];
  os << "]/" << to_string(net_.head);
  return os.str();
}

// ---------------------------------------------------------------------------

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw ArgumentError("checkpoint: malformed float '" + s + "'");
  return v;
}

nlohmann::json net_to_json(const NetParams& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    nlohmann::json w = nlohmann::json::array(), b = nlohmann::json::array();
    for (double v : net.weights[l]) w.push_back(hex_double(v));
    for (double v : net.biases[l]) b.push_back(hex_double(v));
    layers.push_back({{"weights", w}, {"bias", b}});
  }
  return {{"kind", "tanh_mlp"},
          {"layer_dims", net.layer_dims},
          {"hidden_activation", "tanh"},
          {"output_head", to_string(net.head)},
          {"layers", layers}};
}

NetParams net_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "tanh_mlp")
      throw ArgumentError("checkpoint: not a tanh_mlp network");
    if (j.contains("hidden_activation") && j.at("hidden_activation") != "tanh")
      throw ArgumentError("checkpoint: unsupported hidden activation");
    NetParams net;
    net.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    net.head = output_head_from_string(j.at("output_head").get<std::string>());
    for (const auto& layer : j.at("layers")) {
      std::vector<double> w, b;
      for (const auto& s : layer.at("weights")) w.push_back(parse_hex_double(s.get<std::string>()));
      for (const auto& s : layer.at("bias")) b.push_back(parse_hex_double(s.get<std::string>()));
      net.weights.push_back(std::move(w));
      net.biases.push_back(std::move(b));
    }
    net.validate();
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("checkpoint: ") + e.what());
  }
}

std::unique_ptr<CandidateFunction> Checkpoint::candidate() const {
  if (net) return std::make_unique<NetCandidate>(*net);
  if (oracle_alpha) return std::make_unique<ExprCandidate>(scalar_cubic_oracle_candidate(*oracle_alpha));
  throw ArgumentError("checkpoint: empty");
}

std::size_t Checkpoint::input_dim() const {
  if (net) return net->input_dim();
  return 1;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json j;
  if (ckpt.net) {
    j = net_to_json(*ckpt.net);
  } else if (ckpt.oracle_alpha) {
    j = {{"kind", "analytic_scalar_cubic"}, {"alpha", hex_double(*ckpt.oracle_alpha)}};
  } else {
    throw ArgumentError("save_checkpoint: empty checkpoint");
  }
  j["format"] = "nlyap-checkpoint";
  j["version"] = 1;
  j["metadata"] = ckpt.metadata;
  std::ofstream os(path);
  if (!os) throw ArgumentError("save_checkpoint: cannot open '" + path + "'");
  os << j.dump(2) << '\n';
  if (!os) throw ArgumentError("save_checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ArgumentError("load_checkpoint: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError("load_checkpoint: '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "nlyap-checkpoint")
    throw ArgumentError("load_checkpoint: '" + path + "' is not a checkpoint");
  Checkpoint ckpt;
  ckpt.metadata = j.value("metadata", nlohmann::json::object());
  const std::string kind = j.value("kind", "");
  if (kind == "tanh_mlp") {
    ckpt.net = net_from_json(j);
  } else if (kind == "analytic_scalar_cubic") {
    try {
      ckpt.oracle_alpha = parse_hex_double(j.at("alpha").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ArgumentError(std::string("load_checkpoint: ") + e.what());
    }
    scalar_cubic_oracle_candidate(*ckpt.oracle_alpha);  // validates alpha
  } else {
    throw ArgumentError("load_checkpoint: unknown kind '" + kind + "'");
  }
  return ckpt;
}

}  // namespace nlyap
