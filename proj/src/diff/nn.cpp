#include "nrm/diff/nn.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "nrm/errors.hpp"

namespace nrm::diff {

namespace {

Value activate(Value x, Activation a) {
  switch (a) {
  case Activation::None:
    return x;
  case Activation::Tanh:
    return tanh(x);
  case Activation::Relu:
    return relu(x);
  case Activation::Sigmoid:
    return sigmoid(x);
  case Activation::Softmax:
    return softmax(x);
  }
  return x;
}

constexpr char kMagic[8] = {'N', 'R', 'M', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T> void put(std::ostream &out, T v) {
  out.write(reinterpret_cast<const char *>(&v), sizeof v);
}

template <typename T> T get(std::istream &in) {
  T v{};
  if (!in.read(reinterpret_cast<char *>(&v), sizeof v))
    throw InputError("checkpoint is truncated");
  return v;
}

} // namespace

Linear::Linear(const std::string &name, std::size_t in, std::size_t out, std::mt19937_64 &rng)
    : weight(name + ".weight", Tensor({in, out})), bias(name + ".bias", Tensor({1, out})) {
  if (in == 0 || out == 0)
    throw InputError("layer " + name + " has a zero dimension");
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (double &w : weight.value.values())
    w = u(rng);
}

Value Linear::forward(Graph &g, Value x) {
  return add_row(matmul(x, g.param(weight)), g.param(bias));
}

Mlp::Mlp(const std::string &name, std::size_t in, const std::vector<LayerSpec> &layers,
         std::mt19937_64 &rng)
    : specs_(layers) {
  if (layers.empty())
    throw InputError("an MLP needs at least one layer");
  std::size_t width = in;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers_.emplace_back(name + "." + std::to_string(i), width, layers[i].width, rng);
    width = layers[i].width;
  }
}

Value Mlp::forward(Graph &g, Value x, std::mt19937_64 *dropout_rng) {
  return run(g, x, dropout_rng, true);
}

Value Mlp::forward_logits(Graph &g, Value x, std::mt19937_64 *dropout_rng) {
  return run(g, x, dropout_rng, false);
}

Value Mlp::run(Graph &g, Value x, std::mt19937_64 *dropout_rng, bool last_activation) {
  if (x.value().rank() != 2 || x.value().cols() != in())
    throw InputError("MLP input of shape " + shape_string(x.shape()) + ", expected width " +
                     std::to_string(in()));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const bool last = i + 1 == layers_.size();
    x = layers_[i].forward(g, x);
    if (!last || last_activation)
      x = activate(x, specs_[i].activation);
    if (dropout_rng && specs_[i].dropout > 0.0)
      x = dropout(x, specs_[i].dropout, *dropout_rng);
  }
  return x;
}

std::vector<Parameter *> Mlp::parameters() {
  std::vector<Parameter *> out;
  for (auto &l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

Mlp make_actor(std::size_t in, std::size_t actions, std::mt19937_64 &rng, std::size_t hidden) {
  return Mlp("actor", in,
             {{hidden, Activation::Tanh}, {hidden, Activation::Tanh},
              {actions, Activation::Softmax}},
             rng);
}

Mlp make_critic(std::size_t in, std::mt19937_64 &rng, std::size_t hidden) {
  return Mlp("critic", in,
             {{hidden, Activation::Tanh}, {hidden, Activation::Tanh}, {1, Activation::None}},
             rng);
}

Mlp make_grounder(std::size_t in, std::size_t symbols, std::mt19937_64 &rng,
                  std::size_t hidden, double dropout_rate) {
  return Mlp("grounder", in,
             {{hidden, Activation::Tanh, dropout_rate},
              {hidden, Activation::None, dropout_rate},
              {symbols, Activation::Softmax}},
             rng);
}

Lstm::Lstm(const std::string &name, std::size_t in, std::size_t hidden, std::size_t layers,
           std::mt19937_64 &rng)
    : hidden_(hidden) {
  if (layers == 0)
    throw InputError("an LSTM needs at least one layer");
  for (std::size_t l = 0; l < layers; ++l) {
    cells_.emplace_back(name + "." + std::to_string(l), (l ? hidden : in) + hidden, 4 * hidden,
                        rng);
    // forget-gate bias starts at 1
    for (std::size_t j = hidden; j < 2 * hidden; ++j)
      cells_.back().bias.value[j] = 1.0;
  }
}

Lstm::State Lstm::zero_state(Graph &g, std::size_t rows) const {
  State s;
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    s.h.push_back(g.constant(Tensor({rows, hidden_})));
    s.c.push_back(g.constant(Tensor({rows, hidden_})));
  }
  return s;
}

Lstm::State Lstm::import_state(Graph &g, const State &other) const {
  State s;
  for (std::size_t l = 0; l < other.h.size(); ++l) {
    s.h.push_back(g.constant(other.h[l].value()));
    s.c.push_back(g.constant(other.c[l].value()));
  }
  return s;
}

Value Lstm::step(Graph &g, Value x, State &state) {
  if (state.h.size() != cells_.size())
    throw InputError("LSTM state has the wrong number of layers");
  const std::size_t h = hidden_;
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    const Value in[] = {x, state.h[l]};
    Value z = cells_[l].forward(g, concat_cols(in));
    Value i = sigmoid(slice_cols(z, 0, h));
    Value f = sigmoid(slice_cols(z, h, 2 * h));
    Value c_hat = tanh(slice_cols(z, 2 * h, 3 * h));
    Value o = sigmoid(slice_cols(z, 3 * h, 4 * h));
    state.c[l] = f * state.c[l] + i * c_hat;
    state.h[l] = o * tanh(state.c[l]);
    x = state.h[l];
  }
  return x;
}

std::vector<Value> Lstm::forward(Graph &g, std::span<const Value> sequence, State &state) {
  std::vector<Value> out;
  out.reserve(sequence.size());
  for (Value x : sequence)
    out.push_back(step(g, x, state));
  return out;
}

std::vector<Parameter *> Lstm::parameters() {
  std::vector<Parameter *> out;
  for (auto &c : cells_) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  return out;
}

Adam::Adam(std::vector<Parameter *> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (Parameter *p : params_) {
    if (p->grad.shape() != p->value.shape())
      p->grad = Tensor(p->value.shape());
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor &w = params_[k]->value;
    const Tensor &g = params_[k]->grad;
    Tensor &m = m_[k], &v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      w[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter *p : params_)
    p->zero_grad();
}

double grad_norm(std::span<Parameter *const> params) {
  double s = 0.0;
  for (const Parameter *p : params)
    for (double g : p->grad.values())
      s += g * g;
  return std::sqrt(s);
}

double clip_grad_norm(std::span<Parameter *const> params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (Parameter *p : params)
      for (double &g : p->grad.values())
        g *= f;
  }
  return norm;
}

// Layout: magic, u32 version, u32 count, then per tensor: u32 name length,
// name bytes, u32 rank, u64 dims, f64 data (host byte order).
void save_parameters(std::ostream &out, std::span<Parameter *const> params) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter *p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rank()));
    for (std::size_t d : p->value.shape())
      put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char *>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out)
    throw InputError("failed to write checkpoint");
}

void save_parameters(const std::string &path, std::span<Parameter *const> params) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw InputError("cannot open " + path + " for writing");
  save_parameters(out, params);
}

void load_parameters(std::istream &in, std::span<Parameter *const> params) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw InputError("not a checkpoint file");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw InputError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in);
  if (count != params.size())
    throw InputError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                     std::to_string(params.size()));
  for (Parameter *p : params) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len))
      throw InputError("checkpoint is truncated");
    if (name != p->name)
      throw InputError("checkpoint tensor '" + name + "' where '" + p->name + "' was expected");
    const auto rank = get<std::uint32_t>(in);
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i)
      shape.push_back(get<std::uint64_t>(in));
    if (shape != p->value.shape())
      throw InputError("checkpoint tensor '" + name + "' has shape " + shape_string(shape));
    if (!in.read(reinterpret_cast<char *>(p->value.data()),
                 static_cast<std::streamsize>(p->value.size() * sizeof(double))))
      throw InputError("checkpoint is truncated");
  }
}

void load_parameters(const std::string &path, std::span<Parameter *const> params) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw InputError("cannot open " + path);
  load_parameters(in, params);
}

} // namespace nrm::diff
