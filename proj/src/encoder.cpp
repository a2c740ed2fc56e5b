#include "gravis/encoder.hpp"

#include <cmath>
#include <string>

#include "gravis/errors.hpp"
#include "gravis/rng.hpp"

namespace gravis {

namespace {

int conv_out_size(int in) { return (in + 2 - 3) / 2 + 1; }  // 3x3, stride 2, pad 1

template <typename T>
void conv_forward(const T* in, int ic, int is, const T* w, const T* b, T* out,
                  int oc, int os) {
  for (int o = 0; o < oc; ++o) {
    for (int oy = 0; oy < os; ++oy) {
      for (int ox = 0; ox < os; ++ox) {
        T acc = b[o];
        const int iy0 = 2 * oy - 1;
        const int ix0 = 2 * ox - 1;
        for (int c = 0; c < ic; ++c) {
          const T* wrow = w + ((o * ic + c) * 9);
          const T* iplane = in + c * is * is;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= is) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = ix0 + kx;
              if (ix < 0 || ix >= is) continue;
              acc += wrow[ky * 3 + kx] * iplane[iy * is + ix];
            }
          }
        }
        out[(o * os + oy) * os + ox] = acc;
      }
    }
  }
}

template <typename T>
void conv_backward(const T* in, int ic, int is, const T* w, const T* dout,
                   int oc, int os, T* din, T* dw, T* db) {
  for (int o = 0; o < oc; ++o) {
    for (int oy = 0; oy < os; ++oy) {
      for (int ox = 0; ox < os; ++ox) {
        const T g = dout[(o * os + oy) * os + ox];
        if (g == T(0)) continue;
        db[o] += g;
        const int iy0 = 2 * oy - 1;
        const int ix0 = 2 * ox - 1;
        for (int c = 0; c < ic; ++c) {
          const T* wrow = w + ((o * ic + c) * 9);
          T* dwrow = dw + ((o * ic + c) * 9);
          const T* iplane = in + c * is * is;
          T* dplane = din + c * is * is;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= is) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = ix0 + kx;
              if (ix < 0 || ix >= is) continue;
              dwrow[ky * 3 + kx] += g * iplane[iy * is + ix];
              dplane[iy * is + ix] += g * wrow[ky * 3 + kx];
            }
          }
        }
      }
    }
  }
}

}  // namespace

std::vector<int> EncoderConfig::stage_sizes() const {
  std::vector<int> sizes{input_size};
  for (std::size_t s = 0; s < stage_channels.size(); ++s)
    sizes.push_back(conv_out_size(sizes.back()));
  return sizes;
}

template <typename T>
std::vector<std::string> EncoderParams<T>::tensor_names() const {
  std::vector<std::string> names;
  for (std::size_t s = 0; s < config.stage_channels.size(); ++s) {
    names.push_back("conv" + std::to_string(s) + ".weight");
    names.push_back("conv" + std::to_string(s) + ".bias");
  }
  names.insert(names.end(), {"fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"});
  return names;
}

template <typename T>
EncoderParams<T> init_encoder_params(const EncoderConfig& cfg,
                                     std::uint64_t seed) {
  EncoderParams<T> p;
  p.config = cfg;
  int in_ch = cfg.in_channels;
  for (int out_ch : cfg.stage_channels) {
    p.tensors.push_back(Tensor<T>({static_cast<std::size_t>(out_ch),
                                   static_cast<std::size_t>(in_ch), 3, 3}));
    p.tensors.push_back(Tensor<T>({static_cast<std::size_t>(out_ch)}));
    in_ch = out_ch;
  }
  const std::size_t c_last = static_cast<std::size_t>(cfg.stage_channels.back());
  p.tensors.push_back(
      Tensor<T>({static_cast<std::size_t>(cfg.hidden_dim), c_last}));
  p.tensors.push_back(Tensor<T>({static_cast<std::size_t>(cfg.hidden_dim)}));
  p.tensors.push_back(Tensor<T>({static_cast<std::size_t>(cfg.embed_dim),
                                 static_cast<std::size_t>(cfg.hidden_dim)}));
  p.tensors.push_back(Tensor<T>({static_cast<std::size_t>(cfg.embed_dim)}));

  // He initialization on the ReLU path, Xavier-like on the linear output.
  for (std::size_t t = 0; t < p.tensors.size(); ++t) {
    Tensor<T>& ten = p.tensors[t];
    if (ten.dims.size() == 1) continue;  // biases start at zero
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < ten.dims.size(); ++d) fan_in *= ten.dims[d];
    const bool is_output = (t == p.tensors.size() - 2);
    const double std_dev =
        is_output ? std::sqrt(1.0 / fan_in) : std::sqrt(2.0 / fan_in);
    Rng rng(hash_seed(seed, 0x1217, t));
    for (T& x : ten.data) x = static_cast<T>(rng.normal() * std_dev);
  }
  return p;
}

template <typename T>
ForwardResult<T> forward(const EncoderParams<T>& params,
                         const std::vector<Image>& views) {
  const EncoderConfig& cfg = params.config;
  const std::vector<int> sizes = cfg.stage_sizes();
  const std::size_t stages = cfg.stage_channels.size();
  const std::size_t n = views.size();

  for (std::size_t v = 0; v < n; ++v)
    if (views[v].width != cfg.input_size || views[v].height != cfg.input_size)
      throw ShapeMismatch("view " + std::to_string(v) + " is " +
                          std::to_string(views[v].width) + "x" +
                          std::to_string(views[v].height) + ", encoder expects " +
                          std::to_string(cfg.input_size));

  ForwardResult<T> res;
  ActivationCache<T>& cache = res.cache;
  cache.config = cfg;
  cache.num_views = n;
  cache.stage_inputs.resize(stages + 1);
  cache.stage_pre.resize(stages);

  // Normalize: p/255 -> (x - 0.5) / 0.5.
  {
    const int is = cfg.input_size;
    std::vector<T>& x0 = cache.stage_inputs[0];
    x0.resize(n * cfg.in_channels * is * is);
    for (std::size_t v = 0; v < n; ++v)
      for (int c = 0; c < cfg.in_channels; ++c)
        for (int y = 0; y < is; ++y)
          for (int x = 0; x < is; ++x)
            x0[((v * cfg.in_channels + c) * is + y) * is + x] =
                static_cast<T>(views[v].at(x, y, c) / 127.5 - 1.0);
  }

  int in_ch = cfg.in_channels;
  for (std::size_t s = 0; s < stages; ++s) {
    const int is = sizes[s];
    const int os = sizes[s + 1];
    const int oc = cfg.stage_channels[s];
    const Tensor<T>& w = params.tensors[2 * s];
    const Tensor<T>& b = params.tensors[2 * s + 1];
    std::vector<T>& pre = cache.stage_pre[s];
    std::vector<T>& post = cache.stage_inputs[s + 1];
    pre.resize(n * oc * os * os);
    post.resize(pre.size());
    for (std::size_t v = 0; v < n; ++v) {
      conv_forward(cache.stage_inputs[s].data() + v * in_ch * is * is, in_ch, is,
                   w.data.data(), b.data.data(), pre.data() + v * oc * os * os,
                   oc, os);
    }
    for (std::size_t i = 0; i < pre.size(); ++i)
      post[i] = pre[i] > T(0) ? pre[i] : T(0);
    in_ch = oc;
  }

  // Global average pool.
  const int c_last = cfg.stage_channels.back();
  const int fs = sizes[stages];
  cache.pooled.resize(n * c_last);
  const T inv_area = T(1) / static_cast<T>(fs * fs);
  for (std::size_t v = 0; v < n; ++v) {
    const T* feat = cache.stage_inputs[stages].data() + v * c_last * fs * fs;
    for (int c = 0; c < c_last; ++c) {
      T acc = T(0);
      for (int i = 0; i < fs * fs; ++i) acc += feat[c * fs * fs + i];
      cache.pooled[v * c_last + c] = acc * inv_area;
    }
  }

  // Projection head: fc1 + ReLU, fc2.
  const Tensor<T>& w1 = params.tensors[2 * stages];
  const Tensor<T>& b1 = params.tensors[2 * stages + 1];
  const Tensor<T>& w2 = params.tensors[2 * stages + 2];
  const Tensor<T>& b2 = params.tensors[2 * stages + 3];
  cache.fc1_pre.resize(n * cfg.hidden_dim);
  cache.fc1_post.resize(n * cfg.hidden_dim);
  res.embeddings.assign(n, std::vector<double>(cfg.embed_dim, 0.0));
  for (std::size_t v = 0; v < n; ++v) {
    const T* in = cache.pooled.data() + v * c_last;
    T* pre = cache.fc1_pre.data() + v * cfg.hidden_dim;
    T* post = cache.fc1_post.data() + v * cfg.hidden_dim;
    for (int hh = 0; hh < cfg.hidden_dim; ++hh) {
      T acc = b1.data[hh];
      const T* row = w1.data.data() + static_cast<std::size_t>(hh) * c_last;
      for (int c = 0; c < c_last; ++c) acc += row[c] * in[c];
      pre[hh] = acc;
      post[hh] = acc > T(0) ? acc : T(0);
    }
    for (int e = 0; e < cfg.embed_dim; ++e) {
      T acc = b2.data[e];
      const T* row = w2.data.data() + static_cast<std::size_t>(e) * cfg.hidden_dim;
      for (int hh = 0; hh < cfg.hidden_dim; ++hh) acc += row[hh] * post[hh];
      res.embeddings[v][e] = static_cast<double>(acc);
    }
  }
  return res;
}

template <typename T>
ParamGrads<T> backward(const EncoderParams<T>& params,
                       const ActivationCache<T>& cache,
                       const std::vector<std::vector<double>>& grad_embeddings) {
  const EncoderConfig& cfg = params.config;
  if (!(cache.config == cfg))
    throw StaleCache("cache was produced by a differently shaped encoder");
  if (grad_embeddings.size() != cache.num_views)
    throw StaleCache("gradient batch of " +
                     std::to_string(grad_embeddings.size()) +
                     " views, cache holds " + std::to_string(cache.num_views));
  for (const auto& g : grad_embeddings)
    if (g.size() != static_cast<std::size_t>(cfg.embed_dim))
      throw StaleCache("gradient dim does not match embed_dim");

  const std::vector<int> sizes = cfg.stage_sizes();
  const std::size_t stages = cfg.stage_channels.size();
  const std::size_t n = cache.num_views;
  const int c_last = cfg.stage_channels.back();
  const int fs = sizes[stages];

  ParamGrads<T> grads;
  grads.reserve(params.tensors.size());
  for (const Tensor<T>& t : params.tensors) grads.push_back(Tensor<T>(t.dims));

  const Tensor<T>& w1 = params.tensors[2 * stages];
  const Tensor<T>& w2 = params.tensors[2 * stages + 2];
  Tensor<T>& dw1 = grads[2 * stages];
  Tensor<T>& db1 = grads[2 * stages + 1];
  Tensor<T>& dw2 = grads[2 * stages + 2];
  Tensor<T>& db2 = grads[2 * stages + 3];

  std::vector<T> dpost_last(n * c_last * fs * fs, T(0));
  std::vector<T> dh(cfg.hidden_dim);
  std::vector<T> dpool(c_last);
  for (std::size_t v = 0; v < n; ++v) {
    const T* post = cache.fc1_post.data() + v * cfg.hidden_dim;
    const T* pre = cache.fc1_pre.data() + v * cfg.hidden_dim;
    const T* pooled = cache.pooled.data() + v * c_last;

    std::fill(dh.begin(), dh.end(), T(0));
    for (int e = 0; e < cfg.embed_dim; ++e) {
      const T g = static_cast<T>(grad_embeddings[v][e]);
      if (g == T(0)) continue;
      db2.data[e] += g;
      const std::size_t row = static_cast<std::size_t>(e) * cfg.hidden_dim;
      for (int hh = 0; hh < cfg.hidden_dim; ++hh) {
        dw2.data[row + hh] += g * post[hh];
        dh[hh] += g * w2.data[row + hh];
      }
    }
    std::fill(dpool.begin(), dpool.end(), T(0));
    for (int hh = 0; hh < cfg.hidden_dim; ++hh) {
      const T g = pre[hh] > T(0) ? dh[hh] : T(0);
      if (g == T(0)) continue;
      db1.data[hh] += g;
      const std::size_t row = static_cast<std::size_t>(hh) * c_last;
      for (int c = 0; c < c_last; ++c) {
        dw1.data[row + c] += g * pooled[c];
        dpool[c] += g * w1.data[row + c];
      }
    }
    // Undo the average pool.
    const T inv_area = T(1) / static_cast<T>(fs * fs);
    T* dfeat = dpost_last.data() + v * c_last * fs * fs;
    for (int c = 0; c < c_last; ++c) {
      const T g = dpool[c] * inv_area;
      for (int i = 0; i < fs * fs; ++i) dfeat[c * fs * fs + i] = g;
    }
  }

  // Walk the conv stages backwards.
  std::vector<T> dpost = std::move(dpost_last);
  for (std::size_t s = stages; s-- > 0;) {
    const int is = sizes[s];
    const int os = sizes[s + 1];
    const int oc = cfg.stage_channels[s];
    const int ic = (s == 0) ? cfg.in_channels : cfg.stage_channels[s - 1];
    const Tensor<T>& w = params.tensors[2 * s];
    Tensor<T>& dw = grads[2 * s];
    Tensor<T>& db = grads[2 * s + 1];
    const std::vector<T>& pre = cache.stage_pre[s];
    std::vector<T> din(n * ic * is * is, T(0));
    // ReLU mask folds into the incoming gradient.
    std::vector<T> dpre(dpost.size());
    for (std::size_t i = 0; i < dpost.size(); ++i)
      dpre[i] = pre[i] > T(0) ? dpost[i] : T(0);
    for (std::size_t v = 0; v < n; ++v) {
      conv_backward(cache.stage_inputs[s].data() + v * ic * is * is, ic, is,
                    w.data.data(), dpre.data() + v * oc * os * os, oc, os,
                    din.data() + v * ic * is * is, dw.data.data(),
                    db.data.data());
    }
    dpost = std::move(din);
  }
  return grads;
}

template <typename T>
OptimizerState<T> init_optimizer_state(const EncoderParams<T>& params,
                                       double momentum, double base_lr,
                                       int epoch_horizon) {
  OptimizerState<T> st;
  st.momentum = momentum;
  st.base_lr = base_lr;
  st.epoch_horizon = epoch_horizon;
  st.velocity.reserve(params.tensors.size());
  for (const Tensor<T>& t : params.tensors) st.velocity.push_back(Tensor<T>(t.dims));
  return st;
}

template <typename T>
void sgd_momentum_step(EncoderParams<T>& params, const ParamGrads<T>& grads,
                       OptimizerState<T>& state, double lr) {
  if (grads.size() != params.tensors.size() ||
      state.velocity.size() != params.tensors.size())
    throw ShapeMismatch("optimizer tensors do not match parameter count");
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    Tensor<T>& w = params.tensors[t];
    const Tensor<T>& g = grads[t];
    Tensor<T>& v = state.velocity[t];
    if (g.dims != w.dims || v.dims != w.dims)
      throw ShapeMismatch("tensor " + std::to_string(t) + " shape mismatch");
    const T m = static_cast<T>(state.momentum);
    const T step = static_cast<T>(lr);
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      v.data[i] = m * v.data[i] + g.data[i];
      w.data[i] -= step * v.data[i];
    }
  }
}

template <typename T>
double cosine_lr(int epoch, const OptimizerState<T>& state) {
  if (state.epoch_horizon <= 0)
    throw EpochOutOfRange("epoch horizon must be positive");
  if (epoch < 0 || epoch > state.epoch_horizon)
    throw EpochOutOfRange("epoch " + std::to_string(epoch) +
                          " outside [0, " + std::to_string(state.epoch_horizon) + "]");
  const double t =
      static_cast<double>(epoch) / static_cast<double>(state.epoch_horizon);
  return state.lr_min +
         0.5 * (state.base_lr - state.lr_min) *
             (1.0 + std::cos(3.14159265358979323846 * t));
}

template struct EncoderParams<float>;
template struct EncoderParams<double>;
template EncoderParams<float> init_encoder_params<float>(const EncoderConfig&, std::uint64_t);
template EncoderParams<double> init_encoder_params<double>(const EncoderConfig&, std::uint64_t);
template ForwardResult<float> forward<float>(const EncoderParams<float>&, const std::vector<Image>&);
template ForwardResult<double> forward<double>(const EncoderParams<double>&, const std::vector<Image>&);
template ParamGrads<float> backward<float>(const EncoderParams<float>&, const ActivationCache<float>&, const std::vector<std::vector<double>>&);
template ParamGrads<double> backward<double>(const EncoderParams<double>&, const ActivationCache<double>&, const std::vector<std::vector<double>>&);
template OptimizerState<float> init_optimizer_state<float>(const EncoderParams<float>&, double, double, int);
template OptimizerState<double> init_optimizer_state<double>(const EncoderParams<double>&, double, double, int);
template void sgd_momentum_step<float>(EncoderParams<float>&, const ParamGrads<float>&, OptimizerState<float>&, double);
template void sgd_momentum_step<double>(EncoderParams<double>&, const ParamGrads<double>&, OptimizerState<double>&, double);
template double cosine_lr<float>(int, const OptimizerState<float>&);
template double cosine_lr<double>(int, const OptimizerState<double>&);

}  // namespace gravis
