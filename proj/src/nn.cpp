#include "ssacnn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ssacnn/errors.hpp"
#include "ssacnn/recording.hpp"

namespace ssacnn::nn {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMajorMatrix>;
using MapRMConst = Eigen::Map<const RowMajorMatrix>;

}  // namespace

bool Tensor4::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Relu: return "relu";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Softmax: return "softmax";
  }
  throw SpecError("unknown layer kind");
}

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "batchnorm") return LayerKind::BatchNorm;
  if (s == "relu") return LayerKind::Relu;
  if (s == "flatten") return LayerKind::Flatten;
  if (s == "dense") return LayerKind::Dense;
  if (s == "dropout") return LayerKind::Dropout;
  if (s == "softmax") return LayerKind::Softmax;
  throw ParseError("unknown layer kind '" + s + "'");
}

LayerSpec LayerSpec::conv(int filters, int kernel, int stride, int pad) {
  LayerSpec s;
  s.kind = LayerKind::Conv;
  s.filters = filters;
  s.kernel = kernel;
  s.stride = stride;
  s.pad = pad;
  return s;
}
LayerSpec LayerSpec::batchnorm() { return {LayerKind::BatchNorm}; }
LayerSpec LayerSpec::relu() { return {LayerKind::Relu}; }
LayerSpec LayerSpec::flatten() { return {LayerKind::Flatten}; }
LayerSpec LayerSpec::dense(int units) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.units = units;
  return s;
}
LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s;
  s.kind = LayerKind::Dropout;
  s.rate = rate;
  return s;
}
LayerSpec LayerSpec::softmax() { return {LayerKind::Softmax}; }

std::vector<LayerSpec> default_architecture(double dropout_rate) {
  return {
      LayerSpec::conv(8, 3, 2, 1),  LayerSpec::batchnorm(), LayerSpec::relu(),
      LayerSpec::conv(16, 3, 2, 1), LayerSpec::batchnorm(), LayerSpec::relu(),
      LayerSpec::conv(32, 3, 2, 1), LayerSpec::batchnorm(), LayerSpec::relu(),
      LayerSpec::flatten(),         LayerSpec::dense(32),   LayerSpec::relu(),
      LayerSpec::dropout(dropout_rate), LayerSpec::dense(2), LayerSpec::softmax(),
  };
}

CnnModel::CnnModel(std::vector<LayerSpec> specs, std::array<Eigen::Index, 3> input_chw,
                   std::uint64_t seed)
    : specs_(std::move(specs)),
      input_chw_(input_chw),
      seed_(seed),
      dropout_rng_(substream_seed(seed, 0xD40Full)) {
  if (specs_.empty()) throw SpecError("model needs at least one layer");
  Rng init(seed);

  Shape3 cur{input_chw_[0], input_chw_[1], input_chw_[2]};
  if (cur.c < 1 || cur.h < 1 || cur.w < 1) throw ShapeError("bad model input shape");

  for (std::size_t li = 0; li < specs_.size(); ++li) {
    const LayerSpec& spec = specs_[li];
    ParamTensors params;
    ParamTensors running;
    switch (spec.kind) {
      case LayerKind::Conv: {
        if (spec.filters < 1 || spec.kernel < 1 || spec.stride < 1 || spec.pad < 0)
          throw SpecError("bad conv hyperparameters");
        const Eigen::Index oh = (cur.h + 2 * spec.pad - spec.kernel) / spec.stride + 1;
        const Eigen::Index ow = (cur.w + 2 * spec.pad - spec.kernel) / spec.stride + 1;
        if (cur.h + 2 * spec.pad < spec.kernel || oh < 1 || ow < 1)
          throw ShapeError("conv kernel does not fit its input");
        const std::size_t fan_in =
            static_cast<std::size_t>(cur.c) * spec.kernel * spec.kernel;
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::vector<double> w(static_cast<std::size_t>(spec.filters) * fan_in);
        for (double& v : w) v = init.uniform(-limit, limit);
        params.push_back(std::move(w));
        params.emplace_back(static_cast<std::size_t>(spec.filters), 0.0);
        cur = {spec.filters, oh, ow};
        break;
      }
      case LayerKind::BatchNorm: {
        params.emplace_back(static_cast<std::size_t>(cur.c), 1.0);  // gamma
        params.emplace_back(static_cast<std::size_t>(cur.c), 0.0);  // beta
        running.emplace_back(static_cast<std::size_t>(cur.c), 0.0);  // mean
        running.emplace_back(static_cast<std::size_t>(cur.c), 1.0);  // var
        break;
      }
      case LayerKind::Relu:
        break;
      case LayerKind::Flatten:
        cur = {cur.c * cur.h * cur.w, 1, 1};
        break;
      case LayerKind::Dense: {
        if (spec.units < 1) throw SpecError("dense units must be >= 1");
        const Eigen::Index in_features = cur.c * cur.h * cur.w;
        const double limit = std::sqrt(6.0 / static_cast<double>(in_features));
        std::vector<double> w(static_cast<std::size_t>(spec.units) *
                              static_cast<std::size_t>(in_features));
        for (double& v : w) v = init.uniform(-limit, limit);
        params.push_back(std::move(w));
        params.emplace_back(static_cast<std::size_t>(spec.units), 0.0);
        cur = {spec.units, 1, 1};
        break;
      }
      case LayerKind::Dropout:
        if (!(spec.rate >= 0.0 && spec.rate < 1.0))
          throw SpecError("dropout rate must lie in [0, 1)");
        break;
      case LayerKind::Softmax:
        if (li + 1 != specs_.size())
          throw SpecError("softmax must be the terminal layer");
        break;
    }
    params_.push_back(std::move(params));
    running_.push_back(std::move(running));
    out_shapes_.push_back(cur);
  }
  out_features_ = cur.c * cur.h * cur.w;
}

Eigen::Index CnnModel::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& layer : params_)
    for (const auto& t : layer) n += static_cast<Eigen::Index>(t.size());
  return n;
}

Eigen::MatrixXd CnnModel::forward(const Tensor4& x, bool training) {
  ForwardCache cache;
  return forward(x, training, cache);
}

Eigen::MatrixXd CnnModel::forward(const Tensor4& x, bool training, ForwardCache& cache) {
  if (x.shape[1] != input_chw_[0] || x.shape[2] != input_chw_[1] ||
      x.shape[3] != input_chw_[2])
    throw ShapeError("model input shape mismatch");
  if (x.shape[0] < 1) throw ShapeError("empty batch");

  cache.layers.assign(specs_.size(), {});
  cache.training = training;

  const Eigen::Index batch = x.shape[0];
  Tensor4 cur = x;

  for (std::size_t li = 0; li < specs_.size(); ++li) {
    const LayerSpec& spec = specs_[li];
    ForwardCache::LayerData& ld = cache.layers[li];
    const Shape3 os = out_shapes_[li];

    switch (spec.kind) {
      case LayerKind::Conv: {
        ld.input = cur;
        Tensor4 out(batch, os.c, os.h, os.w);
        const auto& w = params_[li][0];
        const auto& bias = params_[li][1];
        const Eigen::Index in_c = cur.shape[1], in_h = cur.shape[2], in_w = cur.shape[3];
        const int k = spec.kernel, s = spec.stride, p = spec.pad;
        for (Eigen::Index b = 0; b < batch; ++b)
          for (Eigen::Index f = 0; f < os.c; ++f)
            for (Eigen::Index oh = 0; oh < os.h; ++oh)
              for (Eigen::Index ow = 0; ow < os.w; ++ow) {
                double acc = bias[static_cast<std::size_t>(f)];
                const Eigen::Index ih0 = oh * s - p;
                const Eigen::Index iw0 = ow * s - p;
                for (Eigen::Index c = 0; c < in_c; ++c)
                  for (int kh = 0; kh < k; ++kh) {
                    const Eigen::Index ih = ih0 + kh;
                    if (ih < 0 || ih >= in_h) continue;
                    const std::size_t wrow =
                        ((static_cast<std::size_t>(f) * in_c + c) * k + kh) * k;
                    for (int kw = 0; kw < k; ++kw) {
                      const Eigen::Index iw = iw0 + kw;
                      if (iw < 0 || iw >= in_w) continue;
                      acc += w[wrow + static_cast<std::size_t>(kw)] * cur(b, c, ih, iw);
                    }
                  }
                out(b, f, oh, ow) = acc;
              }
        cur = std::move(out);
        break;
      }
      case LayerKind::BatchNorm: {
        ld.input = cur;
        const Eigen::Index ch = cur.shape[1];
        const Eigen::Index plane = cur.shape[2] * cur.shape[3];
        const double m_count = static_cast<double>(batch * plane);
        const auto& gamma = params_[li][0];
        const auto& beta = params_[li][1];
        auto& run_mean = running_[li][0];
        auto& run_var = running_[li][1];
        ld.aux0.resize(cur.data.size());  // xhat
        ld.aux1.resize(static_cast<std::size_t>(ch));  // inv_std
        Tensor4 out = cur;
        for (Eigen::Index c = 0; c < ch; ++c) {
          double mean = 0.0, var = 0.0;
          if (training) {
            for (Eigen::Index b = 0; b < batch; ++b)
              for (Eigen::Index i = 0; i < plane; ++i)
                mean += cur.data[static_cast<std::size_t>((b * ch + c) * plane + i)];
            mean /= m_count;
            for (Eigen::Index b = 0; b < batch; ++b)
              for (Eigen::Index i = 0; i < plane; ++i) {
                const double d =
                    cur.data[static_cast<std::size_t>((b * ch + c) * plane + i)] - mean;
                var += d * d;
              }
            var /= m_count;
            run_mean[static_cast<std::size_t>(c)] =
                (1.0 - kBnMomentum) * run_mean[static_cast<std::size_t>(c)] +
                kBnMomentum * mean;
            run_var[static_cast<std::size_t>(c)] =
                (1.0 - kBnMomentum) * run_var[static_cast<std::size_t>(c)] +
                kBnMomentum * var;
          } else {
            mean = run_mean[static_cast<std::size_t>(c)];
            var = run_var[static_cast<std::size_t>(c)];
          }
          const double inv = 1.0 / std::sqrt(var + kBnEps);
          ld.aux1[static_cast<std::size_t>(c)] = inv;
          const double g = gamma[static_cast<std::size_t>(c)];
          const double be = beta[static_cast<std::size_t>(c)];
          for (Eigen::Index b = 0; b < batch; ++b)
            for (Eigen::Index i = 0; i < plane; ++i) {
              const std::size_t idx = static_cast<std::size_t>((b * ch + c) * plane + i);
              const double xhat = (cur.data[idx] - mean) * inv;
              ld.aux0[idx] = xhat;
              out.data[idx] = g * xhat + be;
            }
        }
        cur = std::move(out);
        break;
      }
      case LayerKind::Relu: {
        ld.input = cur;
        for (double& v : cur.data) v = v > 0.0 ? v : 0.0;
        break;
      }
      case LayerKind::Flatten: {
        cur.shape = {batch, os.c, 1, 1};
        break;
      }
      case LayerKind::Dense: {
        ld.input = cur;
        const Eigen::Index in_features = cur.shape[1] * cur.shape[2] * cur.shape[3];
        MapRMConst xin(cur.data.data(), batch, in_features);
        MapRMConst w(params_[li][0].data(), spec.units, in_features);
        Tensor4 out(batch, spec.units, 1, 1);
        MapRM y(out.data.data(), batch, spec.units);
        y.noalias() = xin * w.transpose();
        for (Eigen::Index b = 0; b < batch; ++b)
          for (int u = 0; u < spec.units; ++u)
            y(b, u) += params_[li][1][static_cast<std::size_t>(u)];
        cur = std::move(out);
        break;
      }
      case LayerKind::Dropout: {
        if (training) {
          ld.aux0.resize(cur.data.size());
          const double keep = 1.0 - spec.rate;
          for (std::size_t i = 0; i < cur.data.size(); ++i) {
            const double mask = dropout_rng_.uniform01() < spec.rate ? 0.0 : 1.0 / keep;
            ld.aux0[i] = mask;
            cur.data[i] *= mask;
          }
        }
        break;
      }
      case LayerKind::Softmax:
        break;  // terminal marker; probabilities are taken from the logits
    }
  }

  cache.output = cur;
  if (training) cache.generation = ++generation_;

  Eigen::MatrixXd logits(batch, out_features_);
  MapRMConst flat(cur.data.data(), batch, out_features_);
  logits = flat;
  if (!logits.allFinite()) throw NumericError("non-finite logits");
  return logits;
}

std::vector<ParamTensors> CnnModel::backward(const ForwardCache& cache,
                                             const Eigen::MatrixXd& grad_logits) const {
  if (!cache.training || cache.generation != generation_)
    throw CacheError("backward needs the cache of the latest training-mode forward");
  const Eigen::Index batch = cache.output.shape[0];
  if (grad_logits.rows() != batch || grad_logits.cols() != out_features_)
    throw ShapeError("grad_logits shape mismatch");

  std::vector<ParamTensors> grads(specs_.size());
  for (std::size_t li = 0; li < specs_.size(); ++li) {
    grads[li].resize(params_[li].size());
    for (std::size_t t = 0; t < params_[li].size(); ++t)
      grads[li][t].assign(params_[li][t].size(), 0.0);
  }

  // Gradient flowing backward, stored in the shape of each layer's output.
  Tensor4 g = cache.output;
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index j = 0; j < out_features_; ++j)
      g.data[static_cast<std::size_t>(b * out_features_ + j)] = grad_logits(b, j);

  for (std::size_t li = specs_.size(); li-- > 0;) {
    const LayerSpec& spec = specs_[li];
    const ForwardCache::LayerData& ld = cache.layers[li];

    switch (spec.kind) {
      case LayerKind::Softmax:
        break;
      case LayerKind::Dropout: {
        if (!ld.aux0.empty())
          for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] *= ld.aux0[i];
        break;
      }
      case LayerKind::Dense: {
        const Tensor4& xin = ld.input;
        const Eigen::Index in_features = xin.shape[1] * xin.shape[2] * xin.shape[3];
        MapRMConst x(xin.data.data(), batch, in_features);
        MapRMConst gy(g.data.data(), batch, spec.units);
        MapRMConst w(params_[li][0].data(), spec.units, in_features);
        MapRM gw(grads[li][0].data(), spec.units, in_features);
        gw.noalias() = gy.transpose() * x;
        for (int u = 0; u < spec.units; ++u)
          grads[li][1][static_cast<std::size_t>(u)] = gy.col(u).sum();
        Tensor4 gx = xin;
        MapRM gxm(gx.data.data(), batch, in_features);
        gxm.noalias() = gy * w;
        g = std::move(gx);
        break;
      }
      case LayerKind::Flatten: {
        // pure reshape; restore the pre-flatten shape
        if (li > 0) {
          const Shape3 prev = out_shapes_[li - 1];
          g.shape = {batch, prev.c, prev.h, prev.w};
        } else {
          g.shape = {batch, input_chw_[0], input_chw_[1], input_chw_[2]};
        }
        break;
      }
      case LayerKind::Relu: {
        for (std::size_t i = 0; i < g.data.size(); ++i)
          if (ld.input.data[i] <= 0.0) g.data[i] = 0.0;
        break;
      }
      case LayerKind::BatchNorm: {
        const Eigen::Index ch = g.shape[1];
        const Eigen::Index plane = g.shape[2] * g.shape[3];
        const double m_count = static_cast<double>(batch * plane);
        const auto& gamma = params_[li][0];
        Tensor4 gx = g;
        for (Eigen::Index c = 0; c < ch; ++c) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (Eigen::Index b = 0; b < batch; ++b)
            for (Eigen::Index i = 0; i < plane; ++i) {
              const std::size_t idx = static_cast<std::size_t>((b * ch + c) * plane + i);
              sum_dy += g.data[idx];
              sum_dy_xhat += g.data[idx] * ld.aux0[idx];
            }
          grads[li][0][static_cast<std::size_t>(c)] = sum_dy_xhat;  // dgamma
          grads[li][1][static_cast<std::size_t>(c)] = sum_dy;       // dbeta
          const double inv = ld.aux1[static_cast<std::size_t>(c)];
          const double gscale = gamma[static_cast<std::size_t>(c)] * inv;
          for (Eigen::Index b = 0; b < batch; ++b)
            for (Eigen::Index i = 0; i < plane; ++i) {
              const std::size_t idx = static_cast<std::size_t>((b * ch + c) * plane + i);
              gx.data[idx] = gscale * (g.data[idx] - sum_dy / m_count -
                                       ld.aux0[idx] * sum_dy_xhat / m_count);
            }
        }
        g = std::move(gx);
        break;
      }
      case LayerKind::Conv: {
        const Tensor4& xin = ld.input;
        const Eigen::Index in_c = xin.shape[1], in_h = xin.shape[2], in_w = xin.shape[3];
        const Shape3 os = out_shapes_[li];
        const int k = spec.kernel, s = spec.stride, p = spec.pad;
        const auto& w = params_[li][0];
        auto& gw = grads[li][0];
        auto& gb = grads[li][1];
        Tensor4 gx(batch, in_c, in_h, in_w);
        for (Eigen::Index b = 0; b < batch; ++b)
          for (Eigen::Index f = 0; f < os.c; ++f)
            for (Eigen::Index oh = 0; oh < os.h; ++oh)
              for (Eigen::Index ow = 0; ow < os.w; ++ow) {
                const double go = g(b, f, oh, ow);
                gb[static_cast<std::size_t>(f)] += go;
                const Eigen::Index ih0 = oh * s - p;
                const Eigen::Index iw0 = ow * s - p;
                for (Eigen::Index c = 0; c < in_c; ++c)
                  for (int kh = 0; kh < k; ++kh) {
                    const Eigen::Index ih = ih0 + kh;
                    if (ih < 0 || ih >= in_h) continue;
                    const std::size_t wrow =
                        ((static_cast<std::size_t>(f) * in_c + c) * k + kh) * k;
                    for (int kw = 0; kw < k; ++kw) {
                      const Eigen::Index iw = iw0 + kw;
                      if (iw < 0 || iw >= in_w) continue;
                      gw[wrow + static_cast<std::size_t>(kw)] += xin(b, c, ih, iw) * go;
                      gx(b, c, ih, iw) += w[wrow + static_cast<std::size_t>(kw)] * go;
                    }
                  }
              }
        g = std::move(gx);
        break;
      }
    }
  }
  return grads;
}

Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double m = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

std::pair<double, Eigen::MatrixXd> softmax_cross_entropy(const Eigen::MatrixXd& logits,
                                                         std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows())
    throw ShapeError("label count does not match batch");
  Eigen::MatrixXd grad = softmax(logits);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= logits.cols()) throw ShapeError("label out of range");
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    loss += lse - logits(r, y);
    grad(r, y) -= 1.0;
  }
  return {loss, std::move(grad)};
}

namespace {

class Adam {
public:
  Adam(const CnnModel& model, double lr) : lr_(lr) {
    for (const auto& layer : model.parameters()) {
      m_.emplace_back();
      v_.emplace_back();
      for (const auto& t : layer) {
        m_.back().emplace_back(t.size(), 0.0);
        v_.back().emplace_back(t.size(), 0.0);
      }
    }
  }

  void step(CnnModel& model, const std::vector<ParamTensors>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    auto& params = model.parameters();
    for (std::size_t li = 0; li < params.size(); ++li)
      for (std::size_t ti = 0; ti < params[li].size(); ++ti) {
        auto& p = params[li][ti];
        const auto& gr = grads[li][ti];
        auto& m = m_[li][ti];
        auto& v = v_[li][ti];
        for (std::size_t i = 0; i < p.size(); ++i) {
          m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gr[i];
          v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gr[i] * gr[i];
          const double mh = m[i] / bc1;
          const double vh = v[i] / bc2;
          p[i] -= lr_ * mh / (std::sqrt(vh) + kEps);
        }
      }
    model.invalidate_caches();
  }

private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  int t_ = 0;
  std::vector<ParamTensors> m_, v_;
};

Tensor4 gather_batch(const Tensor4& inputs, std::span<const std::size_t> ids) {
  const Eigen::Index per = inputs.shape[1] * inputs.shape[2] * inputs.shape[3];
  Tensor4 out(static_cast<Eigen::Index>(ids.size()), inputs.shape[1], inputs.shape[2],
              inputs.shape[3]);
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::copy_n(inputs.data.begin() + static_cast<std::ptrdiff_t>(ids[r]) * per, per,
                out.data.begin() + static_cast<std::ptrdiff_t>(r) * per);
  return out;
}

}  // namespace

TrainResult train(CnnModel& model, const Tensor4& inputs, std::span<const int> labels,
                  const TrainConfig& cfg) {
  const Eigen::Index n = inputs.shape[0];
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw ShapeError("label count does not match inputs");
  if (cfg.batch_size < 1) throw SpecError("batch size must be >= 1");

  std::array<int, 2> counts{0, 0};
  for (int y : labels) {
    if (y < 0 || y >= model.output_classes()) throw ShapeError("label out of range");
    if (y < 2) ++counts[static_cast<std::size_t>(y)];
  }
  if (counts[0] < 2 || counts[1] < 2)
    throw ClassImbalanceError("training needs at least 2 examples per class");

  Adam adam(model, cfg.learning_rate);
  model.reseed_dropout(substream_seed(cfg.seed, 0xD0ull));
  Rng shuffle_rng(substream_seed(cfg.seed, 0x05ull));

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the session RNG.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng.below(i));
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> ids(order.data() + start, stop - start);
      Tensor4 xb = gather_batch(inputs, ids);
      std::vector<int> yb(ids.size());
      for (std::size_t r = 0; r < ids.size(); ++r)
        yb[r] = labels[static_cast<std::size_t>(ids[r])];

      ForwardCache cache;
      const Eigen::MatrixXd logits = model.forward(xb, true, cache);
      auto [loss_sum, grad] = softmax_cross_entropy(logits, yb);
      epoch_loss += loss_sum;
      grad /= static_cast<double>(ids.size());  // mean reduction
      const auto grads = model.backward(cache, grad);
      adam.step(model, grads);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

std::vector<Prediction> predict(CnnModel& model, const Tensor4& inputs) {
  const Eigen::MatrixXd probs = softmax(model.forward(inputs, false));
  std::vector<Prediction> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Prediction& p = out[static_cast<std::size_t>(r)];
    p.probs = probs.row(r).transpose();
    Eigen::Index best = 0;
    probs.row(r).maxCoeff(&best);
    // maxCoeff already reports the first maximum; ties go to class 0
    p.cls = static_cast<int>(best);
  }
  return out;
}

void save_model(const CnnModel& model, const std::filesystem::path& manifest_path,
                const std::filesystem::path& blob_path) {
  nlohmann::json manifest;
  manifest["input"] = {model.input_shape()[0], model.input_shape()[1],
                       model.input_shape()[2]};
  manifest["seed"] = model.seed();
  manifest["parameter_count"] = model.parameter_count();
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& s : model.specs()) {
    nlohmann::json l;
    l["kind"] = to_string(s.kind);
    switch (s.kind) {
      case LayerKind::Conv:
        l["filters"] = s.filters;
        l["kernel"] = s.kernel;
        l["stride"] = s.stride;
        l["pad"] = s.pad;
        break;
      case LayerKind::Dense:
        l["units"] = s.units;
        break;
      case LayerKind::Dropout:
        l["rate"] = s.rate;
        break;
      default:
        break;
    }
    layers.push_back(l);
  }
  manifest["layers"] = layers;
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write model manifest " + manifest_path.string());
  out << manifest.dump(2) << '\n';

  std::vector<double> blob;
  for (const auto& layer : model.parameters())
    for (const auto& t : layer) blob.insert(blob.end(), t.begin(), t.end());
  for (const auto& layer : model.running_stats())
    for (const auto& t : layer) blob.insert(blob.end(), t.begin(), t.end());
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(blob.size()));
  for (std::size_t i = 0; i < blob.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = blob[i];
  save_matrix_f64(m, blob_path);
}

CnnModel load_model(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& blob_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open model manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad model manifest: " + std::string(e.what()));
  }

  std::vector<LayerSpec> specs;
  for (const auto& l : manifest.at("layers")) {
    LayerSpec s;
    s.kind = layer_kind_from_string(l.at("kind").get<std::string>());
    switch (s.kind) {
      case LayerKind::Conv:
        s.filters = l.at("filters").get<int>();
        s.kernel = l.at("kernel").get<int>();
        s.stride = l.at("stride").get<int>();
        s.pad = l.at("pad").get<int>();
        break;
      case LayerKind::Dense:
        s.units = l.at("units").get<int>();
        break;
      case LayerKind::Dropout:
        s.rate = l.at("rate").get<double>();
        break;
      default:
        break;
    }
    specs.push_back(s);
  }
  const auto input = manifest.at("input").get<std::vector<Eigen::Index>>();
  if (input.size() != 3) throw ParseError("model manifest input shape must have 3 dims");
  CnnModel model(std::move(specs), {input[0], input[1], input[2]},
                 manifest.at("seed").get<std::uint64_t>());

  const Eigen::MatrixXd blob = load_matrix_f64(blob_path);
  std::size_t pos = 0;
  auto take = [&](std::vector<double>& dst) {
    if (pos + dst.size() > static_cast<std::size_t>(blob.size()))
      throw ParseError("model blob too short");
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = blob(0, static_cast<Eigen::Index>(pos + i));
    pos += dst.size();
  };
  for (auto& layer : model.parameters())
    for (auto& t : layer) take(t);
  for (auto& layer : model.running_stats())
    for (auto& t : layer) take(t);
  if (pos != static_cast<std::size_t>(blob.size()))
    throw ParseError("model blob size mismatch");
  model.invalidate_caches();
  return model;
}

}  // namespace ssacnn::nn
