#include "laneforge/steernet.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "laneforge/textutil.hpp"

namespace laneforge {
namespace {

std::string shape_str(const Shape& s) {
    return std::to_string(s.c) + "x" + std::to_string(s.d) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

void require_shape(const Tensor& t, const Shape& s, const char* what) {
    if (!(t.shape == s) || t.v.size() != s.size()) {
        throw ShapeMismatch(std::string(what) + ": expected " + shape_str(s) + ", got " + shape_str(t.shape));
    }
}

void he_init(std::vector<double>& p, std::size_t weights, int fan_in, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / double(fan_in)));
    for (std::size_t i = 0; i < weights; ++i) p[i] = nd(rng);
    for (std::size_t i = weights; i < p.size(); ++i) p[i] = 0.0;
}

}  // namespace

// Convolution

ConvLayer::ConvLayer(bool three_d, int in_c, int out_c, int kd, int kh, int kw, int sd, int sh, int sw)
    : three_d_(three_d), in_c_(in_c), out_c_(out_c), kd_(kd), kh_(kh), kw_(kw), sd_(sd), sh_(sh), sw_(sw) {
    if (in_c <= 0 || out_c <= 0 || kd <= 0 || kh <= 0 || kw <= 0 || sd <= 0 || sh <= 0 || sw <= 0) {
        throw ShapeMismatch("convolution sizes must be positive");
    }
    if (!three_d && (kd != 1 || sd != 1)) throw ShapeMismatch("2-D convolution has unit depth kernel");
    params.assign(weight_count() + std::size_t(out_c), 0.0);
}

Shape ConvLayer::output_shape(const Shape& in) const {
    if (in.c != in_c_) throw ShapeMismatch("convolution expects " + std::to_string(in_c_) + " input channels");
    if (in.d < kd_ || in.h < kh_ || in.w < kw_) throw ShapeMismatch("convolution kernel larger than input");
    return {out_c_, (in.d - kd_) / sd_ + 1, (in.h - kh_) / sh_ + 1, (in.w - kw_) / sw_ + 1};
}

void ConvLayer::forward(const Tensor& in, Tensor& out, LayerCache&, bool, std::mt19937_64*) const {
    const Shape os = output_shape(in.shape);
    out = Tensor(os);
    for (int co = 0; co < out_c_; ++co) {
        double* o = &out.v[out.index(co, 0, 0, 0)];
        std::fill(o, o + std::size_t(os.d) * std::size_t(os.h) * std::size_t(os.w), params[bias_index(co)]);
        for (int ci = 0; ci < in_c_; ++ci) {
            for (int kz = 0; kz < kd_; ++kz) {
                for (int ky = 0; ky < kh_; ++ky) {
                    for (int kx = 0; kx < kw_; ++kx) {
                        const double w = params[weight_index(co, ci, kz, ky, kx)];
                        for (int oz = 0; oz < os.d; ++oz) {
                            for (int oy = 0; oy < os.h; ++oy) {
                                const double* src = &in.v[in.index(ci, oz * sd_ + kz, oy * sh_ + ky, kx)];
                                double* dst = &out.v[out.index(co, oz, oy, 0)];
                                for (int ox = 0; ox < os.w; ++ox) dst[ox] += w * src[ox * sw_];
                            }
                        }
                    }
                }
            }
        }
    }
}

void ConvLayer::backward(const Tensor& in, const Tensor&, const Tensor& dout, Tensor& din, const LayerCache&,
                         std::vector<double>& grad) const {
    const Shape os = dout.shape;
    din = Tensor(in.shape);
    for (int co = 0; co < out_c_; ++co) {
        const double* g = &dout.v[dout.index(co, 0, 0, 0)];
        grad[bias_index(co)] += std::accumulate(g, g + std::size_t(os.d) * std::size_t(os.h) * std::size_t(os.w), 0.0);
        for (int ci = 0; ci < in_c_; ++ci) {
            for (int kz = 0; kz < kd_; ++kz) {
                for (int ky = 0; ky < kh_; ++ky) {
                    for (int kx = 0; kx < kw_; ++kx) {
                        const std::size_t wi = weight_index(co, ci, kz, ky, kx);
                        const double w = params[wi];
                        double acc = 0.0;
                        for (int oz = 0; oz < os.d; ++oz) {
                            for (int oy = 0; oy < os.h; ++oy) {
                                const std::size_t base = in.index(ci, oz * sd_ + kz, oy * sh_ + ky, kx);
                                const double* src = &in.v[base];
                                double* dsrc = &din.v[base];
                                const double* go = &dout.v[dout.index(co, oz, oy, 0)];
                                for (int ox = 0; ox < os.w; ++ox) {
                                    acc += go[ox] * src[ox * sw_];
                                    dsrc[ox * sw_] += w * go[ox];
                                }
                            }
                        }
                        grad[wi] += acc;
                    }
                }
            }
        }
    }
}

std::vector<std::uint32_t> ConvLayer::hyper_ints() const {
    return {std::uint32_t(in_c_), std::uint32_t(out_c_), std::uint32_t(kd_), std::uint32_t(kh_),
            std::uint32_t(kw_),   std::uint32_t(sd_),    std::uint32_t(sh_), std::uint32_t(sw_)};
}

void ConvLayer::init(const Shape&, std::mt19937_64& rng) {
    he_init(params, weight_count(), in_c_ * kd_ * kh_ * kw_, rng);
}

// Pooling

Shape MaxPoolLayer::output_shape(const Shape& in) const {
    if (k_ <= 0 || stride_ <= 0) throw ShapeMismatch("pool sizes must be positive");
    if (in.h < k_ || in.w < k_) throw ShapeMismatch("pool window larger than input");
    return {in.c, in.d, (in.h - k_) / stride_ + 1, (in.w - k_) / stride_ + 1};
}

void MaxPoolLayer::forward(const Tensor& in, Tensor& out, LayerCache& cache, bool, std::mt19937_64*) const {
    const Shape os = output_shape(in.shape);
    out = Tensor(os);
    cache.index.assign(os.size(), 0);
    std::size_t o = 0;
    for (int c = 0; c < os.c; ++c) {
        for (int z = 0; z < os.d; ++z) {
            for (int y = 0; y < os.h; ++y) {
                for (int x = 0; x < os.w; ++x, ++o) {
                    std::size_t best = in.index(c, z, y * stride_, x * stride_);
                    for (int ky = 0; ky < k_; ++ky) {
                        for (int kx = 0; kx < k_; ++kx) {
                            const std::size_t i = in.index(c, z, y * stride_ + ky, x * stride_ + kx);
                            if (in.v[i] > in.v[best]) best = i;
                        }
                    }
                    out.v[o] = in.v[best];
                    cache.index[o] = std::uint32_t(best);
                }
            }
        }
    }
}

void MaxPoolLayer::backward(const Tensor& in, const Tensor&, const Tensor& dout, Tensor& din, const LayerCache& cache,
                            std::vector<double>&) const {
    din = Tensor(in.shape);
    for (std::size_t o = 0; o < dout.v.size(); ++o) din.v[cache.index[o]] += dout.v[o];
}

// Elementwise

void ReluLayer::forward(const Tensor& in, Tensor& out, LayerCache&, bool, std::mt19937_64*) const {
    out = in;
    for (double& x : out.v) x = x > 0.0 ? x : 0.0;
}

void ReluLayer::backward(const Tensor& in, const Tensor&, const Tensor& dout, Tensor& din, const LayerCache&,
                         std::vector<double>&) const {
    din = dout;
    for (std::size_t i = 0; i < din.v.size(); ++i) {
        if (!(in.v[i] > 0.0)) din.v[i] = 0.0;
    }
}

void FlattenLayer::forward(const Tensor& in, Tensor& out, LayerCache&, bool, std::mt19937_64*) const {
    out.shape = output_shape(in.shape);
    out.v = in.v;
}

void FlattenLayer::backward(const Tensor& in, const Tensor&, const Tensor& dout, Tensor& din, const LayerCache&,
                            std::vector<double>&) const {
    din.shape = in.shape;
    din.v = dout.v;
}

void DropoutLayer::forward(const Tensor& in, Tensor& out, LayerCache& cache, bool train, std::mt19937_64* rng) const {
    out = in;
    if (!train || rate_ <= 0.0) {
        cache.mask.clear();
        return;
    }
    if (rng == nullptr) throw std::invalid_argument("dropout in training needs an rng");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = 1.0 / (1.0 - rate_);
    cache.mask.resize(in.v.size());
    for (std::size_t i = 0; i < in.v.size(); ++i) {
        cache.mask[i] = u(*rng) < rate_ ? 0.0 : keep;
        out.v[i] *= cache.mask[i];
    }
}

void DropoutLayer::backward(const Tensor&, const Tensor&, const Tensor& dout, Tensor& din, const LayerCache& cache,
                            std::vector<double>&) const {
    din = dout;
    if (cache.mask.empty()) return;
    for (std::size_t i = 0; i < din.v.size(); ++i) din.v[i] *= cache.mask[i];
}

void ScaleLayer::forward(const Tensor& in, Tensor& out, LayerCache&, bool, std::mt19937_64*) const {
    out = in;
    for (double& x : out.v) x *= factor_;
}

void ScaleLayer::backward(const Tensor&, const Tensor&, const Tensor& dout, Tensor& din, const LayerCache&,
                          std::vector<double>&) const {
    din = dout;
    for (double& x : din.v) x *= factor_;
}

// Dense

DenseLayer::DenseLayer(int in, int out) : in_(in), out_(out) {
    if (in <= 0 || out <= 0) throw ShapeMismatch("dense sizes must be positive");
    params.assign(std::size_t(in) * std::size_t(out) + std::size_t(out), 0.0);
}

Shape DenseLayer::output_shape(const Shape& in) const {
    if (int(in.size()) != in_) {
        throw ShapeMismatch("dense expects " + std::to_string(in_) + " inputs, got " + std::to_string(in.size()));
    }
    return {out_, 1, 1, 1};
}

void DenseLayer::forward(const Tensor& in, Tensor& out, LayerCache&, bool, std::mt19937_64*) const {
    out = Tensor(output_shape(in.shape));
    const std::size_t n = std::size_t(in_);
    for (int j = 0; j < out_; ++j) {
        const double* w = &params[std::size_t(j) * n];
        double acc = params[std::size_t(out_) * n + std::size_t(j)];
        for (std::size_t i = 0; i < n; ++i) acc += w[i] * in.v[i];
        out.v[std::size_t(j)] = acc;
    }
}

void DenseLayer::backward(const Tensor& in, const Tensor&, const Tensor& dout, Tensor& din, const LayerCache&,
                          std::vector<double>& grad) const {
    din = Tensor(in.shape);
    const std::size_t n = std::size_t(in_);
    for (int j = 0; j < out_; ++j) {
        const double g = dout.v[std::size_t(j)];
        grad[std::size_t(out_) * n + std::size_t(j)] += g;
        if (g == 0.0) continue;
        const double* w = &params[std::size_t(j) * n];
        double* gw = &grad[std::size_t(j) * n];
        for (std::size_t i = 0; i < n; ++i) {
            gw[i] += g * in.v[i];
            din.v[i] += g * w[i];
        }
    }
}

void DenseLayer::init(const Shape&, std::mt19937_64& rng) {
    he_init(params, std::size_t(in_) * std::size_t(out_), in_, rng);
}

// Model

SteerModel::SteerModel(const SteerModel& o) : input_(o.input_) {
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
}

SteerModel& SteerModel::operator=(const SteerModel& o) {
    if (this != &o) {
        SteerModel tmp(o);
        *this = std::move(tmp);
    }
    return *this;
}

void SteerModel::add(std::unique_ptr<Layer> layer, std::mt19937_64& rng) {
    const Shape in = output_shape();
    layer->output_shape(in);
    layer->init(in, rng);
    layers_.push_back(std::move(layer));
}

Shape SteerModel::output_shape() const {
    Shape s = input_;
    for (const auto& l : layers_) s = l->output_shape(s);
    return s;
}

std::size_t SteerModel::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l->params.size();
    return n;
}

double SteerModel::forward(const Tensor& input) const {
    Workspace ws;
    return forward(input, ws, false, nullptr);
}

double SteerModel::forward(const Tensor& input, Workspace& ws, bool train, std::mt19937_64* rng) const {
    require_shape(input, input_, "model input");
    ws.acts.resize(layers_.size() + 1);
    ws.caches.resize(layers_.size());
    ws.acts[0] = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->forward(ws.acts[i], ws.acts[i + 1], ws.caches[i], train, rng);
    }
    const Tensor& out = ws.acts.back();
    if (out.v.size() != 1) throw ShapeMismatch("model must produce a single output");
    return out.v[0];
}

void SteerModel::backward(Workspace& ws, double dloss_dout, std::vector<std::vector<double>>& grads) const {
    if (ws.acts.size() != layers_.size() + 1) throw std::logic_error("backward without a forward pass");
    ws.grads.resize(layers_.size() + 1);
    ws.grads.back() = Tensor(ws.acts.back().shape, dloss_dout);
    for (std::size_t k = layers_.size(); k-- > 0;) {
        layers_[k]->backward(ws.acts[k], ws.acts[k + 1], ws.grads[k + 1], ws.grads[k], ws.caches[k], grads[k]);
    }
}

std::vector<std::vector<double>> SteerModel::zero_grads() const {
    std::vector<std::vector<double>> g;
    for (const auto& l : layers_) g.emplace_back(l->params.size(), 0.0);
    return g;
}

std::vector<std::vector<double>> backward(const SteerModel& model, const Tensor& input, double target) {
    Workspace ws;
    const double pred = model.forward(input, ws, false, nullptr);
    auto grads = model.zero_grads();
    model.backward(ws, 2.0 * (pred - target), grads);
    return grads;
}

// Serialization: "LFM1", input shape, layer list, then every parameter as
// little-endian float32 in layer order.

namespace {

template <typename T>
void put(std::string& s, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
        auto u = std::bit_cast<std::array<char, sizeof(T)>>(v);
        std::reverse(u.begin(), u.end());
        s.append(u.data(), sizeof(T));
    } else {
        char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        s.append(b, sizeof(T));
    }
}

struct Reader {
    const std::string& s;
    std::size_t pos = 0;

    template <typename T>
    T get() {
        if (pos + sizeof(T) > s.size()) throw ModelError("model file truncated");
        std::array<char, sizeof(T)> b;
        std::memcpy(b.data(), s.data() + pos, sizeof(T));
        if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) std::reverse(b.begin(), b.end());
        pos += sizeof(T);
        return std::bit_cast<T>(b);
    }
};

constexpr char kMagic[4] = {'L', 'F', 'M', '1'};

std::unique_ptr<Layer> make_layer(LayerType t, const std::vector<std::uint32_t>& ints,
                                  const std::vector<float>& floats) {
    auto need = [&](std::size_t ni, std::size_t nf) {
        if (ints.size() != ni || floats.size() != nf) throw ModelError("bad layer hyperparameters");
    };
    auto i = [&](std::size_t k) { return int(ints[k]); };
    switch (t) {
        case LayerType::Conv2D:
        case LayerType::Conv3D:
            need(8, 0);
            return std::make_unique<ConvLayer>(t == LayerType::Conv3D, i(0), i(1), i(2), i(3), i(4), i(5), i(6), i(7));
        case LayerType::MaxPool2D: need(2, 0); return std::make_unique<MaxPoolLayer>(i(0), i(1));
        case LayerType::ReLU: need(0, 0); return std::make_unique<ReluLayer>();
        case LayerType::Flatten: need(0, 0); return std::make_unique<FlattenLayer>();
        case LayerType::Dense: need(2, 0); return std::make_unique<DenseLayer>(i(0), i(1));
        case LayerType::Dropout: need(0, 1); return std::make_unique<DropoutLayer>(floats[0]);
        case LayerType::Scale: need(0, 1); return std::make_unique<ScaleLayer>(floats[0]);
    }
    throw ModelError("unknown layer type " + std::to_string(int(t)));
}

}  // namespace

std::string SteerModel::serialize() const {
    std::string s(kMagic, 4);
    for (int v : {input_.c, input_.d, input_.h, input_.w}) put<std::uint32_t>(s, std::uint32_t(v));
    put<std::uint32_t>(s, std::uint32_t(layers_.size()));
    for (const auto& l : layers_) {
        put<std::uint8_t>(s, std::uint8_t(l->type()));
        const auto ints = l->hyper_ints();
        const auto floats = l->hyper_floats();
        put<std::uint8_t>(s, std::uint8_t(ints.size()));
        for (auto v : ints) put<std::uint32_t>(s, v);
        put<std::uint8_t>(s, std::uint8_t(floats.size()));
        for (auto v : floats) put<float>(s, v);
        put<std::uint32_t>(s, std::uint32_t(l->params.size()));
    }
    for (const auto& l : layers_) {
        for (double p : l->params) put<float>(s, float(p));
    }
    return s;
}

SteerModel SteerModel::deserialize(const std::string& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw ModelError("not an LFM1 model");
    Reader r{bytes, 4};
    Shape in;
    in.c = int(r.get<std::uint32_t>());
    in.d = int(r.get<std::uint32_t>());
    in.h = int(r.get<std::uint32_t>());
    in.w = int(r.get<std::uint32_t>());
    if (in.c <= 0 || in.d <= 0 || in.h <= 0 || in.w <= 0 || in.size() > (1u << 26)) throw ModelError("bad input shape");
    SteerModel m(in);
    const auto n = r.get<std::uint32_t>();
    if (n > 1024) throw ModelError("too many layers");
    std::vector<std::uint32_t> counts;
    Shape cur = in;
    for (std::uint32_t k = 0; k < n; ++k) {
        const auto t = LayerType(r.get<std::uint8_t>());
        std::vector<std::uint32_t> ints(r.get<std::uint8_t>());
        for (auto& v : ints) v = r.get<std::uint32_t>();
        std::vector<float> floats(r.get<std::uint8_t>());
        for (auto& v : floats) v = r.get<float>();
        const auto count = r.get<std::uint32_t>();
        std::unique_ptr<Layer> layer;
        try {
            layer = make_layer(t, ints, floats);
            cur = layer->output_shape(cur);
        } catch (const ShapeMismatch& e) {
            throw ModelError(std::string("inconsistent layer: ") + e.what());
        }
        if (layer->params.size() != count) throw ModelError("parameter count mismatch");
        m.layers_.push_back(std::move(layer));
    }
    for (auto& l : m.layers_) {
        for (double& p : l->params) p = double(r.get<float>());
    }
    if (r.pos != bytes.size()) throw ModelError("trailing bytes in model file");
    if (cur.size() != 1) throw ModelError("model must produce a single output");
    return m;
}

void SteerModel::save(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ModelError("cannot write " + path.string());
    const std::string s = serialize();
    f.write(s.data(), std::streamsize(s.size()));
    if (!f) throw ModelError("write failed for " + path.string());
}

SteerModel SteerModel::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ModelError("cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return deserialize(ss.str());
}

// Architectures

SteerModel make_single_model(std::uint64_t seed, int width, int height) {
    std::mt19937_64 rng(seed);
    SteerModel m(Shape{1, 1, height, width});
    m.add(std::make_unique<ConvLayer>(false, 1, 8, 1, 5, 5, 1, 2, 2), rng);
    m.add(std::make_unique<ReluLayer>(), rng);
    m.add(std::make_unique<ConvLayer>(false, 8, 16, 1, 3, 3, 1, 2, 2), rng);
    m.add(std::make_unique<ReluLayer>(), rng);
    m.add(std::make_unique<ConvLayer>(false, 16, 32, 1, 3, 3, 1, 2, 2), rng);
    m.add(std::make_unique<ReluLayer>(), rng);
    m.add(std::make_unique<FlattenLayer>(), rng);
    m.add(std::make_unique<DenseLayer>(int(m.output_shape().size()), 64), rng);
    m.add(std::make_unique<ReluLayer>(), rng);
    m.add(std::make_unique<DropoutLayer>(0.2), rng);
    m.add(std::make_unique<DenseLayer>(64, 1), rng);
    m.add(std::make_unique<ScaleLayer>(kOutputScaleDeg), rng);
    return m;
}

SteerModel make_sequence_model(std::uint64_t seed, int width, int height) {
    std::mt19937_64 rng(seed);
    SteerModel m(Shape{1, 3, height, width});
    m.add(std::make_unique<ConvLayer>(true, 1, 8, 3, 5, 5, 1, 2, 2), rng);
    m.add(std::make_unique<ReluLayer>(), rng);
    m.add(std::make_unique<ConvLayer>(true, 8, 16, 1, 3, 3, 1, 2, 2), rng);
    m.add(std::make_unique<ReluLayer>(), rng);
    m.add(std::make_unique<FlattenLayer>(), rng);
    m.add(std::make_unique<DenseLayer>(int(m.output_shape().size()), 64), rng);
    m.add(std::make_unique<ReluLayer>(), rng);
    m.add(std::make_unique<DenseLayer>(64, 1), rng);
    m.add(std::make_unique<ScaleLayer>(kOutputScaleDeg), rng);
    return m;
}

SteerModel make_model(Arch arch, std::uint64_t seed, int width, int height) {
    return arch == Arch::Single ? make_single_model(seed, width, height) : make_sequence_model(seed, width, height);
}

Tensor frames_to_tensor(std::span<const Frame* const> frames) {
    if (frames.empty()) throw ShapeMismatch("no frames");
    const int w = frames[0]->width, h = frames[0]->height;
    Tensor t(Shape{1, int(frames.size()), h, w});
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const Frame& f = *frames[k];
        if (f.width != w || f.height != h || f.pixels.size() != std::size_t(w) * std::size_t(h)) {
            throw ShapeMismatch("frames in a stack must share a size");
        }
        double* dst = &t.v[t.index(0, int(k), 0, 0)];
        for (std::size_t i = 0; i < f.pixels.size(); ++i) dst[i] = f.pixels[i] / 255.0;
    }
    return t;
}

Tensor frames_to_tensor(std::span<const Frame> frames) {
    std::vector<const Frame*> ptrs;
    for (const auto& f : frames) ptrs.push_back(&f);
    return frames_to_tensor(std::span<const Frame* const>(ptrs));
}

// Training

void TrainConfig::validate() const {
    if (batch_size <= 0) throw std::invalid_argument("batch size must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
    if (max_epochs <= 0) throw std::invalid_argument("max epochs must be positive");
    if (patience_epochs <= 0) throw std::invalid_argument("patience must be positive");
    if (!(min_delta >= 0.0)) throw std::invalid_argument("min delta must be non-negative");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw std::invalid_argument("validation fraction must be in (0, 1)");
    }
}

Split split_dataset(std::size_t n, double validation_fraction, std::uint64_t seed,
                    const std::vector<std::size_t>* groups) {
    if (groups != nullptr && groups->size() != n) throw std::invalid_argument("group list size mismatch");
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(groups ? (*groups)[i] : i);
    std::vector<std::size_t> uniq = ids;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::mt19937_64 rng(seed);
    std::shuffle(uniq.begin(), uniq.end(), rng);
    const std::size_t n_val =
        std::clamp<std::size_t>(std::size_t(std::llround(validation_fraction * double(uniq.size()))), 1,
                                uniq.size() > 1 ? uniq.size() - 1 : 1);
    std::vector<std::size_t> val_groups(uniq.begin(), uniq.begin() + std::ptrdiff_t(std::min(n_val, uniq.size())));
    std::sort(val_groups.begin(), val_groups.end());
    Split s;
    for (std::size_t i = 0; i < n; ++i) {
        (std::binary_search(val_groups.begin(), val_groups.end(), ids[i]) ? s.validation : s.train).push_back(i);
    }
    return s;
}

namespace {

Tensor sample_tensor(const LabeledSample& s) { return frames_to_tensor(std::span<const Frame>(s.frames)); }

double mse_on(const SteerModel& m, std::span<const LabeledSample> data, const std::vector<std::size_t>& idx) {
    double acc = 0.0;
    for (std::size_t i : idx) {
        const double e = m.forward(sample_tensor(data[i])) - data[i].steer_deg;
        acc += e * e;
    }
    return idx.empty() ? 0.0 : acc / double(idx.size());
}

}  // namespace

TrainResult train(std::span<const LabeledSample> data, Arch arch, const TrainConfig& config,
                  const std::vector<std::size_t>* groups) {
    config.validate();
    if (data.size() < 2) throw EmptyDataset("training needs at least two samples");
    const auto t0 = std::chrono::steady_clock::now();

    TrainResult result{make_model(arch, config.seed), {}, split_dataset(data.size(), config.validation_fraction,
                                                                        config.seed ^ 0x5eed5eedULL, groups)};
    SteerModel& model = result.model;
    TrainReport& rep = result.report;
    const Split& split = result.split;
    if (split.train.empty() || split.validation.empty()) throw EmptyDataset("split left an empty partition");
    const int depth = model.input_shape().d;
    for (const auto& s : data) {
        if (int(s.frames.size()) != depth) throw ShapeMismatch("sample depth does not match the architecture");
    }

    for (std::size_t i : split.validation) rep.zero_predictor_val_mse += data[i].steer_deg * data[i].steer_deg;
    rep.zero_predictor_val_mse /= double(split.validation.size());

    std::mt19937_64 rng(config.seed ^ 0x7a11ULL);
    std::vector<std::size_t> order = split.train;
    auto velocity = model.zero_grads();
    SteerModel best = model;
    rep.best_val_mse = std::numeric_limits<double>::infinity();
    double reference = rep.best_val_mse;
    int since = 0;
    Workspace ws;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += std::size_t(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + std::size_t(config.batch_size));
            const double inv = 1.0 / double(end - start);
            auto grads = model.zero_grads();
            for (std::size_t k = start; k < end; ++k) {
                const LabeledSample& s = data[order[k]];
                const double pred = model.forward(sample_tensor(s), ws, true, &rng);
                const double err = pred - s.steer_deg;
                loss_sum += err * err;
                model.backward(ws, 2.0 * err * inv, grads);
            }
            for (std::size_t l = 0; l < model.layer_count(); ++l) {
                auto& p = model.layer(l).params;
                for (std::size_t j = 0; j < p.size(); ++j) {
                    velocity[l][j] = config.momentum * velocity[l][j] - config.learning_rate * grads[l][j];
                    p[j] += velocity[l][j];
                }
            }
        }
        const double train_mse = loss_sum / double(order.size());
        const double val_mse = mse_on(model, data, split.validation);
        rep.train_mse.push_back(train_mse);
        rep.val_mse.push_back(val_mse);
        if (!std::isfinite(train_mse) || !std::isfinite(val_mse)) {
            throw Divergence("loss became non-finite at epoch " + std::to_string(epoch));
        }
        spdlog::info("epoch {} train_mse {:.4f} val_mse {:.4f}", epoch, train_mse, val_mse);
        if (val_mse < rep.best_val_mse) {
            rep.best_val_mse = val_mse;
            rep.best_epoch = epoch;
            best = model;
        }
        if (val_mse < reference - config.min_delta) {
            reference = val_mse;
            since = 0;
        } else if (++since >= config.patience_epochs) {
            rep.stopped_early = true;
            break;
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (config.max_seconds && elapsed >= *config.max_seconds) break;
    }
    model = std::move(best);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

EvalResult evaluate(const SteerModel& model, std::span<const LabeledSample> data,
                    const std::vector<std::size_t>* subset) {
    EvalResult r;
    std::vector<std::size_t> idx;
    if (subset) {
        idx = *subset;
    } else {
        idx.resize(data.size());
        std::iota(idx.begin(), idx.end(), 0);
    }
    if (idx.empty()) throw EmptyDataset("nothing to evaluate");
    double acc = 0.0;
    for (std::size_t i : idx) {
        const double p = model.forward(sample_tensor(data[i]));
        r.pairs.emplace_back(data[i].steer_deg, p);
        acc += (p - data[i].steer_deg) * (p - data[i].steer_deg);
    }
    r.mse = acc / double(idx.size());
    return r;
}

void write_pairs_csv(const std::filesystem::path& path, const EvalResult& result) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << "truth_deg,pred_deg\n";
    for (const auto& [t, p] : result.pairs) f << format_double(t) << ',' << format_double(p) << '\n';
}

double slew_limit(double prev_deg, double proposed_deg, double max_rate_deg_per_s, double dt) {
    if (!(max_rate_deg_per_s > 0.0) || !(dt > 0.0)) throw std::invalid_argument("slew rate and dt must be positive");
    const double step = max_rate_deg_per_s * dt;
    return std::clamp(proposed_deg, prev_deg - step, prev_deg + step);
}

double angle_to_pulse(double angle_deg, double steer_max_deg) {
    if (!(steer_max_deg > 0.0)) throw std::invalid_argument("steer max must be positive");
    const double a = std::clamp(angle_deg, -steer_max_deg, steer_max_deg);
    return 1500.0 + 500.0 * a / steer_max_deg;
}

}  // namespace laneforge
