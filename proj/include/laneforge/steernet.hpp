#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "laneforge/datalog.hpp"
#include "laneforge/frame.hpp"

namespace laneforge {

struct Shape {
    int c = 1;  // channels
    int d = 1;  // depth (time)
    int h = 1;
    int w = 1;

    std::size_t size() const { return std::size_t(c) * std::size_t(d) * std::size_t(h) * std::size_t(w); }
    bool operator==(const Shape&) const = default;
};

struct Tensor {
    Shape shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(s), v(s.size(), fill) {}
    double& at(int c, int d, int y, int x) { return v[index(c, d, y, x)]; }
    double at(int c, int d, int y, int x) const { return v[index(c, d, y, x)]; }
    std::size_t index(int c, int d, int y, int x) const {
        return ((std::size_t(c) * std::size_t(shape.d) + std::size_t(d)) * std::size_t(shape.h) + std::size_t(y)) *
                   std::size_t(shape.w) +
               std::size_t(x);
    }
};

class ShapeMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};
class EmptyDataset : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};
class Divergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LayerType : std::uint8_t { Conv2D = 1, Conv3D, MaxPool2D, ReLU, Flatten, Dense, Dropout, Scale };

/// Per-sample scratch a layer keeps between forward and backward.
struct LayerCache {
    std::vector<std::uint32_t> index;  // pooling argmax
    std::vector<double> mask;          // dropout keep mask
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual LayerType type() const = 0;
    virtual Shape output_shape(const Shape& in) const = 0;
    virtual void forward(const Tensor& in, Tensor& out, LayerCache& cache, bool train, std::mt19937_64* rng) const = 0;
    /// Accumulates parameter gradients into `grad` and writes din.
    virtual void backward(const Tensor& in, const Tensor& out, const Tensor& dout, Tensor& din, const LayerCache& cache,
                          std::vector<double>& grad) const = 0;
    virtual std::vector<std::uint32_t> hyper_ints() const { return {}; }
    virtual std::vector<float> hyper_floats() const { return {}; }
    /// Sizes the parameters for the given input and draws initial values.
    virtual void init(const Shape& /*in*/, std::mt19937_64& /*rng*/) {}
    virtual std::unique_ptr<Layer> clone() const = 0;

    std::vector<double> params;
};

/// Convolution with valid padding over (depth, height, width). A 2-D
/// convolution is the depth-1 case.
class ConvLayer : public Layer {
public:
    ConvLayer(bool three_d, int in_c, int out_c, int kd, int kh, int kw, int sd, int sh, int sw);
    LayerType type() const override { return three_d_ ? LayerType::Conv3D : LayerType::Conv2D; }
    Shape output_shape(const Shape& in) const override;
    void forward(const Tensor& in, Tensor& out, LayerCache& cache, bool train, std::mt19937_64* rng) const override;
    void backward(const Tensor& in, const Tensor& out, const Tensor& dout, Tensor& din, const LayerCache& cache,
                  std::vector<double>& grad) const override;
    std::vector<std::uint32_t> hyper_ints() const override;
    void init(const Shape& in, std::mt19937_64& rng) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ConvLayer>(*this); }

    std::size_t weight_index(int co, int ci, int z, int y, int x) const {
        return (((std::size_t(co) * std::size_t(in_c_) + std::size_t(ci)) * std::size_t(kd_) + std::size_t(z)) *
                     std::size_t(kh_) +
                 std::size_t(y)) *
                   std::size_t(kw_) +
               std::size_t(x);
    }
    std::size_t bias_index(int co) const { return weight_count() + std::size_t(co); }
    std::size_t weight_count() const {
        return std::size_t(out_c_) * std::size_t(in_c_) * std::size_t(kd_) * std::size_t(kh_) * std::size_t(kw_);
    }

private:
    bool three_d_;
    int in_c_, out_c_, kd_, kh_, kw_, sd_, sh_, sw_;
};

class MaxPoolLayer : public Layer {
public:
    MaxPoolLayer(int k, int stride) : k_(k), stride_(stride) {}
    LayerType type() const override { return LayerType::MaxPool2D; }
    Shape output_shape(const Shape& in) const override;
    void forward(const Tensor& in, Tensor& out, LayerCache& cache, bool train, std::mt19937_64* rng) const override;
    void backward(const Tensor& in, const Tensor& out, const Tensor& dout, Tensor& din, const LayerCache& cache,
                  std::vector<double>& grad) const override;
    std::vector<std::uint32_t> hyper_ints() const override { return {std::uint32_t(k_), std::uint32_t(stride_)}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPoolLayer>(*this); }

private:
    int k_, stride_;
};

class ReluLayer : public Layer {
public:
    LayerType type() const override { return LayerType::ReLU; }
    Shape output_shape(const Shape& in) const override { return in; }
    void forward(const Tensor& in, Tensor& out, LayerCache& cache, bool train, std::mt19937_64* rng) const override;
    void backward(const Tensor& in, const Tensor& out, const Tensor& dout, Tensor& din, const LayerCache& cache,
                  std::vector<double>& grad) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReluLayer>(*this); }
};

class FlattenLayer : public Layer {
public:
    LayerType type() const override { return LayerType::Flatten; }
    Shape output_shape(const Shape& in) const override { return {int(in.size()), 1, 1, 1}; }
    void forward(const Tensor& in, Tensor& out, LayerCache& cache, bool train, std::mt19937_64* rng) const override;
    void backward(const Tensor& in, const Tensor& out, const Tensor& dout, Tensor& din, const LayerCache& cache,
                  std::vector<double>& grad) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<FlattenLayer>(*this); }
};

class DenseLayer : public Layer {
public:
    DenseLayer(int in, int out);
    LayerType type() const override { return LayerType::Dense; }
    Shape output_shape(const Shape& in) const override;
    void forward(const Tensor& in, Tensor& out, LayerCache& cache, bool train, std::mt19937_64* rng) const override;
    void backward(const Tensor& in, const Tensor& out, const Tensor& dout, Tensor& din, const LayerCache& cache,
                  std::vector<double>& grad) const override;
    std::vector<std::uint32_t> hyper_ints() const override { return {std::uint32_t(in_), std::uint32_t(out_)}; }
    void init(const Shape& in, std::mt19937_64& rng) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }

private:
    int in_, out_;
};

/// Inverted dropout; identity at inference.
class DropoutLayer : public Layer {
public:
    explicit DropoutLayer(double rate) : rate_(rate) {}
    LayerType type() const override { return LayerType::Dropout; }
    Shape output_shape(const Shape& in) const override { return in; }
    void forward(const Tensor& in, Tensor& out, LayerCache& cache, bool train, std::mt19937_64* rng) const override;
    void backward(const Tensor& in, const Tensor& out, const Tensor& dout, Tensor& din, const LayerCache& cache,
                  std::vector<double>& grad) const override;
    std::vector<float> hyper_floats() const override { return {float(rate_)}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<DropoutLayer>(*this); }

private:
    double rate_;
};

/// Fixed output gain (no parameters).
class ScaleLayer : public Layer {
public:
    explicit ScaleLayer(double factor) : factor_(factor) {}
    LayerType type() const override { return LayerType::Scale; }
    Shape output_shape(const Shape& in) const override { return in; }
    void forward(const Tensor& in, Tensor& out, LayerCache& cache, bool train, std::mt19937_64* rng) const override;
    void backward(const Tensor& in, const Tensor& out, const Tensor& dout, Tensor& din, const LayerCache& cache,
                  std::vector<double>& grad) const override;
    std::vector<float> hyper_floats() const override { return {float(factor_)}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ScaleLayer>(*this); }

private:
    double factor_;
};

enum class Arch : std::uint8_t { Single, Sequence };

/// Activations and caches for one forward/backward pass.
struct Workspace {
    std::vector<Tensor> acts;
    std::vector<Tensor> grads;
    std::vector<LayerCache> caches;
};

class SteerModel {
public:
    SteerModel() = default;
    explicit SteerModel(Shape input) : input_(input) {}
    SteerModel(const SteerModel& o);
    SteerModel& operator=(const SteerModel& o);
    SteerModel(SteerModel&&) = default;
    SteerModel& operator=(SteerModel&&) = default;

    /// Appends a layer; its input shape is the current output shape.
    void add(std::unique_ptr<Layer> layer, std::mt19937_64& rng);

    const Shape& input_shape() const { return input_; }
    Shape output_shape() const;
    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }
    const Layer& layer(std::size_t i) const { return *layers_[i]; }
    std::size_t param_count() const;

    /// Inference (dropout off). Throws ShapeMismatch.
    double forward(const Tensor& input) const;
    /// Forward keeping activations in ws; dropout active when train.
    double forward(const Tensor& input, Workspace& ws, bool train, std::mt19937_64* rng) const;
    /// Backpropagates dLoss/dOutput through the activations in ws, adding
    /// into grads (one vector per layer).
    void backward(Workspace& ws, double dloss_dout, std::vector<std::vector<double>>& grads) const;
    std::vector<std::vector<double>> zero_grads() const;

    void save(const std::filesystem::path& path) const;
    static SteerModel load(const std::filesystem::path& path);
    std::string serialize() const;
    static SteerModel deserialize(const std::string& bytes);

private:
    Shape input_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// Gradients of the single-sample squared error (pred - target)^2.
std::vector<std::vector<double>> backward(const SteerModel& model, const Tensor& input, double target);

inline constexpr int kModelWidth = 64;
inline constexpr int kModelHeight = 48;
inline constexpr double kOutputScaleDeg = 30.0;

SteerModel make_single_model(std::uint64_t seed, int width = kModelWidth, int height = kModelHeight);
SteerModel make_sequence_model(std::uint64_t seed, int width = kModelWidth, int height = kModelHeight);
SteerModel make_model(Arch arch, std::uint64_t seed, int width = kModelWidth, int height = kModelHeight);

/// Frames scaled to [0, 1], stacked along depth.
Tensor frames_to_tensor(std::span<const Frame> frames);
Tensor frames_to_tensor(std::span<const Frame* const> frames);

struct TrainConfig {
    int batch_size = 64;
    double learning_rate = 1e-5;
    double momentum = 0.9;
    int max_epochs = 200;
    int patience_epochs = 50;
    double min_delta = 0.1;
    double validation_fraction = 0.2;
    std::uint64_t seed = 1;
    /// Stops after the epoch that crosses this wall-clock budget.
    std::optional<double> max_seconds;

    void validate() const;
};

struct TrainReport {
    std::vector<double> train_mse;
    std::vector<double> val_mse;
    int best_epoch = -1;
    double best_val_mse = 0.0;
    double zero_predictor_val_mse = 0.0;
    double wall_seconds = 0.0;
    bool stopped_early = false;
};

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

/// Seeded split that keeps items with the same group together.
Split split_dataset(std::size_t n, double validation_fraction, std::uint64_t seed,
                    const std::vector<std::size_t>* groups = nullptr);

struct TrainResult {
    SteerModel model;
    TrainReport report;
    Split split;
};

TrainResult train(std::span<const LabeledSample> data, Arch arch, const TrainConfig& config,
                  const std::vector<std::size_t>* groups = nullptr);

struct EvalResult {
    double mse = 0.0;
    std::vector<std::pair<double, double>> pairs;  // truth, prediction
};

EvalResult evaluate(const SteerModel& model, std::span<const LabeledSample> data,
                    const std::vector<std::size_t>* subset = nullptr);
void write_pairs_csv(const std::filesystem::path& path, const EvalResult& result);

double slew_limit(double prev_deg, double proposed_deg, double max_rate_deg_per_s, double dt);
/// Servo pulse width in microseconds, 1000 at full left lock to 2000 at full right.
double angle_to_pulse(double angle_deg, double steer_max_deg);

}  // namespace laneforge
