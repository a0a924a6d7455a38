#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cann/dataset.hpp"
#include "cann/matrix.hpp"

#include "json.hpp"

namespace cann {

struct TrainConfig {
    double learning_rate = 0.3;
    std::size_t epochs = 100;
    std::vector<std::size_t> hidden_sizes; // empty -> default_hidden_size
    std::uint64_t seed = 1;
    double init_range = 0.5;

    void validate() const; // throws std::invalid_argument
};

/// Default single hidden layer: max(4, ceil((K + C) / 2)).
std::size_t default_hidden_size(std::size_t n_features, std::size_t n_outputs);

/// Fully connected feed-forward net with logistic activations on every
/// non-input layer. weights[l](i, j) connects unit i of layer l to unit j of
/// layer l+1; biases[l][j] belongs to unit j of layer l+1.
struct Network {
    std::vector<std::size_t> layer_sizes; // [K, H_1..H_m, C]
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    std::size_t n_inputs() const { return layer_sizes.front(); }
    std::size_t n_outputs() const { return layer_sizes.back(); }
    std::size_t n_layers() const { return layer_sizes.size(); }
    std::size_t last_hidden_size() const { return layer_sizes[layer_sizes.size() - 2]; }

    friend bool operator==(const Network&, const Network&) = default;
};

/// Weights and biases i.i.d. uniform over [-init_range, +init_range).
Network init_network(std::span<const std::size_t> layer_sizes, std::uint64_t seed,
                     double init_range);

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logistic_slope(double y) { return y * (1.0 - y); } // derivative in terms of the output

struct ForwardTrace {
    std::vector<std::vector<double>> activations; // activations[0] == input

    const std::vector<double>& output() const { return activations.back(); }
    const std::vector<double>& last_hidden() const {
        return activations[activations.size() - 2];
    }
};

ForwardTrace forward(const Network& net, std::span<const double> x);

/// Per-parameter update directions; applying `learning_rate * g` to the
/// network descends the error the output deltas were derived from.
struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    void accumulate(const Gradients& other, double scale = 1.0);
};

Gradients zero_gradients(const Network& net);

/// Standard delta propagation: hidden deltas are
/// h_j (1 - h_j) * sum_p delta_p w_{jp}, weight directions are
/// delta_downstream * activation_upstream, bias directions are the deltas.
/// Output-layer deltas come from the caller.
Gradients backprop_gradients(const Network& net, const ForwardTrace& trace,
                             std::span<const double> output_deltas);

void apply_update(Network& net, const Gradients& g, double learning_rate);

/// backprop_gradients + apply_update in one call.
void backprop_step(Network& net, const ForwardTrace& trace,
                   std::span<const double> output_deltas, double learning_rate);

/// Argmax over output activations, ties to the lowest index.
std::size_t predict(const Network& net, std::span<const double> x);

double data_error(const Network& net, const Dataset& ds, std::span<const std::size_t> rows);
double accuracy_percent(const Network& net, const Dataset& ds,
                        std::span<const std::size_t> rows);

struct EpochLog {
    std::size_t epoch = 0; // 1-based
    double data_err = 0.0;
    std::optional<double> corr_err;
    std::optional<double> blended_err;
    double train_accuracy = 0.0;
};

/// Called at each epoch end with the end-of-epoch metrics and weights.
using EpochObserver = std::function<void(const EpochLog&, const Network&)>;

/// Stochastic gradient descent on the squared data error: per epoch the
/// train instances are visited in a seeded shuffled order, each contributing
/// one backprop step with deltas (t - y) y (1 - y).
Network train_plain(Network net, const Dataset& ds, const Split& sp,
                    const TrainConfig& cfg, const EpochObserver& observer = {});

void save_network_json(const Network& net, const std::filesystem::path& path,
                       const nlohmann::json& provenance = nlohmann::json::object());
Network load_network_json(const std::filesystem::path& path);

} // namespace cann
