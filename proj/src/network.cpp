#include "cann/network.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cann/rng.hpp"

namespace cann {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(init_range >= 0.0)) throw std::invalid_argument("init_range must be >= 0");
    for (std::size_t h : hidden_sizes) {
        if (h == 0) throw std::invalid_argument("hidden layer sizes must be >= 1");
    }
}

std::size_t default_hidden_size(std::size_t n_features, std::size_t n_outputs) {
    const std::size_t half = (n_features + n_outputs + 1) / 2;
    return std::max<std::size_t>(4, half);
}

Network init_network(std::span<const std::size_t> layer_sizes, std::uint64_t seed,
                     double init_range) {
    if (layer_sizes.size() < 3) {
        throw std::invalid_argument("network needs at least one hidden layer");
    }
    for (std::size_t s : layer_sizes) {
        if (s == 0) throw std::invalid_argument("layer sizes must be >= 1");
    }
    Network net;
    net.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        Matrix w(layer_sizes[l], layer_sizes[l + 1]);
        for (double& v : w.data()) v = uniform_in(rng, -init_range, init_range);
        net.weights.push_back(std::move(w));
        std::vector<double> b(layer_sizes[l + 1]);
        for (double& v : b) v = uniform_in(rng, -init_range, init_range);
        net.biases.push_back(std::move(b));
    }
    return net;
}

ForwardTrace forward(const Network& net, std::span<const double> x) {
    if (x.size() != net.n_inputs()) {
        throw std::invalid_argument("forward: input size does not match the network");
    }
    ForwardTrace trace;
    trace.activations.reserve(net.n_layers());
    trace.activations.emplace_back(x.begin(), x.end());
    for (std::size_t l = 0; l + 1 < net.n_layers(); ++l) {
        const auto& prev = trace.activations.back();
        const Matrix& w = net.weights[l];
        std::vector<double> next(net.layer_sizes[l + 1]);
        for (std::size_t j = 0; j < next.size(); ++j) {
            double sum = net.biases[l][j];
            for (std::size_t i = 0; i < prev.size(); ++i) {
                sum += w(i, j) * prev[i];
            }
            next[j] = logistic(sum);
        }
        trace.activations.push_back(std::move(next));
    }
    return trace;
}

void Gradients::accumulate(const Gradients& other, double scale) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        auto& w = weights[l].data();
        const auto& ow = other.weights[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += scale * ow[i];
        for (std::size_t j = 0; j < biases[l].size(); ++j) {
            biases[l][j] += scale * other.biases[l][j];
        }
    }
}

Gradients zero_gradients(const Network& net) {
    Gradients g;
    for (std::size_t l = 0; l + 1 < net.n_layers(); ++l) {
        g.weights.emplace_back(net.layer_sizes[l], net.layer_sizes[l + 1]);
        g.biases.emplace_back(net.layer_sizes[l + 1], 0.0);
    }
    return g;
}

Gradients backprop_gradients(const Network& net, const ForwardTrace& trace,
                             std::span<const double> output_deltas) {
    if (trace.activations.size() != net.n_layers()) {
        throw std::invalid_argument("backprop: trace does not match the network");
    }
    if (output_deltas.size() != net.n_outputs()) {
        throw std::invalid_argument("backprop: delta count does not match the output layer");
    }

    Gradients g = zero_gradients(net);
    std::vector<double> delta(output_deltas.begin(), output_deltas.end());
    for (std::size_t l = net.n_layers() - 1; l >= 1; --l) {
        const auto& upstream = trace.activations[l - 1];
        Matrix& gw = g.weights[l - 1];
        for (std::size_t j = 0; j < delta.size(); ++j) {
            for (std::size_t i = 0; i < upstream.size(); ++i) {
                gw(i, j) = delta[j] * upstream[i];
            }
            g.biases[l - 1][j] = delta[j];
        }
        if (l == 1) break;
        const Matrix& w = net.weights[l - 1];
        std::vector<double> prev_delta(upstream.size());
        for (std::size_t j = 0; j < upstream.size(); ++j) {
            double sum = 0.0;
            for (std::size_t p = 0; p < delta.size(); ++p) {
                sum += delta[p] * w(j, p);
            }
            prev_delta[j] = logistic_slope(upstream[j]) * sum;
        }
        delta = std::move(prev_delta);
    }
    return g;
}

void apply_update(Network& net, const Gradients& g, double learning_rate) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        auto& w = net.weights[l].data();
        const auto& gw = g.weights[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] += learning_rate * gw[i];
        }
        for (std::size_t j = 0; j < net.biases[l].size(); ++j) {
            net.biases[l][j] += learning_rate * g.biases[l][j];
        }
    }
}

void backprop_step(Network& net, const ForwardTrace& trace,
                   std::span<const double> output_deltas, double learning_rate) {
    apply_update(net, backprop_gradients(net, trace, output_deltas), learning_rate);
}

std::size_t predict(const Network& net, std::span<const double> x) {
    const ForwardTrace trace = forward(net, x);
    const auto& out = trace.output();
    std::size_t best = 0;
    for (std::size_t c = 1; c < out.size(); ++c) {
        if (out[c] > out[best]) best = c;
    }
    return best;
}

double data_error(const Network& net, const Dataset& ds,
                  std::span<const std::size_t> rows) {
    double err = 0.0;
    for (std::size_t r : rows) {
        const ForwardTrace trace = forward(net, ds.features.row(r));
        const auto& y = trace.output();
        for (std::size_t o = 0; o < y.size(); ++o) {
            const double d = ds.targets(r, o) - y[o];
            err += d * d;
        }
    }
    return 0.5 * err;
}

double accuracy_percent(const Network& net, const Dataset& ds,
                        std::span<const std::size_t> rows) {
    if (rows.empty()) throw std::invalid_argument("accuracy_percent: no rows");
    std::size_t correct = 0;
    for (std::size_t r : rows) {
        if (predict(net, ds.features.row(r)) == ds.class_of(r)) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(rows.size());
}

Network train_plain(Network net, const Dataset& ds, const Split& sp,
                    const TrainConfig& cfg, const EpochObserver& observer) {
    cfg.validate();
    if (sp.train_indices.empty()) throw std::invalid_argument("train_plain: empty train set");

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(sp.train_indices.size());
    std::vector<double> deltas(net.n_outputs());

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_in_place(order, rng);
        for (std::size_t slot : order) {
            const std::size_t row = sp.train_indices[slot];
            const ForwardTrace trace = forward(net, ds.features.row(row));
            const auto& y = trace.output();
            for (std::size_t o = 0; o < deltas.size(); ++o) {
                deltas[o] = logistic_slope(y[o]) * (ds.targets(row, o) - y[o]);
            }
            backprop_step(net, trace, deltas, cfg.learning_rate);
        }
        if (observer) {
            EpochLog log;
            log.epoch = epoch;
            log.data_err = data_error(net, ds, sp.train_indices);
            log.train_accuracy = accuracy_percent(net, ds, sp.train_indices);
            observer(log, net);
        }
    }
    return net;
}

void save_network_json(const Network& net, const std::filesystem::path& path,
                       const json& provenance) {
    json j;
    j["layer_sizes"] = net.layer_sizes;
    j["weights"] = json::array();
    for (const auto& w : net.weights) j["weights"].push_back(w.data()); // row-major
    j["biases"] = net.biases;
    if (!provenance.empty()) j["provenance"] = provenance;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Network load_network_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    Network net;
    net.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    if (net.layer_sizes.size() < 2) throw std::runtime_error(path.string() + ": bad layer sizes");
    const auto& jw = j.at("weights");
    const auto& jb = j.at("biases");
    if (jw.size() + 1 != net.layer_sizes.size() || jb.size() + 1 != net.layer_sizes.size()) {
        throw std::runtime_error(path.string() + ": layer count mismatch");
    }
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        Matrix w(net.layer_sizes[l], net.layer_sizes[l + 1]);
        const auto flat = jw[l].get<std::vector<double>>();
        if (flat.size() != w.data().size()) {
            throw std::runtime_error(path.string() + ": weight shape mismatch");
        }
        w.data() = flat;
        net.weights.push_back(std::move(w));
        auto b = jb[l].get<std::vector<double>>();
        if (b.size() != net.layer_sizes[l + 1]) {
            throw std::runtime_error(path.string() + ": bias shape mismatch");
        }
        net.biases.push_back(std::move(b));
    }
    for (const auto& w : net.weights) {
        for (double v : w.data()) {
            if (!std::isfinite(v)) throw std::runtime_error(path.string() + ": non-finite weight");
        }
    }
    return net;
}

} // namespace cann
