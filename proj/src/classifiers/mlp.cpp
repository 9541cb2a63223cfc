#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "internal.hpp"
#include "mpt/errors.hpp"

namespace mpt {

std::size_t mlp_parameter_count(int f, int j, int l, int k) {
    const auto F = static_cast<std::size_t>(f), J = static_cast<std::size_t>(j), L = static_cast<std::size_t>(l),
               K = static_cast<std::size_t>(k);
    return J * J * (L - 1) + J * (F + L + K) + K;
}

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

std::vector<double> MlpParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (std::size_t l = 0; l < weights.size(); ++l) {
        flat.insert(flat.end(), weights[l].begin(), weights[l].end());
        flat.insert(flat.end(), biases[l].begin(), biases[l].end());
    }
    return flat;
}

void MlpParams::unflatten(const std::vector<double>& flat) {
    if (flat.size() != parameter_count()) throw DimensionMismatch("parameter vector has the wrong length");
    auto it = flat.begin();
    for (std::size_t l = 0; l < weights.size(); ++l) {
        std::copy(it, it + static_cast<std::ptrdiff_t>(weights[l].size()), weights[l].begin());
        it += static_cast<std::ptrdiff_t>(weights[l].size());
        std::copy(it, it + static_cast<std::ptrdiff_t>(biases[l].size()), biases[l].begin());
        it += static_cast<std::ptrdiff_t>(biases[l].size());
    }
}

namespace {

using detail::RowMatrix;
using ConstMap = Eigen::Map<const RowMatrix>;

void activate(RowMatrix& h, Activation act) {
    if (act == Activation::Sigmoid) {
        h = (1.0 + (-h.array()).exp()).inverse().matrix();
        return;
    }
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
        const double top = h.row(i).maxCoeff();
        h.row(i) = (h.row(i).array() - top).exp();
        h.row(i) /= h.row(i).sum();
    }
}

void softmax_rows(RowMatrix& a) { activate(a, Activation::Softmax); }

// Layer outputs for a batch: out[0] = input, out[L+1] = softmax output.
std::vector<RowMatrix> forward(const MlpParams& p, const RowMatrix& x) {
    const std::size_t layers = p.weights.size();
    std::vector<RowMatrix> out(layers + 1);
    out[0] = x;
    for (std::size_t l = 0; l < layers; ++l) {
        ConstMap w(p.weights[l].data(), p.widths[l + 1], p.widths[l]);
        Eigen::Map<const Eigen::RowVectorXd> b(p.biases[l].data(), p.widths[l + 1]);
        out[l + 1] = (out[l] * w.transpose()).rowwise() + b;
        if (l + 1 < layers) activate(out[l + 1], p.activation);
        else softmax_rows(out[l + 1]);
    }
    return out;
}

double batch_loss(const RowMatrix& y, const std::vector<int>& labels, const int* idx) {
    double loss = 0;
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        loss -= std::log(std::max(y(i, labels[static_cast<std::size_t>(idx[i])]), std::numeric_limits<double>::min()));
    return loss;
}

// Gradient of the summed logloss into `grad` (flatten order).
void backward(const MlpParams& p, const std::vector<RowMatrix>& out, const std::vector<int>& labels, const int* idx,
              std::vector<double>& grad) {
    const std::size_t layers = p.weights.size();
    RowMatrix delta = out[layers];
    for (Eigen::Index i = 0; i < delta.rows(); ++i) delta(i, labels[static_cast<std::size_t>(idx[i])]) -= 1.0;
    std::vector<std::size_t> offset(layers);
    std::size_t at = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        offset[l] = at;
        at += p.weights[l].size() + p.biases[l].size();
    }
    for (std::size_t l = layers; l-- > 0;) {
        const auto rows = p.widths[l + 1], cols = p.widths[l];
        Eigen::Map<RowMatrix> gw(grad.data() + offset[l], rows, cols);
        Eigen::Map<Eigen::RowVectorXd> gb(grad.data() + offset[l] + p.weights[l].size(), rows);
        gw.noalias() = delta.transpose() * out[l];
        gb = delta.colwise().sum();
        if (l == 0) break;
        ConstMap w(p.weights[l].data(), rows, cols);
        RowMatrix prev = delta * w;
        const RowMatrix& h = out[l];
        if (p.activation == Activation::Sigmoid) {
            prev.array() *= h.array() * (1.0 - h.array());
        } else {
            for (Eigen::Index i = 0; i < prev.rows(); ++i) {
                const double s = prev.row(i).dot(h.row(i));
                prev.row(i) = h.row(i).array() * (prev.row(i).array() - s);
            }
        }
        delta = std::move(prev);
    }
}

RowMatrix to_matrix(const std::vector<std::vector<double>>& x) {
    RowMatrix m(static_cast<Eigen::Index>(x.size()), x.empty() ? 0 : static_cast<Eigen::Index>(x.front().size()));
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x[i][j];
    return m;
}

}  // namespace

std::vector<double> mlp_forward(const MlpParams& p, const std::vector<double>& z) {
    RowMatrix x(1, static_cast<Eigen::Index>(z.size()));
    for (std::size_t j = 0; j < z.size(); ++j) x(0, static_cast<Eigen::Index>(j)) = z[j];
    const auto out = forward(p, x);
    const auto& y = out.back();
    return {y.data(), y.data() + y.cols()};
}

std::vector<double> mlp_gradient(const MlpParams& p, const std::vector<std::vector<double>>& x,
                                 const std::vector<int>& labels) {
    if (x.empty()) throw ValidationError("mlp_gradient needs a non-empty batch");
    std::vector<int> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<int> zero_based(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) zero_based[i] = labels[i] - 1;
    std::vector<double> grad(p.parameter_count(), 0.0);
    backward(p, forward(p, to_matrix(x)), zero_based, idx.data(), grad);
    return grad;
}

double mlp_loss(const MlpParams& p, const std::vector<std::vector<double>>& x, const std::vector<int>& labels) {
    std::vector<int> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<int> zero_based(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) zero_based[i] = labels[i] - 1;
    return batch_loss(forward(p, to_matrix(x)).back(), zero_based, idx.data());
}

namespace detail {

MlpParams fit_mlp(const RowMatrix& z, const std::vector<int>& labels, int k, const MlpOptions& o, std::uint64_t seed,
                  TrainingInfo& info) {
    if (o.hidden.empty()) throw ValidationError("mlp needs at least one hidden layer");
    for (int w : o.hidden)
        if (w < 1) throw ValidationError("hidden layer widths must be positive");
    MlpParams p;
    p.activation = o.activation;
    p.widths.push_back(static_cast<int>(z.cols()));
    p.widths.insert(p.widths.end(), o.hidden.begin(), o.hidden.end());
    p.widths.push_back(k);

    // Glorot-uniform initialisation (factor 2 for the logistic sigmoid)
    Rng rng(seed);
    const std::size_t layers = p.widths.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const int fan_in = p.widths[l], fan_out = p.widths[l + 1];
        const double factor = o.activation == Activation::Sigmoid ? 2.0 : 6.0;
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const double bound = std::sqrt(factor / (fan_in + fan_out));
        p.weights.emplace_back(static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(fan_out));
        p.biases.emplace_back(static_cast<std::size_t>(fan_out));
        for (auto& v : p.weights.back()) v = bound * u(rng);
        for (auto& v : p.biases.back()) v = bound * u(rng);
    }

    const auto n = static_cast<std::size_t>(z.rows());
    const auto batch = static_cast<std::size_t>(std::clamp<long>(o.batch_size, 1, static_cast<long>(n)));
    std::vector<double> theta = p.flatten(), m(theta.size(), 0.0), v(theta.size(), 0.0), grad(theta.size());
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0;
    double best = std::numeric_limits<double>::infinity();
    int no_improvement = 0;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    info.converged = false;
    info.loss_history.clear();
    RowMatrix xb;
    for (int epoch = 0; epoch < o.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t len = std::min(batch, n - start);
            const int* idx = order.data() + start;
            xb.resize(static_cast<Eigen::Index>(len), z.cols());
            for (std::size_t i = 0; i < len; ++i) xb.row(static_cast<Eigen::Index>(i)) = z.row(idx[i]);
            const auto out = forward(p, xb);
            double loss = batch_loss(out.back(), labels, idx);
            std::fill(grad.begin(), grad.end(), 0.0);
            backward(p, out, labels, idx, grad);
            // L2 on weights only, scaled like the per-sample loss
            std::size_t at = 0;
            double penalty = 0;
            for (std::size_t l = 0; l < layers; ++l) {
                for (std::size_t q = 0; q < p.weights[l].size(); ++q) {
                    grad[at + q] += o.l2 * theta[at + q];
                    penalty += theta[at + q] * theta[at + q];
                }
                at += p.weights[l].size() + p.biases[l].size();
            }
            loss += 0.5 * o.l2 * penalty;
            epoch_loss += loss;
            ++t;
            const double lr = o.learning_rate * std::sqrt(1.0 - std::pow(beta2, static_cast<double>(t))) /
                              (1.0 - std::pow(beta1, static_cast<double>(t)));
            const double inv = 1.0 / static_cast<double>(len);
            for (std::size_t q = 0; q < theta.size(); ++q) {
                const double g = grad[q] * inv;
                m[q] = beta1 * m[q] + (1.0 - beta1) * g;
                v[q] = beta2 * v[q] + (1.0 - beta2) * g * g;
                theta[q] -= lr * m[q] / (std::sqrt(v[q]) + eps);
            }
            p.unflatten(theta);
        }
        epoch_loss /= static_cast<double>(n);
        info.loss_history.push_back(epoch_loss);
        info.iterations = epoch + 1;
        info.final_loss = epoch_loss;
        if (epoch_loss > best - o.tol) ++no_improvement;
        else no_improvement = 0;
        best = std::min(best, epoch_loss);
        if (no_improvement > o.n_iter_no_change) {
            info.converged = true;
            break;
        }
    }
    return p;
}

}  // namespace detail

}  // namespace mpt
