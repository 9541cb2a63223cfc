#include <cmath>
#include <limits>

#include "internal.hpp"
#include "mpt/parallel.hpp"

namespace mpt::detail {

namespace {

constexpr double kTau = 1e-12;

double rbf(const double* a, const double* b, Eigen::Index f, double gamma) {
    double d2 = 0;
    for (Eigen::Index j = 0; j < f; ++j) {
        const double d = a[j] - b[j];
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

// Soft-margin dual for one pair, solved by sequential minimal optimisation
// with second-order working-set selection:
//   min 1/2 a^T Q a - e^T a,  0 <= a_i <= C,  y^T a = 0,  Q_ij = y_i y_j K_ij.
BinarySvm solve_pair(const RowMatrix& z, const std::vector<int>& rows, const std::vector<double>& y, double c,
                     double gamma, double eps) {
    const auto n = rows.size();
    const Eigen::Index f = z.cols();
    std::vector<std::vector<double>> cache(n);  // kernel rows, filled lazily
    auto kernel_row = [&](std::size_t i) -> const std::vector<double>& {
        auto& row = cache[i];
        if (row.empty()) {
            row.resize(n);
            const double* zi = z.row(rows[i]).data();
            for (std::size_t j = 0; j < n; ++j) row[j] = rbf(zi, z.row(rows[j]).data(), f, gamma);
        }
        return row;
    };
    std::vector<double> alpha(n, 0.0), grad(n, -1.0);
    auto upper = [&](std::size_t i) { return alpha[i] >= c; };
    auto lower = [&](std::size_t i) { return alpha[i] <= 0.0; };
    const long max_iter = std::max<long>(10000000L, 100L * static_cast<long>(n));
    bool converged = false;
    for (long iter = 0; iter < max_iter; ++iter) {
        // i: maximal violating index in I_up
        double gmax = -std::numeric_limits<double>::infinity(), gmax2 = gmax;
        std::size_t i = n, j = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (y[t] > 0) {
                if (!upper(t) && -grad[t] >= gmax) gmax = -grad[t], i = t;
            } else if (!lower(t) && grad[t] >= gmax) {
                gmax = grad[t], i = t;
            }
        }
        if (i == n) {
            converged = true;
            break;
        }
        const auto& ki = kernel_row(i);
        double obj_min = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            const double quad_base = 2.0 - 2.0 * ki[t];  // K_ii = K_tt = 1 for RBF
            if (y[t] > 0) {
                if (lower(t)) continue;
                const double diff = gmax + grad[t];
                if (grad[t] >= gmax2) gmax2 = grad[t];
                if (diff > 0) {
                    const double obj = -diff * diff / (quad_base > 0 ? quad_base : kTau);
                    if (obj <= obj_min) obj_min = obj, j = t;
                }
            } else {
                if (upper(t)) continue;
                const double diff = gmax - grad[t];
                if (-grad[t] >= gmax2) gmax2 = -grad[t];
                if (diff > 0) {
                    const double obj = -diff * diff / (quad_base > 0 ? quad_base : kTau);
                    if (obj <= obj_min) obj_min = obj, j = t;
                }
            }
        }
        if (gmax + gmax2 < eps || j == n) {
            converged = true;
            break;
        }
        const auto& kj = kernel_row(j);
        const double old_i = alpha[i], old_j = alpha[j];
        double quad = 2.0 - 2.0 * ki[j];
        if (quad <= 0) quad = kTau;
        if (y[i] != y[j]) {
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
            } else if (alpha[i] < 0) {
                alpha[i] = 0, alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > c) alpha[i] = c, alpha[j] = c - diff;
            } else if (alpha[j] > c) {
                alpha[j] = c, alpha[i] = c + diff;
            }
        } else {
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) alpha[i] = c, alpha[j] = sum - c;
            } else if (alpha[j] < 0) {
                alpha[j] = 0, alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) alpha[j] = c, alpha[i] = sum - c;
            } else if (alpha[i] < 0) {
                alpha[i] = 0, alpha[j] = sum;
            }
        }
        const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
    }

    // rho from free vectors, else the midpoint of the feasible interval
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0;
    int free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (upper(t)) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (lower(t)) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++free;
            sum_free += yg;
        }
    }
    BinarySvm m;
    m.rho = free > 0 ? sum_free / free : (ub + lb) / 2;
    m.converged = converged;
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] <= 0.0) continue;
        const auto row = z.row(rows[t]);
        m.support_vectors.emplace_back(row.data(), row.data() + f);
        m.dual_coef.push_back(alpha[t] * y[t]);
    }
    return m;
}

}  // namespace

SvmParams fit_svm(const RowMatrix& z, const std::vector<int>& labels, int k, const SvmOptions& o, int threads,
                  TrainingInfo& info) {
    SvmParams p;
    p.c = o.c;
    p.gamma = o.gamma;
    if (!(p.gamma > 0.0)) {
        const double var = (z.array() - z.mean()).square().mean();
        p.gamma = var > 0.0 ? 1.0 / (static_cast<double>(z.cols()) * var) : 1.0;
    }
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) pairs.emplace_back(a, b);
    p.machines.resize(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t m) {
        const auto [a, b] = pairs[m];
        std::vector<int> rows;
        std::vector<double> y;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == a || labels[i] == b) {
                rows.push_back(static_cast<int>(i));
                y.push_back(labels[i] == a ? 1.0 : -1.0);
            }
        }
        p.machines[m] = solve_pair(z, rows, y, o.c, p.gamma, o.tol);
        p.machines[m].class_a = a + 1;
        p.machines[m].class_b = b + 1;
    });
    info.converged = true;
    for (const auto& m : p.machines) info.converged = info.converged && m.converged;
    info.iterations = static_cast<int>(p.machines.size());
    return p;
}

std::vector<double> svm_votes(const SvmParams& p, int k, const std::vector<double>& z) {
    std::vector<double> votes(static_cast<std::size_t>(k), 0.0);
    const auto f = static_cast<Eigen::Index>(z.size());
    for (const auto& m : p.machines) {
        double d = -m.rho;
        for (std::size_t s = 0; s < m.support_vectors.size(); ++s)
            d += m.dual_coef[s] * rbf(m.support_vectors[s].data(), z.data(), f, p.gamma);
        votes[static_cast<std::size_t>(d > 0 ? m.class_a - 1 : m.class_b - 1)] += 1.0;
    }
    for (auto& v : votes) v /= static_cast<double>(p.machines.size());
    return votes;
}

}  // namespace mpt::detail
