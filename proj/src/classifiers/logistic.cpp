#include <ceres/ceres.h>

#include <cmath>

#include "internal.hpp"
#include "mpt/errors.hpp"

namespace mpt::detail {

namespace {

// Softmax regression with the last class as reference (score 0). Parameter
// layout: (K-1) x F weights row by row, then K-1 intercepts.
class SoftmaxObjective final : public ceres::FirstOrderFunction {
public:
    SoftmaxObjective(const RowMatrix& z, const std::vector<int>& labels, int k, double l2)
        : z_(z), labels_(labels), k_(k), l2_(l2) {}

    int NumParameters() const override { return static_cast<int>((k_ - 1) * (z_.cols() + 1)); }

    bool Evaluate(const double* theta, double* cost, double* gradient) const override {
        const Eigen::Index f = z_.cols(), km = k_ - 1, n = z_.rows();
        Eigen::Map<const RowMatrix> w(theta, km, f);
        Eigen::Map<const Eigen::VectorXd> b(theta + km * f, km);
        RowMatrix a(n, k_);
        a.leftCols(km) = (z_ * w.transpose()).rowwise() + b.transpose();
        a.col(km).setZero();
        double loss = 0.5 * l2_ * w.squaredNorm();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double top = a.row(i).maxCoeff();
            auto row = a.row(i);
            const double lse = top + std::log((row.array() - top).exp().sum());
            loss += lse - row(labels_[static_cast<std::size_t>(i)]);
            row = (row.array() - lse).exp();  // probabilities
            row(labels_[static_cast<std::size_t>(i)]) -= 1.0;
        }
        *cost = loss;
        if (gradient) {
            Eigen::Map<RowMatrix> gw(gradient, km, f);
            Eigen::Map<Eigen::VectorXd> gb(gradient + km * f, km);
            gw = a.leftCols(km).transpose() * z_ + l2_ * w;
            gb = a.leftCols(km).colwise().sum().transpose();
        }
        return std::isfinite(loss);
    }

private:
    const RowMatrix& z_;
    const std::vector<int>& labels_;
    int k_;
    double l2_;
};

}  // namespace

LogisticParams fit_logistic(const RowMatrix& z, const std::vector<int>& labels, int k, const LogisticOptions& o,
                            TrainingInfo& info) {
    const auto f = static_cast<std::size_t>(z.cols());
    const auto km = static_cast<std::size_t>(k - 1);
    std::vector<double> theta(km * (f + 1), 0.0);
    ceres::GradientProblem problem(new SoftmaxObjective(z, labels, k, o.l2));
    ceres::GradientProblemSolver::Options opts;
    opts.line_search_direction_type = ceres::LBFGS;
    opts.max_num_iterations = o.max_iter;
    opts.function_tolerance = 1e-12;
    opts.gradient_tolerance = 1e-9;
    opts.parameter_tolerance = 1e-12;
    opts.logging_type = ceres::SILENT;
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(opts, problem, theta.data(), &summary);
    info.converged = summary.termination_type == ceres::CONVERGENCE;
    info.iterations = static_cast<int>(summary.iterations.size());
    info.final_loss = summary.final_cost;

    LogisticParams p;
    p.weights.assign(km, std::vector<double>(f));
    p.intercepts.assign(km, 0.0);
    for (std::size_t c = 0; c < km; ++c) {
        for (std::size_t j = 0; j < f; ++j) p.weights[c][j] = theta[c * f + j];
        p.intercepts[c] = theta[km * f + c];
    }
    return p;
}

LogisticParams fit_logistic_generative(const RowMatrix& z, const std::vector<int>& labels, int k) {
    const Eigen::Index f = z.cols(), n = z.rows();
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(k, f);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        means.row(labels[static_cast<std::size_t>(i)]) += z.row(i);
        counts(labels[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int c = 0; c < k; ++c) means.row(c) /= counts(c);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(f, f);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::RowVectorXd d = z.row(i) - means.row(labels[static_cast<std::size_t>(i)]);
        cov.noalias() += d.transpose() * d;
    }
    cov /= static_cast<double>(n);
    cov = 0.5 * (cov + cov.transpose());
    const double trace = cov.trace();
    if (!(trace > 0.0) || !std::isfinite(trace)) throw SingularCovariance("shared covariance has zero trace");
    Eigen::MatrixXd reg = cov;
    reg.diagonal().array() += 1e-8 * trace;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any())
        throw SingularCovariance("shared covariance is not positive definite after regularisation");

    // a_k = w_k . z + w_k0 with w_k = S^-1 m_k, w_k0 = -m_k S^-1 m_k / 2 + ln p(C_k);
    // stored relative to class K.
    const Eigen::MatrixXd w = ldlt.solve(means.transpose()).transpose();  // K x F
    Eigen::VectorXd w0(k);
    for (int c = 0; c < k; ++c) w0(c) = -0.5 * means.row(c).dot(w.row(c)) + std::log(counts(c) / static_cast<double>(n));

    LogisticParams p;
    const Eigen::Index last = k - 1;
    for (Eigen::Index c = 0; c < last; ++c) {
        std::vector<double> row(static_cast<std::size_t>(f));
        for (Eigen::Index j = 0; j < f; ++j) row[static_cast<std::size_t>(j)] = w(c, j) - w(last, j);
        p.weights.push_back(std::move(row));
        p.intercepts.push_back(w0(c) - w0(last));
    }
    p.means.assign(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(f)));
    for (int c = 0; c < k; ++c)
        for (Eigen::Index j = 0; j < f; ++j) p.means[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] = means(c, j);
    p.covariance.assign(static_cast<std::size_t>(f), std::vector<double>(static_cast<std::size_t>(f)));
    for (Eigen::Index i = 0; i < f; ++i)
        for (Eigen::Index j = 0; j < f; ++j) p.covariance[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = cov(i, j);
    for (int c = 0; c < k; ++c) p.priors.push_back(counts(c) / static_cast<double>(n));
    return p;
}

}  // namespace mpt::detail
