#include "mpt/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "mpt/errors.hpp"

namespace mpt {

RealTensor3 RealTensor3::from_matrix(const Matrix3& m) {
    return RealTensor3({m[0][0], m[1][1], m[2][2], 0.5 * (m[0][1] + m[1][0]), 0.5 * (m[0][2] + m[2][0]),
                        0.5 * (m[1][2] + m[2][1])});
}

Matrix3 RealTensor3::matrix() const noexcept {
    Matrix3 m{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[i][j] = (*this)(i, j);
    return m;
}

double RealTensor3::determinant() const noexcept {
    const auto& [a, b, c, d, e, f] = e_;  // 11 22 33 12 13 23
    return a * (b * c - f * f) - d * (d * c - f * e) + e * (d * f - b * e);
}

double RealTensor3::frobenius_norm() const noexcept {
    double s = 0;
    for (int k = 0; k < 3; ++k) s += e_[k] * e_[k];
    for (int k = 3; k < 6; ++k) s += 2.0 * e_[k] * e_[k];
    return std::sqrt(s);
}

ComplexTensor3::ComplexTensor3(const RealTensor3& re, const RealTensor3& im) {
    for (int k = 0; k < 6; ++k) e_[k] = {re.entries()[k], im.entries()[k]};
}

ComplexMatrix3 ComplexTensor3::matrix() const noexcept {
    ComplexMatrix3 m{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[i][j] = (*this)(i, j);
    return m;
}

RealTensor3 ComplexTensor3::real() const noexcept {
    std::array<double, 6> r{};
    for (int k = 0; k < 6; ++k) r[k] = e_[k].real();
    return RealTensor3(r);
}

RealTensor3 ComplexTensor3::imag() const noexcept {
    std::array<double, 6> r{};
    for (int k = 0; k < 6; ++k) r[k] = e_[k].imag();
    return RealTensor3(r);
}

Invariants principal_invariants(const RealTensor3& a) noexcept {
    const auto& e = a.entries();
    const double tr = a.trace();
    // tr(A^2) = sum of squares of all nine matrix entries
    const double tr_sq = e[0] * e[0] + e[1] * e[1] + e[2] * e[2] + 2.0 * (e[3] * e[3] + e[4] * e[4] + e[5] * e[5]);
    return {tr, 0.5 * (tr * tr - tr_sq), a.determinant()};
}

std::array<double, 3> eigenvalues_sym(const RealTensor3& a) noexcept {
    // Cyclic Jacobi sweeps. For 3x3 input this converges quadratically and
    // reaches machine precision in a handful of sweeps.
    Matrix3 m = a.matrix();
    for (int sweep = 0; sweep < 50; ++sweep) {
        const double off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
        const double diag = m[0][0] * m[0][0] + m[1][1] * m[1][1] + m[2][2] * m[2][2];
        if (off == 0.0 || off <= 1e-36 * diag) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                const double apq = m[p][q];
                if (apq == 0.0) continue;
                const double theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double mkp = m[k][p];
                    const double mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double mpk = m[p][k];
                    const double mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                m[p][q] = m[q][p] = 0.0;
            }
        }
    }
    std::array<double, 3> ev{m[0][0], m[1][1], m[2][2]};
    std::sort(ev.begin(), ev.end());
    return ev;
}

namespace {

void check_orthogonal(const Matrix3& r) {
    double worst = 0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += r[k][i] * r[k][j];
            worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
        }
    }
    if (!(worst <= 1e-9)) throw NonOrthogonal("rotation matrix is not orthogonal (max |r^T r - I| = " + std::to_string(worst) + ")");
}

Matrix3 conjugate(const Matrix3& a, const Matrix3& r) {
    Matrix3 ra{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) ra[i][j] += r[i][k] * a[k][j];
    Matrix3 out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) out[i][j] += ra[i][k] * r[j][k];
    return out;
}

}  // namespace

RealTensor3 rotate(const RealTensor3& a, const Matrix3& r) {
    check_orthogonal(r);
    return RealTensor3::from_matrix(conjugate(a.matrix(), r));
}

ComplexTensor3 rotate(const ComplexTensor3& a, const Matrix3& r) {
    check_orthogonal(r);
    return {RealTensor3::from_matrix(conjugate(a.real().matrix(), r)),
            RealTensor3::from_matrix(conjugate(a.imag().matrix(), r))};
}

Matrix3 rotation_about(const std::array<double, 3>& axis, double angle) {
    const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    const double x = axis[0] / n, y = axis[1] / n, z = axis[2] / n;
    const double c = std::cos(angle), s = std::sin(angle), C = 1.0 - c;
    return {{{c + x * x * C, x * y * C - z * s, x * z * C + y * s},
             {y * x * C + z * s, c + y * y * C, y * z * C - x * s},
             {z * x * C - y * s, z * y * C + x * s, c + z * z * C}}};
}

}  // namespace mpt
