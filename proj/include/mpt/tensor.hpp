#pragma once
// Symmetric rank-2 tensors in a fixed 3x3 coordinate frame.
//
// Both tensor types store the six independent entries in the order
// (11, 22, 33, 12, 13, 23). The full matrix is always rebuilt from those six
// values, so symmetry holds by construction rather than numerically.

#include <array>
#include <complex>

namespace mpt {

using Matrix3 = std::array<std::array<double, 3>, 3>;
using ComplexMatrix3 = std::array<std::array<std::complex<double>, 3>, 3>;

// Index of the stored entry holding (i, j), 0-based.
constexpr int sym_index(int i, int j) noexcept {
    constexpr int table[3][3] = {{0, 3, 4}, {3, 1, 5}, {4, 5, 2}};
    return table[i][j];
}

class RealTensor3 {
public:
    RealTensor3() = default;
    explicit RealTensor3(const std::array<double, 6>& entries) : e_(entries) {}

    static RealTensor3 diagonal(double a, double b, double c) { return RealTensor3({a, b, c, 0, 0, 0}); }
    static RealTensor3 identity() { return diagonal(1, 1, 1); }
    // Symmetric part of m, i.e. (m + m^T) / 2.
    static RealTensor3 from_matrix(const Matrix3& m);

    double operator()(int i, int j) const noexcept { return e_[sym_index(i, j)]; }
    const std::array<double, 6>& entries() const noexcept { return e_; }
    std::array<double, 6>& entries() noexcept { return e_; }
    Matrix3 matrix() const noexcept;

    double trace() const noexcept { return e_[0] + e_[1] + e_[2]; }
    double determinant() const noexcept;
    double frobenius_norm() const noexcept;

    friend bool operator==(const RealTensor3&, const RealTensor3&) = default;

private:
    std::array<double, 6> e_{};
};

// Complex symmetric tensor M = R + iI with real part R and imaginary part I.
class ComplexTensor3 {
public:
    ComplexTensor3() = default;
    explicit ComplexTensor3(const std::array<std::complex<double>, 6>& entries) : e_(entries) {}
    ComplexTensor3(const RealTensor3& re, const RealTensor3& im);

    static ComplexTensor3 scalar(std::complex<double> m) { return ComplexTensor3({m, m, m, 0.0, 0.0, 0.0}); }

    std::complex<double> operator()(int i, int j) const noexcept { return e_[sym_index(i, j)]; }
    const std::array<std::complex<double>, 6>& entries() const noexcept { return e_; }
    std::array<std::complex<double>, 6>& entries() noexcept { return e_; }
    ComplexMatrix3 matrix() const noexcept;

    RealTensor3 real() const noexcept;
    RealTensor3 imag() const noexcept;

    friend bool operator==(const ComplexTensor3&, const ComplexTensor3&) = default;

private:
    std::array<std::complex<double>, 6> e_{};
};

struct Invariants {
    double i1 = 0;  // tr(A)
    double i2 = 0;  // (tr(A)^2 - tr(A^2)) / 2
    double i3 = 0;  // det(A)
};

Invariants principal_invariants(const RealTensor3& a) noexcept;

// Eigenvalues of a real symmetric tensor, sorted ascending. Repeated
// eigenvalues are returned as they come out of the iteration, unperturbed.
std::array<double, 3> eigenvalues_sym(const RealTensor3& a) noexcept;

// r * a * r^T, re-symmetrized. Throws NonOrthogonal when
// max|r^T r - I| > 1e-9.
RealTensor3 rotate(const RealTensor3& a, const Matrix3& r);
ComplexTensor3 rotate(const ComplexTensor3& a, const Matrix3& r);

// Proper rotation by `angle` radians about a (not necessarily unit) axis.
Matrix3 rotation_about(const std::array<double, 3>& axis, double angle);

}  // namespace mpt
