#pragma once

#include "ferrolayer/errors.hpp"
#include "ferrolayer/vec3.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace ferrolayer {

/// Scalar-coefficient tridiagonal solve (Thomas). The right-hand side may be any vector-space
/// type, so a Vec3 right side solves the three components at once.
/// Row i reads lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]; lower[0] and
/// upper[n-1] are ignored. The solution overwrites rhs.
template <class V>
void thomas_solve(std::span<const double> lower, std::span<const double> diag, std::span<const double> upper,
                  std::span<V> rhs)
{
    const std::size_t n = diag.size();
    if (n == 0) return;
    std::vector<double> c(n);
    double piv = diag[0];
    if (std::fabs(piv) < 1e-300) throw SolverAbort("singular tridiagonal pivot at row 0");
    c[0] = n > 1 ? upper[0] / piv : 0.0;
    rhs[0] = rhs[0] * (1.0 / piv);
    for (std::size_t i = 1; i < n; ++i) {
        piv = diag[i] - lower[i] * c[i - 1];
        if (std::fabs(piv) < 1e-300)
            throw SolverAbort("singular tridiagonal pivot at row " + std::to_string(i));
        c[i] = i + 1 < n ? upper[i] / piv : 0.0;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) * (1.0 / piv);
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = rhs[i] - c[i] * rhs[i + 1];
}

/// LU factorization of a block-tridiagonal matrix with 3x3 blocks, reusable for several right
/// sides (vector or matrix valued).
class BlockTridiagFactor {
public:
    BlockTridiagFactor() = default;

    /// Row i reads L[i] x[i-1] + D[i] x[i] + U[i] x[i+1]; L[0] and U[n-1] are ignored.
    BlockTridiagFactor(std::span<const Mat3> L, std::span<const Mat3> D, std::span<const Mat3> U)
    {
        factor(L, D, U);
    }

    void factor(std::span<const Mat3> L, std::span<const Mat3> D, std::span<const Mat3> U)
    {
        const std::size_t n = D.size();
        lower_.assign(L.begin(), L.end());
        inv_.resize(n);
        cmod_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            Mat3 piv = D[i];
            if (i > 0) piv -= L[i] * cmod_[i - 1];
            const double scale = piv.max_abs();
            const double d = piv.det();
            if (!(scale > 0.0) || !(std::fabs(d) > 1e-14 * scale * scale * scale))
                throw SolverAbort("singular block pivot at row " + std::to_string(i));
            inv_[i] = piv.inverse();
            cmod_[i] = i + 1 < n ? inv_[i] * U[i] : Mat3::zero();
        }
    }

    std::size_t size() const { return inv_.size(); }

    /// Solves in place; V is Vec3 or Mat3.
    template <class V>
    void solve(std::span<V> rhs) const
    {
        const std::size_t n = inv_.size();
        if (n == 0) return;
        rhs[0] = inv_[0] * rhs[0];
        for (std::size_t i = 1; i < n; ++i) rhs[i] = inv_[i] * (rhs[i] - lower_[i] * rhs[i - 1]);
        for (std::size_t i = n - 1; i-- > 0;) rhs[i] = rhs[i] - cmod_[i] * rhs[i + 1];
    }

private:
    std::vector<Mat3> lower_;
    std::vector<Mat3> inv_;
    std::vector<Mat3> cmod_;
};

} // namespace ferrolayer
