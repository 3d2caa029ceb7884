#pragma once

#include "ferrolayer/errors.hpp"
#include "ferrolayer/geometry.hpp"
#include "ferrolayer/vec3.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

namespace ferrolayer {

/// Grid samples of a 3-vector field on the slab, stored separately on Ω₋ and Ω₊ so the value at
/// the interface may jump.
struct MagnetizationField {
    std::vector<double> x_minus;
    std::vector<double> x_plus;
    std::vector<Vec3> minus;
    std::vector<Vec3> plus;
    double time = 0.0;
    bool on_sphere = true;

    static MagnetizationField on(const SlabDomain& d, Vec3 fill = {})
    {
        MagnetizationField f;
        f.x_minus.assign(d.minus_nodes().begin(), d.minus_nodes().end());
        f.x_plus.assign(d.plus_nodes().begin(), d.plus_nodes().end());
        f.minus.assign(f.x_minus.size(), fill);
        f.plus.assign(f.x_plus.size(), fill);
        return f;
    }

    template <class Fn>
    static MagnetizationField sample(const SlabDomain& d, Fn&& minus_fn, Fn&& plus_fn)
    {
        auto f = on(d);
        for (std::size_t i = 0; i < f.x_minus.size(); ++i) f.minus[i] = minus_fn(f.x_minus[i]);
        for (std::size_t i = 0; i < f.x_plus.size(); ++i) f.plus[i] = plus_fn(f.x_plus[i]);
        return f;
    }

    std::vector<Vec3>& values(Side s) { return s == Side::minus ? minus : plus; }
    const std::vector<Vec3>& values(Side s) const { return s == Side::minus ? minus : plus; }
    const std::vector<double>& nodes(Side s) const { return s == Side::minus ? x_minus : x_plus; }

    /// max | |u| − 1 | over both sides.
    double norm_defect() const
    {
        double d = 0.0;
        for (const auto& v : minus) d = std::max(d, std::fabs(norm(v) - 1.0));
        for (const auto& v : plus) d = std::max(d, std::fabs(norm(v) - 1.0));
        return d;
    }

    /// u(0⁺) − u(0⁻).
    Vec3 interface_jump() const { return plus.front() - minus.back(); }
};

/// Same layout as MagnetizationField; components 2 and 3 vanish for the slab kernel.
using StrayField = MagnetizationField;

/// Pointwise slab stray field: H = (−u₁, 0, 0).
inline Vec3 stray_1d(const Vec3& u) { return {-u.x, 0.0, 0.0}; }

inline StrayField stray_field_1d(const MagnetizationField& u)
{
    StrayField h = u;
    h.on_sphere = false;
    for (auto& v : h.minus) v = stray_1d(v);
    for (auto& v : h.plus) v = stray_1d(v);
    return h;
}

/// Change of ℋ produced by adding a layer profile U when the interface normal is n: −(U·n)n.
inline Vec3 layer_strayfield_correction(const Vec3& U, const Vec3& n) { return -dot(U, n) * n; }

/// Periodic 3-vector field on an N³ grid of the cube [0, L)³, index (i, j, k) ↦ (i·N + j)·N + k.
struct PeriodicField {
    int n = 0;
    double length = 2.0 * std::numbers::pi;
    std::vector<Vec3> v;

    PeriodicField() = default;
    PeriodicField(int n_, double L) : n(n_), length(L), v(static_cast<std::size_t>(n_) * n_ * n_) {}

    std::size_t index(int i, int j, int k) const { return (static_cast<std::size_t>(i) * n + j) * n + k; }
    double h() const { return length / n; }
    Vec3& operator()(int i, int j, int k) { return v[index(i, j, k)]; }
    const Vec3& operator()(int i, int j, int k) const { return v[index(i, j, k)]; }
};

inline double max_abs_diff(const PeriodicField& a, const PeriodicField& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, max_abs(a.v[i] - b.v[i]));
    return m;
}

inline double max_abs(const PeriodicField& a)
{
    double m = 0.0;
    for (const auto& x : a.v) m = std::max(m, max_abs(x));
    return m;
}

namespace detail {

inline std::mutex& fftw_plan_mutex()
{
    static std::mutex m;
    return m;
}

/// In-place 3-D complex DFT of size N³ (unnormalized both ways).
class Fft3 {
public:
    explicit Fft3(int n) : n_(n), size_(static_cast<std::size_t>(n) * n * n)
    {
        buf_ = fftw_alloc_complex(size_);
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fwd_ = fftw_plan_dft_3d(n, n, n, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_3d(n, n, n, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Fft3()
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }
    Fft3(const Fft3&) = delete;
    Fft3& operator=(const Fft3&) = delete;

    std::vector<std::complex<double>> forward(const std::vector<double>& real)
    {
        for (std::size_t i = 0; i < size_; ++i) {
            buf_[i][0] = real[i];
            buf_[i][1] = 0.0;
        }
        fftw_execute(fwd_);
        std::vector<std::complex<double>> out(size_);
        for (std::size_t i = 0; i < size_; ++i) out[i] = {buf_[i][0], buf_[i][1]};
        return out;
    }

    /// Inverse transform, normalized, returning the real part.
    std::vector<double> backward(const std::vector<std::complex<double>>& spec)
    {
        for (std::size_t i = 0; i < size_; ++i) {
            buf_[i][0] = spec[i].real();
            buf_[i][1] = spec[i].imag();
        }
        fftw_execute(bwd_);
        std::vector<double> out(size_);
        const double s = 1.0 / static_cast<double>(size_);
        for (std::size_t i = 0; i < size_; ++i) out[i] = buf_[i][0] * s;
        return out;
    }

private:
    int n_;
    std::size_t size_;
    fftw_complex* buf_ = nullptr;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

inline void check_grid(int n)
{
    if (n < 4) throw ValidationError("spectral grid needs N >= 4");
    if ((n & (n - 1)) != 0) throw ValidationError("spectral grid needs N a power of two");
}

/// Wavenumber of DFT index i; `derivative` zeroes the Nyquist mode so odd derivatives of real
/// fields stay real.
inline double wavenumber(int i, int n, double L, bool derivative)
{
    const int k = i < n / 2 ? i : i - n;
    if (derivative && i == n / 2) return 0.0;
    return 2.0 * std::numbers::pi * k / L;
}

struct Spectrum3 {
    std::vector<std::complex<double>> c[3];
};

inline Spectrum3 forward(Fft3& fft, const PeriodicField& f)
{
    Spectrum3 s;
    std::vector<double> comp(f.v.size());
    for (int d = 0; d < 3; ++d) {
        for (std::size_t i = 0; i < f.v.size(); ++i) comp[i] = f.v[i][d];
        s.c[d] = fft.forward(comp);
    }
    return s;
}

inline PeriodicField backward(Fft3& fft, const Spectrum3& s, int n, double L)
{
    PeriodicField f(n, L);
    for (int d = 0; d < 3; ++d) {
        const auto comp = fft.backward(s.c[d]);
        for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i][d] = comp[i];
    }
    return f;
}

} // namespace detail

/// Solves curl H = 0, div(H + m) = 0 on the torus: Ĥ(ξ) = −(m̂·ξ̂)ξ̂, Ĥ(0) = 0.
inline PeriodicField stray_field_spectral(const PeriodicField& m)
{
    detail::check_grid(m.n);
    const int n = m.n;
    detail::Fft3 fft(n);
    auto s = detail::forward(fft, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const std::size_t id = m.index(i, j, k);
                const double xi[3] = {detail::wavenumber(i, n, m.length, false), detail::wavenumber(j, n, m.length, false),
                                      detail::wavenumber(k, n, m.length, false)};
                const double q = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
                if (q == 0.0) {
                    for (auto& c : s.c) c[id] = 0.0;
                    continue;
                }
                const std::complex<double> proj = (s.c[0][id] * xi[0] + s.c[1][id] * xi[1] + s.c[2][id] * xi[2]) / q;
                for (int d = 0; d < 3; ++d) s.c[d][id] = -proj * xi[d];
            }
    return detail::backward(fft, s, n, m.length);
}

/// Spectral divergence; the result is stored in the x component of the returned field.
inline std::vector<double> spectral_div(const PeriodicField& f)
{
    detail::check_grid(f.n);
    const int n = f.n;
    detail::Fft3 fft(n);
    auto s = detail::forward(fft, f);
    std::vector<std::complex<double>> out(f.v.size());
    const std::complex<double> I(0.0, 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const std::size_t id = f.index(i, j, k);
                out[id] = I * (detail::wavenumber(i, n, f.length, true) * s.c[0][id] +
                               detail::wavenumber(j, n, f.length, true) * s.c[1][id] +
                               detail::wavenumber(k, n, f.length, true) * s.c[2][id]);
            }
    return fft.backward(out);
}

inline PeriodicField spectral_curl(const PeriodicField& f)
{
    detail::check_grid(f.n);
    const int n = f.n;
    detail::Fft3 fft(n);
    auto s = detail::forward(fft, f);
    detail::Spectrum3 r;
    for (auto& c : r.c) c.resize(f.v.size());
    const std::complex<double> I(0.0, 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const std::size_t id = f.index(i, j, k);
                const double a = detail::wavenumber(i, n, f.length, true);
                const double b = detail::wavenumber(j, n, f.length, true);
                const double c = detail::wavenumber(k, n, f.length, true);
                r.c[0][id] = I * (b * s.c[2][id] - c * s.c[1][id]);
                r.c[1][id] = I * (c * s.c[0][id] - a * s.c[2][id]);
                r.c[2][id] = I * (a * s.c[1][id] - b * s.c[0][id]);
            }
    return detail::backward(fft, r, n, f.length);
}

/// Recovers u from a = div u and b = curl u: û(ξ) = −i|ξ|⁻²(â ξ − ξ∧b̂), zero mean.
inline PeriodicField div_curl_inverse(const std::vector<double>& a, const PeriodicField& b)
{
    detail::check_grid(b.n);
    const int n = b.n;
    detail::Fft3 fft(n);
    const auto ah = fft.forward(a);
    auto bh = detail::forward(fft, b);
    detail::Spectrum3 u;
    for (auto& c : u.c) c.resize(b.v.size());
    const std::complex<double> I(0.0, 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const std::size_t id = b.index(i, j, k);
                const double xi[3] = {detail::wavenumber(i, n, b.length, true), detail::wavenumber(j, n, b.length, true),
                                      detail::wavenumber(k, n, b.length, true)};
                const double q = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
                if (q == 0.0) continue;
                const std::complex<double> xb[3] = {xi[1] * bh.c[2][id] - xi[2] * bh.c[1][id],
                                                    xi[2] * bh.c[0][id] - xi[0] * bh.c[2][id],
                                                    xi[0] * bh.c[1][id] - xi[1] * bh.c[0][id]};
                for (int d = 0; d < 3; ++d) u.c[d][id] = -I / q * (ah[id] * xi[d] - xb[d]);
            }
    return detail::backward(fft, u, n, b.length);
}

} // namespace ferrolayer
