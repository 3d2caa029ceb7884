#pragma once

#include "ferrolayer/errors.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace ferrolayer {

enum class Side { minus, plus };

inline double side_sign(Side s) { return s == Side::plus ? 1.0 : -1.0; }

/// How cell widths vary inside each half of the slab.
struct Grading {
    enum class Kind { uniform, geometric };
    enum class Toward { sigma, gamma, both };

    Kind kind = Kind::uniform;
    Toward toward = Toward::sigma;
    double ratio = 1.0; ///< width ratio between neighbouring cells, in (0, 1]

    static Grading uniform() { return {}; }
    static Grading geometric(double r, Toward t = Toward::sigma) { return {Kind::geometric, t, r}; }
};

struct SlabConfig {
    double x_min = -1.0;
    double x_max = 1.0;
    double interface = 0.0;
    int cells_per_side = 8;
    Grading grading{};
};

/// The slab Ω = (x_min, x_max) split at Σ = {interface}. Each half stores its own node array
/// including the interface endpoint, so fields living on it can jump across Σ.
class SlabDomain {
public:
    explicit SlabDomain(const SlabConfig& cfg) : cfg_(cfg)
    {
        if (cfg.cells_per_side <= 0) throw ValidationError("cells_per_side must be positive");
        if (cfg.cells_per_side < 8) throw ValidationError("cells_per_side must be at least 8");
        if (!(cfg.x_min < cfg.interface && cfg.interface < cfg.x_max))
            throw ValidationError("slab requires x_min < interface < x_max");
        if (!(cfg.grading.ratio > 0.0 && cfg.grading.ratio <= 1.0))
            throw ValidationError("grading ratio must lie in (0, 1]");

        const auto wm = half_widths(cfg.interface - cfg.x_min, /*sigma_at_end=*/true);
        const auto wp = half_widths(cfg.x_max - cfg.interface, /*sigma_at_end=*/false);
        for (double w : wm)
            if (w < 1e-12) throw ValidationError("grading produces a cell narrower than 1e-12");

        minus_.resize(wm.size() + 1);
        minus_[0] = cfg.x_min;
        for (std::size_t i = 0; i < wm.size(); ++i) minus_[i + 1] = minus_[i] + wm[i];
        minus_.back() = cfg.interface;

        plus_.resize(wp.size() + 1);
        plus_[0] = cfg.interface;
        for (std::size_t i = 0; i < wp.size(); ++i) plus_[i + 1] = plus_[i] + wp[i];
        plus_.back() = cfg.x_max;
    }

    const SlabConfig& config() const { return cfg_; }
    std::span<const double> nodes(Side s) const { return s == Side::minus ? std::span<const double>(minus_) : std::span<const double>(plus_); }
    std::span<const double> minus_nodes() const { return minus_; }
    std::span<const double> plus_nodes() const { return plus_; }
    std::size_t nodes_per_side() const { return plus_.size(); }

    double min_width() const
    {
        double w = 1e300;
        for (std::size_t i = 1; i < minus_.size(); ++i) w = std::min(w, minus_[i] - minus_[i - 1]);
        for (std::size_t i = 1; i < plus_.size(); ++i) w = std::min(w, plus_[i] - plus_[i - 1]);
        return w;
    }

    /// Single-valued node list (interface node once), as used by the full model.
    std::vector<double> merged_nodes() const
    {
        std::vector<double> x(minus_.begin(), minus_.end());
        x.insert(x.end(), plus_.begin() + 1, plus_.end());
        return x;
    }

    /// Two-sided node list (interface node twice: left copy then right copy).
    std::vector<double> two_sided_nodes() const
    {
        std::vector<double> x(minus_.begin(), minus_.end());
        x.insert(x.end(), plus_.begin(), plus_.end());
        return x;
    }

private:
    // Cell widths of one half, ordered from the half's left end to its right end.
    std::vector<double> half_widths(double length, bool sigma_at_end) const
    {
        const int n = cfg_.cells_per_side;
        std::vector<double> w(static_cast<std::size_t>(n), length / n);
        if (cfg_.grading.kind == Grading::Kind::uniform || cfg_.grading.ratio == 1.0) return w;

        const double r = cfg_.grading.ratio;
        auto geometric = [&](int count, double len) {
            // widths len·(1−r)/(1−r^count)·r^k, k = 0..count−1, decreasing
            std::vector<double> g(static_cast<std::size_t>(count));
            const double first = len * (1.0 - r) / (1.0 - std::pow(r, count));
            for (int k = 0; k < count; ++k) g[static_cast<std::size_t>(k)] = first * std::pow(r, k);
            return g;
        };

        switch (cfg_.grading.toward) {
        case Grading::Toward::sigma:
        case Grading::Toward::gamma: {
            auto g = geometric(n, length);
            // g is decreasing; it must decrease toward the refined end
            const bool refine_at_end = (cfg_.grading.toward == Grading::Toward::sigma) == sigma_at_end;
            if (!refine_at_end) std::reverse(g.begin(), g.end());
            return g;
        }
        case Grading::Toward::both: {
            if (n % 2 != 0) throw ValidationError("two-ended grading needs an even cells_per_side");
            auto g = geometric(n / 2, length / 2);
            std::vector<double> out(g.rbegin(), g.rend()); // increasing from the left end
            out.insert(out.end(), g.begin(), g.end());     // then decreasing to the right end
            return out;
        }
        }
        return w;
    }

    SlabConfig cfg_;
    std::vector<double> minus_;
    std::vector<double> plus_;
};

inline SlabDomain build_domain(const SlabConfig& cfg) { return SlabDomain(cfg); }

/// Quintic smoothstep 6s⁵ − 15s⁴ + 10s³ clamped to [0, 1]; C² at both ends.
inline double smoothstep5(double s)
{
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0);
}

/// Level sets Ψ, Φ, the boundary cutoff Θ and the neighbourhoods V_Σ, V_Γ of the 1-D slab.
struct LevelSets {
    double v_sigma_halfwidth = 0.35;
    double v_gamma_width = 0.25;
    double blend_start = 0.5; ///< fraction of v_sigma_halfwidth where the u⁰± extension starts to taper

    void validate() const
    {
        if (!(v_sigma_halfwidth > 0.0) || !(v_gamma_width > 0.0))
            throw ValidationError("neighbourhood widths must be positive");
        if (v_sigma_halfwidth + v_gamma_width >= 1.0)
            throw ValidationError("V_Sigma and V_Gamma must be disjoint (halfwidth + width < 1)");
        if (!(blend_start >= 0.0 && blend_start < 1.0)) throw ValidationError("blend_start must lie in [0, 1)");
    }

    /// Signed distance to Σ.
    double psi(double x) const { return x; }
    /// Distance to Γ.
    double phi(double x) const { return 1.0 - std::fabs(x); }

    bool in_v_sigma(double x) const { return std::fabs(x) < v_sigma_halfwidth; }
    bool in_v_gamma(double x) const { return phi(x) < v_gamma_width; }

    /// Θ: 1 on W_Γ = {φ ≤ v_gamma_width/2}, 0 outside V_Γ, quintic smoothstep in between.
    double theta(double x) const
    {
        const double inner = 0.5 * v_gamma_width;
        return 1.0 - smoothstep5((phi(x) - inner) / (v_gamma_width - inner));
    }

    /// Blend weight used by the u⁰± extension: 1 for |x| ≤ blend_start·halfwidth, 0 for |x| ≥ halfwidth.
    double sigma_blend(double x) const
    {
        const double inner = blend_start * v_sigma_halfwidth;
        return 1.0 - smoothstep5((std::fabs(x) - inner) / (v_sigma_halfwidth - inner));
    }

    /// Sign s with ∂_n = s ∂_x: −∂_x near Σ (n = −∇Ψ), sign(x) ∂_x near Γ (outward).
    double normal_sign(double x) const
    {
        if (in_v_gamma(x)) return x >= 0.0 ? 1.0 : -1.0;
        return -1.0;
    }
};

/// Generating conormal weight w(x) = x(1 − x²): Z = w ∂_x is tangent to Σ = {0} and Γ = {±1}.
inline double conormal_weight(double x) { return x * (1.0 - x * x); }

/// Conormal fields of the slab: Z₀ = ∂_t and Z₁ = w(x) ∂_x with w sampled at the given nodes.
struct ConormalFields {
    std::vector<double> weight; ///< w(x_i)
    bool has_time_field = true; ///< Z₀ = ∂_t
};

inline ConormalFields conormal_fields(std::span<const double> nodes)
{
    ConormalFields z;
    z.weight.reserve(nodes.size());
    for (double x : nodes) z.weight.push_back(conormal_weight(x));
    return z;
}

} // namespace ferrolayer
