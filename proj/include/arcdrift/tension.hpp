#pragma once

// ARC vector, its summary measures, the two-inequality risk predicate and
// the drift-strength coefficient.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "arcdrift/errors.hpp"

namespace arcdrift {

/// The three tension axes, always in SC, SA, KG order.
enum class Axis : int { SC = 0, SA = 1, KG = 2 };

inline constexpr std::array<Axis, 3> kAxes{Axis::SC, Axis::SA, Axis::KG};

inline constexpr std::size_t index_of(Axis a) { return static_cast<std::size_t>(a); }

inline std::string axis_name(Axis a) {
    switch (a) {
    case Axis::SC: return "SC";
    case Axis::SA: return "SA";
    case Axis::KG: return "KG";
    }
    return "?";
}

inline Axis parse_axis(const std::string& s) {
    if (s == "SC" || s == "sc") return Axis::SC;
    if (s == "SA" || s == "sa") return Axis::SA;
    if (s == "KG" || s == "kg") return Axis::KG;
    throw UsageError("unknown axis '" + s + "' (expected SC, SA or KG)");
}

/// Instantaneous tension triple (tau_SC, tau_SA, tau_KG). Components are
/// finite and nonnegative; the constructor enforces it.
class ArcVector {
public:
    ArcVector() = default;
    ArcVector(double sc, double sa, double kg) : v_{sc, sa, kg} {
        for (double x : v_) {
            if (!std::isfinite(x) || x < 0.0) {
                throw DataError("ArcVector components must be finite and >= 0");
            }
        }
    }

    double sc() const { return v_[0]; }
    double sa() const { return v_[1]; }
    double kg() const { return v_[2]; }
    double operator[](Axis a) const { return v_[index_of(a)]; }
    double operator[](std::size_t i) const { return v_[i]; }
    const std::array<double, 3>& values() const { return v_; }

    ArcVector scaled(double c) const { return {c * v_[0], c * v_[1], c * v_[2]}; }

    friend bool operator==(const ArcVector&, const ArcVector&) = default;

private:
    std::array<double, 3> v_{0.0, 0.0, 0.0};
};

struct TensionSummary {
    double magnitude = 0.0;            // L2 norm
    double variance = 0.0;             // population variance (divisor 3)
    std::array<double, 3> skew{};      // softmax attribution
};

struct SummaryOptions {
    double temperature = 1.0;
};

inline double magnitude(const ArcVector& v) {
    return std::hypot(v.sc(), v.sa(), v.kg());
}

/// Divisor 3, written as pairwise differences so equal components give 0.
inline double population_variance(const ArcVector& v) {
    const double ab = v.sc() - v.sa();
    const double bc = v.sa() - v.kg();
    const double ac = v.sc() - v.kg();
    return (ab * ab + bc * bc + ac * ac) / 9.0;
}

inline std::array<double, 3> softmax(const std::array<double, 3>& x, double temperature = 1.0) {
    if (!(temperature > 0.0)) throw UsageError("softmax temperature must be > 0");
    const double hi = std::max({x[0], x[1], x[2]});
    std::array<double, 3> e{};
    double total = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        e[i] = std::exp((x[i] - hi) / temperature);
        total += e[i];
    }
    for (double& v : e) v /= total;
    return e;
}

inline TensionSummary summarize(const ArcVector& v, const SummaryOptions& opt = {}) {
    return {magnitude(v), population_variance(v), softmax(v.values(), opt.temperature)};
}

struct RiskThresholds {
    double theta = 1.0;
    double delta = 0.05;

    void validate() const {
        if (!(theta > 0.0) || !(delta > 0.0) || !std::isfinite(theta) || !std::isfinite(delta)) {
            throw UsageError("risk thresholds theta and delta must be finite and > 0");
        }
    }
};

enum class RiskState { Nominal, Overload, Anisotropic, Both };

inline std::string risk_name(RiskState s) {
    switch (s) {
    case RiskState::Nominal: return "nominal";
    case RiskState::Overload: return "overload";
    case RiskState::Anisotropic: return "anisotropic";
    case RiskState::Both: return "both";
    }
    return "?";
}

/// Strict comparisons on both inequalities.
inline RiskState risk_flag(const TensionSummary& s, const RiskThresholds& r) {
    r.validate();
    const bool over = s.magnitude > r.theta;
    const bool aniso = s.variance > r.delta;
    if (over && aniso) return RiskState::Both;
    if (over) return RiskState::Overload;
    if (aniso) return RiskState::Anisotropic;
    return RiskState::Nominal;
}

/// Gain and variance weight of the drift law. Distinct from the controller's
/// tension-adaptive scaling.
struct DriftCoefficients {
    double lambda_gain = 1.0;
    double beta = 0.0;

    void validate() const {
        if (!std::isfinite(lambda_gain) || !std::isfinite(beta) || lambda_gain < 0.0 || beta < 0.0) {
            throw UsageError("drift coefficients must be finite and >= 0");
        }
    }
};

/// Gamma(tau) = lambda * (||tau||_2 + beta * Var(tau)).
inline double drift_coefficient(const ArcVector& v, const DriftCoefficients& k) {
    k.validate();
    return k.lambda_gain * (magnitude(v) + k.beta * population_variance(v));
}

/// Percentile (linear interpolation between order statistics) of a sample of
/// tension magnitudes, used to calibrate theta from a success set.
inline double calibrate_theta(std::span<const double> magnitudes, double percentile = 95.0) {
    if (magnitudes.empty()) throw UsageError("calibrate_theta needs at least one magnitude");
    if (!(percentile >= 0.0 && percentile <= 100.0)) {
        throw UsageError("percentile must lie in [0, 100]");
    }
    std::vector<double> sorted(magnitudes.begin(), magnitudes.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = percentile / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace arcdrift
