#include "qkdcoex/physics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qkdcoex/error.hpp"

namespace qkdcoex {

void PhysicsConstants::validate() const {
    if (!(mean_photon_number > 0.0)) throw ConfigError("mean_photon_number must be positive");
    if (!(sift_factor > 0.0 && sift_factor <= 1.0)) {
        throw ConfigError("sift_factor must be in (0, 1]");
    }
    if (!(ase_floor_per_channel >= 0.0)) throw ConfigError("ase_floor_per_channel must be >= 0");
    if (!(leakage_fraction >= 0.0)) throw ConfigError("leakage_fraction must be >= 0");
    if (!(leakage_decay_ghz > 0.0)) throw ConfigError("leakage_decay_ghz must be positive");
    if (!(label_jitter_sigma >= 0.0)) throw ConfigError("label_jitter_sigma must be >= 0");
}

const FiberProfile& LinkSetup::fiber(std::string_view name) const {
    for (const auto& f : fibers) {
        if (f.name == name) return f;
    }
    throw ConfigError("unknown fiber profile '" + std::string(name) + "'");
}

void LinkSetup::validate() const {
    quantum.validate();
    physics.validate();
    if (fibers.empty()) throw ConfigError("at least one fiber profile is required");
    for (std::size_t i = 0; i < fibers.size(); ++i) {
        fibers[i].validate();
        for (std::size_t j = 0; j < i; ++j) {
            if (fibers[j].name == fibers[i].name) {
                throw ConfigError("duplicate fiber profile '" + fibers[i].name + "'");
            }
        }
    }
}

std::vector<FwmProduct> enumerate_fwm_products(std::span<const double> f) {
    const std::size_t n = f.size();
    std::vector<double> sorted(f.begin(), f.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw std::invalid_argument("FWM enumeration requires distinct frequencies");
    }

    std::vector<FwmProduct> out;
    if (n < 2) return out;
    out.reserve(n * n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i || k == j) continue;
                out.push_back({f[i] + f[j] - f[k], {i, j, k}, i == j ? 1 : 2});
            }
        }
    }
    return out;
}

GuardBand fwm_guard_frequencies(double f_min_thz, double f_max_thz) {
    if (f_min_thz > f_max_thz) throw std::invalid_argument("f_min must not exceed f_max");
    return {2.0 * f_min_thz - f_max_thz, 2.0 * f_max_thz - f_min_thz};
}

std::size_t count_inband_fwm_products(const ClassicalChannelSet& set,
                                      const QuantumChannelSpec& q) {
    std::size_t count = 0;
    for (const auto& p : enumerate_fwm_products(set.frequencies_thz())) {
        if (q.in_band(p.frequency_thz)) ++count;
    }
    return count;
}

double photon_rate(double power_mw, double f_thz) {
    return power_mw * 1e-3 / (kPlanck * f_thz * 1e12);
}

double fwm_inband_rate(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                       const FiberProfile& fiber) {
    const auto& p_dbm = set.powers_dbm();
    std::vector<double> p_mw(p_dbm.size());
    std::transform(p_dbm.begin(), p_dbm.end(), p_mw.begin(), dbm_to_mw);

    double generated_mw = 0.0;
    for (const auto& prod : enumerate_fwm_products(set.frequencies_thz())) {
        if (!q.in_band(prod.frequency_thz)) continue;
        const auto [i, j, k] = prod.parents;
        const double d = prod.degeneracy;
        generated_mw += fiber.fwm_efficiency * d * d * p_mw[i] * p_mw[j] * p_mw[k];
    }
    return photon_rate(generated_mw * fiber.transmittance(), q.center_frequency_thz());
}

double raman_inband_rate(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                         const FiberProfile& fiber) {
    double launched_mw = 0.0;
    for (double p : set.powers_dbm()) launched_mw += dbm_to_mw(p);
    const double scattered_mw = launched_mw * fiber.raman_coefficient * fiber.length_km *
                                q.filter_bandwidth_ghz * fiber.transmittance();
    return photon_rate(scattered_mw, q.center_frequency_thz());
}

double ase_rate(const ClassicalChannelSet& set, const PhysicsConstants& constants) {
    return constants.ase_floor_per_channel * static_cast<double>(set.size());
}

double leakage_rate(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                    const FiberProfile& fiber, const PhysicsConstants& constants) {
    const double fq = q.center_frequency_thz();
    const double half_band = q.filter_bandwidth_ghz / 2.0;
    double rate = 0.0;
    for (std::size_t c = 0; c < set.size(); ++c) {
        const double f = set.frequencies_thz()[c];
        const double edge_distance = std::max(0.0, std::abs(f - fq) * 1e3 - half_band);
        const double skirt =
            constants.leakage_fraction * std::exp(-edge_distance / constants.leakage_decay_ghz);
        const double received_mw = dbm_to_mw(set.powers_dbm()[c]) * fiber.transmittance();
        rate += photon_rate(received_mw * skirt, f);
    }
    return rate;
}

double ase_and_leakage_rate(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                            const FiberProfile& fiber, const PhysicsConstants& constants) {
    return ase_rate(set, constants) + leakage_rate(set, q, fiber, constants);
}

NoiseBreakdown noise_breakdown(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                               const FiberProfile& fiber, const PhysicsConstants& constants) {
    NoiseBreakdown n;
    n.raman_rate = raman_inband_rate(set, q, fiber);
    n.fwm_rate = fwm_inband_rate(set, q, fiber);
    n.ase_rate = ase_rate(set, constants);
    n.leakage_rate = leakage_rate(set, q, fiber, constants);
    n.total_rate = n.raman_rate + n.fwm_rate + n.ase_rate + n.leakage_rate;
    return n;
}

QkdPerformance performance_from_noise(NoiseBreakdown noise, const QuantumChannelSpec& q,
                                      const FiberProfile& fiber,
                                      const PhysicsConstants& constants) {
    const DetectorModel& det = q.detector;
    const double photons_per_gate = std::max(0.0, noise.total_rate) / det.gate_rate_hz;
    noise.dark_count_probability = std::clamp(
        1.0 - std::exp(-photons_per_gate) + det.intrinsic_dark_count_probability, 0.0, 1.0);

    const double p_noise = noise.dark_count_probability;
    const double p_signal =
        constants.mean_photon_number * det.detection_efficiency * fiber.transmittance();

    QkdPerformance perf;
    perf.noise = noise;
    const double clicks = p_noise + p_signal;
    perf.qber = clicks > 0.0 ? (0.5 * p_noise + det.detector_error_rate * p_signal) / clicks : 0.0;
    perf.qber = std::clamp(perf.qber, 0.0, 0.5);

    // Sifted rate counts signal-originated detections only, so the rate is
    // independent of noise and SKR is non-increasing in QBER.
    const double sift_rate = det.gate_rate_hz * constants.sift_factor * p_signal;
    perf.skr = sift_rate * std::max(0.0, 1.0 - 2.0 * binary_entropy(perf.qber));
    return perf;
}

QkdPerformance evaluate_link(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                             const FiberProfile& fiber, const PhysicsConstants& constants) {
    const auto violations = validate_channel_set(set, q);
    if (!violations.empty()) {
        throw DataError("evaluate_link: invalid channel set (" + violations.front().detail + ")");
    }
    return performance_from_noise(noise_breakdown(set, q, fiber, constants), q, fiber, constants);
}

double binary_entropy(double e) {
    if (e <= 0.0 || e >= 1.0) return 0.0;
    return -e * std::log2(e) - (1.0 - e) * std::log2(1.0 - e);
}

double zero_key_rate_qber() {
    // 1 - 2 H2(e) is strictly decreasing on (0, 0.5): bisect.
    double lo = 1e-6;
    double hi = 0.5;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (1.0 - 2.0 * binary_entropy(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return hi;
}

}  // namespace qkdcoex
