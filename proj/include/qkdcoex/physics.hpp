#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "qkdcoex/grid.hpp"

namespace qkdcoex {

// Model constants that are not tied to a particular fiber.
struct PhysicsConstants {
    double mean_photon_number = 0.1;
    double sift_factor = 0.5;
    double ase_floor_per_channel = 5.0;  // photons/s at the receiver, per classical channel
    double leakage_fraction = 5e-11;     // residual filter transmission at the band edge
    double leakage_decay_ghz = 25.0;     // e-folding distance of the filter skirt
    double label_jitter_sigma = 0.0;     // relative std-dev applied to dataset labels

    void validate() const;
};

// Everything the link oracle needs besides the channel set.
struct LinkSetup {
    GridSpec grid = GridSpec::standard();
    QuantumChannelSpec quantum;
    PhysicsConstants physics;
    std::vector<FiberProfile> fibers = default_fiber_profiles();

    // Throws ConfigError for an unknown name.
    const FiberProfile& fiber(std::string_view name) const;
    void validate() const;
};

struct FwmProduct {
    double frequency_thz = 0.0;
    std::array<std::size_t, 3> parents{};  // (i, j, k) with i <= j
    int degeneracy = 1;                    // 1 when i == j, else 2
};

struct GuardBand {
    double low_thz = 0.0;
    double high_thz = 0.0;
};

struct NoiseBreakdown {
    double raman_rate = 0.0;
    double fwm_rate = 0.0;
    double ase_rate = 0.0;
    double leakage_rate = 0.0;
    double total_rate = 0.0;
    double dark_count_probability = 0.0;
};

struct QkdPerformance {
    NoiseBreakdown noise;
    double qber = 0.0;
    double skr = 0.0;  // bits/s
};

// Every f_i + f_j - f_k with {i, j} unordered (i == j allowed) and k not in
// {i, j}. The result has (N^3 - N^2) / 2 entries.
std::vector<FwmProduct> enumerate_fwm_products(std::span<const double> frequencies_thz);

// Outermost frequencies any mixing product of channels in [f_min, f_max] can reach.
GuardBand fwm_guard_frequencies(double f_min_thz, double f_max_thz);

std::size_t count_inband_fwm_products(const ClassicalChannelSet& set, const QuantumChannelSpec& q);

// Photons per second carried by `power_mw` at frequency `f_thz`.
double photon_rate(double power_mw, double f_thz);

double fwm_inband_rate(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                       const FiberProfile& fiber);
double raman_inband_rate(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                         const FiberProfile& fiber);
double ase_rate(const ClassicalChannelSet& set, const PhysicsConstants& constants = {});
double leakage_rate(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                    const FiberProfile& fiber, const PhysicsConstants& constants = {});
double ase_and_leakage_rate(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                            const FiberProfile& fiber, const PhysicsConstants& constants = {});

NoiseBreakdown noise_breakdown(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                               const FiberProfile& fiber, const PhysicsConstants& constants = {});

// Detector and key-rate model applied to an already computed noise budget.
// `noise.dark_count_probability` is recomputed from `noise.total_rate`.
QkdPerformance performance_from_noise(NoiseBreakdown noise, const QuantumChannelSpec& q,
                                      const FiberProfile& fiber,
                                      const PhysicsConstants& constants = {});

// Ground-truth link oracle. Throws DataError if the channel set fails
// validate_channel_set().
QkdPerformance evaluate_link(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                             const FiberProfile& fiber, const PhysicsConstants& constants = {});

double binary_entropy(double e);
// QBER at which 1 - 2 H2(e) reaches zero (about 0.110028).
double zero_key_rate_qber();

}  // namespace qkdcoex
