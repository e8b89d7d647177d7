#include "qkdcoex/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "qkdcoex/error.hpp"

namespace qkdcoex {

Nm frequency_to_wavelength(Thz f) {
    if (!(f.value > 0.0)) {
        throw std::invalid_argument("frequency must be positive");
    }
    // c [m/s] / (f [THz] * 1e12) [1/s] = lambda [m]; * 1e9 -> nm
    return Nm{kSpeedOfLight / f.value * 1e-3};
}

Thz wavelength_to_frequency(Nm wavelength) {
    if (!(wavelength.value > 0.0)) {
        throw std::invalid_argument("wavelength must be positive");
    }
    return Thz{kSpeedOfLight / wavelength.value * 1e-3};
}

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

double mw_to_dbm(double mw) {
    if (mw <= 0.0) return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(mw);
}

double total_power_dbm(std::span<const double> powers_dbm) {
    double sum_mw = 0.0;
    for (double p : powers_dbm) sum_mw += dbm_to_mw(p);
    return mw_to_dbm(sum_mw);
}

GridSpec::GridSpec(double anchor_thz, double spacing_ghz)
    : anchor_thz_(anchor_thz), spacing_ghz_(spacing_ghz) {
    if (!(anchor_thz > 0.0)) throw ConfigError("grid anchor frequency must be positive");
    if (!(spacing_ghz > 0.0)) throw ConfigError("grid channel spacing must be positive");
}

Thz channel_to_frequency(int index, const GridSpec& grid) {
    if (index < 0) throw std::invalid_argument("channel index must be non-negative");
    return Thz{grid.anchor_thz() + index * grid.spacing_ghz() * 1e-3};
}

int nearest_channel(Thz f, const GridSpec& grid) {
    const double pos = (f.value - grid.anchor_thz()) / (grid.spacing_ghz() * 1e-3);
    const double lo = std::floor(pos);
    const int idx = (pos - lo <= 0.5) ? static_cast<int>(lo) : static_cast<int>(lo) + 1;
    return std::max(idx, 0);
}

void DetectorModel::validate() const {
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ConfigError(std::string("detector ") + name + " must be in [0, 1]");
        }
    };
    prob(detection_efficiency, "detection_efficiency");
    prob(intrinsic_dark_count_probability, "intrinsic_dark_count_probability");
    prob(detector_error_rate, "detector_error_rate");
    if (!(gate_rate_hz > 0.0)) throw ConfigError("detector gate_rate_hz must be positive");
}

double QuantumChannelSpec::center_frequency_thz() const {
    return wavelength_to_frequency(Nm{center_wavelength_nm}).value;
}

bool QuantumChannelSpec::in_band(double f_thz) const {
    return std::abs(f_thz - center_frequency_thz()) * 1e3 <= filter_bandwidth_ghz / 2.0;
}

void QuantumChannelSpec::validate() const {
    if (!(filter_bandwidth_ghz > 0.0)) {
        throw ConfigError("quantum filter_bandwidth_ghz must be positive");
    }
    if (!in_c_band(Nm{center_wavelength_nm})) {
        throw ConfigError("quantum center wavelength must lie in the C-band (1530-1565 nm)");
    }
    detector.validate();
}

double FiberProfile::transmittance() const { return std::pow(10.0, -end_to_end_loss_db / 10.0); }

void FiberProfile::validate() const {
    if (name.empty()) throw ConfigError("fiber profile needs a name");
    if (!(length_km > 0.0)) throw ConfigError("fiber '" + name + "': length must be positive");
    if (!(end_to_end_loss_db >= 0.0)) {
        throw ConfigError("fiber '" + name + "': loss must be non-negative");
    }
    if (!(raman_coefficient >= 0.0) || !(fwm_efficiency >= 0.0)) {
        throw ConfigError("fiber '" + name + "': coefficients must be non-negative");
    }
}

std::vector<FiberProfile> default_fiber_profiles() {
    // Raman coefficients are shared (same SSMF). At 50 GHz spacing the phase
    // mismatch is ~2 /km, so FWM no longer grows with length past ~1 km.
    return {
        {"lab", 1.0, 9.5, 1.2e-13, 1.0e-6},
        {"campus", 1.0, 10.2, 1.2e-13, 1.2e-6},
        {"city", 8.6, 9.0, 1.2e-13, 1.0e-6},
    };
}

namespace {

std::vector<double> adjacent_spacings_ghz(const std::vector<double>& f) {
    std::vector<double> out;
    if (f.size() < 2) return out;
    out.reserve(f.size() - 1);
    for (std::size_t i = 1; i < f.size(); ++i) out.push_back((f[i] - f[i - 1]) * 1e3);
    return out;
}

}  // namespace

ClassicalChannelSet::ClassicalChannelSet(std::vector<double> frequencies_thz,
                                         std::vector<double> powers_dbm)
    : frequencies_thz_(std::move(frequencies_thz)), powers_dbm_(std::move(powers_dbm)) {
    if (frequencies_thz_.size() != powers_dbm_.size()) {
        throw std::invalid_argument("channel set: frequency and power lists differ in length");
    }
    spacings_ghz_ = adjacent_spacings_ghz(frequencies_thz_);
    total_power_dbm_ = qkdcoex::total_power_dbm(powers_dbm_);
}

ClassicalChannelSet ClassicalChannelSet::from_indices(std::span<const int> indices,
                                                      std::span<const double> powers_dbm,
                                                      const GridSpec& grid) {
    if (indices.size() != powers_dbm.size()) {
        throw std::invalid_argument("channel set: index and power lists differ in length");
    }
    std::vector<double> f;
    f.reserve(indices.size());
    for (int i : indices) f.push_back(channel_to_frequency(i, grid).value);
    return ClassicalChannelSet(std::move(f), {powers_dbm.begin(), powers_dbm.end()});
}

ClassicalChannelSet ClassicalChannelSet::uniform(std::span<const int> indices,
                                                 double per_channel_dbm, const GridSpec& grid) {
    std::vector<double> p(indices.size(), per_channel_dbm);
    return from_indices(indices, p, grid);
}

ClassicalChannelSet ClassicalChannelSet::sorted() const {
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return frequencies_thz_[a] < frequencies_thz_[b];
    });
    std::vector<double> f, p;
    f.reserve(size());
    p.reserve(size());
    for (std::size_t i : order) {
        f.push_back(frequencies_thz_[i]);
        p.push_back(powers_dbm_[i]);
    }
    return ClassicalChannelSet(std::move(f), std::move(p));
}

std::string to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::SizeMismatch: return "size-mismatch";
        case ViolationKind::NotStrictlyIncreasing: return "not-strictly-increasing";
        case ViolationKind::NonFiniteValue: return "non-finite-value";
        case ViolationKind::QuantumBandOverlap: return "quantum-band-overlap";
        case ViolationKind::InvalidQuantumSpec: return "invalid-quantum-spec";
    }
    return "unknown";
}

std::vector<Violation> validate_channel_set(const ClassicalChannelSet& set,
                                            const QuantumChannelSpec& q) {
    std::vector<Violation> out;
    try {
        q.validate();
    } catch (const std::exception& e) {
        out.push_back({ViolationKind::InvalidQuantumSpec, e.what()});
        return out;
    }

    const auto& f = set.frequencies_thz();
    const auto& p = set.powers_dbm();
    if (f.size() != p.size() || set.spacings_ghz().size() != (f.empty() ? 0 : f.size() - 1)) {
        out.push_back({ViolationKind::SizeMismatch, "frequency/power/spacing lengths disagree"});
        return out;
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!std::isfinite(f[i]) || !(f[i] > 0.0) || !std::isfinite(p[i])) {
            out.push_back({ViolationKind::NonFiniteValue,
                           "channel " + std::to_string(i) + " has a non-finite value"});
        }
    }
    for (std::size_t i = 1; i < f.size(); ++i) {
        if (!(f[i] > f[i - 1])) {
            std::ostringstream os;
            os << "channel " << i << " at " << f[i] << " THz does not follow " << f[i - 1]
               << " THz";
            out.push_back({ViolationKind::NotStrictlyIncreasing, os.str()});
        }
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (q.in_band(f[i])) {
            std::ostringstream os;
            os << "channel " << i << " at " << f[i] << " THz lies inside the quantum filter band";
            out.push_back({ViolationKind::QuantumBandOverlap, os.str()});
        }
    }
    return out;
}

}  // namespace qkdcoex
