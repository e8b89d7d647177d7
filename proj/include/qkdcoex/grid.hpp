#pragma once

#include <compare>
#include <span>
#include <string>
#include <vector>

namespace qkdcoex {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPlanck = 6.62607015e-34;     // J s

inline constexpr double kCBandMinNm = 1530.0;
inline constexpr double kCBandMaxNm = 1565.0;

struct Thz {
    double value = 0.0;
    auto operator<=>(const Thz&) const = default;
};

struct Nm {
    double value = 0.0;
    auto operator<=>(const Nm&) const = default;
};

Nm frequency_to_wavelength(Thz f);
Thz wavelength_to_frequency(Nm wavelength);

inline bool in_c_band(Nm wavelength) {
    return wavelength.value >= kCBandMinNm && wavelength.value <= kCBandMaxNm;
}

double dbm_to_mw(double dbm);
// Returns -infinity for 0 mW.
double mw_to_dbm(double mw);
// Sum of powers in the linear domain, reported in dBm. Empty input gives -inf.
double total_power_dbm(std::span<const double> powers_dbm);

// Fixed-spacing channel grid: channel i sits at anchor + i * spacing.
class GridSpec {
public:
    GridSpec(double anchor_thz, double spacing_ghz);

    static GridSpec standard() { return GridSpec(191.2, 50.0); }

    double anchor_thz() const { return anchor_thz_; }
    double spacing_ghz() const { return spacing_ghz_; }

    bool operator==(const GridSpec&) const = default;

private:
    double anchor_thz_;
    double spacing_ghz_;
};

Thz channel_to_frequency(int index, const GridSpec& grid);
// Grid index whose center is closest to `f` (ties go to the lower index).
int nearest_channel(Thz f, const GridSpec& grid);

struct DetectorModel {
    double detection_efficiency = 0.10;
    double intrinsic_dark_count_probability = 1e-5;  // per gate
    double gate_rate_hz = 5e6;
    double detector_error_rate = 0.01;

    void validate() const;
};

struct QuantumChannelSpec {
    double center_wavelength_nm = 1551.90;
    double filter_bandwidth_ghz = 50.0;
    DetectorModel detector;

    double center_frequency_thz() const;
    // True when `f_thz` lies within +/- bandwidth/2 of the quantum center.
    bool in_band(double f_thz) const;
    void validate() const;
};

struct FiberProfile {
    std::string name;
    double length_km = 1.0;
    double end_to_end_loss_db = 0.0;
    double raman_coefficient = 0.0;  // per km per GHz of receive filter
    double fwm_efficiency = 0.0;     // per mW^2

    double transmittance() const;
    void validate() const;
};

// The lab spool, campus link and CityNet link.
std::vector<FiberProfile> default_fiber_profiles();

// C = (n, Lambda, Delta, P) plus the derived total power. Immutable once built.
class ClassicalChannelSet {
public:
    ClassicalChannelSet() = default;

    // Stores the inputs as given; use validate_channel_set() to check ordering.
    ClassicalChannelSet(std::vector<double> frequencies_thz, std::vector<double> powers_dbm);

    static ClassicalChannelSet from_indices(std::span<const int> indices,
                                            std::span<const double> powers_dbm,
                                            const GridSpec& grid);
    static ClassicalChannelSet uniform(std::span<const int> indices, double per_channel_dbm,
                                       const GridSpec& grid);

    std::size_t size() const { return frequencies_thz_.size(); }
    bool empty() const { return frequencies_thz_.empty(); }

    const std::vector<double>& frequencies_thz() const { return frequencies_thz_; }
    const std::vector<double>& powers_dbm() const { return powers_dbm_; }
    // Adjacent differences in GHz, length max(n-1, 0).
    const std::vector<double>& spacings_ghz() const { return spacings_ghz_; }
    double total_power_dbm() const { return total_power_dbm_; }

    // Copy sorted by frequency, powers carried along.
    ClassicalChannelSet sorted() const;

    bool operator==(const ClassicalChannelSet&) const = default;

private:
    std::vector<double> frequencies_thz_;
    std::vector<double> powers_dbm_;
    std::vector<double> spacings_ghz_;
    double total_power_dbm_ = 0.0;
};

enum class ViolationKind {
    SizeMismatch,
    NotStrictlyIncreasing,
    NonFiniteValue,
    QuantumBandOverlap,
    InvalidQuantumSpec,
};

struct Violation {
    ViolationKind kind;
    std::string detail;
};

std::string to_string(ViolationKind kind);

// Empty result iff the set is internally consistent and no classical center
// falls inside the quantum filter band.
std::vector<Violation> validate_channel_set(const ClassicalChannelSet& set,
                                            const QuantumChannelSpec& q);

}  // namespace qkdcoex
