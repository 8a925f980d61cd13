#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sarlab/geom.hpp"
#include "sarlab/rng.hpp"
#include "sarlab/shapes.hpp"

namespace sarlab {

using Complex = std::complex<double>;

enum class Polarization : int { CircularCombined = 0 };

struct RadarConfig {
    double center_frequency_hz = 24e9;
    double bandwidth_hz = 0.5e9;
    int num_frequencies = 64;  // K
    Polarization polarization = Polarization::CircularCombined;

    void validate() const {
        if (num_frequencies < 2) throw std::invalid_argument("radar: need at least 2 frequency samples");
        if (bandwidth_hz <= 0.0) throw std::invalid_argument("radar: bandwidth must be positive");
        if (center_frequency_hz <= bandwidth_hz / 2.0)
            throw std::invalid_argument("radar: center frequency below half bandwidth");
    }
};

// Default synthetic aperture: wide enough that the cross-range
// resolution matches one pixel of the default 6 m / 160 px image grid,
// lambda / (2 * 0.0375 m) at 24 GHz, about 9.5 degrees.
inline double default_aperture_arc(double center_frequency_hz = 24e9, double cross_range_resolution_m = 0.0375) {
    return (kSpeedOfLight / center_frequency_hz) / (2.0 * cross_range_resolution_m);
}

struct CollectionGeometry {
    double altitude_m = 1000.0;       // a, radar height above the target center
    double orbit_radius_m = 2000.0;   // r, horizontal orbit radius
    double start_azimuth_rad = 0.0;   // phi0, orbit location at aperture center
    // Default pulse count Nyquist-samples the default aperture: the
    // unambiguous cross-range swath lambda/(2*arc/(N_p-1)) must cover
    // the 6 m scene, otherwise bright scatterers alias back into the
    // window as ghosts.
    int num_pulses = 160;             // N_p
    Vec3 target_center;               // X_0
    double pose_rad = 0.0;            // aspect angle at the aperture-center pulse
    double aperture_arc_rad = default_aperture_arc();

    void validate() const {
        if (num_pulses < 2) throw std::invalid_argument("collection: need at least 2 pulses");
        if (orbit_radius_m <= 0.0) throw std::invalid_argument("collection: orbit radius must be positive");
        if (!(aperture_arc_rad > 0.0 && aperture_arc_rad < kPi / 2.0))
            throw std::invalid_argument("collection: aperture arc outside (0, pi/2)");
    }
};

// Complex frequency samples over the synthetic aperture. Storage is
// pulse-major with the frequency index contiguous.
class FrequencyHistory {
public:
    FrequencyHistory() = default;
    FrequencyHistory(RadarConfig radar, CollectionGeometry geometry)
        : radar_(radar), geometry_(geometry),
          samples_(static_cast<std::size_t>(radar.num_frequencies) * geometry.num_pulses) {}

    int num_frequencies() const { return radar_.num_frequencies; }
    int num_pulses() const { return geometry_.num_pulses; }
    const RadarConfig& radar() const { return radar_; }
    const CollectionGeometry& geometry() const { return geometry_; }

    Complex& at(int freq_idx, int pulse_idx) {
        return samples_[static_cast<std::size_t>(pulse_idx) * radar_.num_frequencies + freq_idx];
    }
    const Complex& at(int freq_idx, int pulse_idx) const {
        return samples_[static_cast<std::size_t>(pulse_idx) * radar_.num_frequencies + freq_idx];
    }

    std::vector<Complex>& samples() { return samples_; }
    const std::vector<Complex>& samples() const { return samples_; }

    bool all_finite() const {
        for (const Complex& v : samples_)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }

private:
    RadarConfig radar_;
    CollectionGeometry geometry_;
    std::vector<Complex> samples_;
};

// K uniformly spaced frequencies spanning [f_c - B/2, f_c + B/2].
inline std::vector<double> frequency_grid(const RadarConfig& radar) {
    radar.validate();
    const int k = radar.num_frequencies;
    const double lo = radar.center_frequency_hz - radar.bandwidth_hz / 2.0;
    const double step = radar.bandwidth_hz / (k - 1);
    std::vector<double> out(k);
    for (int i = 0; i < k; ++i) out[i] = lo + step * i;
    return out;
}

// Antenna phase centers: num_pulses positions on the orbit circle at
// altitude a, azimuths uniformly spanning the aperture arc (inclusive).
inline std::vector<Vec3> phase_centers(const CollectionGeometry& g) {
    g.validate();
    std::vector<Vec3> out(g.num_pulses);
    const double arc0 = g.start_azimuth_rad - g.aperture_arc_rad / 2.0;
    const double step = g.aperture_arc_rad / (g.num_pulses - 1);
    for (int p = 0; p < g.num_pulses; ++p) {
        const double az = arc0 + step * p;
        out[p] = {g.target_center.x + g.orbit_radius_m * std::cos(az),
                  g.target_center.y + g.orbit_radius_m * std::sin(az),
                  g.target_center.z + g.altitude_m};
    }
    return out;
}

// Complex diffraction amplitude of one center:
// base * (f / f_ref)^alpha * angular response (per-kind falloff plus
// any wall flash the center carries).
inline Complex gdt_amplitude(const ScatteringCenter& c, double frequency_hz, double theta,
                             double reference_frequency_hz) {
    if (frequency_hz <= 0.0) throw std::invalid_argument("gdt_amplitude: frequency must be positive");
    const double mag = c.base_amplitude * std::pow(frequency_hz / reference_frequency_hz, c.alpha) *
                       angular_response(c, theta);
    return {mag, 0.0};
}

// Coherent target response at one frequency: sum of per-center
// amplitudes with their down-range phase delays.
inline Complex target_response(const std::vector<LosSample>& centers_at_los, double frequency_hz,
                               double theta, double reference_frequency_hz) {
    if (centers_at_los.empty()) throw std::invalid_argument("target_response: empty center list");
    Complex acc{0.0, 0.0};
    for (const LosSample& s : centers_at_los) {
        const Complex a = gdt_amplitude(s.center, frequency_hz, theta, reference_frequency_hz);
        const double phase = -4.0 * kPi * frequency_hz * s.range / kSpeedOfLight;
        acc += a * std::polar(1.0, phase);
    }
    return acc;
}

namespace detail {

// The parametric amplitude model does not distinguish H/V channels, so
// both polarization legs produce the same response; the combination
// below is kept literal so a per-channel model can slot in.
inline Complex polarized_response(const std::vector<LosSample>& centers, double f_hz, double theta,
                                  double f_ref, int /*channel*/) {
    return target_response(centers, f_hz, theta, f_ref);
}

}  // namespace detail

// Simulates the received frequency history of a target over the
// aperture: samples[k][p] = E_T(f_k; theta_p) * exp(-i 4 pi f_k R_p / c)
// plus optional circular Gaussian noise at the given SNR. The aspect
// angle advances with the orbit azimuth, theta_p = pose + (az_p - phi0);
// the collect's pose label is the aspect at the aperture-center pulse.
inline FrequencyHistory collect(const std::vector<ScatteringCenter>& centers, const RadarConfig& radar,
                                const CollectionGeometry& coll, std::optional<double> noise_snr_db,
                                Rng& rng) {
    radar.validate();
    coll.validate();
    if (centers.empty()) throw std::invalid_argument("collect: no scattering centers");

    const std::vector<double> freqs = frequency_grid(radar);
    const std::vector<Vec3> positions = phase_centers(coll);
    const double f_ref = radar.center_frequency_hz;

    FrequencyHistory hist(radar, coll);
    const double arc0 = coll.start_azimuth_rad - coll.aperture_arc_rad / 2.0;
    const double step = coll.aperture_arc_rad / (coll.num_pulses - 1);
    // The body lies in the ground plane while the LOS is slanted by the
    // grazing angle; foreshortening the in-plane projection keeps each
    // scatterer's imaged position at its ground location.
    const double grazing_scale =
        coll.orbit_radius_m / std::hypot(coll.orbit_radius_m, coll.altitude_m);

    for (int p = 0; p < coll.num_pulses; ++p) {
        const double az = arc0 + step * p;
        const double theta_p = coll.pose_rad + (az - coll.start_azimuth_rad);
        std::vector<LosSample> at_los = project_to_los(centers, theta_p);
        for (LosSample& s : at_los) s.range *= grazing_scale;
        const double range = distance(positions[p], coll.target_center);
        for (int k = 0; k < radar.num_frequencies; ++k) {
            const Complex hh = detail::polarized_response(at_los, freqs[k], theta_p, f_ref, 0);
            const Complex vv = detail::polarized_response(at_los, freqs[k], theta_p, f_ref, 1);
            const Complex combined = 0.5 * (hh + vv);
            const double phase = -4.0 * kPi * freqs[k] * range / kSpeedOfLight;
            hist.at(k, p) = combined * std::polar(1.0, phase);
        }
    }

    if (noise_snr_db) {
        double power = 0.0;
        for (const Complex& v : hist.samples()) power += std::norm(v);
        power /= static_cast<double>(hist.samples().size());
        const double noise_power = power / std::pow(10.0, *noise_snr_db / 10.0);
        const double sigma = std::sqrt(noise_power / 2.0);
        for (Complex& v : hist.samples()) v += Complex(sigma * rng.normal(), sigma * rng.normal());
    }
    return hist;
}

inline FrequencyHistory collect(const TargetGeometry& target, const RadarConfig& radar,
                                const CollectionGeometry& coll, std::optional<double> noise_snr_db,
                                Rng& rng) {
    return collect(scattering_centers(target), radar, coll, noise_snr_db, rng);
}

}  // namespace sarlab
