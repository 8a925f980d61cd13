#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "sarlab/geom.hpp"
#include "sarlab/rfsim.hpp"

namespace sarlab {

template <typename T>
struct Grid2 {
    int rows = 0;
    int cols = 0;
    std::vector<T> v;

    Grid2() = default;
    Grid2(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c) {}

    T& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    const T& at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t size() const { return v.size(); }
};

using RealImage = Grid2<double>;
using ComplexImage = Grid2<Complex>;

struct ImagingConfig {
    double window_m = 6.0;          // square scene extent in the xy-plane
    int image_size = 160;           // N pixels per side
    double mu_db = -40.0;           // normalization offset
    double dynamic_range_db = 50.0; // normalization scale D
    int upsample = 8;               // range-profile oversampling factor
    double magnitude_floor = 1e-12; // floor applied before the log

    double pixel_pitch() const { return window_m / image_size; }

    void validate() const {
        if (image_size < 2) throw std::invalid_argument("imaging: image size must be >= 2");
        if (dynamic_range_db <= 0.0) throw std::invalid_argument("imaging: dynamic range must be positive");
        if (upsample < 1) throw std::invalid_argument("imaging: upsample must be >= 1");
        if (window_m <= 0.0) throw std::invalid_argument("imaging: window must be positive");
    }
};

namespace detail {

// Geometry and twiddle tables shared by the back-projection forward and
// adjoint paths. Building both sides from the same plan keeps them exact
// adjoints of each other.
struct BackprojectionPlan {
    int num_freq = 0;          // K
    int num_pulses = 0;        // N_p
    int profile_len = 0;       // M = K * upsample
    double bins_per_meter = 0.0;
    double center_frequency = 0.0;
    double half_bandwidth = 0.0;
    std::vector<double> freqs;
    std::vector<Vec3> positions;
    std::vector<double> ref_ranges;
    std::vector<Complex> dft;           // [k * M + m] = exp(+i 2 pi k m / M)
    std::vector<Complex> base_carrier;  // per signed profile bin
    std::vector<double> pixel_x;        // scene x per column
    std::vector<double> pixel_y;        // scene y per row
    double pixel_z = 0.0;
    double scale = 1.0;                 // 1 / (K * N_p)

    // Carrier exp(+i k_c dR) factored as table[q] * polar(k_c r) with
    // dR = q*delta + r: the residual angle stays below 0.1 rad, where a
    // short Taylor series is exact to machine precision. Keeps the
    // pixel loop off libm's sincos.
    static constexpr double kCarrierStep = 1.0 / 1024.0;  // meters
    double carrier_k = 0.0;
    long carrier_q_min = 0;
    std::vector<Complex> carrier_table;

    Complex carrier(double dr) const {
        const double scaled = dr / kCarrierStep;
        const double qf = std::floor(scaled);
        const long q = static_cast<long>(qf);
        if (q < carrier_q_min || q >= carrier_q_min + static_cast<long>(carrier_table.size()))
            return std::polar(1.0, carrier_k * dr);  // outside the precomputed span
        const double r = (scaled - qf) * kCarrierStep;
        const double x = carrier_k * r;
        const double x2 = x * x;
        const double c = 1.0 - x2 / 2.0 + x2 * x2 / 24.0;
        const double s = x * (1.0 - x2 / 6.0 + x2 * x2 / 120.0);
        return carrier_table[static_cast<std::size_t>(q - carrier_q_min)] * Complex(c, s);
    }

    BackprojectionPlan(const RadarConfig& radar, const CollectionGeometry& coll, const ImagingConfig& cfg) {
        radar.validate();
        coll.validate();
        cfg.validate();

        num_freq = radar.num_frequencies;
        num_pulses = coll.num_pulses;
        profile_len = num_freq * cfg.upsample;
        freqs = frequency_grid(radar);
        positions = phase_centers(coll);
        ref_ranges.resize(num_pulses);
        for (int p = 0; p < num_pulses; ++p) ref_ranges[p] = distance(positions[p], coll.target_center);

        const double delta_f = radar.bandwidth_hz / (num_freq - 1);
        const double bin_spacing = kSpeedOfLight / (2.0 * delta_f * profile_len);
        bins_per_meter = 1.0 / bin_spacing;
        center_frequency = radar.center_frequency_hz;
        half_bandwidth = radar.bandwidth_hz / 2.0;

        dft.resize(static_cast<std::size_t>(num_freq) * profile_len);
        for (int k = 0; k < num_freq; ++k)
            for (int m = 0; m < profile_len; ++m) {
                const long idx = (static_cast<long>(k) * m) % profile_len;
                dft[static_cast<std::size_t>(k) * profile_len + m] =
                    std::polar(1.0, kTwoPi * idx / profile_len);
            }

        // demodulates the profile to band center: exp(-i 2 pi B rho / c)
        base_carrier.resize(profile_len);
        for (int j = 0; j < profile_len; ++j) {
            const double rho = (j - profile_len / 2) * bin_spacing;
            base_carrier[j] = std::polar(1.0, -kTwoPi * (2.0 * half_bandwidth) * rho / kSpeedOfLight);
        }

        const int n = cfg.image_size;
        pixel_x.resize(n);
        pixel_y.resize(n);
        const double pitch = cfg.pixel_pitch();
        for (int i = 0; i < n; ++i) {
            const double offset = (i - (n - 1) / 2.0) * pitch;
            pixel_x[i] = coll.target_center.x + offset;
            pixel_y[i] = coll.target_center.y + offset;
        }
        pixel_z = coll.target_center.z;
        scale = 1.0 / (static_cast<double>(num_freq) * num_pulses);

        carrier_k = 4.0 * kPi * center_frequency / kSpeedOfLight;
        const double span = cfg.window_m * 1.5 + 1.0;  // beyond the pixel diagonal
        carrier_q_min = static_cast<long>(std::floor(-span / kCarrierStep));
        const long q_max = static_cast<long>(std::ceil(span / kCarrierStep));
        carrier_table.resize(static_cast<std::size_t>(q_max - carrier_q_min + 1));
        for (long q = carrier_q_min; q <= q_max; ++q)
            carrier_table[static_cast<std::size_t>(q - carrier_q_min)] =
                std::polar(1.0, carrier_k * (q * kCarrierStep));
    }

    // Range profile of pulse p: motion compensation to the scene center,
    // oversampled inverse DFT, demodulated to band center. Indexed by
    // signed bin j - M/2.
    void pulse_profile(const FrequencyHistory& hist, int p, std::vector<Complex>& out) const {
        std::vector<Complex> comp(num_freq);
        for (int k = 0; k < num_freq; ++k) {
            const double phase = 4.0 * kPi * freqs[k] * ref_ranges[p] / kSpeedOfLight;
            comp[k] = hist.at(k, p) * std::polar(1.0, phase);
        }
        out.assign(profile_len, Complex{0.0, 0.0});
        const int half = profile_len / 2;
        for (int j = 0; j < profile_len; ++j) {
            const int m = ((j - half) % profile_len + profile_len) % profile_len;
            Complex acc{0.0, 0.0};
            const Complex* row = dft.data();
            for (int k = 0; k < num_freq; ++k)
                acc += comp[k] * row[static_cast<std::size_t>(k) * profile_len + m];
            out[j] = acc * base_carrier[j];
        }
    }

    // Adjoint of pulse_profile: maps per-bin cotangents back to the
    // pulse's frequency samples.
    void pulse_profile_adjoint(const std::vector<Complex>& bin_cot, int p, FrequencyHistory& out) const {
        const int half = profile_len / 2;
        std::vector<Complex> s_cot(profile_len, Complex{0.0, 0.0});
        for (int j = 0; j < profile_len; ++j) {
            const int m = ((j - half) % profile_len + profile_len) % profile_len;
            s_cot[m] += bin_cot[j] * std::conj(base_carrier[j]);
        }
        for (int k = 0; k < num_freq; ++k) {
            Complex acc{0.0, 0.0};
            const Complex* row = dft.data() + static_cast<std::size_t>(k) * profile_len;
            for (int m = 0; m < profile_len; ++m) acc += s_cot[m] * std::conj(row[m]);
            const double phase = 4.0 * kPi * freqs[k] * ref_ranges[p] / kSpeedOfLight;
            out.at(k, p) = acc * std::conj(std::polar(1.0, phase));
        }
    }
};

}  // namespace detail

// Back-projection image formation. For every pixel q the oversampled
// range profile of each pulse is linearly interpolated at the pixel's
// differential range and phase-corrected back to the carrier:
//   x_c(q) = 1/(K N_p) sum_p P_p(dR_p(q)) exp(+i 4 pi f_c dR_p(q) / c).
// The 1/(K N_p) factor makes a unit scatterer produce a unit-magnitude
// peak regardless of the sampling grid.
inline ComplexImage backproject(const FrequencyHistory& hist, const ImagingConfig& cfg) {
    if (!hist.all_finite()) throw std::invalid_argument("backproject: non-finite signal samples");
    const detail::BackprojectionPlan plan(hist.radar(), hist.geometry(), cfg);

    const int n = cfg.image_size;
    const int np = plan.num_pulses;
    const int m = plan.profile_len;

    std::vector<std::vector<Complex>> profiles(np);
    for (int p = 0; p < np; ++p) plan.pulse_profile(hist, p, profiles[p]);

    ComplexImage img(n, n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const Vec3 q{plan.pixel_x[c], plan.pixel_y[r], plan.pixel_z};
            Complex acc{0.0, 0.0};
            for (int p = 0; p < np; ++p) {
                const double dr = distance(plan.positions[p], q) - plan.ref_ranges[p];
                double t = dr * plan.bins_per_meter + m / 2;
                t -= std::floor(t / m) * m;  // periodic fold into [0, M)
                const int i0 = static_cast<int>(t);
                const int i1 = (i0 + 1) % m;
                const double w = t - i0;
                const Complex val = profiles[p][i0] * (1.0 - w) + profiles[p][i1] * w;
                acc += val * plan.carrier(dr);
            }
            img.at(r, c) = acc * plan.scale;
        }
    }
    return img;
}

// Adjoint of backproject under the complex inner product
// <a, b> = sum a conj(b); used to pull image-domain gradients back to
// the signal domain.
inline FrequencyHistory backproject_adjoint(const ComplexImage& image_cot, const RadarConfig& radar,
                                            const CollectionGeometry& coll, const ImagingConfig& cfg) {
    const detail::BackprojectionPlan plan(radar, coll, cfg);
    const int n = cfg.image_size;
    if (image_cot.rows != n || image_cot.cols != n)
        throw std::invalid_argument("backproject_adjoint: image size mismatch");

    const int np = plan.num_pulses;
    const int m = plan.profile_len;
    std::vector<std::vector<Complex>> bins(np, std::vector<Complex>(m, Complex{0.0, 0.0}));

    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const Complex g = image_cot.at(r, c) * plan.scale;
            if (g == Complex{0.0, 0.0}) continue;
            const Vec3 q{plan.pixel_x[c], plan.pixel_y[r], plan.pixel_z};
            for (int p = 0; p < np; ++p) {
                const double dr = distance(plan.positions[p], q) - plan.ref_ranges[p];
                double t = dr * plan.bins_per_meter + m / 2;
                t -= std::floor(t / m) * m;
                const int i0 = static_cast<int>(t);
                const int i1 = (i0 + 1) % m;
                const double w = t - i0;
                const Complex back = g * std::conj(plan.carrier(dr));
                bins[p][i0] += back * (1.0 - w);
                bins[p][i1] += back * w;
            }
        }
    }

    FrequencyHistory out(radar, coll);
    for (int p = 0; p < np; ++p) plan.pulse_profile_adjoint(bins[p], p, out);
    return out;
}

// Log-magnitude normalization to the classifier's real input:
// x = (20 log10(max(|x_c|, floor)) - mu) / D.
inline RealImage normalize(const ComplexImage& complex_image, const ImagingConfig& cfg) {
    cfg.validate();
    RealImage out(complex_image.rows, complex_image.cols);
    for (std::size_t i = 0; i < complex_image.v.size(); ++i) {
        const double mag = std::max(std::abs(complex_image.v[i]), cfg.magnitude_floor);
        out.v[i] = (20.0 * std::log10(mag) - cfg.mu_db) / cfg.dynamic_range_db;
    }
    return out;
}

struct SarImage {
    ComplexImage complex_pixels;
    RealImage normalized;
    ImagingConfig config;
};

inline SarImage form_image(const FrequencyHistory& hist, const ImagingConfig& cfg) {
    SarImage img;
    img.config = cfg;
    img.complex_pixels = backproject(hist, cfg);
    img.normalized = normalize(img.complex_pixels, cfg);
    return img;
}

// The full signal-processing map x = g(s).
inline RealImage signal_to_image(const FrequencyHistory& hist, const ImagingConfig& cfg) {
    return normalize(backproject(hist, cfg), cfg);
}

// Chain rule through normalize and the (linear) back-projection: given
// dL/dx, returns dL/ds with real and imaginary parts treated as
// independent real variables, packed as re + i*im. Pixels at the
// magnitude floor contribute exactly zero.
inline FrequencyHistory grad_signal(const FrequencyHistory& hist, const RealImage& image_grad,
                                    const ImagingConfig& cfg, const ComplexImage* precomputed = nullptr) {
    ComplexImage local;
    const ComplexImage* xc = precomputed;
    if (!xc) {
        local = backproject(hist, cfg);
        xc = &local;
    }
    if (image_grad.rows != xc->rows || image_grad.cols != xc->cols)
        throw std::invalid_argument("grad_signal: gradient shape mismatch");

    const double log_scale = 20.0 / (std::log(10.0) * cfg.dynamic_range_db);
    ComplexImage cot(xc->rows, xc->cols);
    for (std::size_t i = 0; i < xc->v.size(); ++i) {
        const double mag = std::abs(xc->v[i]);
        if (mag > cfg.magnitude_floor) {
            cot.v[i] = image_grad.v[i] * log_scale * xc->v[i] / (mag * mag);
        } else {
            cot.v[i] = Complex{0.0, 0.0};
        }
    }
    return backproject_adjoint(cot, hist.radar(), hist.geometry(), cfg);
}

}  // namespace sarlab
