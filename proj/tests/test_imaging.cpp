#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "sarlab/imaging.hpp"
#include "sarlab/rfsim.hpp"

using namespace sarlab;

namespace {

// Independent oracle: direct matched-filter sum over all samples,
// x(q) = 1/(K Np) sum_{k,p} E[k][p] exp(+i 4 pi f_k R_p(q) / c).
Complex matched_filter_pixel(const FrequencyHistory& hist, const Vec3& q) {
    const auto freqs = frequency_grid(hist.radar());
    const auto positions = phase_centers(hist.geometry());
    Complex acc{0.0, 0.0};
    for (int p = 0; p < hist.num_pulses(); ++p) {
        const double range = distance(positions[p], q);
        for (int k = 0; k < hist.num_frequencies(); ++k) {
            acc += hist.at(k, p) * std::polar(1.0, 4.0 * kPi * freqs[k] * range / kSpeedOfLight);
        }
    }
    return acc / static_cast<double>(hist.num_frequencies() * hist.num_pulses());
}

ScatteringCenter point_at_body_z(double z) {
    ScatteringCenter c;
    c.body_position = {0.0, 0.0, z};
    c.kind = ScattererKind::Specular;
    c.alpha = 0.0;
    c.base_amplitude = 1.0;
    return c;
}

struct Peak {
    int row = 0, col = 0;
    double mag = 0.0;
};

Peak find_peak(const ComplexImage& img) {
    Peak best;
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            const double m = std::abs(img.at(r, c));
            if (m > best.mag) best = {r, c, m};
        }
    return best;
}

FrequencyHistory random_history(const RadarConfig& radar, const CollectionGeometry& coll, Rng& rng) {
    FrequencyHistory h(radar, coll);
    for (auto& v : h.samples()) v = Complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    return h;
}

RadarConfig small_radar() {
    RadarConfig r;
    r.num_frequencies = 8;
    return r;
}

CollectionGeometry small_coll() {
    CollectionGeometry c;
    c.altitude_m = 0.0;
    c.orbit_radius_m = 500.0;
    c.num_pulses = 4;
    return c;
}

ImagingConfig small_imaging() {
    ImagingConfig c;
    c.image_size = 24;
    c.upsample = 4;
    return c;
}

}  // namespace

TEST_CASE("normalize: formula with the magnitude floor") {
    ImagingConfig cfg;
    ComplexImage img(1, 3);
    img.at(0, 0) = {0.01, 0.0};
    img.at(0, 1) = {0.0, 1.0};
    img.at(0, 2) = {0.0, 0.0};
    const RealImage out = normalize(img, cfg);
    CHECK(out.at(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out.at(0, 1) == doctest::Approx(0.8));
    CHECK(out.at(0, 2) == doctest::Approx(-4.0));
}

TEST_CASE("backproject: zero signal gives an all-zero image, g gives the floor constant") {
    FrequencyHistory h(small_radar(), small_coll());
    const ImagingConfig cfg = small_imaging();
    const ComplexImage img = backproject(h, cfg);
    for (const Complex& v : img.v) CHECK(std::abs(v) == 0.0);

    const RealImage x = signal_to_image(h, cfg);
    const double expected = (20.0 * std::log10(cfg.magnitude_floor) - cfg.mu_db) / cfg.dynamic_range_db;
    for (double v : x.v) CHECK(v == doctest::Approx(expected));
}

TEST_CASE("backproject: rejects non-finite samples") {
    FrequencyHistory h(small_radar(), small_coll());
    h.samples()[3] = Complex(std::nan(""), 0.0);
    CHECK_THROWS_AS(backproject(h, small_imaging()), std::invalid_argument);
}

TEST_CASE("backproject: linear in the signal") {
    Rng rng(5);
    const RadarConfig radar = small_radar();
    const CollectionGeometry coll = small_coll();
    const ImagingConfig cfg = small_imaging();

    const auto s1 = random_history(radar, coll, rng);
    const auto s2 = random_history(radar, coll, rng);
    const double a = 2.375;

    FrequencyHistory mix(radar, coll);
    for (std::size_t i = 0; i < mix.samples().size(); ++i)
        mix.samples()[i] = a * s1.samples()[i] + s2.samples()[i];

    const auto img_mix = backproject(mix, cfg);
    const auto img_1 = backproject(s1, cfg);
    const auto img_2 = backproject(s2, cfg);

    for (std::size_t i = 0; i < img_mix.v.size(); ++i) {
        const Complex want = a * img_1.v[i] + img_2.v[i];
        CHECK(std::abs(img_mix.v[i] - want) <= 1e-10 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("backproject adjoint identity <BP u, v> == <u, BP^H v>") {
    Rng rng(17);
    const RadarConfig radar = small_radar();
    const CollectionGeometry coll = small_coll();
    const ImagingConfig cfg = small_imaging();

    for (int trial = 0; trial < 10; ++trial) {
        const auto u = random_history(radar, coll, rng);
        ComplexImage v(cfg.image_size, cfg.image_size);
        for (auto& x : v.v) x = Complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));

        const auto bu = backproject(u, cfg);
        const auto btv = backproject_adjoint(v, radar, coll, cfg);

        Complex lhs{0.0, 0.0}, rhs{0.0, 0.0};
        for (std::size_t i = 0; i < bu.v.size(); ++i) lhs += bu.v[i] * std::conj(v.v[i]);
        for (std::size_t i = 0; i < u.samples().size(); ++i)
            rhs += u.samples()[i] * std::conj(btv.samples()[i]);

        CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max({1.0, std::abs(lhs), std::abs(rhs)}));
    }
}

TEST_CASE("backproject: point scatterer peaks agree with the matched-filter oracle") {
    RadarConfig radar;  // full 24 GHz / 0.5 GHz / K = 64
    CollectionGeometry coll;
    coll.altitude_m = 500.0;
    coll.orbit_radius_m = 2000.0;
    coll.num_pulses = 64;
    Rng rng(1);
    ImagingConfig cfg;  // 6 m / 160 px

    // scatterer at the scene center
    const auto hist_center = collect({point_at_body_z(0.0)}, radar, coll, std::nullopt, rng);
    const auto img_center = backproject(hist_center, cfg);
    const Peak pc = find_peak(img_center);
    const double mid = (cfg.image_size - 1) / 2.0;
    CHECK(std::fabs(pc.row - mid) <= 1.0);
    CHECK(std::fabs(pc.col - mid) <= 1.0);

    // oracle agrees at the peak pixel and dominates a far-away pixel
    const double pitch = cfg.pixel_pitch();
    const Vec3 q_peak{coll.target_center.x + (pc.col - mid) * pitch,
                      coll.target_center.y + (pc.row - mid) * pitch, coll.target_center.z};
    const double oracle_peak = std::abs(matched_filter_pixel(hist_center, q_peak));
    CHECK(std::abs(img_center.at(pc.row, pc.col)) == doctest::Approx(oracle_peak).epsilon(0.02));
    const Vec3 q_far{coll.target_center.x + 2.0, coll.target_center.y + 2.0, coll.target_center.z};
    CHECK(std::abs(matched_filter_pixel(hist_center, q_far)) < 0.2 * oracle_peak);

    // scatterer 0.3 m down-range (pose 0: body axis along the LOS)
    const auto hist_offset = collect({point_at_body_z(0.3)}, radar, coll, std::nullopt, rng);
    const auto img_offset = backproject(hist_offset, cfg);
    const Peak po = find_peak(img_offset);

    // 0.3 m / 0.0375 m per pixel = 8 pixels, along the down-range axis
    const double shift_px = std::hypot(double(po.row - pc.row), double(po.col - pc.col));
    CHECK(shift_px == doctest::Approx(8.0).epsilon(0.13));

    // oracle confirms: at the offset ground position the response peaks,
    // and at the image's peak pixel the two paths agree
    const Vec3 q_offset{coll.target_center.x - 0.3, coll.target_center.y, coll.target_center.z};
    const double oracle_at_offset = std::abs(matched_filter_pixel(hist_offset, q_offset));
    const double oracle_at_center = std::abs(matched_filter_pixel(hist_offset, coll.target_center));
    CHECK(oracle_at_offset > 2.0 * oracle_at_center);
    const Vec3 q_peak2{coll.target_center.x + (po.col - mid) * pitch,
                       coll.target_center.y + (po.row - mid) * pitch, coll.target_center.z};
    CHECK(std::abs(img_offset.at(po.row, po.col)) ==
          doctest::Approx(std::abs(matched_filter_pixel(hist_offset, q_peak2))).epsilon(0.02));
}

TEST_CASE("backproject: -3 dB ground-range mainlobe width is c/2B") {
    RadarConfig radar;
    CollectionGeometry coll;
    coll.altitude_m = 0.0;
    coll.orbit_radius_m = 2000.0;
    coll.num_pulses = 64;
    Rng rng(1);
    ImagingConfig cfg;

    const auto hist = collect({point_at_body_z(0.0)}, radar, coll, std::nullopt, rng);
    const auto img = backproject(hist, cfg);
    const Peak pk = find_peak(img);

    // with phi0 = 0 the radar sits on the +x axis, so ground range runs
    // along the column axis
    const double level = pk.mag / std::sqrt(2.0);
    auto crossing = [&](int dir) {
        double prev = pk.mag;
        for (int step = 1; step < cfg.image_size; ++step) {
            const int c = pk.col + dir * step;
            REQUIRE(c >= 0);
            REQUIRE(c < cfg.image_size);
            const double m = std::abs(img.at(pk.row, c));
            if (m <= level) {
                const double frac = (prev - level) / (prev - m);
                return (step - 1 + frac) * cfg.pixel_pitch();
            }
            prev = m;
        }
        return 0.0;
    };
    const double width = crossing(+1) + crossing(-1);
    CHECK(width == doctest::Approx(kSpeedOfLight / (2.0 * radar.bandwidth_hz)).epsilon(0.30));
}

TEST_CASE("signal_to_image: scaling the signal shifts the image by 20 log10") {
    Rng rng(3);
    const RadarConfig radar = small_radar();
    const CollectionGeometry coll = small_coll();
    const ImagingConfig cfg = small_imaging();

    const auto s = random_history(radar, coll, rng);
    FrequencyHistory s10(radar, coll);
    for (std::size_t i = 0; i < s.samples().size(); ++i) s10.samples()[i] = 10.0 * s.samples()[i];

    const auto x1 = signal_to_image(s, cfg);
    const auto x2 = signal_to_image(s10, cfg);
    for (std::size_t i = 0; i < x1.v.size(); ++i) {
        // where the magnitude dominates the floor the shift is exactly 20/D
        CHECK(x2.v[i] - x1.v[i] == doctest::Approx(20.0 / cfg.dynamic_range_db).epsilon(1e-9));
    }

    // bit-for-bit reproducibility
    const auto again = signal_to_image(s, cfg);
    for (std::size_t i = 0; i < x1.v.size(); ++i) CHECK(x1.v[i] == again.v[i]);
}

TEST_CASE("grad_signal: zero image gradient gives a zero signal gradient") {
    Rng rng(4);
    const auto s = random_history(small_radar(), small_coll(), rng);
    const ImagingConfig cfg = small_imaging();
    RealImage zero(cfg.image_size, cfg.image_size);
    const auto g = grad_signal(s, zero, cfg);
    for (const Complex& v : g.samples()) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("grad_signal: matches central finite differences") {
    Rng rng(6);
    const RadarConfig radar = small_radar();
    const CollectionGeometry coll = small_coll();
    const ImagingConfig cfg = small_imaging();
    auto s = random_history(radar, coll, rng);

    // loss L = sum_q w_q x_q for fixed random weights
    RealImage w(cfg.image_size, cfg.image_size);
    for (auto& v : w.v) v = rng.uniform(-1.0, 1.0);
    auto loss = [&](const FrequencyHistory& h) {
        const RealImage x = signal_to_image(h, cfg);
        double acc = 0.0;
        for (std::size_t i = 0; i < x.v.size(); ++i) acc += w.v[i] * x.v[i];
        return acc;
    };

    const auto grad = grad_signal(s, w, cfg);
    const double h = 1e-4;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t idx = rng.uniform_index(s.samples().size());
        const bool imag_part = rng.bernoulli(0.5);
        const Complex delta = imag_part ? Complex(0.0, h) : Complex(h, 0.0);

        FrequencyHistory plus = s, minus = s;
        plus.samples()[idx] += delta;
        minus.samples()[idx] -= delta;
        const double fd = (loss(plus) - loss(minus)) / (2.0 * h);
        const double an = imag_part ? grad.samples()[idx].imag() : grad.samples()[idx].real();
        CHECK(std::fabs(fd - an) <= 1e-3 * std::max(1.0, std::fabs(fd)));
    }
}

TEST_CASE("grad_signal: pixels at the magnitude floor contribute nothing") {
    const RadarConfig radar = small_radar();
    const CollectionGeometry coll = small_coll();
    const ImagingConfig cfg = small_imaging();
    FrequencyHistory zero_signal(radar, coll);  // all-zero -> every pixel floored
    RealImage w(cfg.image_size, cfg.image_size);
    for (auto& v : w.v) v = 1.0;
    const auto g = grad_signal(zero_signal, w, cfg);
    for (const Complex& v : g.samples()) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("normalization keeps the bulk of simulated image values in [-1, 1]") {
    RadarConfig radar;
    CollectionGeometry coll;
    coll.num_pulses = 32;
    Rng rng(99);
    ImagingConfig cfg;
    cfg.image_size = 64;  // reduced grid; the statistics are per-pixel

    std::size_t in_range = 0, total = 0;
    for (int i = 0; i < 100; ++i) {
        const auto target = sample_target(rng);
        coll.pose_rad = rng.uniform(0.0, kTwoPi);
        coll.altitude_m = rng.uniform(500.0, 2000.0);
        coll.orbit_radius_m = rng.uniform(1000.0, 5000.0);
        coll.start_azimuth_rad = rng.uniform(0.0, kTwoPi);
        const auto hist = collect(target, radar, coll, 20.0, rng);
        const auto x = signal_to_image(hist, cfg);
        for (double v : x.v) {
            total++;
            if (v >= -1.0 && v <= 1.0) in_range++;
        }
    }
    CHECK(double(in_range) / double(total) >= 0.90);
}
