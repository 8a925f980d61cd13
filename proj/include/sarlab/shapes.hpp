#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sarlab/geom.hpp"
#include "sarlab/rng.hpp"

namespace sarlab {

// ---------------------------------------------------------------------------
// Target shape classes and their sampled dimensional parameters.
//
// All targets are roll-symmetric about the body z axis. The body frame is
// centered on the geometric center of the shape, +z pointing from nose to
// tail, so the nose tip of a length-L cone sits at z = -L/2.
// ---------------------------------------------------------------------------

enum class ShapeClass : int { Cylinder = 0, Cone = 1, DomeCylinder = 2, HourGlass = 3 };

inline constexpr int kNumShapeClasses = 4;

inline const char* to_string(ShapeClass c) {
    switch (c) {
        case ShapeClass::Cylinder: return "cylinder";
        case ShapeClass::Cone: return "cone";
        case ShapeClass::DomeCylinder: return "dome-cylinder";
        case ShapeClass::HourGlass: return "hour-glass";
    }
    return "?";
}

inline ShapeClass shape_class_from_int(int v) {
    if (v < 0 || v >= kNumShapeClasses) throw std::invalid_argument("shape class index out of range");
    return static_cast<ShapeClass>(v);
}

inline ShapeClass shape_class_from_string(const std::string& s) {
    for (int i = 0; i < kNumShapeClasses; ++i)
        if (s == to_string(static_cast<ShapeClass>(i))) return static_cast<ShapeClass>(i);
    throw std::invalid_argument("unknown shape class: " + s);
}

// Roll-symmetric notch/groove feature placed along the body axis.
struct RingFeature {
    double axial_position = 0.0;  // meters from the nose, in [0, L]
    double depth = 0.0;           // meters
};

struct TargetGeometry {
    ShapeClass shape_class = ShapeClass::Cylinder;
    double length = 0.0;           // L
    double diameter = 0.0;         // D  (cylinder, cone, dome-cylinder)
    double fore_diameter = 0.0;    // D1 (hour-glass nose cone base)
    double aft_diameter = 0.0;     // D2 (hour-glass tail cone base)
    double collar_length = 0.0;    // L_C (cone, hour-glass)
    double collar_diameter = 0.0;  // D_C
    std::optional<RingFeature> ring;
    double size_scalar = 0.0;  // max of L and the applicable diameters

    // Full body extent along z; the dome cap extends a dome-cylinder
    // beyond its cylinder-section length.
    double extent() const {
        return shape_class == ShapeClass::DomeCylinder ? length + diameter / 2.0 : length;
    }

    void validate() const {
        if (length < 1.0 || length > 4.0) throw std::invalid_argument("target length outside [1,4] m");
        auto check_d = [](double d, const char* what) {
            if (d < 1.0 || d > 2.0) throw std::invalid_argument(std::string(what) + " outside [1,2] m");
        };
        switch (shape_class) {
            case ShapeClass::Cylinder:
            case ShapeClass::Cone:
            case ShapeClass::DomeCylinder:
                check_d(diameter, "diameter");
                break;
            case ShapeClass::HourGlass:
                check_d(fore_diameter, "fore diameter");
                check_d(aft_diameter, "aft diameter");
                break;
        }
        if (ring && (ring->axial_position < 0.0 || ring->axial_position > length))
            throw std::invalid_argument("ring position outside [0, L]");
    }
};

// Deterministic collar dimensions for the shapes that carry one.
inline double collar_length_for(double body_length) { return body_length / 2.0 + 0.1; }
inline constexpr double kCollarDiameter = 0.1;

// Ring feature sampling range (the source material gives no size).
inline constexpr double kRingDepthMin = 0.05;
inline constexpr double kRingDepthMax = 0.2;

// Draws a target with parameters from the data-set distributions:
// L ~ U[1,4], D,D1,D2 ~ U[1,2], L_C = L/2 + 0.1, D_C = 0.1, and a ring
// present on half the samples at a uniform position along the body.
inline TargetGeometry sample_target(Rng& rng, std::optional<ShapeClass> cls = std::nullopt) {
    TargetGeometry g;
    g.shape_class = cls ? *cls : static_cast<ShapeClass>(rng.uniform_index(kNumShapeClasses));
    g.length = rng.uniform(1.0, 4.0);

    double max_diameter = 0.0;
    switch (g.shape_class) {
        case ShapeClass::Cylinder:
        case ShapeClass::DomeCylinder:
            g.diameter = rng.uniform(1.0, 2.0);
            max_diameter = g.diameter;
            break;
        case ShapeClass::Cone:
            g.diameter = rng.uniform(1.0, 2.0);
            max_diameter = g.diameter;
            g.collar_length = collar_length_for(g.length);
            g.collar_diameter = kCollarDiameter;
            break;
        case ShapeClass::HourGlass:
            g.fore_diameter = rng.uniform(1.0, 2.0);
            g.aft_diameter = rng.uniform(1.0, 2.0);
            max_diameter = std::max(g.fore_diameter, g.aft_diameter);
            g.collar_length = collar_length_for(g.length);
            g.collar_diameter = kCollarDiameter;
            break;
    }

    if (rng.bernoulli(0.5)) {
        RingFeature ring;
        ring.axial_position = rng.uniform(0.0, g.length);
        ring.depth = rng.uniform(kRingDepthMin, kRingDepthMax);
        g.ring = ring;
    }

    g.size_scalar = std::max(g.length, max_diameter);
    return g;
}

// ---------------------------------------------------------------------------
// Scattering centers.
//
// Each shape reduces to a handful of diffraction centers: tips, circular
// rim edges, surface junctions, and the specular crest of a dome. A
// circular rim is represented by a near/far pair whose positions are
// recomputed per line-of-sight as the rim points closest to and farthest
// from the radar.
// ---------------------------------------------------------------------------

enum class ScattererKind : int { Tip, EdgeNear, EdgeFar, Junction, Specular, RingNear, RingFar };

inline bool is_rim(ScattererKind k) {
    return k == ScattererKind::EdgeNear || k == ScattererKind::EdgeFar ||
           k == ScattererKind::RingNear || k == ScattererKind::RingFar;
}

inline bool is_near_member(ScattererKind k) {
    return k == ScattererKind::EdgeNear || k == ScattererKind::RingNear;
}

// Frequency exponent of the diffraction amplitude, (f/f_ref)^alpha.
inline double alpha_for(ScattererKind k) {
    switch (k) {
        case ScattererKind::Tip: return -1.0;
        case ScattererKind::EdgeNear:
        case ScattererKind::EdgeFar:
        case ScattererKind::RingNear:
        case ScattererKind::RingFar: return -0.5;
        case ScattererKind::Junction: return 0.5;
        case ScattererKind::Specular: return 0.0;
    }
    return 0.0;
}

struct ScatteringCenter {
    Vec3 body_position;  // meters, body frame; rim members store a point on the rim
    ScattererKind kind = ScattererKind::Tip;
    double alpha = 0.0;
    double base_amplitude = 0.0;
    // Specular wall flash carried by the rim bounding that wall: the
    // aspect at which the adjacent body surface is normal to the LOS.
    // A flash_gain of zero disables the term.
    double flash_aspect = 0.0;  // radians
    double flash_width = 0.12;  // radians
    double flash_gain = 0.0;
};

// Aspect-dependent amplitude factor. Rim returns peak at broadside
// (specular flash of the circular edge); tips and junctions peak along
// the axis; the dome crest is visible from everywhere.
inline double angular_falloff(ScattererKind kind, double theta, double floor_gain = 0.2) {
    if (kind == ScattererKind::Specular) return 1.0;
    const double s = std::fabs(std::sin(theta));
    if (is_rim(kind)) return floor_gain + (1.0 - floor_gain) * s;
    return floor_gain + (1.0 - floor_gain) * std::fabs(std::cos(theta));
}

// Full angular response of one center: the per-kind falloff plus the
// center's wall flash. The flash distance is taken modulo the mirror
// aspect so the response stays symmetric under theta -> 2 pi - theta.
inline double angular_response(const ScatteringCenter& c, double theta) {
    double a = angular_falloff(c.kind, theta);
    if (c.flash_gain > 0.0) {
        const double d = std::min(circular_distance(theta, c.flash_aspect),
                                  circular_distance(theta, kTwoPi - c.flash_aspect));
        const double z = d / c.flash_width;
        a += c.flash_gain * std::exp(-z * z);
    }
    return a;
}

namespace detail {

inline double base_amplitude_for(ScattererKind k, double rim_radius = 0.0) {
    // Parametric per-kind levels; rim strength grows with the rim
    // circumference (longer edge, stronger flash).
    switch (k) {
        case ScattererKind::Tip: return 0.7;
        case ScattererKind::EdgeNear:
        case ScattererKind::EdgeFar: return 1.0 * std::sqrt(std::max(rim_radius, 0.0));
        case ScattererKind::Junction: return 0.5;
        case ScattererKind::Specular: return 1.5;
        case ScattererKind::RingNear:
        case ScattererKind::RingFar: return 0.8 * std::sqrt(std::max(rim_radius, 0.0));
    }
    return 0.0;
}

inline ScatteringCenter axial_center(ScattererKind kind, double z) {
    ScatteringCenter c;
    c.body_position = {0.0, 0.0, z};
    c.kind = kind;
    c.alpha = alpha_for(kind);
    c.base_amplitude = base_amplitude_for(kind);
    return c;
}

inline void add_rim_pair(std::vector<ScatteringCenter>& out, double z, double radius, bool ring = false,
                         double flash_aspect = 0.0, double flash_gain = 0.0) {
    const ScattererKind near_kind = ring ? ScattererKind::RingNear : ScattererKind::EdgeNear;
    const ScattererKind far_kind = ring ? ScattererKind::RingFar : ScattererKind::EdgeFar;
    for (ScattererKind kind : {near_kind, far_kind}) {
        ScatteringCenter c;
        const double sign = is_near_member(kind) ? -1.0 : 1.0;
        c.body_position = {sign * radius, 0.0, z};
        c.kind = kind;
        c.alpha = alpha_for(kind);
        c.base_amplitude = base_amplitude_for(kind, radius);
        c.flash_aspect = flash_aspect;
        c.flash_gain = flash_gain;
        out.push_back(c);
    }
}

}  // namespace detail

// Body surface radius at axial station z (body frame). Used to size the
// ring feature's groove edges.
inline double local_radius(const TargetGeometry& g, double z) {
    const double half = g.extent() / 2.0;
    z = std::clamp(z, -half, half);
    switch (g.shape_class) {
        case ShapeClass::Cylinder:
            return g.diameter / 2.0;
        case ShapeClass::Cone:
            // tip at -half widening linearly to the base rim at +half
            return (z + half) / g.length * (g.diameter / 2.0);
        case ShapeClass::DomeCylinder: {
            const double r = g.diameter / 2.0;
            const double dome_center_z = -half + r;
            if (z >= dome_center_z) return r;
            const double dz = dome_center_z - z;
            return std::sqrt(std::max(r * r - dz * dz, 0.0));
        }
        case ShapeClass::HourGlass: {
            const double d = z < 0.0 ? g.fore_diameter : g.aft_diameter;
            return std::fabs(z) / half * (d / 2.0);
        }
    }
    return 0.0;
}

// Reduces a target to its scattering centers. Rims contribute near/far
// pairs; the optional ring contributes one extra pair at the groove.
// Each rim bounding a straight wall carries that wall's specular flash:
// the cylinder side lights up at exactly broadside, a cone's wall aft
// of broadside, and the hour-glass cones fore/aft of it, which is most
// of what separates the classes near specular aspects.
inline std::vector<ScatteringCenter> scattering_centers(const TargetGeometry& g) {
    g.validate();
    std::vector<ScatteringCenter> out;
    const double half = g.extent() / 2.0;
    constexpr double kWallFlashGain = 2.0;

    switch (g.shape_class) {
        case ShapeClass::Cylinder:
            detail::add_rim_pair(out, -half, g.diameter / 2.0, false, kPi / 2.0, kWallFlashGain);
            detail::add_rim_pair(out, +half, g.diameter / 2.0, false, kPi / 2.0, kWallFlashGain);
            break;
        case ShapeClass::Cone: {
            out.push_back(detail::axial_center(ScattererKind::Tip, -half));
            // wall runs tip(-L/2, 0) -> base(+L/2, D/2); normal to the
            // LOS at aspect pi - atan(2L / D)
            const double flash = kPi - std::atan2(2.0 * g.length, g.diameter);
            detail::add_rim_pair(out, +half, g.diameter / 2.0, false, flash, kWallFlashGain);
            break;
        }
        case ShapeClass::DomeCylinder: {
            const double r = g.diameter / 2.0;
            out.push_back(detail::axial_center(ScattererKind::Specular, -half));
            // curvature discontinuity where the dome meets the cylinder
            out.push_back(detail::axial_center(ScattererKind::Junction, -half + r));
            detail::add_rim_pair(out, +half, r, false, kPi / 2.0, kWallFlashGain);
            break;
        }
        case ShapeClass::HourGlass: {
            // flared cones joined at the center: the fore wall flashes
            // forward of broadside, the aft wall behind it
            const double fore_flash = std::atan2(g.length, g.fore_diameter);
            const double aft_flash = kPi - std::atan2(g.length, g.aft_diameter);
            detail::add_rim_pair(out, -half, g.fore_diameter / 2.0, false, fore_flash, kWallFlashGain);
            out.push_back(detail::axial_center(ScattererKind::Junction, 0.0));
            detail::add_rim_pair(out, +half, g.aft_diameter / 2.0, false, aft_flash, kWallFlashGain);
            break;
        }
    }

    if (g.collar_length > 0.0) {
        // thin coupling collar straddling the mid-body joint
        const double cz = g.collar_length / 2.0;
        detail::add_rim_pair(out, -cz, g.collar_diameter / 2.0);
        detail::add_rim_pair(out, +cz, g.collar_diameter / 2.0);
    }

    if (g.ring) {
        const double z = -half + g.ring->axial_position;
        const double radius = std::max(local_radius(g, z) - g.ring->depth, 0.02);
        detail::add_rim_pair(out, z, radius, /*ring=*/true);
    }
    return out;
}

struct LosSample {
    double range = 0.0;  // r_n, meters down-range of the geometric center
    ScatteringCenter center;
};

// Projects centers onto the line of sight at aspect angle theta (angle
// between the body axis and the radar LOS; 0 = nose-on). Rim members are
// recomputed as the rim points nearest/farthest along the LOS, which
// makes the result invariant to any roll of the target and symmetric
// under theta -> 2*pi - theta.
inline std::vector<LosSample> project_to_los(const std::vector<ScatteringCenter>& centers, double theta) {
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    const double abs_st = std::fabs(st);
    const double los_sign = st >= 0.0 ? 1.0 : -1.0;

    std::vector<LosSample> out;
    out.reserve(centers.size());
    for (const ScatteringCenter& c : centers) {
        LosSample s;
        s.center = c;
        if (is_rim(c.kind)) {
            const double radius = std::hypot(c.body_position.x, c.body_position.y);
            const double z = c.body_position.z;
            const double sign = is_near_member(c.kind) ? -1.0 : 1.0;
            s.range = z * ct + sign * radius * abs_st;
            s.center.body_position = {sign * los_sign * radius, 0.0, z};
        } else {
            s.range = c.body_position.z * ct;
        }
        out.push_back(s);
    }
    return out;
}

}  // namespace sarlab
