#pragma once

// Volumes of ball/box intersections and integrals of |x - a|^(-k) over boxes.
// Both are the workhorses behind ball-mass queries on grid densities and the
// singular-cell treatment near atoms.

#include <boost/math/quadrature/gauss.hpp>

#include "nlpot/common.hpp"

namespace nlpot::geometry {

namespace detail {

// Primitive of sqrt(r^2 - v^2).
inline double chord_primitive(double v, double r) {
    double u = std::clamp(v / r, -1.0, 1.0);
    return 0.5 * (v * std::sqrt(std::max(r * r - v * v, 0.0)) + r * r * std::asin(u));
}

// Area of {|p| <= r} ∩ {p.x <= x, p.y <= y}.
inline double quadrant_area(double x, double y, double r) {
    if (y <= -r || x <= -r) return 0.0;
    const double ymax = std::min(y, r);
    auto full = [&](double a, double b) {  // ∫ 2w
        if (b <= a) return 0.0;
        return 2.0 * (chord_primitive(b, r) - chord_primitive(a, r));
    };
    auto partial = [&](double a, double b) {  // ∫ (x + w)
        if (b <= a) return 0.0;
        return x * (b - a) + chord_primitive(b, r) - chord_primitive(a, r);
    };
    if (x >= r) return full(-r, ymax);
    const double v0 = std::sqrt(std::max(r * r - x * x, 0.0));
    double area = partial(std::max(-v0, -r), std::min(v0, ymax));
    if (x >= 0.0) area += full(-r, std::min(-v0, ymax)) + full(v0, ymax);
    return area;
}

inline double nearest_sq(const Point& c, const Point& lo, const Point& hi, int n) {
    double s = 0.0;
    for (int a = 0; a < n; ++a) {
        double d = 0.0;
        if (c[a] < lo[a]) d = lo[a] - c[a];
        else if (c[a] > hi[a]) d = c[a] - hi[a];
        s += d * d;
    }
    return s;
}

inline double farthest_sq(const Point& c, const Point& lo, const Point& hi, int n) {
    double s = 0.0;
    for (int a = 0; a < n; ++a) {
        double d = std::max(std::abs(c[a] - lo[a]), std::abs(c[a] - hi[a]));
        s += d * d;
    }
    return s;
}

inline double box_volume(const Point& lo, const Point& hi, int n) {
    double v = 1.0;
    for (int a = 0; a < n; ++a) v *= hi[a] - lo[a];
    return v;
}

inline double ball_box_volume_impl(const Point& c, double r, const Point& lo, const Point& hi, int n);

// Slices along axis n-1; the ball cross-section is an (n-1)-ball.
inline double sliced_volume(const Point& c, double r, const Point& lo, const Point& hi, int n) {
    const int z = n - 1;
    const double za = std::max(lo[z], c[z] - r);
    const double zb = std::min(hi[z], c[z] + r);
    if (zb <= za) return 0.0;
    // z = c + r sin(phi) removes the square-root endpoint behaviour of the slice area.
    const double pa = std::asin(std::clamp((za - c[z]) / r, -1.0, 1.0));
    const double pb = std::asin(std::clamp((zb - c[z]) / r, -1.0, 1.0));
    constexpr int panels = 4;
    double total = 0.0;
    for (int k = 0; k < panels; ++k) {
        double a = pa + (pb - pa) * k / panels;
        double b = pa + (pb - pa) * (k + 1) / panels;
        total += boost::math::quadrature::gauss<double, 10>::integrate(
            [&](double phi) {
                double cp = std::cos(phi);
                return ball_box_volume_impl(c, r * cp, lo, hi, n - 1) * r * cp;
            },
            a, b);
    }
    return total;
}

inline double ball_box_volume_impl(const Point& c, double r, const Point& lo, const Point& hi, int n) {
    if (r <= 0.0) return 0.0;
    const double r2 = r * r;
    if (nearest_sq(c, lo, hi, n) >= r2) return 0.0;
    if (farthest_sq(c, lo, hi, n) <= r2) return box_volume(lo, hi, n);
    if (n == 1) return std::min(hi[0], c[0] + r) - std::max(lo[0], c[0] - r);
    if (n == 2) {
        const double x1 = lo[0] - c[0], x2 = hi[0] - c[0];
        const double y1 = lo[1] - c[1], y2 = hi[1] - c[1];
        double a = quadrant_area(x2, y2, r) - quadrant_area(x1, y2, r) - quadrant_area(x2, y1, r) +
                   quadrant_area(x1, y1, r);
        return std::clamp(a, 0.0, box_volume(lo, hi, 2));
    }
    return std::clamp(sliced_volume(c, r, lo, hi, n), 0.0, box_volume(lo, hi, n));
}

}  // namespace detail

/// |B̄_r(center) ∩ box|. Exact (closed form) for N = 2; for N >= 3 the last
/// N-2 axes are integrated by Gauss-Legendre slices over the exact planar area.
inline double ball_box_volume(const Point& center, double r, const Point& lo, const Point& hi) {
    return detail::ball_box_volume_impl(center, r, lo, hi, center.dim());
}

inline double ball_box_volume(const Point& center, double r, const Box& box) {
    return ball_box_volume(center, r, box.lo, box.hi);
}

namespace detail {

// ∫ over [0,X_0]x...x[0,X_{m-1}] of (s2 + |y|^2)^(-k/2) dy, with graded
// composite Gauss-Legendre so that the peak of width sqrt(s2) at y = 0 is resolved.
inline double face_integral(double s2, const double* X, int m, double k) {
    if (m == 0) return std::pow(s2, -0.5 * k);
    const double width = std::sqrt(s2);
    const double top = X[m - 1];
    double total = 0.0;
    double a = 0.0;
    double b = std::min(top, width);
    while (a < top) {
        total += boost::math::quadrature::gauss<double, 10>::integrate(
            [&](double y) { return face_integral(s2 + y * y, X, m - 1, k); }, a, b);
        a = b;
        b = std::min(top, 2.0 * b);
    }
    return total;
}

// ∫_{[0,X]} |x|^(-k) dx for X_i > 0 via the divergence theorem:
// div(x |x|^(-k)) = (N - k)|x|^(-k), and faces through the origin carry no flux.
inline double orthant_power_integral(const double* X, int n, double k) {
    double total = 0.0;
    double rest[kMaxDim];
    for (int i = 0; i < n; ++i) {
        int m = 0;
        for (int j = 0; j < n; ++j)
            if (j != i) rest[m++] = X[j];
        total += X[i] * face_integral(X[i] * X[i], rest, m, k);
    }
    return total / (n - k);
}

}  // namespace detail

/// ∫_box |x - a|^(-k) dx for 0 <= k < N. The singular point may lie anywhere,
/// including inside the box or on its boundary.
inline double power_integral_box(const Point& a, double k, const Point& lo, const Point& hi) {
    const int n = a.dim();
    require(k >= 0.0 && k < n, "power_integral_box: exponent must lie in [0, N)");
    // Signed inclusion-exclusion over the 2^N corners relative to a; an interval
    // [l, u] is ∫_0^u - ∫_0^l and ∫_0^X = sign(X)∫_0^|X| by reflection symmetry.
    double total = 0.0;
    for (int mask = 0; mask < (1 << n); ++mask) {
        double X[kMaxDim];
        double sign = 1.0;
        bool zero = false;
        for (int ax = 0; ax < n; ++ax) {
            double v = (mask >> ax & 1) ? hi[ax] - a[ax] : lo[ax] - a[ax];
            double s = (mask >> ax & 1) ? 1.0 : -1.0;
            if (v == 0.0) {
                zero = true;
                break;
            }
            sign *= s * (v > 0.0 ? 1.0 : -1.0);
            X[ax] = std::abs(v);
        }
        if (zero) continue;
        total += sign * detail::orthant_power_integral(X, n, k);
    }
    return total;
}

}  // namespace nlpot::geometry
