#pragma once

// Shared geometry carriers (points, boxes, grids), error types and a small
// deterministic parallel-for used by the field computations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nlpot {

inline constexpr int kMaxDim = 4;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Bad input or violated precondition.
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// The numerics could not produce an answer (non-convergence, non-integrable data).
struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A proven inequality failed to hold on the computed data.
struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument(what);
}

/// Point of R^N with 2 <= N <= kMaxDim; coordinates beyond dim() are zero.
class Point {
public:
    Point() = default;
    explicit Point(int dim) : dim_(dim) { check_dim(dim); }
    Point(std::initializer_list<double> coords) : dim_(static_cast<int>(coords.size())) {
        check_dim(dim_);
        std::copy(coords.begin(), coords.end(), c_.begin());
    }
    static Point filled(int dim, double v) {
        Point p(dim);
        for (int a = 0; a < dim; ++a) p.c_[a] = v;
        return p;
    }

    int dim() const { return dim_; }
    double& operator[](int a) { return c_[a]; }
    double operator[](int a) const { return c_[a]; }

    friend bool operator==(const Point&, const Point&) = default;

private:
    static void check_dim(int dim) {
        if (dim < 2 || dim > kMaxDim) throw InvalidArgument("dimension must be in [2, " + std::to_string(kMaxDim) + "]");
    }
    int dim_ = 0;
    std::array<double, kMaxDim> c_{};
};

inline double distance_sq(const Point& a, const Point& b) {
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double distance(const Point& a, const Point& b) { return std::sqrt(distance_sq(a, b)); }

/// Volume of the unit ball in R^N.
inline double unit_ball_volume(int n) {
    return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

inline double ball_volume(int n, double r) { return unit_ball_volume(n) * std::pow(r, n); }

/// Axis-aligned box [lo, hi].
struct Box {
    Point lo;
    Point hi;

    Box() = default;
    Box(Point lo_, Point hi_) : lo(lo_), hi(hi_) {
        require(lo.dim() == hi.dim(), "box corners differ in dimension");
        for (int a = 0; a < lo.dim(); ++a) require(lo[a] < hi[a], "box requires lo < hi componentwise");
    }
    static Box unit(int dim) { return Box(Point::filled(dim, 0.0), Point::filled(dim, 1.0)); }

    int dim() const { return lo.dim(); }
    double width(int a) const { return hi[a] - lo[a]; }
    double diameter() const { return distance(lo, hi); }
    double volume() const {
        double v = 1.0;
        for (int a = 0; a < dim(); ++a) v *= width(a);
        return v;
    }
    Point center() const {
        Point c(dim());
        for (int a = 0; a < dim(); ++a) c[a] = 0.5 * (lo[a] + hi[a]);
        return c;
    }
    bool contains(const Point& p, double slack = 0.0) const {
        for (int a = 0; a < dim(); ++a)
            if (p[a] < lo[a] - slack || p[a] > hi[a] + slack) return false;
        return true;
    }
    bool contains(const Box& b, double slack = 0.0) const { return contains(b.lo, slack) && contains(b.hi, slack); }
    /// Distance from an interior point to the boundary.
    double distance_to_boundary(const Point& p) const {
        double d = kInf;
        for (int a = 0; a < dim(); ++a) d = std::min({d, p[a] - lo[a], hi[a] - p[a]});
        return std::max(d, 0.0);
    }

    friend bool operator==(const Box&, const Box&) = default;
};

using Index = std::array<int, kMaxDim>;

/// Regular grid of cells over a box; nodes sit at cell corners.
class Grid {
public:
    Grid() = default;
    Grid(Box box, Index cells) : box_(box), cells_(cells) {
        for (int a = 0; a < dim(); ++a) require(cells_[a] >= 1, "grid needs at least one cell per axis");
        for (int a = dim(); a < kMaxDim; ++a) cells_[a] = 1;
    }
    static Grid uniform(Box box, int cellsPerAxis) {
        Index c{};
        c.fill(1);
        for (int a = 0; a < box.dim(); ++a) c[a] = cellsPerAxis;
        return Grid(box, c);
    }

    int dim() const { return box_.dim(); }
    const Box& box() const { return box_; }
    int cells(int a) const { return cells_[a]; }
    const Index& cells() const { return cells_; }
    double spacing(int a) const { return box_.width(a) / cells_[a]; }
    double min_spacing() const {
        double h = kInf;
        for (int a = 0; a < dim(); ++a) h = std::min(h, spacing(a));
        return h;
    }
    double max_spacing() const {
        double h = 0.0;
        for (int a = 0; a < dim(); ++a) h = std::max(h, spacing(a));
        return h;
    }
    double cell_volume() const {
        double v = 1.0;
        for (int a = 0; a < dim(); ++a) v *= spacing(a);
        return v;
    }
    int nodes(int a) const { return cells_[a] + 1; }

    std::size_t node_count() const {
        std::size_t n = 1;
        for (int a = 0; a < dim(); ++a) n *= static_cast<std::size_t>(nodes(a));
        return n;
    }
    std::size_t cell_count() const {
        std::size_t n = 1;
        for (int a = 0; a < dim(); ++a) n *= static_cast<std::size_t>(cells_[a]);
        return n;
    }

    // Linear layouts put axis 0 fastest.
    std::size_t node_linear(const Index& i) const {
        std::size_t k = 0;
        for (int a = dim() - 1; a >= 0; --a) k = k * nodes(a) + i[a];
        return k;
    }
    Index node_index(std::size_t k) const {
        Index i{};
        for (int a = 0; a < dim(); ++a) {
            i[a] = static_cast<int>(k % nodes(a));
            k /= nodes(a);
        }
        return i;
    }
    std::size_t cell_linear(const Index& i) const {
        std::size_t k = 0;
        for (int a = dim() - 1; a >= 0; --a) k = k * cells_[a] + i[a];
        return k;
    }
    Index cell_index(std::size_t k) const {
        Index i{};
        for (int a = 0; a < dim(); ++a) {
            i[a] = static_cast<int>(k % cells_[a]);
            k /= cells_[a];
        }
        return i;
    }

    Point node(const Index& i) const {
        Point p(dim());
        for (int a = 0; a < dim(); ++a) p[a] = i[a] == cells_[a] ? box_.hi[a] : box_.lo[a] + i[a] * spacing(a);
        return p;
    }
    Point node(std::size_t k) const { return node(node_index(k)); }
    Box cell_box(const Index& i) const {
        Point lo(dim()), hi(dim());
        for (int a = 0; a < dim(); ++a) {
            lo[a] = box_.lo[a] + i[a] * spacing(a);
            hi[a] = i[a] + 1 == cells_[a] ? box_.hi[a] : box_.lo[a] + (i[a] + 1) * spacing(a);
        }
        return Box(lo, hi);
    }
    Point cell_center(const Index& i) const {
        Point p(dim());
        for (int a = 0; a < dim(); ++a) p[a] = box_.lo[a] + (i[a] + 0.5) * spacing(a);
        return p;
    }
    bool is_boundary_node(const Index& i) const {
        for (int a = 0; a < dim(); ++a)
            if (i[a] == 0 || i[a] == cells_[a]) return true;
        return false;
    }
    /// Volume of the node's dual cell clipped to the box.
    double dual_volume(const Index& i) const {
        double v = cell_volume();
        for (int a = 0; a < dim(); ++a)
            if (i[a] == 0 || i[a] == cells_[a]) v *= 0.5;
        return v;
    }
    /// Index of the node nearest to p (clamped into the grid).
    Index nearest_node(const Point& p) const {
        Index i{};
        for (int a = 0; a < dim(); ++a) {
            long k = std::lround((p[a] - box_.lo[a]) / spacing(a));
            i[a] = static_cast<int>(std::clamp<long>(k, 0, cells_[a]));
        }
        return i;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    Box box_;
    Index cells_{};
};

/// Iterate a multi-index over [lo, hi) in `dim` axes, axis 0 fastest.
template <typename F>
void for_each_index(int dim, const Index& lo, const Index& hi, F&& f) {
    for (int a = 0; a < dim; ++a)
        if (lo[a] >= hi[a]) return;
    Index i = lo;
    while (true) {
        f(i);
        int a = 0;
        for (; a < dim; ++a) {
            if (++i[a] < hi[a]) break;
            i[a] = lo[a];
        }
        if (a == dim) return;
    }
}

inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Static-chunk parallel loop over [0, n). Each index is visited exactly once
/// and by exactly one thread, so per-index results do not depend on `threads`.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
    threads = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
        std::size_t begin = n * t / threads;
        std::size_t end = n * (t + 1) / threads;
        pool.emplace_back([&, begin, end, t] {
            try {
                for (std::size_t i = begin; i < end; ++i) f(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace nlpot
