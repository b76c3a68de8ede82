#pragma once

// Ball masses μ(B̄_t(x_i)) of a cell density at every node x_i of the same grid,
// computed as one FFT correlation per radius. The kernel entry for a cell offset
// is the exact ball/cell intersection volume, so the only error is FFT round-off.

#include <fftw3.h>

#include <cstring>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "nlpot/common.hpp"
#include "nlpot/geometry.hpp"

namespace nlpot::detail {

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
struct FftwPlanFree {
    void operator()(fftw_plan p) const {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(p);
    }
    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;
using Plan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, FftwPlanFree>;

inline RealBuffer alloc_real(std::size_t n) { return RealBuffer(fftw_alloc_real(n)); }
inline ComplexBuffer alloc_complex(std::size_t n) { return ComplexBuffer(fftw_alloc_complex(n)); }

class BallMassCorrelator {
public:
    /// Scratch buffers and plans for one worker thread.
    struct Workspace {
        RealBuffer real;
        ComplexBuffer spec;
        Plan forward;
        Plan backward;
    };

    BallMassCorrelator(const Grid& grid, std::span<const double> cellDensity) : grid_(grid) {
        const int n = grid.dim();
        real_size_ = 1;
        spec_size_ = 1;
        for (int a = 0; a < n; ++a) {
            len_[a] = 2 * grid.cells(a);
            real_size_ *= len_[a];
            spec_size_ *= a == 0 ? len_[a] / 2 + 1 : len_[a];
        }
        // FFTW wants the slowest axis first; our layouts put axis 0 fastest.
        for (int a = 0; a < n; ++a) fftw_dims_[a] = len_[n - 1 - a];

        total_ = 0.0;
        for (double v : cellDensity) total_ += v;
        total_ *= grid.cell_volume();

        // ρ zero-padded to the period, then transformed once.
        Workspace ws = make_workspace();
        std::fill(ws.real.get(), ws.real.get() + real_size_, 0.0);
        for (std::size_t c = 0; c < grid.cell_count(); ++c) ws.real[padded_linear(grid.cell_index(c))] = cellDensity[c];
        fftw_execute_dft_r2c(ws.forward.get(), ws.real.get(), ws.spec.get());
        rho_hat_ = alloc_complex(spec_size_);
        std::memcpy(rho_hat_.get(), ws.spec.get(), spec_size_ * sizeof(fftw_complex));

        // Mean of the 2^N cells around each node: the small-ball density.
        node_rho_.assign(grid.node_count(), 0.0);
        for (std::size_t k = 0; k < grid.node_count(); ++k) {
            Index i = grid.node_index(k);
            Index lo{}, hi{};
            for (int a = 0; a < n; ++a) {
                lo[a] = std::max(i[a] - 1, 0);
                hi[a] = std::min(i[a] + 1, grid.cells(a));
            }
            double s = 0.0;
            for_each_index(n, lo, hi, [&](const Index& c) { s += cellDensity[grid.cell_linear(c)]; });
            node_rho_[k] = s / static_cast<double>(1 << n);
        }
    }

    Workspace make_workspace() const {
        Workspace ws{alloc_real(real_size_), alloc_complex(spec_size_), nullptr, nullptr};
        std::lock_guard<std::mutex> lock(FftwPlanFree::planner_mutex());
        ws.forward.reset(fftw_plan_dft_r2c(grid_.dim(), fftw_dims_.data(), ws.real.get(), ws.spec.get(), FFTW_ESTIMATE));
        ws.backward.reset(fftw_plan_dft_c2r(grid_.dim(), fftw_dims_.data(), ws.spec.get(), ws.real.get(), FFTW_ESTIMATE));
        return ws;
    }

    double total_mass() const { return total_; }
    const std::vector<double>& node_density() const { return node_rho_; }

    /// out[k] = Σ_c ρ_c |B̄_t(x_k) ∩ cell_c| for every node k.
    void ball_masses(double t, Workspace& ws, std::span<double> out) const {
        const int n = grid_.dim();
        if (t <= grid_.min_spacing()) {
            // The ball meets only the 2^N cells around the node, one orthant each.
            const double v = ball_volume(n, t);
            for (std::size_t k = 0; k < out.size(); ++k) out[k] = v * node_rho_[k];
            return;
        }
        if (t >= grid_.box().diameter()) {
            std::fill(out.begin(), out.end(), total_);
            return;
        }
        fill_kernel(t, ws.real.get());
        fftw_execute_dft_r2c(ws.forward.get(), ws.real.get(), ws.spec.get());
        for (std::size_t k = 0; k < spec_size_; ++k) {
            const double ar = ws.spec[k][0], ai = ws.spec[k][1];
            const double br = rho_hat_[k][0], bi = rho_hat_[k][1];
            ws.spec[k][0] = ar * br - ai * bi;
            ws.spec[k][1] = ar * bi + ai * br;
        }
        fftw_execute_dft_c2r(ws.backward.get(), ws.spec.get(), ws.real.get());
        const double scale = 1.0 / static_cast<double>(real_size_);
        for (std::size_t k = 0; k < out.size(); ++k) {
            double v = ws.real[padded_linear(grid_.node_index(k))] * scale;
            out[k] = std::max(v, 0.0);
        }
    }

private:
    std::size_t padded_linear(const Index& i) const {
        std::size_t k = 0;
        for (int a = grid_.dim() - 1; a >= 0; --a) k = k * len_[a] + ((i[a] % len_[a]) + len_[a]) % len_[a];
        return k;
    }

    // b(k) = |B̄_t(0) ∩ cell at offset -k|, so that D = ρ * b is a convolution.
    void fill_kernel(double t, double* buf) const {
        const int n = grid_.dim();
        std::fill(buf, buf + real_size_, 0.0);
        Index lo{}, hi{};
        double h[kMaxDim];
        for (int a = 0; a < n; ++a) {
            h[a] = grid_.spacing(a);
            lo[a] = std::max(static_cast<int>(std::floor(-t / h[a])), -grid_.cells(a));
            hi[a] = std::min(static_cast<int>(std::floor(t / h[a])) + 1, grid_.cells(a));
        }
        const Point origin(n);
        const double t2 = t * t;
        const double cell_vol = grid_.cell_volume();
        for_each_index(n, lo, hi, [&](const Index& j) {
            Point clo(n), chi(n);
            for (int a = 0; a < n; ++a) {
                clo[a] = j[a] * h[a];
                chi[a] = (j[a] + 1) * h[a];
            }
            if (geometry::detail::nearest_sq(origin, clo, chi, n) >= t2) return;
            double v = geometry::detail::farthest_sq(origin, clo, chi, n) <= t2
                           ? cell_vol
                           : geometry::ball_box_volume(origin, t, clo, chi);
            Index k{};
            for (int a = 0; a < n; ++a) k[a] = -j[a];
            buf[padded_linear(k)] = v;
        });
    }

    Grid grid_;
    std::array<int, kMaxDim> len_{};
    std::array<int, kMaxDim> fftw_dims_{};
    std::size_t real_size_ = 0;
    std::size_t spec_size_ = 0;
    double total_ = 0.0;
    ComplexBuffer rho_hat_;
    std::vector<double> node_rho_;
};

}  // namespace nlpot::detail
