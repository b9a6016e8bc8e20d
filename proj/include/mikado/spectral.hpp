#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include <fftw3.h>

#include "mikado/error.hpp"

namespace mikado {

using cplx = std::complex<double>;

template <class T>
struct FftwAllocator {
    using value_type = T;
    FftwAllocator() = default;
    template <class U>
    FftwAllocator(const FftwAllocator<U>&) {}
    T* allocate(std::size_t n) {
        void* p = fftw_malloc(n * sizeof(T));
        if (!p && n) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) { fftw_free(p); }
    template <class U>
    bool operator==(const FftwAllocator<U>&) const { return true; }
    template <class U>
    bool operator!=(const FftwAllocator<U>&) const { return false; }
};

using RealVec = std::vector<double, FftwAllocator<double>>;
using CplxVec = std::vector<cplx, FftwAllocator<cplx>>;

using Mode = std::array<int, 3>;

struct TorusGrid {
    int d = 2;
    int G = 4;

    TorusGrid() = default;
    TorusGrid(int d_, int G_);

    std::size_t points() const;
    // r2c half layout: last axis keeps 0..G/2
    std::size_t modes() const;
    int half() const { return G / 2 + 1; }
    bool operator==(const TorusGrid& o) const { return d == o.d && G == o.G; }
    bool operator!=(const TorusGrid& o) const { return !(*this == o); }
};

enum class Rank { scalar = 0, vector = 1, matrix = 2 };

int component_count(Rank r, int d);

// Real samples on the uniform grid x = i/G, row-major.
struct GridField {
    TorusGrid grid;
    Rank rank = Rank::scalar;
    std::vector<RealVec> comp;

    GridField() = default;
    GridField(const TorusGrid& g, Rank r);
    RealVec& operator[](int c) { return comp[c]; }
    const RealVec& operator[](int c) const { return comp[c]; }
    int ncomp() const { return static_cast<int>(comp.size()); }
};

// Coefficients f^(m) with f(x) = sum_m f^(m) e^{2 pi i m.x}; half spectrum per component.
class SpectralField {
public:
    TorusGrid grid;
    Rank rank = Rank::scalar;
    std::vector<CplxVec> comp;
    bool aliased = false;    // product wrapped around the padded lattice
    bool truncated = false;  // product content beyond the grid was dropped

    SpectralField() = default;
    SpectralField(const TorusGrid& g, Rank r);

    int ncomp() const { return static_cast<int>(comp.size()); }
    CplxVec& operator[](int c) { return comp[c]; }
    const CplxVec& operator[](int c) const { return comp[c]; }

    // component (i,j) of a matrix field
    CplxVec& at(int i, int j) { return comp[i * grid.d + j]; }
    const CplxVec& at(int i, int j) const { return comp[i * grid.d + j]; }

    SpectralField& operator+=(const SpectralField& o);
    SpectralField& operator-=(const SpectralField& o);
    SpectralField& operator*=(double s);
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

// signed frequency of index i on an axis of length G
inline int signed_freq(int i, int G) { return i <= G / 2 ? i : i - G; }

// Calls f(idx, m, nyquist, weight) for every stored mode. weight is 1 or 2 and
// accounts for the conjugate modes that the half layout omits.
template <class F>
void for_each_mode(const TorusGrid& g, F&& f) {
    const int G = g.G, H = g.half();
    Mode m{0, 0, 0};
    std::size_t idx = 0;
    if (g.d == 2) {
        for (int i0 = 0; i0 < G; ++i0) {
            m[0] = signed_freq(i0, G);
            for (int i1 = 0; i1 < H; ++i1, ++idx) {
                m[1] = i1;
                bool nyq = (i0 == G / 2) || (i1 == G / 2);
                double w = (i1 == 0 || i1 == G / 2) ? 1.0 : 2.0;
                f(idx, m, nyq, w);
            }
        }
    } else {
        for (int i0 = 0; i0 < G; ++i0) {
            m[0] = signed_freq(i0, G);
            for (int i1 = 0; i1 < G; ++i1) {
                m[1] = signed_freq(i1, G);
                for (int i2 = 0; i2 < H; ++i2, ++idx) {
                    m[2] = i2;
                    bool nyq = (i0 == G / 2) || (i1 == G / 2) || (i2 == G / 2);
                    double w = (i2 == 0 || i2 == G / 2) ? 1.0 : 2.0;
                    f(idx, m, nyq, w);
                }
            }
        }
    }
}

inline double mode_norm2(const Mode& m, int d) {
    double s = 0;
    for (int a = 0; a < d; ++a) s += double(m[a]) * m[a];
    return s;
}

// Cartesian coordinates of sample idx.
template <class F>
void for_each_point(const TorusGrid& g, F&& f) {
    const int G = g.G;
    const double h = 1.0 / G;
    std::array<double, 3> x{0, 0, 0};
    std::size_t idx = 0;
    if (g.d == 2) {
        for (int i0 = 0; i0 < G; ++i0) {
            x[0] = i0 * h;
            for (int i1 = 0; i1 < G; ++i1, ++idx) {
                x[1] = i1 * h;
                f(idx, x);
            }
        }
    } else {
        for (int i0 = 0; i0 < G; ++i0) {
            x[0] = i0 * h;
            for (int i1 = 0; i1 < G; ++i1) {
                x[1] = i1 * h;
                for (int i2 = 0; i2 < G; ++i2, ++idx) {
                    x[2] = i2 * h;
                    f(idx, x);
                }
            }
        }
    }
}

void set_fft_threads(int n);
int fft_threads();

SpectralField forward_transform(const GridField& a);
GridField inverse_transform(const SpectralField& f);
CplxVec forward_component(const TorusGrid& g, const RealVec& a);
RealVec inverse_component(const TorusGrid& g, const CplxVec& c);

// cutoff chi of the Littlewood-Paley projections
double smooth_step(double t);
double chi(double r);
bool is_dyadic(long n);

SpectralField project_leq(long N, const SpectralField& f);
SpectralField project_gt(long N, const SpectralField& f);
SpectralField project_band(long N, const SpectralField& f);
// dyadic N with nonzero band; ascending
std::vector<long> nonzero_bands(const SpectralField& f);

SpectralField fractional_laplacian(double alpha, const SpectralField& f);
SpectralField inverse_laplacian(const SpectralField& f);
SpectralField leray_project(const SpectralField& f);
SpectralField gradient(const SpectralField& f);    // scalar -> vector, vector -> matrix (d_j f_i at (i,j))
SpectralField divergence(const SpectralField& f);  // vector -> scalar, matrix -> vector (d_j R_ij)
SpectralField directional_derivative(const std::array<int, 3>& k, const SpectralField& f);

// Exact product when operand bandwidths fit the padded lattice; padding 1 is the
// collocation product on the grid itself. Shapes: scalar*any, vector(x)vector.
SpectralField pointwise_product(const SpectralField& f, const SpectralField& g, int padding);
int bandwidth(const SpectralField& f);  // largest |m_a| carrying a nonzero coefficient
int product_padding(const SpectralField& f, const SpectralField& g);  // 1 if exact on the grid, else 2

SpectralField resample(const SpectralField& f, int G_new);
SpectralField component(const SpectralField& f, int c);
SpectralField assemble(const TorusGrid& g, Rank r, std::vector<SpectralField> parts);
SpectralField transpose(const SpectralField& f);
SpectralField trace_free(const SpectralField& f);
cplx mean_of(const SpectralField& f, int c);

}  // namespace mikado
