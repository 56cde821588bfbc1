#pragma once

// Inline definitions of the builtin nodal functions. Every function keeps a
// single trainable parameter w per synapse.
//
// Besides the scalar (y, w) forms, each functor exposes an elementwise form
// used by the vectorised kernels:
//   separable:      psi = w * h(y)
//   non-separable:  psi = g(s), s = w * arg(y); d/dw = arg(y) g'(s), d/dy = w arg'(y) g'(s)
// g and g' are evaluated over blocks. Each simd loop holds either one libm call
// or only selects, since the vectoriser does not if-convert a loop mixing both.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "onn/operators.hpp"
#include "onn/simd_math.hpp"

namespace onn::nodal {

inline double clamp_arg(double s) { return std::clamp(s, -kExpClamp, kExpClamp); }
inline bool inside_clamp(double s) { return s > -kExpClamp && s < kExpClamp; }
inline double sign(double y) { return y > 0.0 ? 1.0 : (y < 0.0 ? -1.0 : 0.0); }
inline double clamp_fast(double s) {
    const double lo = s < -kExpClamp ? -kExpClamp : s;
    return lo > kExpClamp ? kExpClamp : lo;
}

// Separable functions have the form psi(y, w) = w * h(y).
struct Mul {
    static constexpr bool separable = true;
    static void h_block(const double* y, double* out, std::size_t n) { std::copy(y, y + n, out); }
    static double h(double y) { return y; }
    static double dh(double) { return 1.0; }
    static double value(double y, double w) { return w * y; }
    static NodalPartials partials(double y, double w) { return {w * y, w, y}; }
};

struct Cubic {
    static constexpr bool separable = true;
    static void h_block(const double* y, double* out, std::size_t n) {
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) out[i] = y[i] * y[i] * y[i];
    }
    static double h(double y) { return y * y * y; }
    static double dh(double y) { return 3.0 * y * y; }
    static double value(double y, double w) { return w * y * y * y; }
    static NodalPartials partials(double y, double w) {
        const double y3 = y * y * y;
        return {w * y3, 3.0 * w * y * y, y3};
    }
};

struct SignedLog {
    static constexpr bool separable = true;
    static void h_block(const double* y, double* out, std::size_t n) {
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) out[i] = y[i] < 0.0 ? -y[i] : y[i];
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) out[i] = log1p(out[i]);
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) out[i] = y[i] < 0.0 ? -out[i] : (y[i] > 0.0 ? out[i] : 0.0);
    }
    static double h(double y) {
        const double m = log1p(y < 0.0 ? -y : y);
        return y < 0.0 ? -m : (y > 0.0 ? m : 0.0);
    }
    static double dh(double y) { return 1.0 / (1.0 + (y < 0.0 ? -y : y)); }
    static double value(double y, double w) { return w * h(y); }
    static NodalPartials partials(double y, double w) {
        const double hy = h(y);
        return {w * hy, w * dh(y), hy};
    }
};

struct Sin {
    static constexpr bool separable = false;
    static double arg(double y) { return y; }
    static double darg(double) { return 1.0; }
    static void g_block(const double* s, double* v, std::size_t n) {
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) v[i] = sin(s[i]);
    }
    static void dg_block(const double* s, const double*, double* d, std::size_t n) {
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) d[i] = cos(s[i]);
    }
    static double value(double y, double w) { return std::sin(w * y); }
    static NodalPartials partials(double y, double w) {
        const double s = w * y;
        const double c = std::cos(s);
        return {std::sin(s), w * c, y * c};
    }
};

struct Exp {
    static constexpr bool separable = false;
    static double arg(double y) { return y; }
    static double darg(double) { return 1.0; }
    static void g_block(const double* s, double* v, std::size_t n) {
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) v[i] = clamp_fast(s[i]);
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) v[i] = exp(v[i]) - 1.0;
    }
    static void dg_block(const double* s, const double* v, double* d, std::size_t n) {
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) d[i] = (std::fabs(s[i]) < kExpClamp) ? v[i] + 1.0 : 0.0;
    }
    static double value(double y, double w) { return std::exp(clamp_arg(w * y)) - 1.0; }
    static NodalPartials partials(double y, double w) {
        const double s = w * y;
        const double e = std::exp(clamp_arg(s));
        const double g = inside_clamp(s) ? e : 0.0;
        return {e - 1.0, w * g, y * g};
    }
};

struct Sinh {
    static constexpr bool separable = false;
    static double arg(double y) { return y; }
    static double darg(double) { return 1.0; }
    static void g_block(const double* s, double* v, std::size_t n) {
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) v[i] = clamp_fast(s[i]);
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) {
            const double e = exp(v[i]);
            v[i] = 0.5 * (e - 1.0 / e);
        }
    }
    static void dg_block(const double* s, const double* v, double* d, std::size_t n) {
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i)
            d[i] = (std::fabs(s[i]) < kExpClamp) ? std::sqrt(1.0 + v[i] * v[i]) : 0.0;
    }
    static double value(double y, double w) { return std::sinh(clamp_arg(w * y)); }
    static NodalPartials partials(double y, double w) {
        const double s = w * y;
        const double e = std::exp(clamp_arg(s));
        const double inv = 1.0 / e;
        const double g = inside_clamp(s) ? 0.5 * (e + inv) : 0.0;
        return {0.5 * (e - inv), w * g, y * g};
    }
};

struct Sinc {
    static constexpr bool separable = false;
    static constexpr double kSeries = 1e-4;
    static double arg(double y) { return y; }
    static double darg(double) { return 1.0; }
    static void g_block(const double* s, double* v, std::size_t n) {
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) v[i] = sin(s[i]);
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) {
            const double x = s[i];
            const bool small = std::fabs(x) < kSeries;
            const double x2 = x * x;
            const double q = v[i] / (small ? 1.0 : x);
            v[i] = small ? 1.0 - x2 / 6.0 + x2 * x2 / 120.0 : q;
        }
    }
    static void dg_block(const double* s, const double* v, double* d, std::size_t n) {
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) d[i] = cos(s[i]);
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) {
            const double x = s[i];
            const bool small = std::fabs(x) < kSeries;
            const double q = (d[i] - v[i]) / (small ? 1.0 : x);
            d[i] = small ? -x / 3.0 + x * x * x / 30.0 : q;
        }
    }
    static double value(double y, double w) {
        const double s = w * y;
        if (std::fabs(s) < kSeries) {
            const double s2 = s * s;
            return 1.0 - s2 / 6.0 + s2 * s2 / 120.0;
        }
        return std::sin(s) / s;
    }
    static NodalPartials partials(double y, double w) {
        const double s = w * y;
        double v;
        double g;  // d sinc / ds
        if (std::fabs(s) < kSeries) {
            const double s2 = s * s;
            v = 1.0 - s2 / 6.0 + s2 * s2 / 120.0;
            g = -s / 3.0 + s * s2 / 30.0;
        } else {
            const double sn = std::sin(s);
            const double cs = std::cos(s);
            v = sn / s;
            g = (s * cs - sn) / (s * s);
        }
        return {v, w * g, y * g};
    }
};

struct Chirp {
    static constexpr bool separable = false;
    static double arg(double y) { return y * y; }
    static double darg(double y) { return 2.0 * y; }
    static void g_block(const double* s, double* v, std::size_t n) {
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) v[i] = sin(s[i]);
    }
    static void dg_block(const double* s, const double*, double* d, std::size_t n) {
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) d[i] = cos(s[i]);
    }
    static double value(double y, double w) { return std::sin(w * y * y); }
    static NodalPartials partials(double y, double w) {
        const double y2 = y * y;
        const double c = std::cos(w * y2);
        return {std::sin(w * y2), 2.0 * w * y * c, y2 * c};
    }
};

/// Calls fn with a stateless functor type for builtin kinds. Returns false for Custom.
template <class Fn>
bool dispatch(NodalKind kind, Fn&& fn) {
    switch (kind) {
        case NodalKind::Mul: fn(Mul{}); return true;
        case NodalKind::Cubic: fn(Cubic{}); return true;
        case NodalKind::Sin: fn(Sin{}); return true;
        case NodalKind::Exp: fn(Exp{}); return true;
        case NodalKind::Sinh: fn(Sinh{}); return true;
        case NodalKind::Sinc: fn(Sinc{}); return true;
        case NodalKind::Chirp: fn(Chirp{}); return true;
        case NodalKind::SignedLog: fn(SignedLog{}); return true;
        case NodalKind::Custom: return false;
    }
    return false;
}

}  // namespace onn::nodal
