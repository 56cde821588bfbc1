#pragma once

// Vector-variant declarations for libm functions used inside `omp simd` loops.
// With glibc's libmvec the compiler maps these calls to SIMD entry points;
// without it the loops fall back to scalar calls.

#include <cmath>

#if defined(ONN_HAVE_LIBMVEC)
extern "C" {
#pragma omp declare simd notinbranch
double sin(double);
#pragma omp declare simd notinbranch
double cos(double);
#pragma omp declare simd notinbranch
double exp(double);
#pragma omp declare simd notinbranch
double log1p(double);
#pragma omp declare simd notinbranch
double tanh(double);
}
#endif
