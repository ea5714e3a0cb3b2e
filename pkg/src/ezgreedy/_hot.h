/* Dense inner loops for the linear SARSA(lambda) kernel.
 *
 * Reductions use eight partial sums so the compiler can vectorize them;
 * results therefore differ from a sequential sum in the last bits.
 */
#ifndef EZGREEDY_HOT_H
#define EZGREEDY_HOT_H

#include <stdint.h>

static inline double hot_dot(const double *restrict w, const double *restrict x, int64_t n)
{
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int64_t k = 0;
    for (; k + 8 <= n; k += 8)
        for (int j = 0; j < 8; ++j)
            acc[j] += w[k + j] * x[k + j];
    double tail = 0.0;
    for (; k < n; ++k)
        tail += w[k] * x[k];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

/* e += (x * y) * scale */
static inline void hot_axpy2(double *restrict e, const double *restrict x, const double *restrict y,
                             double scale, int64_t n)
{
    for (int64_t k = 0; k < n; ++k)
        e[k] += (x[k] * y[k]) * scale;
}

/* w += c * e, returning dot(w_new, x) (x may be NULL, then 0 is returned). */
static inline double hot_update_dot(double *restrict w, double c,
                                    const double *restrict e, const double *restrict x, int64_t n)
{
    if (x == 0) {
        for (int64_t k = 0; k < n; ++k)
            w[k] += c * e[k];
        return 0.0;
    }
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int64_t k = 0;
    for (; k + 8 <= n; k += 8)
        for (int j = 0; j < 8; ++j) {
            double v = w[k + j] + c * e[k + j];
            w[k + j] = v;
            acc[j] += v * x[k + j];
        }
    double tail = 0.0;
    for (; k < n; ++k) {
        w[k] += c * e[k];
        tail += w[k] * x[k];
    }
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

/* Same as hot_update_dot but also returns dot(w_new, y) through *out_y. */
static inline double hot_update_dot2(double *restrict w, double c,
                                     const double *restrict e, const double *restrict x,
                                     const double *restrict y, int64_t n, double *out_y)
{
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    double accy[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int64_t k = 0;
    for (; k + 8 <= n; k += 8)
        for (int j = 0; j < 8; ++j) {
            double v = w[k + j] + c * e[k + j];
            w[k + j] = v;
            acc[j] += v * x[k + j];
            accy[j] += v * y[k + j];
        }
    double tail = 0.0, taily = 0.0;
    for (; k < n; ++k) {
        w[k] += c * e[k];
        tail += w[k] * x[k];
        taily += w[k] * y[k];
    }
    *out_y = ((accy[0] + accy[1]) + (accy[2] + accy[3])) + ((accy[4] + accy[5]) + (accy[6] + accy[7])) + taily;
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

/* out[i*m + k] = re[i]*c[k] - im[i]*s[k]  (real part of the last product level) */
static inline void hot_outer_real(double *restrict out, const double *restrict re,
                                  const double *restrict im, const double *restrict c,
                                  const double *restrict s, int64_t size, int64_t m)
{
    for (int64_t i = 0; i < size; ++i) {
        double a = re[i], b = im[i];
        double *restrict o = out + i * m;
        for (int64_t k = 0; k < m; ++k)
            o[k] = a * c[k] - b * s[k];
    }
}

#endif
