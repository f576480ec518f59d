/* Fused per-step LSTM gate math shared by the compiled sequence kernels.
 *
 * Each function walks the batch rows of one time step and runs a branch-free
 * SIMD loop over the hidden units; exp/tanh vectorize through the glibc
 * vector math library. Row strides are in doubles. The restrict qualifiers
 * hold because every call touches disjoint rows of the underlying arrays.
 * Sigmoid inputs are clamped at +-40 where a float64 sigmoid saturates, so
 * exp never leaves range.
 */
#ifndef DIRFILT_KERNEL_STEPS_H
#define DIRFILT_KERNEL_STEPS_H

#include <math.h>

static inline void lstm_step_fwd(long nb, long hid,
                                 const double *restrict pre,
                                 const double *restrict cprev, long cprev_rs,
                                 double *restrict gates, long gates_rs,
                                 double *restrict cout, double *restrict hout,
                                 long ch_rs)
{
    long h2 = 2 * hid, h3 = 3 * hid;
    for (long b = 0; b < nb; b++) {
        const double *p = pre + b * 4 * hid;
        const double *cp = cprev + b * cprev_rs;
        double *g = gates + b * gates_rs;
        double *cn = cout + b * ch_rs;
        double *hn = hout + b * ch_rs;
        #pragma omp simd
        for (long j = 0; j < hid; j++) {
            double gi = 1.0 / (1.0 + exp(-fmin(fmax(p[j], -40.0), 40.0)));
            double gf = 1.0 / (1.0 + exp(-fmin(fmax(p[hid + j], -40.0), 40.0)));
            double gg = tanh(p[h2 + j]);
            double go = 1.0 / (1.0 + exp(-fmin(fmax(p[h3 + j], -40.0), 40.0)));
            double cc = gf * cp[j] + gi * gg;
            cn[j] = cc;
            hn[j] = go * tanh(cc);
            g[j] = gi;
            g[hid + j] = gf;
            g[h2 + j] = gg;
            g[h3 + j] = go;
        }
    }
}

static inline void lstm_step_bwd(long nb, long hid,
                                 const double *restrict gates, long gates_rs,
                                 const double *restrict cnow, long cnow_rs,
                                 const double *restrict cprev, long cprev_rs,
                                 const double *restrict dho, long dho_rs,
                                 const double *restrict dhr,
                                 double *restrict dcr,
                                 double *restrict dpre)
{
    long h2 = 2 * hid, h3 = 3 * hid;
    for (long b = 0; b < nb; b++) {
        const double *g = gates + b * gates_rs;
        const double *cn = cnow + b * cnow_rs;
        const double *cp = cprev + b * cprev_rs;
        const double *dy = dho + b * dho_rs;
        const double *dh_r = dhr + b * hid;
        double *dc_r = dcr + b * hid;
        double *dp = dpre + b * 4 * hid;
        #pragma omp simd
        for (long j = 0; j < hid; j++) {
            double gi = g[j];
            double gf = g[hid + j];
            double gg = g[h2 + j];
            double go = g[h3 + j];
            double tc = tanh(cn[j]);
            double dh = dy[j] + dh_r[j];
            double dc = dc_r[j] + dh * go * (1.0 - tc * tc);
            dp[j] = dc * gg * gi * (1.0 - gi);
            dp[hid + j] = dc * cp[j] * gf * (1.0 - gf);
            dp[h2 + j] = dc * gi * (1.0 - gg * gg);
            dp[h3 + j] = dh * tc * go * (1.0 - go);
            dc_r[j] = dc * gf;
        }
    }
}

#endif
