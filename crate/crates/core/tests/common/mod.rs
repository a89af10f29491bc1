//! Test-only reference integrators, independent of the matrix exponential.

#![allow(dead_code)]

use nv_readout::{Mixing, Params};
use rand::Rng;

/// Rate matrix written out entry by entry, independently of `build_generator`.
/// Returns the 5×5 generator (row = destination) and the emission rates.
pub fn reference_generator(p: &Params) -> ([[f64; 5]; 5], [f64; 5]) {
    let (ke, kf, ks, k0) = (p.k_e, p.pf * p.k_f0, p.k_s, p.k_0);
    match p.mixing {
        Mixing::NonRadiative { k_m } => (
            [
                [-ke, 0.0, kf, 0.0, k0],
                [0.0, -ke, 0.0, kf, 0.0],
                [ke, 0.0, -(kf + 2.0 * k_m), k_m, 0.0],
                [0.0, ke, 2.0 * k_m, -(kf + ks + k_m), 0.0],
                [0.0, 0.0, 0.0, ks, -k0],
            ],
            [0.0, 0.0, kf, kf, 0.0],
        ),
        Mixing::Radiative {
            alpha,
            count_cross_decay,
        } => {
            let (me, mf) = (alpha * ke, alpha * kf);
            let c = if count_cross_decay { 1.0 } else { 0.0 };
            (
                [
                    [-(ke + 2.0 * me), 0.0, kf, mf, k0],
                    [0.0, -(ke + me), 2.0 * mf, kf, 0.0],
                    [ke, me, -(kf + 2.0 * mf), 0.0, 0.0],
                    [2.0 * me, ke, 0.0, -(kf + ks + mf), 0.0],
                    [0.0, 0.0, 0.0, ks, -k0],
                ],
                [0.0, 0.0, kf + c * 2.0 * mf, kf + c * mf, 0.0],
            )
        }
    }
}

fn deriv(a: &[[f64; 5]; 5], em: &[f64; 5], y: &[f64; 6]) -> [f64; 6] {
    let mut d = [0.0; 6];
    for i in 0..5 {
        d[i] = (0..5).map(|j| a[i][j] * y[j]).sum();
    }
    d[5] = (0..5).map(|j| em[j] * y[j]).sum();
    d
}

/// Classical RK4 on the population + cumulative-photon system with a fixed step.
pub fn rk4(p: &Params, init: [f64; 5], t: f64, step: f64) -> [f64; 6] {
    let (a, em) = reference_generator(p);
    let mut y = [init[0], init[1], init[2], init[3], init[4], 0.0];
    if t == 0.0 {
        return y;
    }
    let n = (t / step).ceil().max(1.0) as usize;
    let h = t / n as f64;
    let axpy = |y: &[f64; 6], k: &[f64; 6], s: f64| {
        let mut o = *y;
        for i in 0..6 {
            o[i] += s * k[i];
        }
        o
    };
    for _ in 0..n {
        let k1 = deriv(&a, &em, &y);
        let k2 = deriv(&a, &em, &axpy(&y, &k1, h / 2.0));
        let k3 = deriv(&a, &em, &axpy(&y, &k2, h / 2.0));
        let k4 = deriv(&a, &em, &axpy(&y, &k3, h));
        for i in 0..6 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// Random valid parameter set covering both mixing models.
pub fn random_params<R: Rng>(rng: &mut R) -> Params {
    let mixing = if rng.random_bool(0.5) {
        Mixing::NonRadiative {
            k_m: rng.random_range(0.0..5.0),
        }
    } else {
        Mixing::Radiative {
            alpha: rng.random_range(0.0..0.1),
            count_cross_decay: rng.random_bool(0.8),
        }
    };
    Params {
        k_e: rng.random_range(0.0..80.0),
        k_f0: rng.random_range(1.0..40.0),
        pf: rng.random_range(0.2..4.0),
        k_s: rng.random_range(0.0..40.0),
        k_0: rng.random_range(0.0..5.0),
        mixing,
    }
}

/// Random point on the probability simplex.
pub fn random_state<R: Rng>(rng: &mut R) -> [f64; 5] {
    let mut w = [0.0; 5];
    for x in w.iter_mut() {
        *x = -rng.random_range(1e-12f64..1.0).ln();
    }
    let s: f64 = w.iter().sum();
    w.map(|x| x / s)
}
