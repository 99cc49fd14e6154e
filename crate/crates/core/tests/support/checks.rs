//! Property bodies shared by the core property tests and the acceptance suite.

#![allow(dead_code)]

use std::f64::consts::PI;

use faer::Mat;
use mrdmd::dmd::{dmd_reducing_rank, DmdResult, TruncationRule};
use mrdmd::ingest::SignalRecord;
use mrdmd::modes::{integral_contribution, to_continuous};
use mrdmd::mrdmd::{decompose, plan, screen_slow, slow_reconstruction, DecomposeOptions};
use mrdmd::stacking::{delay_embed, SnapshotMatrix};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Check = std::result::Result<(), TestCaseError>;

pub fn real_matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Mat<f64>> {
    (1..=max_rows, 3..=max_cols).prop_flat_map(|(m, n)| {
        prop::collection::vec(-10.0..10.0f64, m * n).prop_map(move |v| Mat::from_fn(m, n, |i, j| v[i * n + j]))
    })
}

/// Random small multi-row signals for MR-DMD.
pub fn small_signal() -> impl Strategy<Value = Mat<f64>> {
    (
        2usize..5,
        64usize..160,
        prop::collection::vec((0.0..20.0f64, -3.0..1.0f64, 0.1..3.0f64, -PI..PI), 1..4),
        0.0..5.0f64,
    )
        .prop_map(|(m, n, modes, dc)| {
            Mat::from_fn(m, n, |i, j| {
                let t = (i + j) as f64 * 1e-2;
                dc + modes
                    .iter()
                    .map(|&(f, s, a, p)| a * (s * t).exp() * (2.0 * PI * f * t + p).cos())
                    .sum::<f64>()
            })
        })
}

pub fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

/// A DMD result carrying only the given eigenvalues.
pub fn fake_dmd(eigs: Vec<C64>) -> DmdResult {
    let r = eigs.len();
    DmdResult {
        modes: Mat::from_fn(1, r, |_, _| C64::new(1.0, 0.0)),
        amplitudes: vec![C64::new(1.0, 0.0); r],
        eigenvalues: eigs,
        dt: 1.0,
        singular_values: vec![1.0],
        rank_clamped: false,
        reduced_operator: Mat::zeros(r, r),
        eigenvectors: Mat::zeros(r, r),
    }
}

pub fn record(values: Vec<f64>) -> SignalRecord {
    SignalRecord::from_samples("x", values, 1e-3, 0.0).unwrap()
}

pub fn conjugate_closure(x: Mat<f64>) -> Check {
    let n = x.ncols();
    let (x1, x2) = (x.as_ref().subcols(0, n - 1), x.as_ref().subcols(1, n - 1));
    let res = dmd_reducing_rank(x1, x2, &TruncationRule::SingularValueRatio(1e-8), 1.0);
    prop_assume!(res.is_ok());
    let d = res.unwrap();
    for (k, &l) in d.eigenvalues.iter().enumerate() {
        if l.im == 0.0 {
            continue;
        }
        let p = d.eigenvalues.iter().position(|&o| close(o, l.conj(), 1e-9));
        prop_assert!(p.is_some(), "no conjugate for {}", l);
        let p = p.unwrap();
        prop_assert!(close(d.amplitudes[p], d.amplitudes[k].conj(), 1e-9));
        for i in 0..d.modes.nrows() {
            prop_assert!(close(d.modes[(i, p)], d.modes[(i, k)].conj(), 1e-9));
        }
    }
    Ok(())
}

pub fn hankel_structure(values: Vec<f64>, frac: f64) -> Check {
    let len = values.len();
    let depth = 1 + ((len - 2) as f64 * frac) as usize;
    let s = delay_embed(&record(values.clone()), "x", depth).unwrap();
    prop_assert_eq!(s.nrows(), depth);
    prop_assert_eq!(s.ncols(), len - depth + 1);
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            prop_assert_eq!(s.data()[(i, j)], values[i + j]);
        }
    }
    Ok(())
}

pub fn screening_matches_brute_force(polar: Vec<(f64, f64)>, zero: bool, g: f64) -> Check {
    let mut eigs: Vec<C64> = polar.iter().map(|&(r, a)| C64::from_polar(r, a)).collect();
    if zero {
        eigs.push(C64::new(0.0, 0.0));
    }
    let rho = PI / g;
    let expect: Vec<usize> = eigs
        .iter()
        .enumerate()
        .filter(|(_, l)| {
            let modulus = l.re.hypot(l.im);
            modulus > 0.0 && modulus.ln().hypot(l.im.atan2(l.re)) < rho
        })
        .map(|(k, _)| k)
        .collect();
    prop_assert_eq!(screen_slow(&fake_dmd(eigs), rho), expect);
    Ok(())
}

pub fn omega_round_trip(re: f64, frac: f64, f_sp: f64) -> Check {
    let omega = C64::new(re, frac * PI * f_sp);
    let back = to_continuous((omega / f_sp).exp(), f_sp).unwrap();
    prop_assert!((back - omega).norm() <= 1e-9 * (1.0 + omega.norm()));
    Ok(())
}

pub fn ic_gauge_invariance(
    phi: Vec<(f64, f64)>,
    lam: (f64, f64),
    b: (f64, f64),
    c: (f64, f64),
    horizon: usize,
) -> Check {
    let phi_col = Mat::from_fn(phi.len(), 1, |i, _| C64::new(phi[i].0, phi[i].1));
    let c = C64::from_polar(c.0, c.1);
    let scaled = Mat::from_fn(phi.len(), 1, |i, _| phi_col[(i, 0)] * c);
    let lambda = C64::from_polar(lam.0, lam.1);
    let b = C64::new(b.0, b.1);
    let a = integral_contribution(phi_col.col(0), lambda, b, horizon);
    let s = integral_contribution(scaled.col(0), lambda, b / c, horizon);
    prop_assert!(a >= 0.0);
    prop_assert!((a - s).abs() <= 1e-10 * (1.0 + a));
    Ok(())
}

pub fn per_level_additivity(x: Mat<f64>, mu: usize) -> Check {
    let n = x.ncols();
    let snap = SnapshotMatrix::from_matrix(x, 1e-2, 0.0, "x").unwrap();
    let p = plan(n, 1e-2, mu, 4.0, None).unwrap();
    let opts = DecomposeOptions {
        rule: TruncationRule::SingularValueRatio(1e-10),
        ..Default::default()
    };
    let res = decompose(&snap, &p, &opts).unwrap();
    let mut sum = Mat::<f64>::zeros(snap.nrows(), n);
    for level in &res.per_level_reconstruction {
        sum += level;
    }
    let scale = 1.0 + res.total_reconstruction.norm_max();
    prop_assert!((&sum - &res.total_reconstruction).norm_max() <= 1e-12 * scale);

    for node in res.nodes() {
        let got = res.node_reconstruction(node);
        let expect = match &node.dmd {
            Some(d) => slow_reconstruction(d, &node.slow_set, node.span.len(), 1e-2, node.f_sp),
            None => Mat::zeros(snap.nrows(), node.span.len()),
        };
        prop_assert_eq!(got.to_owned(), expect);
        // every level tiles the window exactly
        if !node.children.is_empty() {
            prop_assert_eq!(node.children[0].span.start, node.span.start);
            prop_assert_eq!(node.children[0].span.end, node.children[1].span.start);
            prop_assert_eq!(node.children[1].span.end, node.span.end);
        }
        if let Some(d) = &node.dmd {
            prop_assert_eq!(&node.slow_set, &screen_slow(d, p.rho));
            prop_assert!(d.rank() < mu);
        }
    }
    Ok(())
}
