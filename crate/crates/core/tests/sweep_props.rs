use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_spectra::eig::{
    eigen_residual, full_sweep, h_count_bound, jacobian, EigKind, Spectrum, Stage, SweepOptions,
    Termination,
};
use tensor_spectra::oracle::brute_z_n2;
use tensor_spectra::sdp::SolveStatus;
use tensor_spectra::Tensor;

fn random_tensor(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Tensor {
    Tensor::from_fn(m, n, |_| rng.random_range(-1.0..1.0)).unwrap()
}

fn check_spectrum(a: &Tensor, s: &Spectrum, opts: &SweepOptions) {
    let vals = s.values();
    for w in vals.windows(2) {
        assert!(w[1] - w[0] > opts.eps_dedup, "{vals:?}");
    }
    for e in &s.eigenpairs {
        assert!(e.residual <= opts.eps_res);
        assert!(!e.vectors.is_empty());
        for v in &e.vectors {
            assert!(eigen_residual(s.kind, a, e.value, v).unwrap() <= opts.eps_res);
            if s.kind == EigKind::H {
                let neg: Vec<f64> = v.iter().map(|x| -x).collect();
                assert!(eigen_residual(EigKind::H, a, e.value, &neg).unwrap() <= opts.eps_res);
            }
        }
    }
    if s.kind == EigKind::H {
        assert!(s.eigenpairs.len() as u128 <= h_count_bound(a.order(), a.dim()));
    }
    if s.termination == Termination::CertifiedComplete {
        let cert = s.certificate.as_ref().expect("certificate");
        assert!(cert.report.passed());
    }
    // bounds grow with the order inside one escalation
    for w in s.log.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let same_run = p.stage == q.stage && p.delta == q.delta && q.order == p.order + 1;
        let both = p.status == SolveStatus::Optimal && q.status == SolveStatus::Optimal;
        if !(same_run && both) {
            continue;
        }
        let (vp, vq) = (p.value.unwrap(), q.value.unwrap());
        match q.stage {
            Stage::Backward => assert!(vq <= vp + 1e-6, "{p:?} {q:?}"),
            _ => assert!(vq >= vp - 1e-6, "{p:?} {q:?}"),
        }
    }
}

#[test]
fn random_spectra_satisfy_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let opts = SweepOptions::default();
    for case in 0..16 {
        let (m, n) = [(3, 2), (4, 2), (3, 3), (5, 2)][case % 4];
        let a = random_tensor(&mut rng, m, n);
        for kind in [EigKind::Z, EigKind::H] {
            let s = full_sweep(kind, &a, &opts).unwrap();
            check_spectrum(&a, &s, &opts);
        }
    }
}

#[test]
fn odd_order_z_spectrum_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let opts = SweepOptions::default();
    for case in 0..8 {
        let n = 2 + case % 2;
        let a = random_tensor(&mut rng, 3, n);
        let s = full_sweep(EigKind::Z, &a, &opts).unwrap();
        let vals = s.values();
        for e in &s.eigenpairs {
            assert!(vals.iter().any(|v| (v + e.value).abs() <= opts.eps_dedup), "{vals:?}");
            for u in &e.vectors {
                let neg: Vec<f64> = u.iter().map(|x| -x).collect();
                assert!(eigen_residual(EigKind::Z, &a, -e.value, &neg).unwrap() <= opts.eps_res);
            }
        }
        if n == 2 {
            let o = brute_z_n2(&a).unwrap().values();
            for v in &o {
                assert!(o.iter().any(|w| (v + w).abs() <= 1e-9));
            }
        }
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-6;
    for case in 0..20 {
        let (m, n) = [(3, 2), (4, 3), (5, 2), (4, 2)][case % 4];
        let kind = if case % 2 == 0 { EigKind::Z } else { EigKind::H };
        let a = random_tensor(&mut rng, m, n);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lam = rng.random_range(-2.0..2.0);
        let j = jacobian(kind, &a, lam, &x).unwrap();
        // columns: lambda, then x; rows: normalization, then the eigen equations
        let eval = |lam: f64, x: &[f64]| -> Vec<f64> {
            let ax = a.contract_partial(x).unwrap();
            let (p, q) = match kind {
                EigKind::Z => (1, 2),
                EigKind::H => ((m - 1) as i32, (2 * (m - 1).div_ceil(2)) as i32),
            };
            let mut out = vec![x.iter().map(|v| v.powi(q)).sum::<f64>() - 1.0];
            out.extend((0..n).map(|i| ax[i] - lam * x[i].powi(p)));
            out
        };
        for c in 0..=n {
            let (mut lp, mut lm) = (lam, lam);
            let (mut xp, mut xm) = (x.clone(), x.clone());
            if c == 0 {
                lp += h;
                lm -= h;
            } else {
                xp[c - 1] += h;
                xm[c - 1] -= h;
            }
            let (fp, fm) = (eval(lp, &xp), eval(lm, &xm));
            for r in 0..=n {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                assert!((j[(r, c)] - fd).abs() <= 1e-5, "case {case} ({r},{c}): {} vs {fd}", j[(r, c)]);
            }
        }
    }
}
