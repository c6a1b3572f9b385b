use proptest::prelude::*;
use tensor_spectra::moment::{LocalizingStructure, MomentVector};
use tensor_spectra::poly::{
    basis_size, monomial_rank, monomial_unrank, monomials_up_to, tensor_to_poly, Monomial, Polynomial,
};
use tensor_spectra::Tensor;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn tensor_strategy() -> impl Strategy<Value = Tensor> {
    (3usize..=4, 2usize..=3).prop_flat_map(|(m, n)| {
        prop::collection::vec(-1.0f64..1.0, n.pow(m as u32))
            .prop_map(move |e| Tensor::new(m, n, e).unwrap())
    })
}

fn poly_strategy(n: usize, d: usize) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(-2.0f64..2.0, basis_size(n, d)).prop_map(move |c| {
        Polynomial::from_terms(n, monomials_up_to(n, d).into_iter().zip(c)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_contraction_dots_to_full(a in tensor_strategy(), seed in any::<u64>()) {
        let n = a.dim();
        let x: Vec<f64> = (0..n).map(|i| ((seed >> (8 * i)) as u8 as f64) / 64.0 - 2.0).collect();
        let ax = a.contract_partial(&x).unwrap();
        let dot: f64 = ax.iter().zip(&x).map(|(p, q)| p * q).sum();
        prop_assert!(rel(dot, a.contract_full(&x).unwrap()) <= 1e-12);
    }

    #[test]
    fn full_contraction_is_homogeneous(a in tensor_strategy(), t in -3.0f64..3.0) {
        let x: Vec<f64> = (0..a.dim()).map(|i| 0.3 + 0.4 * i as f64).collect();
        let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
        let lhs = a.contract_full(&tx).unwrap();
        let rhs = t.powi(a.order() as i32) * a.contract_full(&x).unwrap();
        prop_assert!(rel(lhs, rhs) <= 1e-10);
    }

    #[test]
    fn text_round_trip(a in tensor_strategy()) {
        let once = Tensor::parse(&a.to_text()).unwrap();
        let twice = Tensor::parse(&once.to_text()).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once.to_text(), twice.to_text());
        prop_assert_eq!(once, a);
    }

    #[test]
    fn tensor_polynomial_matches_contraction(a in tensor_strategy()) {
        let x: Vec<f64> = (0..a.dim()).map(|i| 0.7 - 0.5 * i as f64).collect();
        let p = tensor_to_poly(&a);
        prop_assert!(rel(p.evaluate(&x).unwrap(), a.contract_full(&x).unwrap()) <= 1e-12);
    }

    #[test]
    fn evaluation_is_a_ring_map(
        p in poly_strategy(3, 3),
        q in poly_strategy(3, 2),
        c in -3.0f64..3.0,
        x in prop::collection::vec(-1.5f64..1.5, 3),
    ) {
        let (pv, qv) = (p.evaluate(&x).unwrap(), q.evaluate(&x).unwrap());
        prop_assert!(rel(p.add(&q).unwrap().evaluate(&x).unwrap(), pv + qv) <= 1e-10);
        prop_assert!(rel(p.scale(c).evaluate(&x).unwrap(), c * pv) <= 1e-10);
        prop_assert!(rel(p.mul(&q).unwrap().evaluate(&x).unwrap(), pv * qv) <= 1e-10);
    }

    #[test]
    fn gradient_matches_central_differences(
        p in poly_strategy(3, 3),
        x in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let h = 1e-6;
        for (i, g) in p.gradient().iter().enumerate() {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (p.evaluate(&up).unwrap() - p.evaluate(&dn).unwrap()) / (2.0 * h);
            prop_assert!((g.evaluate(&x).unwrap() - fd).abs() <= 1e-5);
        }
    }

    #[test]
    fn localizing_identity_on_random_moments(
        q in poly_strategy(2, 2),
        y in prop::collection::vec(-1.0f64..1.0, basis_size(2, 6)),
        pc in prop::collection::vec(-1.0f64..1.0, basis_size(2, 2)),
    ) {
        let k = 3;
        let y = MomentVector::new(2, k, y).unwrap();
        let s = LocalizingStructure::new(&q, k).unwrap();
        let l = s.assemble(&y).unwrap();
        let basis = s.basis();
        let p = Polynomial::from_terms(2, basis.iter().cloned().zip(pc.iter().cloned())).unwrap();
        let v = nalgebra::DVector::from_vec(pc.clone());
        let quad = (v.transpose() * &l * &v)[(0, 0)];
        let pair = y.pair(&q.mul(&p.pow(2)).unwrap()).unwrap();
        prop_assert!((quad - pair).abs() <= 1e-10 * (1.0 + pair.abs()));
    }

    #[test]
    fn localizing_identity_at_a_point(
        q in poly_strategy(3, 2),
        u in prop::collection::vec(-1.0f64..1.0, 3),
        pc in prop::collection::vec(-1.0f64..1.0, basis_size(3, 1)),
    ) {
        let k = 2;
        let y = MomentVector::from_point(&u, k);
        let s = LocalizingStructure::new(&q, k).unwrap();
        let p = Polynomial::from_terms(3, s.basis().iter().cloned().zip(pc.iter().cloned())).unwrap();
        let v = nalgebra::DVector::from_vec(pc.clone());
        let quad = (v.transpose() * s.assemble(&y).unwrap() * &v)[(0, 0)];
        let direct = q.evaluate(&u).unwrap() * p.evaluate(&u).unwrap().powi(2);
        prop_assert!((quad - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
    }

    #[test]
    fn pairing_with_a_point_evaluates(
        f in poly_strategy(3, 4),
        u in prop::collection::vec(-1.2f64..1.2, 3),
    ) {
        let y = MomentVector::from_point(&u, 2);
        prop_assert!(rel(y.pair(&f).unwrap(), f.evaluate(&u).unwrap()) <= 1e-10);
    }
}

#[test]
fn rank_unrank_bijection_small_cases() {
    for n in 1..=5 {
        for d in 0..=10usize {
            let total = basis_size(n, d);
            if total > 20_000 {
                continue;
            }
            let mut last_deg = 0;
            for r in 0..total {
                let m = monomial_unrank(n, d, r).unwrap();
                assert_eq!(monomial_rank(&m), r);
                assert!(m.degree() >= last_deg);
                last_deg = m.degree();
            }
            assert!(monomial_unrank(n, d, total).is_err());
        }
    }
}

fn render_cell(s: &LocalizingStructure, i: usize, j: usize, n: usize, d: usize) -> String {
    let all = monomials_up_to(n, d);
    let mut terms: Vec<(Monomial, f64)> = s
        .cell(i, j)
        .iter()
        .map(|&(idx, c)| (all[idx].clone(), c))
        .collect();
    terms.sort_by(|a, b| {
        (a.1 < 0.0)
            .cmp(&(b.1 < 0.0))
            .then(b.0.exponents().cmp(a.0.exponents()))
    });
    let mut out = String::new();
    for (k, (m, c)) in terms.iter().enumerate() {
        if *c < 0.0 {
            out.push('-');
        } else if k > 0 {
            out.push('+');
        }
        let e = m.exponents();
        out.push_str(&format!("y_{{{}{}}}", e[0], e[1]));
    }
    out
}

fn render(s: &LocalizingStructure, n: usize, d: usize) -> Vec<String> {
    (0..s.side())
        .map(|i| {
            (0..s.side())
                .map(|j| render_cell(s, i, j, n, d))
                .collect::<Vec<_>>()
                .join(" & ")
        })
        .collect()
}

#[test]
fn displayed_moment_matrix_is_reproduced() {
    let s = LocalizingStructure::new(&Polynomial::constant(2, 1.0), 2).unwrap();
    let expect = [
        "y_{00} & y_{10} & y_{01} & y_{20} & y_{11} & y_{02}",
        "y_{10} & y_{20} & y_{11} & y_{30} & y_{21} & y_{12}",
        "y_{01} & y_{11} & y_{02} & y_{21} & y_{12} & y_{03}",
        "y_{20} & y_{30} & y_{21} & y_{40} & y_{31} & y_{22}",
        "y_{11} & y_{21} & y_{12} & y_{31} & y_{22} & y_{13}",
        "y_{02} & y_{12} & y_{03} & y_{22} & y_{13} & y_{04}",
    ];
    assert_eq!(render(&s, 2, 4), expect);
}

#[test]
fn displayed_localizing_matrix_is_reproduced() {
    let x1 = Polynomial::var(2, 0);
    let x2 = Polynomial::var(2, 1);
    let q = x1.mul(&x2).unwrap().sub(&x1.pow(2)).unwrap().sub(&x2.pow(2)).unwrap();
    let s = LocalizingStructure::new(&q, 2).unwrap();
    let expect = [
        "y_{11}-y_{20}-y_{02} & y_{21}-y_{30}-y_{12} & y_{12}-y_{21}-y_{03}",
        "y_{21}-y_{30}-y_{12} & y_{31}-y_{40}-y_{22} & y_{22}-y_{31}-y_{13}",
        "y_{12}-y_{21}-y_{03} & y_{22}-y_{31}-y_{13} & y_{13}-y_{22}-y_{04}",
    ];
    assert_eq!(render(&s, 2, 4), expect);
}
