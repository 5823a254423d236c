use std::path::Path;

use nhl_core::coupling::{conjugate_vector, partition, reflect, CouplingFrame, Label};
use nhl_core::discretize::{assemble_operator, sample_function_to_field, Grid, OperatorMode, ScalarField};
use nhl_core::evolve::{evolve_linear, EvolutionProblem, Scheme};
use nhl_core::io::{parse_snapshot, snapshot_to_string};
use nhl_core::kernels::{marginal_1d, RadialKernel};
use nhl_core::modulus::{z_epsilon_max, ModulusProfile, ScanSettings};
use proptest::prelude::*;

fn kernel_2d() -> impl Strategy<Value = RadialKernel> {
    prop_oneof![
        (0.2f64..2.0).prop_map(|d| RadialKernel::indicator(2, d).unwrap()),
        (0.1f64..1.0).prop_map(|s| RadialKernel::gaussian(2, s).unwrap()),
        (0.1f64..0.9, 0.05f64..0.2).prop_map(|(s, r)| RadialKernel::fractional(2, s, Some(r), Some(2.0)).unwrap()),
    ]
}

fn kernel_1d() -> impl Strategy<Value = RadialKernel> {
    prop_oneof![
        (0.2f64..1.0).prop_map(|d| RadialKernel::indicator(1, d).unwrap()),
        (0.1f64..0.5).prop_map(|s| RadialKernel::gaussian(1, s).unwrap()),
    ]
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.9f64..0.9, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_rotation_invariant(k in kernel_2d(), x in -2.0f64..2.0, y in -2.0f64..2.0, theta in 0.0f64..std::f64::consts::TAU) {
        let (c, s) = (theta.cos(), theta.sin());
        let a = k.eval(&[x, y]);
        let b = k.eval(&[c * x - s * y, s * x + c * y]);
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(b.abs()) + 1e-300 || (x.hypot(y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn radial_profile_is_monotone(k in kernel_2d(), r1 in 0.0f64..2.5, r2 in 0.0f64..2.5) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        // fractional kernels vanish inside the inner cutoff, so compare outside it
        let lo = lo.max(k.inner_cutoff().unwrap_or(0.0));
        let hi = hi.max(lo);
        prop_assert!(k.eval(&[lo, 0.0]) >= k.eval(&[hi, 0.0]));
    }

    #[test]
    fn marginal_is_even_and_decreasing(sigma in 0.2f64..1.0, w1 in 0.0f64..3.0, w2 in 0.0f64..3.0) {
        let k = RadialKernel::gaussian(2, sigma).unwrap();
        let m = marginal_1d(&k, None, 0.01).unwrap();
        let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
        prop_assert_eq!(m.eval(lo), m.eval(-lo));
        prop_assert!(m.eval(lo) >= m.eval(hi) - 1e-15);
    }

    #[test]
    fn regional_operator_is_symmetric_and_conservative(k in kernel_1d(), v in values(41)) {
        let g = Grid::line(-1.0, 1.0, 0.05).unwrap();
        let op = assemble_operator(&k, &g, OperatorMode::Regional).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                prop_assert_eq!(op.weight(i, j), op.weight(j, i));
            }
        }
        let u = ScalarField::new(g.clone(), v, 0.0, None).unwrap();
        let lu = op.apply(&u).unwrap();
        let total: f64 = lu.values.iter().sum();
        let scale: f64 = lu.values.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        prop_assert!(total.abs() <= 1e-12 * scale);
    }

    #[test]
    fn constants_are_annihilated(k in kernel_1d(), c in -0.9f64..0.9) {
        let g = Grid::line(-2.0, 2.0, 0.05).unwrap();
        let op = assemble_operator(&k, &g, OperatorMode::FullSpace).unwrap();
        let u = ScalarField::constant(&g, c, Some((c, c)));
        prop_assert!(op.apply(&u).unwrap().values.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn comparison_and_maximum_principle(k in kernel_1d(), a in values(41), shift in prop::collection::vec(0.0f64..0.1, 41)) {
        let g = Grid::line(-1.0, 1.0, 0.05).unwrap();
        let op = assemble_operator(&k, &g, OperatorMode::Regional).unwrap();
        let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
        let run = |v: Vec<f64>| {
            let u = ScalarField::new(g.clone(), v, 0.0, None).unwrap();
            evolve_linear(&EvolutionProblem { operator: &op, initial: u, scheme: Scheme::Euler, dt: 0.02, t_end: 0.4, nonlinear: None, snapshot_stride: 5 }).unwrap()
        };
        let (lo, hi) = a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        let (ta, tb) = (run(a.clone()), run(b));
        for (sa, sb) in ta.snapshots.iter().zip(&tb.snapshots) {
            for (x, y) in sa.values.iter().zip(&sb.values) {
                prop_assert!(x <= y);
                prop_assert!(*x >= lo - 1e-14 && *x <= hi + 1e-14);
            }
        }
    }

    #[test]
    fn conjugate_is_an_involution(x in prop::array::uniform2(-1.0f64..1.0), y in prop::array::uniform2(-1.0f64..1.0), r in prop::array::uniform2(-2.0f64..2.0)) {
        prop_assume!((x[0] - y[0]).hypot(x[1] - y[1]) > 1e-3);
        let f = CouplingFrame::new(&x, &y).unwrap();
        let back = conjugate_vector(&conjugate_vector(&r, &f).unwrap(), &f).unwrap();
        prop_assert!((back[0] - r[0]).abs() < 1e-12 && (back[1] - r[1]).abs() < 1e-12);
        let rr = reflect(&reflect(&r, &f).unwrap(), &f).unwrap();
        prop_assert!((rr[0] - r[0]).abs() < 1e-14 && (rr[1] - r[1]).abs() < 1e-14);
    }

    #[test]
    fn partition_swaps_sides(x in prop::array::uniform2(-1.0f64..1.0), y in prop::array::uniform2(-1.0f64..1.0), r in prop::array::uniform2(-2.0f64..2.0)) {
        prop_assume!((x[0] - y[0]).hypot(x[1] - y[1]) > 1e-3);
        let f = CouplingFrame::new(&x, &y).unwrap();
        let s = f.half_gap();
        let r1 = r[0] * f.e1()[0] + r[1] * f.e1()[1];
        prop_assume!((r1 - s).abs() > 1e-9);
        let a = partition(&r, &f).unwrap();
        let b = partition(&conjugate_vector(&r, &f).unwrap(), &f).unwrap();
        prop_assert!(matches!((a, b), (Label::L, Label::R) | (Label::R, Label::L)));
    }

    #[test]
    fn z_decreases_in_eps_and_ignores_sign(v in values(25), e1 in 1e-4f64..1e-2, de in 1e-4f64..1e-2) {
        let g = Grid::line(-1.2, 1.2, 0.1).unwrap();
        let u = ScalarField::new(g.clone(), v.clone(), 0.3, None).unwrap();
        let neg = ScalarField::new(g, v.iter().map(|x| -x).collect(), 0.3, None).unwrap();
        let phi = ModulusProfile::tanh(2.0, 0.05, 1.5).unwrap().with_time(0.3);
        let s = ScanSettings::default();
        let a = z_epsilon_max(&u, &phi, e1, 1.0, &s).unwrap().value;
        let b = z_epsilon_max(&u, &phi, e1 + de, 1.0, &s).unwrap().value;
        prop_assert!(b <= a);
        let c = z_epsilon_max(&neg, &phi, e1, 1.0, &s).unwrap().value;
        prop_assert_eq!(a, c);
    }

    #[test]
    fn snapshot_round_trip_is_exact(v in prop::collection::vec(-1e6f64..1e6, 17), t in 0.0f64..10.0, far in prop::option::of((-1.0f64..1.0, -1.0f64..1.0))) {
        let g = Grid::line(-0.8, 0.8, 0.1).unwrap();
        let u = ScalarField::new(g, v, t, far).unwrap();
        let back = parse_snapshot(&snapshot_to_string(&u), Path::new("prop")).unwrap();
        prop_assert_eq!(back, u);
    }

    #[test]
    fn snapshot_round_trip_2d(v in prop::collection::vec(-1.0f64..1.0, 12)) {
        let g = Grid::rect([0.0, 0.0], [0.3, 0.2], 0.1).unwrap();
        let u = sample_function_to_field(|_| 0.0, &g, None).unwrap();
        let u = ScalarField { values: v, ..u };
        let back = parse_snapshot(&snapshot_to_string(&u), Path::new("prop")).unwrap();
        prop_assert_eq!(back, u);
    }
}
