use nalgebra::DMatrix;
use proptest::prelude::*;
use propsurro::dataset::{split_indices, DataPoint, Dataset, Fidelity, SplitSpec, Standardizer};
use propsurro::metrics::l2_mre;
use propsurro::numerics::gradcheck::{central_difference, max_relative_error};
use propsurro::numerics::{cholesky, seeded, Init, Matrix, Mlp, Tape};
use rand::Rng;

fn random_spd(n: usize, seed: u64) -> Matrix {
    let mut rng = seeded(seed);
    let b = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut a = b.matmul(&b.transpose()).unwrap();
    for i in 0..n {
        a.as_mut_slice()[i * n + i] += n as f64;
    }
    a
}

#[test]
fn mlp_gradients_match_finite_differences_on_random_nets() {
    let mut rng = seeded(11);
    for net_id in 0..20 {
        let depth = rng.random_range(1..=4);
        let mut widths = vec![rng.random_range(1..=4)];
        for _ in 0..depth {
            widths.push(rng.random_range(1..=8));
        }
        *widths.last_mut().unwrap() = rng.random_range(1..=3);
        let net = Mlp::new(&widths, Init::Xavier, &mut rng).unwrap();
        let batch = 3;
        let x: Vec<f64> = (0..batch * widths[0]).map(|_| rng.random_range(-1.5..1.5)).collect();
        let target: Vec<f64> = (0..batch * net.output_width()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |params: &[f64], input: &[f64]| {
            let m = Mlp::from_params(&widths, params.to_vec()).unwrap();
            let mut tape = Tape::new();
            let out = m.forward_batch(input, batch, &mut tape).unwrap();
            out.iter().zip(&target).map(|(o, t)| 0.5 * (o - t).powi(2)).sum::<f64>()
        };

        let mut tape = Tape::new();
        let out = net.forward_batch(&x, batch, &mut tape).unwrap().to_vec();
        let g_out: Vec<f64> = out.iter().zip(&target).map(|(o, t)| o - t).collect();
        let mut g_params = vec![0.0; net.num_params()];
        let mut g_input = vec![0.0; x.len()];
        net.backward(&mut tape, &g_out, &mut g_params, Some(&mut g_input)).unwrap();

        let fd_params = central_difference(|p| loss(p, &x), net.params(), 1e-6);
        let fd_input = central_difference(|xi| loss(net.params(), xi), &x, 1e-6);
        let ep = max_relative_error(&g_params, &fd_params, 1e-6);
        let ei = max_relative_error(&g_input, &fd_input, 1e-6);
        assert!(ep < 1e-5 && ei < 1e-5, "net {net_id} {widths:?}: params {ep:e}, inputs {ei:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cholesky_agrees_with_nalgebra(n in 1usize..=500, seed in any::<u64>()) {
        let a = random_spd(n, seed);
        let f = cholesky(&a).unwrap();
        let oracle = DMatrix::from_row_slice(n, n, a.as_slice()).cholesky().unwrap();
        let l_ref = oracle.l();
        let l = f.lower();
        let scale = l_ref.amax();
        for i in 0..n {
            for j in 0..=i {
                prop_assert!((l.row(i)[j] - l_ref[(i, j)]).abs() <= 1e-10 * scale);
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b).unwrap();
        let x_ref = oracle.solve(&nalgebra::DVector::from_column_slice(&b));
        for i in 0..n {
            prop_assert!((x[i] - x_ref[i]).abs() <= 1e-10 * x_ref.amax().max(1e-300));
        }
        let ld_ref: f64 = 2.0 * l_ref.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        prop_assert!((f.log_det() - ld_ref).abs() <= 1e-10 * ld_ref.abs().max(1.0));
    }
}

proptest! {
    #[test]
    fn split_is_a_partition(n in 1usize..400, train in 0.05f64..=1.0, subset in 0.05f64..=1.0, seed in any::<u64>()) {
        let spec = SplitSpec { train_fraction: train, subset_fraction: subset, seed };
        let (tr, te) = split_indices(n, &spec).unwrap();
        let pool = ((train * n as f64).round() as usize).min(n);
        prop_assert_eq!(te.len(), n - pool);
        prop_assert!(tr.len() <= pool);
        let mut seen = vec![false; n];
        for &i in tr.iter().chain(&te) {
            prop_assert!(i < n);
            prop_assert!(!seen[i]);
            seen[i] = true;
        }
        // same seed, same split
        prop_assert_eq!(split_indices(n, &spec).unwrap(), (tr, te));
    }

    #[test]
    fn standardizer_round_trips(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..40)) {
        let x = Matrix::from_rows(&rows);
        let names: Vec<String> = (0..3).map(|j| format!("f{j}")).collect();
        let s = Standardizer::fit(&x, &names).unwrap();
        let back = s.inverse_transform(&s.transform(&x));
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn l2_mre_is_scale_invariant(
        pairs in prop::collection::vec((1.0f64..1e3, -0.5f64..0.5), 1..50),
        scale in 1e-3f64..1e3,
    ) {
        let truth: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<f64> = pairs.iter().map(|p| p.0 * (1.0 + p.1)).collect();
        let e = l2_mre(&truth, &pred).unwrap();
        let ts: Vec<f64> = truth.iter().map(|v| v * scale).collect();
        let ps: Vec<f64> = pred.iter().map(|v| v * scale).collect();
        prop_assert!((l2_mre(&ts, &ps).unwrap() - e).abs() <= 1e-12 * e.max(1e-12));
        prop_assert_eq!(l2_mre(&truth, &truth).unwrap(), 0.0);
    }

    #[test]
    fn fuse_is_associative_without_collisions(sizes in (1usize..10, 1usize..10, 1usize..10)) {
        let table = |offset: usize, n: usize| {
            let points = (0..n)
                .map(|i| DataPoint {
                    pressure: 3.0,
                    temperature: 300.0 + (offset + i) as f64,
                    carbon_count: 12,
                    density: 700.0 - (offset + i) as f64,
                    fidelity: Fidelity::Low,
                })
                .collect();
            Dataset::new("t", points).unwrap()
        };
        let a = table(0, sizes.0);
        let b = table(100, sizes.1);
        let c = table(200, sizes.2);
        let a_before = a.clone();
        let left = a.fuse(&b).unwrap().fuse(&c).unwrap();
        let right = a.fuse(&b.fuse(&c).unwrap()).unwrap();
        prop_assert_eq!(&left, &right);
        prop_assert_eq!(left.len(), sizes.0 + sizes.1 + sizes.2);
        prop_assert_eq!(a, a_before);
    }
}
