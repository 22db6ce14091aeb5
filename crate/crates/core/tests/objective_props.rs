use bafdp_core::lipschitz::LipschitzEstimate;
use bafdp_core::objective::{
    assemble_omega_grad, lambda_step, phi_step, sanitize_phi, stationarity_gap, z_grad,
    ClientResidualInput, HyperParams, StationarityInput,
};
use proptest::prelude::*;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn hp(psi: f64, mu3: f64, mu4: f64) -> HyperParams {
    HyperParams {
        psi,
        mu3,
        mu4,
        ..HyperParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn lambda_stays_in_its_box(
        lambda in 0.0f64..20.0,
        eps in 0.0f64..1e4,
        reg in 0.0f64..5.0,
        mu3 in 1e-2f64..1e3,
        step in 1e-4f64..10.0,
    ) {
        let h = HyperParams { step_lambda: step, ..hp(0.01, mu3, 100.0) };
        let next = lambda_step(lambda.min(h.lambda_cap()), eps, reg, &h);
        prop_assert!((0.0..=h.lambda_cap()).contains(&next));
    }

    #[test]
    fn phi_stays_in_its_ball(
        phi in prop::collection::vec(-50.0f64..50.0, 1..12),
        seed in prop::collection::vec(-1e3f64..1e3, 12),
        reg in 0.0f64..2.0,
        mu4 in 1e-2f64..1e3,
        step in 1e-3f64..10.0,
    ) {
        let n = phi.len();
        let h = HyperParams { step_phi: step, ..hp(0.01, 100.0, mu4) };
        let z = &seed[..n];
        let omega: Vec<f64> = seed[..n].iter().map(|x| -x).collect();
        let next = phi_step(&phi, z, &omega, reg, &h);
        prop_assert!(norm(&next) <= h.phi_radius() * (1.0 + 1e-12));
    }

    #[test]
    fn no_l1_pull_at_consensus(
        w in prop::collection::vec(-5.0f64..5.0, 1..10),
        psi in 0.0f64..1.0,
        m in 1usize..10,
    ) {
        let zeros = vec![0.0; w.len()];
        let g = assemble_omega_grad(&zeros, 0.0, &zeros, &zeros, &w, &w, psi, m);
        prop_assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn l1_pull_is_odd(
        w in prop::collection::vec(-5.0f64..5.0, 1..10),
        z in prop::collection::vec(-5.0f64..5.0, 10),
        psi in 0.0f64..1.0,
    ) {
        let n = w.len();
        let z = &z[..n];
        let zeros = vec![0.0; n];
        // reflect both points through the origin
        let wn: Vec<f64> = w.iter().map(|x| -x).collect();
        let zn: Vec<f64> = z.iter().map(|x| -x).collect();
        let a = assemble_omega_grad(&zeros, 0.0, &zeros, &zeros, z, &w, psi, 3);
        let b = assemble_omega_grad(&zeros, 0.0, &zeros, &zeros, &zn, &wn, psi, 3);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(*x, -*y);
        }
    }

    /// One client's record moves the consensus gradient by at most
    /// `(2 psi sqrt(dim) + 2 sqrt(mu4)) / M` once its dual is projected.
    #[test]
    fn one_record_has_bounded_influence(
        records in prop::collection::vec(
            (prop::collection::vec(-3.0f64..3.0, 6), prop::collection::vec(-3.0f64..3.0, 6)),
            1..6,
        ),
        forged_omega in prop::collection::vec(-1e9f64..1e9, 6),
        forged_phi in prop::collection::vec(-1e9f64..1e9, 6),
        z in prop::collection::vec(-3.0f64..3.0, 6),
        victim in 0usize..6,
        psi in 0.0f64..1.0,
        mu4 in 1e-2f64..1e3,
    ) {
        let h = hp(psi, 100.0, mu4);
        let m = records.len();
        let victim = victim % m;
        let honest: Vec<(Vec<f64>, Vec<f64>)> =
            records.iter().map(|(w, p)| (w.clone(), sanitize_phi(p, &h))).collect();
        let mut forged = honest.clone();
        forged[victim] = (forged_omega, sanitize_phi(&forged_phi, &h));
        let a = z_grad(honest.iter().map(|(w, p)| (w.as_slice(), p.as_slice())), &z, psi, m);
        let b = z_grad(forged.iter().map(|(w, p)| (w.as_slice(), p.as_slice())), &z, psi, m);
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let bound = (2.0 * psi * (z.len() as f64).sqrt() + 2.0 * h.phi_radius()) / m as f64;
        prop_assert!(norm(&diff) <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn gap_ignores_client_order(
        omegas in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 4), 2..5),
        eps in 0.05f64..20.0,
        lambda in 0.0f64..5.0,
        t in 0u64..10_000,
    ) {
        let h = HyperParams::default();
        let z = vec![0.3, -0.1, 0.2, 0.0];
        let lip = LipschitzEstimate {
            value: 0.7,
            grad: vec![0.1, 0.0, -0.2, 0.0],
            power_iters_used: 1,
            warm_start: Vec::new(),
        };
        let phis: Vec<Vec<f64>> = omegas.iter().map(|w| w.iter().map(|x| 0.5 * x).collect()).collect();
        let inputs: Vec<ClientResidualInput<'_>> = omegas
            .iter()
            .zip(&phis)
            .enumerate()
            .map(|(k, (w, p))| ClientResidualInput {
                omega: w,
                loss_grad: p,
                lipschitz: &lip,
                eta: 0.1 * k as f64,
                eps: eps + k as f64,
                lambda,
                phi: p,
            })
            .collect();
        let gap = |clients: &[ClientResidualInput<'_>]| {
            stationarity_gap(&StationarityInput {
                clients,
                extra_records: &[],
                z: &z,
                t,
                hp: &h,
                c3: 3.0,
                m: clients.len(),
                privacy_active: true,
                robust_active: true,
            })
        };
        let forward = gap(&inputs);
        let mut reversed = inputs.clone();
        reversed.reverse();
        let backward = gap(&reversed);
        prop_assert!(forward >= 0.0);
        prop_assert!((forward - backward).abs() <= 1e-12 * forward.max(1.0));
    }
}
