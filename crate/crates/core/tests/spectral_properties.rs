mod common;

use common::*;
use proptest::prelude::*;
use vstab_core::linalg::{self, StateNorm};
use vstab_core::{spectral, tvcert, AnalysisConfig, Complex64, ConvolutionKernel, Prehistory};

fn scaled_kernel() -> impl Strategy<Value = ConvolutionKernel> {
    (kernel(), 0.2..3.0f64).prop_map(|(k, s)| with_mass(&k, s))
}

proptest! {
    #![proptest_config(proptest_config())]

    #[test]
    fn impulse_trajectories_are_resolvent_columns(k in kernel(), n in 1usize..=100) {
        let cfg = analysis_config();
        let d = k.dim_out();
        let xs = spectral::resolvent_sequence(&k, n).unwrap();
        let scale = 1.0 + xs.iter().map(|x| StateNorm::Two.matrix_norm(x)).fold(0.0, f64::max);
        for col in 0..d {
            let phi = Prehistory::impulse(d, 0, col).unwrap();
            let traj = tvcert::simulate(&k, None, &phi, 0, n, &cfg).unwrap();
            for (m, x) in traj.states.iter().enumerate() {
                let gap = (x - xs[m].column(col)).norm();
                prop_assert!(gap <= 1e-10 * scale, "column {col}, n = {m}: gap {gap:e}");
            }
        }
    }

    #[test]
    fn truncated_resolvent_inverts_the_pencil(k in stable_kernel(), r in 0.0..0.9f64, theta in -3.2..3.2f64, n in 20usize..80) {
        let zeta = Complex64::from_polar(r, theta);
        let d = k.dim_out();
        let xs = spectral::resolvent_sequence(&k, n).unwrap();
        let mut partial = linalg::zeros(d, d);
        for (m, x) in xs.iter().enumerate() {
            partial += x * linalg::powi(zeta, m);
        }
        let p = spectral::pencil(&k, zeta).unwrap();
        let residual = StateNorm::Two.matrix_norm(&(&p * partial - linalg::identity(d)));
        // ‖X(n)‖ ≤ 1 because the coefficient mass is below one
        let bound = StateNorm::Two.matrix_norm(&p) * r.powi(n as i32 + 1) / (1.0 - r);
        prop_assert!(residual <= bound + 1e-12, "residual {residual:e}, bound {bound:e}");
    }

    #[test]
    fn winding_number_is_stable_under_grid_refinement(k in scaled_kernel()) {
        let coarse = analysis_config();
        let fine = AnalysisConfig { grid_size: 2 * coarse.grid_size, ..coarse };
        let (sigma, _) = spectral::circle_min_singular(&k, &coarse).unwrap();
        prop_assume!(sigma > 10.0 * coarse.sigma_tol);
        let a = spectral::winding_number_det(&k, &coarse).unwrap();
        let b = spectral::winding_number_det(&k, &fine).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a >= 0);
    }

    #[test]
    fn stable_verdicts_come_with_decay(k in scaled_kernel()) {
        let cfg = AnalysisConfig { n_max: 256, ..analysis_config() };
        let v = spectral::ue_verdict(&k, &cfg).unwrap();
        if v.ue_resolvent_sense {
            let xs = spectral::resolvent_sequence(&k, cfg.n_max).unwrap();
            let fit = spectral::decay_fit(&xs, (k.dim_out() + 1)..=cfg.n_max, cfg.state_norm, cfg.nu_max).unwrap();
            prop_assert!(fit.nu > 0.0, "nu = {}", fit.nu);
        } else {
            prop_assert!(v.witness_zeta.is_some());
        }
    }
}
