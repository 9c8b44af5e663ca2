use wedge_core::gd::*;
use wedge_core::sampling::*;
use wedge_core::spectral::*;
use wedge_core::tensor::*;

#[test]
#[ignore]
fn diagnose_stall_regime() {
    let n = 100;
    let r = 1;
    let model = CpModel::random_gaussian_symmetric(n, r, 3, 5).unwrap();
    let truth_basis = model.factor(0).clone().qr().q();
    for s in [1.9f64, 2.0, 2.1] {
        let c = 8.0 * (n as f64).ln();
        let p_wedge = c / (n as f64).powf(s + 1.0);
        let p_unif = c / (n as f64).powf(s);
        let unfolding = unfold_cp(&model, 0).unwrap();
        let wedges = sample_wedges(n, unfolding.column_map().num_cols(), p_wedge, 42).unwrap();
        let z = build_wedge_matrix(&unfolding, &wedges).unwrap();
        let est = top_r_eigs(&z.z, r, EigOrdering::Signed).unwrap();
        let sub_err = subspace_errors(&est.basis, &truth_basis).unwrap();
        let omega = sample_uniform(model.dims(), p_unif, 43).unwrap();
        let obs = SparseObservations::gather(&omega, &model).unwrap();
        let ret = retrieve_cp_factors(
            &est.basis,
            &obs,
            r,
            &RetrievalConfig { probes: 32, correlation_threshold: 0.5, seed: 44 },
        )
        .unwrap();
        let lambda_max = ret
            .selected
            .iter()
            .map(|&i| ret.candidates[i].lambda)
            .fold(0.0f64, f64::max);
        let x0_err = rel_err_frobenius(&ret.x0, &model);
        println!(
            "s={s}: wedges={} |omega|={} sub_op_err={:.3} lambda_max={:.3} x0_rel_err={:.3}",
            wedges.len(),
            obs.len(),
            sub_err.op_err,
            lambda_max,
            x0_err
        );
        for eta_factor in [0.125, 0.03] {
            let mut cfg = GdConfig::new(eta_factor * lambda_max.powf(-4.0 / 3.0));
            cfg.t_max = 300;
            match gd_run(&ret.x0, &obs, &cfg, Some(&model)) {
                Ok(run) => {
                    let objs: Vec<f64> = run
                        .trace
                        .iter()
                        .step_by(30)
                        .map(|t| t.objective)
                        .collect();
                    println!(
                        "  eta_factor={eta_factor}: iters={} final_rel_f={:?} objs={:?}",
                        run.iterations,
                        run.final_rel_err_f(),
                        objs
                    );
                }
                Err(e) => {
                    // Re-run with a tiny cap to print the early trace.
                    let mut c2 = cfg.clone();
                    c2.t_max = 12;
                    let early: Vec<f64> = match gd_run(&ret.x0, &obs, &c2, None) {
                        Ok(run) => run.trace.iter().map(|t| t.objective).collect(),
                        Err(_) => vec![],
                    };
                    println!("  eta_factor={eta_factor}: FAILED {e}; early objs={early:?}");
                }
            }
        }
    }
}
