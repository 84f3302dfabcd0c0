use mvcs_core::covering::{
    fit_multi_norm, fit_single_norm, recover_ball_single, recover_region, FirstOrderOptions,
};
use mvcs_core::geometry::{ball_log_volume, multinorm_log_volume, p_norm};
use mvcs_core::numkernel::linalg::Matrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn uniform_pball_sample(
    p: f64,
    k: usize,
    center: &[f64],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let cand: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        if p_norm(&cand, p).unwrap() <= 1.0 {
            out.push(cand.iter().zip(center).map(|(a, b)| a + b).collect());
        }
    }
    out
}

#[test]
#[ignore]
fn debug_mixture() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut rows = Vec::new();
    rows.extend(uniform_pball_sample(0.5, 2, &[-1.6, -1.6], 500, &mut rng));
    rows.extend(uniform_pball_sample(3.0, 2, &[1.6, 1.6], 500, &mut rng));
    rows.extend(uniform_pball_sample(1.0, 2, &[-1.6, 1.6], 500, &mut rng));
    let points = Matrix::from_rows(&rows).unwrap();
    let r = 75;
    for epochs in [500usize, 1500, 3000] {
        let opts = FirstOrderOptions {
            epochs,
            ..Default::default()
        };
        let multi = fit_multi_norm(&points, r, &opts).unwrap();
        let single = fit_single_norm(&points, r, &opts).unwrap();
        let p = multi.effective_exponents();
        let region = recover_region(&multi, &points, r).unwrap();
        let ball = recover_ball_single(&single, &points, r).unwrap();
        println!(
            "epochs {epochs}: multi p = {p:?}, single p = {:.3}, vol multi {:.4} vs single {:.4}, mu = {:?}",
            single.effective_p(),
            multinorm_log_volume(&region).unwrap(),
            ball_log_volume(&ball).unwrap(),
            multi.mu,
        );
    }
}
