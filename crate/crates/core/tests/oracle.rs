//! Reference values computed independently of this crate.

use tslab_core::datagen::{generate_dataset, sample_task_vectors, TaskVectors};
use tslab_core::metrics::w_star_target;
use tslab_core::numerics::{frobenius_norm, streams, trace, Matrix, Rng};
use tslab_core::trainer::{default_noise_variance, theory_constants};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

#[test]
fn theory_constants_at_reference_point() {
    let tau0 = 1.0 / 10f64.ln().sqrt();
    let gamma0 = 1.0 / 10f64.sqrt();
    let tc = theory_constants(10, 128, 7.0, 0.1, gamma0, tau0, 1.5, 1e-3);
    assert!(close(tc.eps_v1, 14.090023343220551, 1e-13), "{}", tc.eps_v1);
    assert!(close(tc.t1, 166.66666666666666, 1e-13));
    assert!(close(tc.eta2_theory, 2.9779313671875008e-05, 1e-12));
    assert!(close(tc.t2, 295941.9903635448, 1e-12));
    let tc = theory_constants(10, 128, 7.0, 1e-7, gamma0, tau0, 1.5, 1e-3);
    assert!(close(tc.eps_w1, 14.961304078981419, 1e-13));
}

#[test]
fn default_noise_variance_at_preset() {
    let tau0 = 1.0 / 10f64.ln().sqrt();
    let v = default_noise_variance(tau0, 1.5, 1e-3);
    assert!(close(v, 0.000578625014722414, 1e-12));
}

#[test]
fn gamma0_for_d10() {
    let tv = sample_task_vectors(&mut Rng::new(0, streams::TASK), 10, 7.0, 1e-7).unwrap();
    assert!((tv.gamma0 - 0.31622776601683794).abs() < 1e-16);
}

#[test]
fn norms_and_traces() {
    assert!((frobenius_norm(&Matrix::identity(3)) - 1.7320508075688772).abs() < 1e-15);
    assert_eq!(frobenius_norm(&Matrix::from_rows(&[[3.0, 4.0], [0.0, 0.0]])), 5.0);
    assert_eq!(frobenius_norm(&Matrix::zeros(2, 3)), 0.0);
    assert_eq!(trace(&Matrix::identity(3)), 3.0);
    assert_eq!(trace(&Matrix::from_diag(&[1.0, 2.0, 3.0])), 6.0);
}

#[test]
fn target_with_capped_epsilon() {
    let e1 = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let t = w_star_target(10, (-1.0f64).exp(), &e1);
    assert!((t.frobenius_norm() - 10.0).abs() < 1e-12);
}

#[test]
fn reference_scale_dataset_shape() {
    let master = Rng::new(0, 0);
    let tv = sample_task_vectors(&mut master.substream(streams::TASK), 10, 7.0, 1e-7).unwrap();
    let ds = generate_dataset(&master, &tv, 128, 128);
    assert_eq!(ds.prompts.len(), 128);
    for ep in &ds.prompts {
        assert_eq!((ep.x_block.rows(), ep.x_block.cols()), (20, 256));
    }
}

#[test]
fn forced_two_dimensional_zeta() {
    // with z on the first axis, the only unit-orthogonal directions are ±e2
    let tv = TaskVectors::from_parts(vec![0.0, 1.0], vec![3.0, 0.0], vec![0.0, -0.5]).unwrap();
    assert_eq!(tv.u, 3.0);
    assert_eq!(tv.r, 0.5);
    let mut rng = Rng::new(2, 0);
    let zeta = tslab_core::datagen::sample_zeta(&mut rng, &[3.0, 0.0], 0.5).unwrap();
    assert!(zeta[0].abs() < 1e-15);
    assert!((zeta[1].abs() - 0.5).abs() < 1e-15);
}
