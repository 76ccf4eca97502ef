mod common;

use common::{jacobi_eigenvalues, kernel_sum, random_graph, random_matrix};
use graphsr_core::{Graph, Kernel, Spectrum};
use nalgebra::{DMatrix, DVector};

fn spectrum(n: usize, k: usize, seed: u64) -> Spectrum {
    Spectrum::compute(&random_graph(n, 0.3, true, seed).laplacian(), k).unwrap()
}

fn flip_columns(s: &Spectrum, cols: &[usize]) -> Spectrum {
    let mut u = s.eigenvectors().clone();
    for &c in cols {
        u.column_mut(c).neg_mut();
    }
    Spectrum::from_parts(s.eigenvalues().clone(), u).unwrap()
}

#[test]
fn eigenvalues_match_jacobi_oracle() {
    let g = random_graph(8, 0.4, true, 21);
    let l = g.laplacian();
    let s = Spectrum::compute(&l, 8).unwrap();
    let oracle = jacobi_eigenvalues(l.matrix());
    for (got, want) in s.eigenvalues().iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
}

#[test]
fn spectrum_invariants_and_gershgorin() {
    for seed in 0..30 {
        let n = 3 + seed as usize % 18;
        let g = random_graph(n, 0.25, true, seed);
        let l = g.laplacian();
        let k = 1 + seed as usize % n;
        let s = Spectrum::compute(&l, k).unwrap();
        let u = s.eigenvectors();
        assert!((u.transpose() * u - DMatrix::identity(k, k)).amax() < 1e-8);
        assert!(s.max_residual(&l) < 1e-8 * s.eigenvalues()[k - 1].max(1.0));
        assert!(s.eigenvalues()[0] < 1e-8);
        let max_deg = g.degrees().into_iter().fold(0.0, f64::max);
        for w in s.eigenvalues().as_slice().windows(2) {
            assert!(w[0] <= w[1] + 1e-8);
        }
        assert!(s.eigenvalues().iter().all(|&x| x >= 0.0 && x <= 2.0 * max_deg + 1e-9));
    }
}

#[test]
fn decomposition_is_deterministic() {
    let l = random_graph(15, 0.3, true, 5).laplacian();
    assert_eq!(Spectrum::compute(&l, 9).unwrap(), Spectrum::compute(&l, 9).unwrap());
}

#[test]
fn basis_vector_transforms_to_unit_coefficient() {
    let s = spectrum(10, 6, 2);
    let chi2 = s.eigenvectors().column(1).into_owned();
    let fhat = s.gft_forward(&DMatrix::from_column_slice(10, 1, chi2.as_slice())).unwrap();
    for l in 0..6 {
        let want = if l == 1 { 1.0 } else { 0.0 };
        assert!((fhat[(l, 0)] - want).abs() < 1e-12);
    }
}

#[test]
fn parseval_and_round_trip_at_full_band() {
    for seed in 0..10 {
        let s = spectrum(12, 12, seed);
        let f = random_matrix(12, 3, 100 + seed);
        let fhat = s.gft_forward(&f).unwrap();
        assert!((fhat.norm() - f.norm()).abs() < 1e-10);
        assert!((s.gft_inverse(&fhat).unwrap() - &f).amax() < 1e-9);
    }
}

#[test]
fn partial_band_round_trip_is_projection() {
    let s = spectrum(14, 5, 9);
    let f = random_matrix(14, 2, 4);
    let u = s.eigenvectors();
    let projector = u * u.transpose();
    let back = s.gft_inverse(&s.gft_forward(&f).unwrap()).unwrap();
    assert!((back - projector * &f).amax() < 1e-12);
    // bandlimited fixed point
    let c = random_matrix(5, 2, 6);
    let g = s.gft_inverse(&c).unwrap();
    assert!((s.gft_inverse(&s.gft_forward(&g).unwrap()).unwrap() - &g).amax() < 1e-9);
}

#[test]
fn wavelet_matches_direct_summation() {
    let s = spectrum(11, 7, 31);
    let u = s.eigenvectors();
    for kernel in [Kernel::Heat, Kernel::MexicanHat] {
        for &scale in &[0.0, 0.3, 2.0] {
            let gains: Vec<f64> = s.eigenvalues().iter().map(|&l| kernel.eval(scale * l)).collect();
            for n in 0..11 {
                let psi = s.wavelet(kernel, scale, n).unwrap();
                let dist = s.diffusion_distance(kernel, scale, n).unwrap();
                assert_eq!(psi, dist);
                for m in 0..11 {
                    assert!((psi[m] - kernel_sum(u, &gains, n, m)).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn heat_at_zero_scale_full_band_is_identity() {
    let s = spectrum(9, 9, 77);
    for n in 0..9 {
        let psi = s.wavelet(Kernel::Heat, 0.0, n).unwrap();
        for m in 0..9 {
            let want = if m == n { 1.0 } else { 0.0 };
            assert!((psi[m] - want).abs() < 1e-12);
        }
    }
    let lev = s.leverage(Kernel::Heat, 0.0);
    assert!(lev.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    let f = random_matrix(9, 2, 1);
    assert!((s.wavelet_transform(Kernel::Heat, &f, 0.0).unwrap() - &f).amax() < 1e-12);
}

#[test]
fn wavelet_transform_two_step_oracle() {
    let s = spectrum(13, 8, 3);
    let f = random_matrix(13, 3, 12);
    let scale = 0.8;
    let fhat = s.eigenvectors().transpose() * &f;
    let mut want = DMatrix::zeros(13, 3);
    for n in 0..13 {
        for c in 0..3 {
            for l in 0..8 {
                want[(n, c)] += Kernel::MexicanHat.eval(scale * s.eigenvalues()[l]) * fhat[(l, c)] * s.eigenvectors()[(n, l)];
            }
        }
    }
    let got = s.wavelet_transform(Kernel::MexicanHat, &f, scale).unwrap();
    assert!((got - want).amax() < 1e-12);
    // impulse at n gives the wavelet at n
    let mut delta = DMatrix::zeros(13, 1);
    delta[(4, 0)] = 1.0;
    let w = s.wavelet_transform(Kernel::Heat, &delta, scale).unwrap();
    let psi = s.wavelet(Kernel::Heat, scale, 4).unwrap();
    assert!((w.column(0) - psi).amax() < 1e-12);
}

#[test]
fn leverage_matches_summation_and_self_distance() {
    let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    let s = Spectrum::compute(&g.laplacian(), 3).unwrap();
    let gains: Vec<f64> = s.eigenvalues().iter().map(|&l| (-0.5 * l).exp()).collect();
    let lev = s.leverage(Kernel::Heat, 0.5);
    for n in 0..3 {
        assert!((lev[n] - kernel_sum(s.eigenvectors(), &gains, n, n)).abs() < 1e-12);
    }
    let s = spectrum(16, 6, 8);
    for &scale in &[0.0, 0.7] {
        let lev = s.leverage(Kernel::Heat, scale);
        for n in 0..16 {
            // bit-identical, same summation order
            assert_eq!(lev[n], s.diffusion_distance(Kernel::Heat, scale, n).unwrap()[n]);
            assert!(lev[n] >= 0.0);
        }
    }
}

#[test]
fn diffusion_distance_is_symmetric() {
    let s = spectrum(12, 5, 41);
    let rows: Vec<DVector<f64>> = (0..12).map(|n| s.diffusion_distance(Kernel::Heat, 1.3, n).unwrap()).collect();
    for a in 0..12 {
        for b in 0..12 {
            assert!((rows[a][b] - rows[b][a]).abs() < 1e-12);
        }
    }
}

#[test]
fn sign_flips_leave_derived_quantities_unchanged() {
    let s = spectrum(10, 6, 13);
    let t = flip_columns(&s, &[0, 2, 5]);
    let f = random_matrix(10, 2, 3);
    let rt = |sp: &Spectrum| sp.gft_inverse(&sp.gft_forward(&f).unwrap()).unwrap();
    assert!((rt(&s) - rt(&t)).amax() < 1e-10);
    assert!((s.leverage(Kernel::Heat, 0.4) - t.leverage(Kernel::Heat, 0.4)).amax() < 1e-10);
    for n in 0..10 {
        let a = s.wavelet(Kernel::MexicanHat, 1.1, n).unwrap();
        let b = t.wavelet(Kernel::MexicanHat, 1.1, n).unwrap();
        assert!((a - b).amax() < 1e-10);
    }
    let wa = s.wavelet_transform(Kernel::Heat, &f, 0.9).unwrap();
    let wb = t.wavelet_transform(Kernel::Heat, &f, 0.9).unwrap();
    assert!((wa - wb).amax() < 1e-10);
}
