use afbm_core::filterbank::{
    compensation_vector, data_rows, filter_blocks, is_data_row, orthogonality_matrix, prototype_filter, BlockOrigin,
    FilterBank, FilterKind, Overlap,
};
use afbm_core::modem::{AfbmModem, WaveformParams};
use afbm_core::transforms::{ChirpPair, ComplexMatrix, DaftDims};
use afbm_core::Complex64;
use nalgebra::DVector;
use proptest::prelude::*;

fn section3() -> (DaftDims, ChirpPair) {
    (DaftDims::new(128, 192, 256).unwrap(), ChirpPair::new(5.0 / 384.0, 0.0).unwrap())
}

fn filter_strategy() -> impl Strategy<Value = (FilterKind, usize)> {
    prop_oneof![
        Just((FilterKind::Hermite, 3)),
        Just((FilterKind::Hermite, 2)),
        Just((FilterKind::Rect, 2)),
        (2usize..=4).prop_map(|o| (FilterKind::Phydyas, 2 * o)),
    ]
}

fn data_off_diagonal_ratio(gram: &ComplexMatrix, l: usize) -> f64 {
    let idx: Vec<usize> = (0..gram.nrows()).filter(|i| is_data_row(l, i % l)).collect();
    let (mut diag, mut off) = (0.0, 0.0);
    for &i in &idx {
        for &j in &idx {
            if i == j {
                diag += gram[(i, j)].norm_sqr();
            } else {
                off += gram[(i, j)].norm_sqr();
            }
        }
    }
    off / diag
}

#[test]
fn compensated_single_symbol_gram_has_unit_data_diagonal() {
    let (dims, chirps) = section3();
    let filter = prototype_filter(FilterKind::Hermite, Overlap::from_f64(1.5).unwrap(), 256).unwrap();
    let origin = BlockOrigin::default();
    let b = compensation_vector(dims, chirps, chirps, &filter, origin).unwrap();
    let m = orthogonality_matrix(dims, chirps, chirps, &filter, origin, &b).unwrap();
    for i in 0..128 {
        for j in 0..128 {
            let v = m[(i, j)];
            if i == j && is_data_row(128, i) {
                assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-8, "diag {i}: {v}");
            } else if !is_data_row(128, i) || !is_data_row(128, j) {
                assert!(v.norm() < 1e-10, "guard entry ({i}, {j}) = {v}");
            }
        }
    }
}

#[test]
fn hermite_frame_gram_is_cleaner_than_phydyas() {
    let (dims, chirps) = section3();
    let ratio = |kind, o: f64| {
        let f = prototype_filter(kind, Overlap::from_f64(o).unwrap(), 256).unwrap();
        let modem = AfbmModem::new(WaveformParams::new(dims, 8, chirps, f).unwrap()).unwrap();
        data_off_diagonal_ratio(&modem.orthogonality_gram().unwrap(), 128)
    };
    let hermite = ratio(FilterKind::Hermite, 1.5);
    let phydyas = ratio(FilterKind::Phydyas, 4.0);
    assert!(phydyas > hermite, "PHYDYAS {phydyas:e} vs Hermite {hermite:e}");
}

#[test]
fn data_rows_are_outer_quarters() {
    let rows: Vec<usize> = data_rows(16).collect();
    assert_eq!(rows, vec![0, 1, 2, 3, 12, 13, 14, 15]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_matrix_shape_and_fast_path(
        (kind, halves) in filter_strategy(),
        n in (2usize..=16).prop_map(|v| 2 * v),
        k in 1usize..=5,
        seed in any::<u64>(),
    ) {
        let filter = prototype_filter(kind, Overlap::from_halves(halves).unwrap(), n).unwrap();
        let len = filter.len();
        prop_assert_eq!(len, halves * n / 2);
        let bank = FilterBank::new(filter, k).unwrap();
        let m_len = halves * n / 2 + (k - 1) * n / 2;
        let g = bank.matrix();
        prop_assert_eq!(g.shape(), (m_len, k * n));
        prop_assert_eq!(bank.output_len(), m_len);

        let mut rng = afbm_core::rng::trial_rng(seed, 0);
        let x: Vec<Complex64> = (0..k * n).map(|_| afbm_core::rng::complex_normal(&mut rng, 1.0)).collect();
        let dense = g.map(|v| Complex64::new(v, 0.0));
        let want = &dense * DVector::from_column_slice(&x);
        let got = bank.synthesize(&x).unwrap();
        let err = got.iter().zip(want.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);

        let y: Vec<Complex64> = (0..m_len).map(|_| afbm_core::rng::complex_normal(&mut rng, 1.0)).collect();
        let want = dense.transpose() * DVector::from_column_slice(&y);
        let got = bank.analyze(&y).unwrap();
        let err = got.iter().zip(want.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn filter_matrix_is_linear(
        (kind, halves) in filter_strategy(),
        k in 1usize..=4,
        a in (-2.0..2.0f64, -2.0..2.0f64),
        b in (-2.0..2.0f64, -2.0..2.0f64),
        seed in any::<u64>(),
    ) {
        let n = 16;
        let bank = FilterBank::new(prototype_filter(kind, Overlap::from_halves(halves).unwrap(), n).unwrap(), k).unwrap();
        let mut rng = afbm_core::rng::trial_rng(seed, 1);
        let u: Vec<Complex64> = (0..k * n).map(|_| afbm_core::rng::complex_normal(&mut rng, 1.0)).collect();
        let v: Vec<Complex64> = (0..k * n).map(|_| afbm_core::rng::complex_normal(&mut rng, 1.0)).collect();
        let (a, b) = (Complex64::new(a.0, a.1), Complex64::new(b.0, b.1));
        let mix: Vec<Complex64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = bank.synthesize(&mix).unwrap();
        let (su, sv) = (bank.synthesize(&u).unwrap(), bank.synthesize(&v).unwrap());
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (a * su[i] + b * sv[i])).norm() < 1e-10);
        }
    }

    #[test]
    fn filter_blocks_partition_coefficients((kind, halves) in filter_strategy(), n in (2usize..=32).prop_map(|v| 2 * v)) {
        let filter = prototype_filter(kind, Overlap::from_halves(halves).unwrap(), n).unwrap();
        let joined: Vec<f64> = filter_blocks(&filter).concat();
        prop_assert_eq!(joined.as_slice(), filter.coeffs());
        let energy: f64 = filter.coeffs().iter().map(|v| v * v).sum();
        prop_assert!((energy - 1.0).abs() < 1e-12);
        let c = filter.coeffs();
        for i in 0..c.len() {
            prop_assert!((c[i] - c[c.len() - 1 - i]).abs() < 1e-12);
        }
    }
}
