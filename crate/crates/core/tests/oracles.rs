//! Values pinned against independent oracles (an interior-point SDP solver
//! on the same programs, written out in the Choi and correlation-matrix
//! forms separately).

use coherence_core::channels::{conjugation_example, omega_materialize, ChannelClass, DensityMatrix};
use coherence_core::convert::decide_offdiag;
use coherence_core::matcore::ComplexMatrix;
use coherence_core::measures::{c_l1, c_roc, cm_class, cm_gio};
use coherence_core::sdpcore::SolverSettings;
use coherence_core::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Full-rank three-level state used by every test here.
fn state() -> DensityMatrix {
    DensityMatrix::new(
        ComplexMatrix::new(
            3,
            vec![
                c(0.5, 0.0),
                c(0.2, 0.1),
                c(0.1, 0.0),
                c(0.2, -0.1),
                c(0.3, 0.0),
                c(0.05, -0.1),
                c(0.1, 0.0),
                c(0.05, 0.1),
                c(0.2, 0.0),
            ],
        )
        .unwrap(),
    )
    .unwrap()
}

fn scaled_offdiag(rho: &DensityMatrix, s: f64) -> DensityMatrix {
    DensityMatrix::new(ComplexMatrix::from_fn(3, |i, j| {
        if i == j {
            c(1.0 / 3.0, 0.0)
        } else {
            rho.matrix()[(i, j)] * s
        }
    }))
    .unwrap()
}

const ORACLE_GIO: f64 = 0.241_098_658;
const ORACLE_DIO: f64 = 0.243_119_909;
const ORACLE_MIO: f64 = 0.243_922_813;

#[test]
fn class_values_match_oracle() {
    let s = SolverSettings::default();
    let rho = state();
    let m = omega_materialize(&conjugation_example(), 3).unwrap();
    let direct = cm_gio(&rho, &m, &s).unwrap().value;
    assert!((direct - ORACLE_GIO).abs() < 1e-6, "{direct}");
    for (class, expect) in [
        (ChannelClass::Gio, ORACLE_GIO),
        (ChannelClass::Dio, ORACLE_DIO),
        (ChannelClass::Mio, ORACLE_MIO),
    ] {
        let v = cm_class(&rho, &m, class, &s).unwrap().value;
        assert!((v - expect).abs() < 1e-6, "{class}: {v} vs {expect}");
    }
}

#[test]
fn offdiag_scaling_verdicts_match_oracle() {
    // oracle margins: DIO and MIO (1 - s)/3, GIO completion 1 - s
    let s = SolverSettings::default();
    let rho = state();
    for scale in [0.0, 0.5, 0.9, 1.0, 1.15, 1.3] {
        let sigma = scaled_offdiag(&rho, scale);
        for class in [ChannelClass::Gio, ChannelClass::Dio, ChannelClass::Mio] {
            let v = decide_offdiag(&rho, &sigma, class, &s).unwrap();
            assert_eq!(v.is_convertible(), scale <= 1.0, "{class} s={scale}");
            let expect = if class == ChannelClass::Gio { 1.0 - scale } else { (1.0 - scale) / 3.0 };
            if scale != 1.0 && (class != ChannelClass::Gio || scale < 1.0) {
                assert!((v.margin - expect).abs() < 1e-6, "{class} s={scale}: {} vs {expect}", v.margin);
            }
        }
    }
}

#[test]
fn qubit_closed_forms() {
    // qubit: C_l1 = C_ROC = 2|ρ01|, C_M = 2|ρ01||M01|
    let s = SolverSettings::default();
    for (off, m01) in [(c(0.3, 0.0), c(0.5, 0.0)), (c(0.1, -0.2), c(0.0, 0.25)), (c(0.0, 0.4), c(-0.3, 0.1))] {
        let rho = DensityMatrix::new(ComplexMatrix::new(2, vec![c(0.5, 0.0), off, off.conj(), c(0.5, 0.0)]).unwrap())
            .unwrap();
        let m = ComplexMatrix::new(2, vec![c(0.5, 0.0), m01, m01.conj(), c(0.5, 0.0)]).unwrap();
        assert!((c_l1(&rho) - 2.0 * off.norm()).abs() < 1e-15);
        assert!((c_roc(&rho, &s).unwrap().value - 2.0 * off.norm()).abs() < 1e-7);
        let expect = 2.0 * off.norm() * m01.norm();
        assert!((cm_gio(&rho, &m, &s).unwrap().value - expect).abs() < 1e-12);
        for class in [ChannelClass::Gio, ChannelClass::Dio, ChannelClass::Mio] {
            let v = cm_class(&rho, &m, class, &s).unwrap().value;
            assert!(v >= expect - 1e-7, "{class}: {v} < {expect}");
        }
    }
}
