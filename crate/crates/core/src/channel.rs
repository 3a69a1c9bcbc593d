//! Cascaded-channel arithmetic: effective gains, closed-form phase alignment
//! and projection onto the unit-modulus set.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries of a phase vector must have modulus 1 within this tolerance.
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseKind {
    /// One entry per IRS element.
    Bare,
    /// IRS entries followed by a trailing 1 for the direct path.
    Augmented,
}

/// A unit-modulus reflection vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector {
    entries: Vec<Complex64>,
    kind: PhaseKind,
}

fn check_unit(entries: &[Complex64]) -> Result<()> {
    for (index, z) in entries.iter().enumerate() {
        let modulus = z.norm();
        if (modulus - 1.0).abs() > UNIT_MODULUS_TOL {
            return Err(Error::NotUnitModulus { index, modulus });
        }
    }
    Ok(())
}

impl PhaseVector {
    pub fn bare(entries: Vec<Complex64>) -> Result<Self> {
        check_unit(&entries)?;
        Ok(Self {
            entries,
            kind: PhaseKind::Bare,
        })
    }

    pub fn augmented(entries: Vec<Complex64>) -> Result<Self> {
        match entries.last() {
            Some(last) if *last == Complex64::new(1.0, 0.0) => {}
            other => return Err(Error::BadAugmentedTail(format!("{other:?}"))),
        }
        check_unit(&entries)?;
        Ok(Self {
            entries,
            kind: PhaseKind::Augmented,
        })
    }

    pub fn from_angles(angles: &[f64]) -> Self {
        Self {
            entries: angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect(),
            kind: PhaseKind::Bare,
        }
    }

    pub fn ones(n: usize) -> Self {
        Self {
            entries: vec![Complex64::new(1.0, 0.0); n],
            kind: PhaseKind::Bare,
        }
    }

    pub fn kind(&self) -> PhaseKind {
        self.kind
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// The per-element reflection coefficients, without the direct-path slot.
    pub fn irs(&self) -> &[Complex64] {
        match self.kind {
            PhaseKind::Bare => &self.entries,
            PhaseKind::Augmented => &self.entries[..self.entries.len() - 1],
        }
    }

    pub fn num_elements(&self) -> usize {
        self.irs().len()
    }

    pub fn to_augmented(&self) -> PhaseVector {
        let mut entries = self.irs().to_vec();
        entries.push(Complex64::new(1.0, 0.0));
        PhaseVector {
            entries,
            kind: PhaseKind::Augmented,
        }
    }

    pub fn to_bare(&self) -> PhaseVector {
        PhaseVector {
            entries: self.irs().to_vec(),
            kind: PhaseKind::Bare,
        }
    }
}

/// `h_d + q^H v` with `cascaded` holding the entries of `q^H`.
pub fn combined_amplitude(direct: Complex64, cascaded: &[Complex64], irs: &[Complex64]) -> Complex64 {
    direct
        + cascaded
            .iter()
            .zip(irs)
            .map(|(q, v)| q * v)
            .sum::<Complex64>()
}

/// Effective channel power gain `|h_d + q^H v|^2`.
pub fn effective_gain(direct: Complex64, cascaded: &[Complex64], v: &PhaseVector) -> Result<f64> {
    if cascaded.len() != v.num_elements() {
        return Err(Error::DimensionMismatch {
            expected: cascaded.len(),
            found: v.num_elements(),
        });
    }
    Ok(combined_amplitude(direct, cascaded, v.irs()).norm_sqr())
}

/// Closed-form maximizer of `|h_d + q^H v|^2` over unit-modulus `v`: rotate
/// every reflected path onto the phase of the direct path. Returns the bare
/// vector and the gain `(|h_d| + sum |q_n|)^2`.
pub fn align_phases(direct: Complex64, cascaded: &[Complex64]) -> (PhaseVector, f64) {
    let reference = if direct == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        direct.arg()
    };
    let entries = cascaded
        .iter()
        .map(|q| {
            if q.norm() == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, reference - q.arg())
            }
        })
        .collect();
    let amplitude = direct.norm() + cascaded.iter().map(|q| q.norm()).sum::<f64>();
    (
        PhaseVector {
            entries,
            kind: PhaseKind::Bare,
        },
        amplitude * amplitude,
    )
}

/// Result of mapping an arbitrary complex vector onto unit-modulus phases.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub vector: PhaseVector,
    /// Entries with zero modulus, which were mapped to phase 0.
    pub degenerate: usize,
}

/// Entrywise `v_n / |v_n|`. For `Augmented` input the whole vector is first
/// rotated so that its last entry is real positive, which keeps that entry
/// exactly 1 after projection.
pub fn project_unit_modulus(v: &[Complex64], kind: PhaseKind) -> Projection {
    let rotation = match (kind, v.last()) {
        (PhaseKind::Augmented, Some(last)) if last.norm() > 0.0 => Complex64::from_polar(1.0, -last.arg()),
        _ => Complex64::new(1.0, 0.0),
    };
    let mut degenerate = 0;
    let mut entries: Vec<Complex64> = v
        .iter()
        .map(|z| {
            let z = z * rotation;
            let m = z.norm();
            if m > 0.0 && m.is_finite() {
                z / m
            } else {
                degenerate += 1;
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    if kind == PhaseKind::Augmented {
        if let Some(last) = entries.last_mut() {
            *last = Complex64::new(1.0, 0.0);
        }
    }
    if degenerate > 0 {
        log::warn!("{degenerate} zero-modulus phase entries mapped to phase 0");
    }
    Projection {
        vector: PhaseVector { entries, kind },
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gain_without_reflection() {
        let v = PhaseVector::from_angles(&[0.3, -1.2]);
        let g = effective_gain(c(1.0, 0.0), &[c(0.0, 0.0), c(0.0, 0.0)], &v).unwrap();
        assert_eq!(g, 1.0);
    }

    #[test]
    fn gain_perfect_cancellation() {
        let v = PhaseVector::bare(vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let g = effective_gain(c(0.0, 0.0), &[c(1.0, 0.0), c(1.0, 0.0)], &v).unwrap();
        assert!(g.abs() < 1e-30);
    }

    #[test]
    fn aligned_gain_is_square_of_amplitude_sum() {
        let q = [Complex64::from_polar(0.3, PI / 3.0), Complex64::from_polar(0.5, -PI / 4.0)];
        let (v, gamma) = align_phases(c(0.6, 0.0), &q);
        assert!((gamma - 1.96).abs() < 1e-12);
        assert!((effective_gain(c(0.6, 0.0), &q, &v).unwrap() - 1.96).abs() < 1e-12);
    }

    #[test]
    fn aligned_gain_dominates_random_search() {
        use rand::{Rng, SeedableRng};
        let q = [Complex64::from_polar(0.3, PI / 3.0), Complex64::from_polar(0.5, -PI / 4.0)];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut best = 0.0f64;
        for _ in 0..1_000_000 {
            let v = PhaseVector::from_angles(&[rng.random::<f64>() * 2.0 * PI, rng.random::<f64>() * 2.0 * PI]);
            best = best.max(effective_gain(c(0.6, 0.0), &q, &v).unwrap());
        }
        assert!(best <= 1.96 + 1e-12);
        assert!(best > 1.96 - 1e-3);
    }

    #[test]
    fn align_hand_example() {
        let (v, gamma) = align_phases(c(1.0, 0.0), &[c(0.0, 1.0), c(-1.0, 0.0)]);
        assert!((v.entries()[0] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((v.entries()[1] - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((gamma - 9.0).abs() < 1e-12);
        assert!((effective_gain(c(1.0, 0.0), &[c(0.0, 1.0), c(-1.0, 0.0)], &v).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn align_without_reflection_or_direct_path() {
        let (v, gamma) = align_phases(c(0.5, 0.5), &[c(0.0, 0.0); 3]);
        assert_eq!(v.entries(), &[c(1.0, 0.0); 3]);
        assert!((gamma - 0.5).abs() < 1e-15);
        let q = [c(0.0, 2.0), c(1.0, 0.0)];
        let (v, gamma) = align_phases(c(0.0, 0.0), &q);
        assert!((gamma - 9.0).abs() < 1e-12);
        assert!((effective_gain(c(0.0, 0.0), &q, &v).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let v = PhaseVector::ones(3);
        assert!(matches!(
            effective_gain(c(1.0, 0.0), &[c(1.0, 0.0); 2], &v),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn projection_examples() {
        let p = project_unit_modulus(&[c(2.0, 0.0), c(0.0, -3.0)], PhaseKind::Bare);
        assert_eq!(p.degenerate, 0);
        assert!((p.vector.entries()[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((p.vector.entries()[1] - c(0.0, -1.0)).norm() < 1e-15);

        let z = [Complex64::from_polar(2.0, PI / 4.0), c(0.3, 0.7), Complex64::from_polar(0.5, 1.1)];
        let p = project_unit_modulus(&z, PhaseKind::Augmented);
        assert_eq!(*p.vector.entries().last().unwrap(), c(1.0, 0.0));
        // Same vector up to the common rotation by -arg(last).
        let expected = Complex64::from_polar(1.0, PI / 4.0 - 1.1);
        assert!((p.vector.entries()[0] - expected).norm() < 1e-12);
        assert!(PhaseVector::augmented(p.vector.entries().to_vec()).is_ok());
    }

    #[test]
    fn projection_counts_zero_entries() {
        let p = project_unit_modulus(&[c(0.0, 0.0), c(0.0, 2.0)], PhaseKind::Bare);
        assert_eq!(p.degenerate, 1);
        assert_eq!(p.vector.entries()[0], c(1.0, 0.0));
    }

    #[test]
    fn constructors_validate() {
        assert!(PhaseVector::bare(vec![c(0.5, 0.0)]).is_err());
        assert!(PhaseVector::augmented(vec![c(0.0, 1.0), c(0.0, 1.0)]).is_err());
        let aug = PhaseVector::from_angles(&[0.1, 0.2]).to_augmented();
        assert_eq!(aug.entries().len(), 3);
        assert_eq!(aug.num_elements(), 2);
        assert_eq!(aug.to_bare().entries().len(), 2);
    }

    fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b)| c(a, b)), len)
    }

    proptest! {
        #[test]
        fn aligned_gain_identity(direct in (-2.0f64..2.0, -2.0f64..2.0), q in complex_vec(6)) {
            let d = c(direct.0, direct.1);
            let (v, gamma) = align_phases(d, &q);
            let expected = (d.norm() + q.iter().map(|z| z.norm()).sum::<f64>()).powi(2);
            prop_assert!((gamma - expected).abs() <= 1e-12 * expected.max(1.0));
            let g = effective_gain(d, &q, &v).unwrap();
            prop_assert!((g - expected).abs() <= 1e-12 * expected.max(1.0));
        }

        #[test]
        fn aligned_gain_invariant_to_common_rotation(
            direct in (-2.0f64..2.0, -2.0f64..2.0), q in complex_vec(5), phi in 0.0f64..6.3
        ) {
            let d = c(direct.0, direct.1);
            let rot = Complex64::from_polar(1.0, phi);
            let rotated: Vec<_> = q.iter().map(|z| z * rot).collect();
            let (_, g1) = align_phases(d, &q);
            let (_, g2) = align_phases(d * rot, &rotated);
            prop_assert!((g1 - g2).abs() <= 1e-12 * g1.max(1.0));
        }

        #[test]
        fn projection_idempotent(z in complex_vec(7)) {
            let once = project_unit_modulus(&z, PhaseKind::Augmented);
            let twice = project_unit_modulus(once.vector.entries(), PhaseKind::Augmented);
            for (a, b) in once.vector.entries().iter().zip(twice.vector.entries()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
            prop_assert!(PhaseVector::augmented(once.vector.entries().to_vec()).is_ok());
        }
    }
}
