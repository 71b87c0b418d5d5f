//! Example problem generators.

use std::f64::consts::PI;

use bilinear_dyson::{
    control_family, operator_norm, Complex64, DMatrix, DVector, LinearOperator,
    PiecewiseConstantControl,
};
use clap::ValueEnum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::problem::{matrix_entries, vector_entries, CliError, FieldKind, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// Planar rotation with a non-commuting coupling and no control (K = 0).
    Rotation,
    /// Rotation with identity coupling and u = 0.5 on [0, 2].
    Commuting,
    /// One-dimensional system with random a, b and a random control.
    Scalar,
    /// Truncated harmonic oscillator driven through its position operator.
    Schrodinger,
    /// Dense Gaussian A, B with a random control.
    Random,
}

fn real_spec(a: DMatrix<f64>, b: DMatrix<f64>, psi0: DVector<f64>) -> ProblemSpec {
    ProblemSpec {
        dim: psi0.len(),
        field: FieldKind::Real,
        a: matrix_entries(&a),
        b: matrix_entries(&b),
        psi0: vector_entries(&psi0),
        control: None,
        horizon: None,
        l1_budget: None,
        eps: None,
        seed: 0,
    }
}

pub fn generate(kind: Kind, dim: Option<usize>, seed: u64) -> Result<ProblemSpec, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let e0 = DVector::from_vec(vec![1.0, 0.0]);
    let fixed_dim = |d: usize| match dim {
        Some(n) if n != d => Err(CliError::Input(format!("this kind has dim {d}"))),
        _ => Ok(()),
    };

    let mut spec = match kind {
        Kind::Rotation => {
            fixed_dim(2)?;
            let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
            let mut s = real_spec(rot, b, e0);
            s.horizon = Some(PI);
            s.l1_budget = Some(0.0);
            s.eps = Some(0.1);
            s
        }
        Kind::Commuting => {
            fixed_dim(2)?;
            let mut s = real_spec(rot, DMatrix::identity(2, 2), e0);
            s.control = Some(PiecewiseConstantControl::constant(0.5, 2.0)?);
            s.horizon = Some(2.0);
            s.l1_budget = Some(1.0);
            s.eps = Some(1e-8);
            s
        }
        Kind::Scalar => {
            fixed_dim(1)?;
            let coef = Uniform::new_inclusive(-2.0, 2.0).expect("valid range");
            let a = DMatrix::from_element(1, 1, coef.sample(&mut rng));
            let b = DMatrix::from_element(1, 1, coef.sample(&mut rng));
            let mut s = real_spec(a, b, DVector::from_element(1, 1.0));
            s.control = Some(control_family(1.0, 2.0, 3, 3, seed)?.swap_remove(2));
            s.horizon = Some(1.0);
            s.l1_budget = Some(2.0);
            s.eps = Some(1e-10);
            s
        }
        Kind::Random => {
            let n = dim.unwrap_or(4);
            if n == 0 {
                return Err(CliError::Input("dim must be at least 1".into()));
            }
            let scale = 1.0 / (n as f64).sqrt();
            let mut gauss = |r: usize, c: usize| {
                DMatrix::from_fn(r, c, |_, _| {
                    scale * Distribution::<f64>::sample(&StandardNormal, &mut rng)
                })
            };
            let a = gauss(n, n);
            let b = gauss(n, n);
            let psi0 = gauss(n, 1).column(0).into_owned();
            let psi0 = &psi0 / psi0.norm();
            let mut s = real_spec(a, b, psi0);
            s.control = Some(control_family(1.0, 1.0, 4, 3, seed)?.swap_remove(2));
            s.horizon = Some(1.0);
            s.l1_budget = Some(1.0);
            s.eps = Some(1e-6);
            s
        }
        Kind::Schrodinger => {
            let n = dim.unwrap_or(20);
            if n < 2 {
                return Err(CliError::Input("schrodinger needs dim >= 2".into()));
            }
            let minus_i = Complex64::new(0.0, -1.0);
            let a = DMatrix::from_fn(n, n, |r, c| {
                if r == c {
                    minus_i * (r as f64 + 0.5)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let x = DMatrix::from_fn(n, n, |r, c| {
                let k = r.min(c);
                if r.abs_diff(c) == 1 {
                    Complex64::new(((k + 1) as f64 / 2.0).sqrt(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let x_norm = operator_norm(&LinearOperator::new(x.clone())?);
            let b = x.map(|z| minus_i * z / x_norm);
            let psi0 = DVector::from_fn(n, |r, _| {
                Complex64::new(if r == 0 { 1.0 } else { 0.0 }, 0.0)
            });
            ProblemSpec {
                dim: n,
                field: FieldKind::Complex,
                a: matrix_entries(&a),
                b: matrix_entries(&b),
                psi0: vector_entries(&psi0),
                control: None,
                horizon: Some(1.0),
                l1_budget: Some(1.0),
                eps: Some(0.1),
                seed: 0,
            }
        }
    };
    spec.seed = seed;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_kind_round_trips() {
        for kind in Kind::value_variants() {
            let spec = generate(*kind, None, 7).unwrap();
            let back: ProblemSpec = serde_json::from_str(&spec.to_json()).unwrap();
            assert_eq!(back, spec, "{kind:?}");
        }
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(
            generate(Kind::Random, Some(3), 1).unwrap(),
            generate(Kind::Random, Some(3), 1).unwrap()
        );
        assert_ne!(
            generate(Kind::Random, Some(3), 1).unwrap(),
            generate(Kind::Random, Some(3), 2).unwrap()
        );
        assert!(generate(Kind::Rotation, Some(3), 0).is_err());
    }

    #[test]
    fn oscillator_coupling_has_unit_norm() {
        let spec = generate(Kind::Schrodinger, Some(6), 0).unwrap();
        let inst = spec.instance::<Complex64>().unwrap();
        assert!((operator_norm(&inst.b) - 1.0).abs() < 1e-12);
    }
}
