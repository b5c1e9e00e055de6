//! Phase-space index conventions and the symplectic form.
//!
//! Slot `k` (0-based) holds `q_{k+1}` for `k < N` and `p_{k-N+1}` otherwise.

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};

/// Number of modes and the `(q, p)` slot layout of a phase-space vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseIndexConvention {
    n_modes: usize,
}

impl PhaseIndexConvention {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::ZeroModes);
        }
        Ok(Self { n_modes })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Phase-space dimension `2N`.
    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    pub fn q(&self, i: usize) -> usize {
        debug_assert!(i < self.n_modes);
        i
    }

    pub fn p(&self, i: usize) -> usize {
        debug_assert!(i < self.n_modes);
        self.n_modes + i
    }
}

/// The pair `ε^{μν} = [[0, 1], [-1, 0]]` and its inverse `ε_{μν} = [[0, -1], [1, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    convention: PhaseIndexConvention,
    upper: DMatrix<f64>,
    lower: DMatrix<f64>,
}

impl SymplecticForm {
    pub fn new(n_modes: usize) -> Result<Self> {
        let convention = PhaseIndexConvention::new(n_modes)?;
        let dim = convention.dim();
        let mut upper = DMatrix::zeros(dim, dim);
        for i in 0..n_modes {
            upper[(i, n_modes + i)] = 1.0;
            upper[(n_modes + i, i)] = -1.0;
        }
        let lower = -&upper;
        Ok(Self { convention, upper, lower })
    }

    pub fn convention(&self) -> PhaseIndexConvention {
        self.convention
    }

    pub fn n_modes(&self) -> usize {
        self.convention.n_modes()
    }

    pub fn dim(&self) -> usize {
        self.convention.dim()
    }

    /// `ε^{μν}`.
    pub fn upper(&self) -> &DMatrix<f64> {
        &self.upper
    }

    /// `ε_{μν}`.
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// `ε^{μν}` lifted into any scalar field.
    pub fn upper_as<T: ComplexField<RealField = f64>>(&self) -> DMatrix<T> {
        self.upper.map(T::from_real)
    }

    /// `ε^{μν} w_ν`, computed by slot permutation.
    pub fn apply_upper<T: ComplexField>(&self, w: &DVector<T>) -> DVector<T> {
        let n = self.n_modes();
        DVector::from_fn(2 * n, |k, _| {
            if k < n {
                w[n + k].clone()
            } else {
                -w[k - n].clone()
            }
        })
    }

    /// `ε_{μν} w^ν`, computed by slot permutation.
    pub fn apply_lower<T: ComplexField>(&self, w: &DVector<T>) -> DVector<T> {
        let n = self.n_modes();
        DVector::from_fn(2 * n, |k, _| {
            if k < n {
                -w[n + k].clone()
            } else {
                w[k - n].clone()
            }
        })
    }
}

/// Convenience constructor mirroring [`SymplecticForm::new`].
pub fn make_symplectic_form(n_modes: usize) -> Result<SymplecticForm> {
    SymplecticForm::new(n_modes)
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `v_ν = ε_{νρ} v^ρ`.
pub fn lower_index<T: ComplexField>(v: &DVector<T>, form: &SymplecticForm) -> Result<DVector<T>> {
    check_len(form.dim(), v.len())?;
    Ok(form.apply_lower(v))
}

/// `v^ν = ε^{νρ} v_ρ`, the inverse of [`lower_index`].
pub fn raise_index<T: ComplexField>(v: &DVector<T>, form: &SymplecticForm) -> Result<DVector<T>> {
    check_len(form.dim(), v.len())?;
    Ok(form.apply_upper(v))
}

/// Entrywise max-norm of `M ε Mᵀ − ε` (plain transpose, also for complex `M`).
pub fn symplectic_residual<T: ComplexField<RealField = f64>>(
    m: &DMatrix<T>,
    form: &SymplecticForm,
) -> Result<f64> {
    check_len(form.dim(), m.nrows())?;
    check_len(form.dim(), m.ncols())?;
    let eps = form.upper_as::<T>();
    let diff = m * &eps * m.transpose() - eps;
    Ok(max_abs(&diff))
}

/// Entrywise max-norm.
pub fn max_abs<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|x| x.clone().modulus()).fold(0.0, f64::max)
}
