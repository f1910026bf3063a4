use nalgebra::dmatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dmd::SnapshotSet;
use crate::error::{Error, Result};
use crate::measurement::MeasurementOperator;
use crate::numerics::{
    dct_synthesize, eig, fix_phase, normalize_columns, real_times_complex, truncated_svd,
    Complex64, ComplexMatrix, ComplexVector, RealMatrix, RealVector,
};
use crate::rng;

/// DCT wavenumbers and coefficients of one lifting column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeShape {
    pub wavenumbers: Vec<usize>,
    /// `None` draws magnitudes from the lifting stream.
    #[serde(default)]
    pub magnitudes: Option<Vec<f64>>,
}

impl ModeShape {
    /// Two columns on a shared support `[4, 11, 19, 30]` with orthogonal
    /// coefficient vectors.
    pub fn default_pair() -> Vec<ModeShape> {
        let support = vec![4, 11, 19, 30];
        let a = 30.0_f64.sqrt();
        let b = 22.0_f64.sqrt();
        vec![
            ModeShape {
                wavenumbers: support.clone(),
                magnitudes: Some(vec![4.0 / a, 3.0 / a, 2.0 / a, 1.0 / a]),
            },
            ModeShape {
                wavenumbers: support,
                magnitudes: Some(vec![1.0 / b, -2.0 / b, -1.0 / b, 4.0 / b]),
            },
        ]
    }
}

/// `P`: one unit-norm column per shape, each with exactly `k_p` DCT
/// coefficients.
pub fn build_lifting_modes(
    n: usize,
    k_p: usize,
    shapes: &[ModeShape],
    seed: u64,
) -> Result<RealMatrix> {
    if k_p == 0 {
        return Err(Error::InvalidArgument(
            "lifting sparsity K_P must be at least 1".into(),
        ));
    }
    if shapes.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one lifting mode is required".into(),
        ));
    }
    let mut stream = rng::stream(seed, rng::LIFTING);
    let mut p = RealMatrix::zeros(n, shapes.len());
    for (j, shape) in shapes.iter().enumerate() {
        if shape.wavenumbers.len() != k_p {
            return Err(Error::InvalidArgument(format!(
                "lifting mode {j} has {} wavenumbers, expected K_P = {k_p}",
                shape.wavenumbers.len()
            )));
        }
        let mut sorted = shape.wavenumbers.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "lifting mode {j} repeats a wavenumber"
            )));
        }
        if let Some(&k) = sorted.last().filter(|&&k| k >= n) {
            return Err(Error::InvalidArgument(format!(
                "wavenumber {k} is not below n = {n}"
            )));
        }
        let magnitudes = match &shape.magnitudes {
            Some(m) if m.len() != k_p => {
                return Err(Error::InvalidArgument(format!(
                    "lifting mode {j} has {} magnitudes, expected {k_p}",
                    m.len()
                )))
            }
            Some(m) if m.iter().any(|v| *v == 0.0 || !v.is_finite()) => {
                return Err(Error::InvalidArgument(format!(
                    "lifting mode {j} has a zero or non-finite magnitude"
                )))
            }
            Some(m) => m.clone(),
            None => (0..k_p)
                .map(|_| {
                    let v: f64 = stream.random_range(0.5..1.5);
                    if stream.random::<bool>() {
                        v
                    } else {
                        -v
                    }
                })
                .collect(),
        };
        let coeffs: Vec<(usize, f64)> = shape.wavenumbers.iter().copied().zip(magnitudes).collect();
        let col = dct_synthesize(n, &coeffs)?;
        p.set_column(j, &(&col / col.norm()));
    }
    if shapes.len() > 1 {
        let svd = truncated_svd(&p, shapes.len())?;
        if svd.is_rank_deficient() || svd.s[svd.rank() - 1] < 1e-8 * svd.s[0] {
            return Err(Error::InvalidArgument(
                "lifting modes are linearly dependent".into(),
            ));
        }
    }
    Ok(p)
}

/// `x̃_{k+1} = Ã x̃_k + B̃ u_k`, observed through `x_k = P x̃_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankPlant {
    pub atilde: RealMatrix,
    pub btilde: RealMatrix,
    pub lifting: RealMatrix,
    pub dt: f64,
}

impl LowRankPlant {
    pub fn new(
        atilde: RealMatrix,
        btilde: RealMatrix,
        lifting: RealMatrix,
        dt: f64,
    ) -> Result<Self> {
        let k = atilde.nrows();
        if atilde.ncols() != k {
            return Err(Error::dims("plant Ã (square)", k, atilde.ncols()));
        }
        if btilde.nrows() != k {
            return Err(Error::dims("plant B̃ (rows)", k, btilde.nrows()));
        }
        if lifting.ncols() != k {
            return Err(Error::dims("plant lifting P (columns)", k, lifting.ncols()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        Ok(LowRankPlant {
            atilde,
            btilde,
            lifting,
            dt,
        })
    }

    /// The stable, controllable two-state system with `Ã = [[0.9, 0.2],
    /// [−0.1, 0.9]]`, `B̃ = [0.1, 0.01]ᵀ`, `dt = 0.1`, lifted to `n` states.
    pub fn two_state(n: usize) -> Result<Self> {
        let lifting = build_lifting_modes(n, 4, &ModeShape::default_pair(), 0)?;
        LowRankPlant::new(
            dmatrix![0.9, 0.2; -0.1, 0.9],
            dmatrix![0.1; 0.01],
            lifting,
            0.1,
        )
    }

    pub const TWO_STATE_X0: [f64; 2] = [0.25, 0.25];

    /// A plant with the given discrete spectrum. Each eigenvalue with
    /// positive imaginary part stands for a conjugate pair; `Ã` is the
    /// corresponding real block-diagonal matrix, `B̃` has i.i.d. standard
    /// normal entries and every lifting column has `k_p` random DCT
    /// wavenumbers below `min(n, 256)` with random magnitudes.
    pub fn from_spectrum(
        n: usize,
        spectrum: &[Complex64],
        q: usize,
        k_p: usize,
        dt: f64,
        seed: u64,
    ) -> Result<Self> {
        if spectrum.iter().any(|z| z.im < 0.0) {
            return Err(Error::InvalidArgument(
                "list each conjugate pair once, by its member with positive imaginary part".into(),
            ));
        }
        let k: usize = spectrum
            .iter()
            .map(|z| if z.im > 0.0 { 2 } else { 1 })
            .sum();
        if k == 0 || q == 0 {
            return Err(Error::InvalidArgument(
                "plant needs at least one state and one input".into(),
            ));
        }
        let mut atilde = RealMatrix::zeros(k, k);
        let mut i = 0;
        for z in spectrum {
            if z.im > 0.0 {
                atilde[(i, i)] = z.re;
                atilde[(i, i + 1)] = z.im;
                atilde[(i + 1, i)] = -z.im;
                atilde[(i + 1, i + 1)] = z.re;
                i += 2;
            } else {
                atilde[(i, i)] = z.re;
                i += 1;
            }
        }
        let mut aux = rng::stream(seed, rng::AUXILIARY);
        let btilde = RealMatrix::from_fn(k, q, |_, _| aux.sample(StandardNormal));
        let limit = n.min(256);
        if k_p > limit {
            return Err(Error::InvalidArgument(format!(
                "K_P = {k_p} exceeds the {limit} available wavenumbers"
            )));
        }
        let mut support = rng::stream(seed, rng::LIFTING.wrapping_sub(16));
        let shapes: Vec<ModeShape> = (0..k)
            .map(|_| ModeShape {
                wavenumbers: rand::seq::index::sample(&mut support, limit, k_p).into_vec(),
                magnitudes: None,
            })
            .collect();
        let lifting = build_lifting_modes(n, k_p, &shapes, seed)?;
        LowRankPlant::new(atilde, btilde, lifting, dt)
    }

    /// Nine states: four lightly damped oscillations and one real decay.
    pub fn rank_nine(n: usize, seed: u64) -> Result<Self> {
        let spectrum: Vec<Complex64> = [(0.98, 0.1), (0.96, 0.25), (0.94, 0.45), (0.92, 0.7)]
            .iter()
            .map(|&(r, theta)| Complex64::from_polar(r, theta))
            .chain(std::iter::once(Complex64::new(0.95, 0.0)))
            .collect();
        LowRankPlant::from_spectrum(n, &spectrum, 1, 4, 0.1, seed)
    }

    pub fn n(&self) -> usize {
        self.lifting.nrows()
    }

    pub fn k(&self) -> usize {
        self.atilde.nrows()
    }

    pub fn q(&self) -> usize {
        self.btilde.ncols()
    }

    /// `B = P B̃`.
    pub fn b(&self) -> RealMatrix {
        &self.lifting * &self.btilde
    }

    /// Eigenvalues of `Ã` and the unit-norm lifted modes `P W`.
    pub fn truth(&self) -> Result<(ComplexVector, ComplexMatrix)> {
        let dec = eig(&self.atilde)?;
        let mut modes = real_times_complex(&self.lifting, &dec.vectors);
        normalize_columns(&mut modes);
        fix_phase(&mut modes);
        Ok((dec.values, modes))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    /// i.i.d. `N(0, std²)` inputs from the forcing stream of `seed`.
    Gaussian {
        std: f64,
        seed: u64,
    },
    Zero,
    /// Explicit `q × m` input record.
    Given(RealMatrix),
}

impl Forcing {
    fn realize(&self, q: usize, m: usize) -> Result<RealMatrix> {
        match self {
            Forcing::Zero => Ok(RealMatrix::zeros(q, m)),
            Forcing::Gaussian { std, seed } => {
                let mut stream = rng::stream(*seed, rng::FORCING);
                let mut u = RealMatrix::zeros(q, m);
                for v in u.iter_mut() {
                    *v = std * stream.sample::<f64, _>(StandardNormal);
                }
                Ok(u)
            }
            Forcing::Given(u) => {
                if u.nrows() != q || u.ncols() < m {
                    return Err(Error::dims(
                        "given forcing (q × m)",
                        format!("{q}×{m}"),
                        format!("{}×{}", u.nrows(), u.ncols()),
                    ));
                }
                Ok(u.columns(0, m).into_owned())
            }
        }
    }
}

/// Reduced-state trajectory `[x̃_0 … x̃_m]` and its inputs `[u_0 … u_{m−1}]`.
#[derive(Debug, Clone)]
pub struct ReducedRun {
    pub states: RealMatrix,
    pub inputs: RealMatrix,
}

impl ReducedRun {
    pub fn snapshots(&self) -> usize {
        self.states.ncols()
    }

    /// Compressed snapshot pair `(C P X̃, C P X̃′)` without forming the lifted
    /// trajectory.
    pub fn compressed(
        &self,
        plant: &LowRankPlant,
        c: &MeasurementOperator,
    ) -> Result<(RealMatrix, RealMatrix)> {
        let y = c.compress_factored(&plant.lifting, &self.states)?;
        let m = y.ncols() - 1;
        Ok((y.columns(0, m).into_owned(), y.columns(1, m).into_owned()))
    }
}

pub fn simulate_reduced(
    plant: &LowRankPlant,
    x0: &RealVector,
    forcing: &Forcing,
    snapshots: usize,
) -> Result<ReducedRun> {
    if snapshots < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 snapshots, got {snapshots}"
        )));
    }
    if x0.len() != plant.k() {
        return Err(Error::dims("reduced initial state", plant.k(), x0.len()));
    }
    let m = snapshots - 1;
    let inputs = forcing.realize(plant.q(), m)?;
    let mut states = RealMatrix::zeros(plant.k(), snapshots);
    states.set_column(0, x0);
    for k in 0..m {
        let next = &plant.atilde * states.column(k) + &plant.btilde * inputs.column(k);
        states.set_column(k + 1, &next);
    }
    Ok(ReducedRun { states, inputs })
}

#[derive(Debug, Clone)]
pub struct SyntheticRun {
    pub snapshots: SnapshotSet,
    /// Lifted trajectory `[x_0 … x_m]`.
    pub trajectory: RealMatrix,
    pub reduced: ReducedRun,
    pub true_eigenvalues: ComplexVector,
    pub true_modes: ComplexMatrix,
    pub b_true: RealMatrix,
}

/// Simulate `snapshots` states (`m = snapshots − 1` snapshot pairs) and lift
/// them through `P`.
pub fn simulate(
    plant: &LowRankPlant,
    x0: &RealVector,
    forcing: &Forcing,
    snapshots: usize,
) -> Result<SyntheticRun> {
    let reduced = simulate_reduced(plant, x0, forcing, snapshots)?;
    let trajectory = &plant.lifting * &reduced.states;
    let set = SnapshotSet::from_trajectory(&trajectory, Some(reduced.inputs.clone()), plant.dt)?;
    let (true_eigenvalues, true_modes) = plant.truth()?;
    Ok(SyntheticRun {
        snapshots: set,
        trajectory,
        reduced,
        true_eigenvalues,
        true_modes,
        b_true: plant.b(),
    })
}
