//! Per-realization computations and the records stored for them.

use homfluct::correctors::CorrectorPack;
use homfluct::lattice::{EdgeField, MatrixField, TorusGrid};
use homfluct::random_fields::{sample_field, ConductanceLaw, SeedSpec, StreamPurpose};
use homfluct::solver::{SolveConfig, SolveReport};
use homfluct::stats::moments::corrector_moments;
use homfluct::stats::{corrector_functionals_discrete, j0, GreenKuboWindow, SolutionProblem, TestFunction};
use homfluct::Matrix;
use serde::{Deserialize, Serialize};

use crate::cache::{catch_nonconvergence, Outcome, RealizationStore};
use crate::config::TestFunctions;
use crate::error::Result;

/// Everything a stored realization depends on besides its index.
#[derive(Serialize)]
pub struct StoreKey<'a, E: Serialize> {
    pub master_seed: u64,
    pub purpose: StreamPurpose,
    pub dim: usize,
    pub side: usize,
    pub law: &'a ConductanceLaw,
    pub solver: &'a SolveConfig,
    pub extra: E,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbarRecord {
    pub abar: Matrix<f64>,
    pub reports: Vec<SolveReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GkRecord {
    pub abar: Matrix<f64>,
    pub raw: Vec<f64>,
    pub means: Vec<f64>,
    pub reports: Vec<SolveReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalRecord {
    pub abar: Matrix<f64>,
    pub j0: f64,
    pub j1: f64,
    pub j2: f64,
    pub i1: f64,
    pub i2: f64,
    pub e0_flux: f64,
    pub e0_commutator: f64,
    pub pathwise_lhs: f64,
    pub pathwise_rhs: f64,
    pub pathwise_scale: f64,
    pub reports: Vec<SolveReport>,
}

impl FunctionalRecord {
    pub fn e0(&self) -> f64 {
        self.e0_flux - self.e0_commutator
    }

    pub fn pathwise_discrepancy(&self) -> f64 {
        (self.pathwise_lhs - self.pathwise_rhs).abs() / self.pathwise_scale.max(f64::MIN_POSITIVE)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRecord {
    pub phi_sq: f64,
    pub grad_sq: f64,
    pub reports: Vec<SolveReport>,
}

/// Anything carrying the solver reports of its realization.
pub trait HasReports {
    fn reports(&self) -> &[SolveReport];
}

macro_rules! has_reports {
    ($($t:ty),*) => {$(
        impl HasReports for $t {
            fn reports(&self) -> &[SolveReport] {
                &self.reports
            }
        }
    )*};
}
has_reports!(AbarRecord, GkRecord, FunctionalRecord, MomentRecord);

pub struct Sampler<'a> {
    pub store: &'a RealizationStore,
    pub law: &'a ConductanceLaw,
    pub solver: &'a SolveConfig,
    pub master_seed: u64,
}

impl Sampler<'_> {
    fn key<E: Serialize>(&self, purpose: StreamPurpose, grid: &TorusGrid, extra: E) -> StoreKey<'_, E> {
        StoreKey {
            master_seed: self.master_seed,
            purpose,
            dim: grid.dim(),
            side: grid.side(),
            law: self.law,
            solver: self.solver,
            extra,
        }
    }

    fn field(&self, grid: TorusGrid, purpose: StreamPurpose, r: u64) -> EdgeField<f64> {
        sample_field::<f64>(grid, self.law, SeedSpec::new(self.master_seed, r, purpose))
    }

    pub fn abar(&self, grid: TorusGrid, n: u64, purpose: StreamPurpose) -> Result<Vec<Outcome<AbarRecord>>> {
        self.store.get_or_compute("abar", &self.key(purpose, &grid, ()), n, |r| {
            catch_nonconvergence(
                CorrectorPack::build(&self.field(grid, purpose, r), self.solver, false)
                    .map(|p| AbarRecord { abar: p.abar, reports: p.reports }),
            )
        })
    }

    pub fn green_kubo(
        &self,
        grid: TorusGrid,
        window: usize,
        reference: &Matrix<f64>,
        n: u64,
    ) -> Result<Vec<Outcome<GkRecord>>> {
        let gk = GreenKuboWindow::new(grid, window)?;
        let key = self.key(StreamPurpose::Field, &grid, (window, reference));
        self.store.get_or_compute("gk", &key, n, |r| {
            catch_nonconvergence(
                CorrectorPack::build(&self.field(grid, StreamPurpose::Field, r), self.solver, false).and_then(|p| {
                    let rec = gk.record(&p.commutator(reference))?;
                    Ok(GkRecord { abar: p.abar, raw: rec.raw, means: rec.means, reports: p.reports })
                }),
            )
        })
    }

    pub fn moments(&self, grid: TorusGrid, n: u64) -> Result<Vec<Outcome<MomentRecord>>> {
        self.store.get_or_compute("moments", &self.key(StreamPurpose::Field, &grid, 0usize), n, |r| {
            let seed = SeedSpec::new(self.master_seed, r, StreamPurpose::Field);
            catch_nonconvergence(corrector_moments(grid, self.law, seed, 0, self.solver).map(|m| MomentRecord {
                phi_sq: m.phi_sq,
                grad_sq: m.grad_sq,
                reports: vec![m.report],
            }))
        })
    }

    /// Functionals on `grid`. With `doubled`, the test functions are shrunk
    /// by two and the values rescaled by `2^{d/2}`, which is the same `ε` on a
    /// box twice as large.
    pub fn functionals(
        &self,
        grid: TorusGrid,
        tests: &TestFunctions,
        reference: Option<&Matrix<f64>>,
        doubled: bool,
        n: u64,
    ) -> Result<Vec<Outcome<FunctionalRecord>>> {
        let d = grid.dim();
        let (profile, factor) = if doubled {
            let p = &tests.profile;
            (TestFunction::new(p.kind, p.center.clone(), p.width / 2.0)?, 2f64.powf(d as f64 / 2.0))
        } else {
            (tests.profile.clone(), 1.0)
        };
        let ftensor: MatrixField<f64> = profile.tensor(grid, &tests.tensor)?;
        let fvec = profile.vector(grid, &tests.f)?;
        let gvec = profile.vector(grid, &tests.g)?;
        let shared = match reference {
            Some(m) => Some(SolutionProblem::new(grid, &fvec, &gvec, m, self.solver)?),
            None => None,
        };
        let extra = (
            &tests.profile,
            &tests.tensor,
            &tests.f,
            &tests.g,
            reference,
            doubled,
        );
        let key = self.key(StreamPurpose::Field, &grid, extra);
        self.store.get_or_compute("functionals", &key, n, |r| {
            catch_nonconvergence((|| {
                let a = self.field(grid, StreamPurpose::Field, r);
                let pack = CorrectorPack::build(&a, self.solver, false)?;
                let own;
                let problem = match &shared {
                    Some(p) => p,
                    None => {
                        own = SolutionProblem::new(grid, &fvec, &gvec, &pack.abar.symmetrized(), self.solver)?;
                        &own
                    }
                };
                let reference = problem.reference().clone();
                let xi = pack.commutator(&reference);
                let cf = corrector_functionals_discrete(&pack, &ftensor, &reference);
                let s = problem.evaluate(&a, &xi)?;
                let mut reports = pack.reports.clone();
                reports.push(s.report);
                Ok(FunctionalRecord {
                    abar: pack.abar.clone(),
                    j0: factor * j0(&xi, &ftensor),
                    j1: factor * cf.j1,
                    j2: factor * cf.j2,
                    i1: factor * s.i1,
                    i2: factor * s.i2,
                    e0_flux: factor * s.e0_flux,
                    e0_commutator: factor * s.e0_commutator,
                    pathwise_lhs: factor * s.pathwise_lhs,
                    pathwise_rhs: factor * s.pathwise_rhs,
                    pathwise_scale: factor * s.pathwise_scale,
                    reports,
                })
            })())
        })
    }
}
