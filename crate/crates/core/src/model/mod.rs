//! DAE systems `E(x)ẋ = F(x)`, local charts into the index-1 normal form and
//! the scenario registry.

mod document;
mod scenarios;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numkit::linalg::{align_basis, left_kernel_matrix, row_compress};
use crate::numkit::{default_fd_step, fd_jacobian, numeric_rank, Matrix, Vector, DEFAULT_RANK_TOL};

pub use document::{LinearSpec, ScenarioDocument};
pub use scenarios::{
    builtin, builtin_names, cubic_branch_root, scenario_circuit, scenario_contact, scenario_cubic, scenario_linear,
    LinearDecoupling, CHART_MARGIN,
};

pub type VectorMap = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type MatrixMap = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
pub type FallibleMap = Arc<dyn Fn(&Vector) -> Result<Vector> + Send + Sync>;
pub type Predicate = Arc<dyn Fn(&Vector) -> bool + Send + Sync>;

/// An open set given by a membership test plus a description for messages.
#[derive(Clone)]
pub struct Domain {
    predicate: Predicate,
    description: String,
}

impl Domain {
    pub fn new(description: impl Into<String>, predicate: impl Fn(&Vector) -> bool + Send + Sync + 'static) -> Self {
        Self {
            predicate: Arc::new(predicate),
            description: description.into(),
        }
    }

    pub fn everywhere(n: usize) -> Self {
        Self::new(format!("R^{n}"), |_| true)
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.iter().all(|v| v.is_finite()) && (self.predicate)(x)
    }

    pub fn check(&self, x: &Vector) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                state: x.iter().copied().collect(),
                description: self.description.clone(),
            })
        }
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Domain").field(&self.description).finish()
    }
}

/// Closed-form algebraic constraint `F₂` and its Jacobian, for systems where
/// the split is known analytically.
#[derive(Clone)]
pub struct Constraint {
    pub value: VectorMap,
    pub jacobian: MatrixMap,
}

/// `E(x)ẋ = F(x)` on an open set.
#[derive(Clone)]
pub struct DaeSystem {
    pub n: usize,
    pub e: MatrixMap,
    pub f: VectorMap,
    pub df: Option<MatrixMap>,
    pub constraint: Option<Constraint>,
    pub domain: Domain,
    pub nominal_point: Vector,
}

impl fmt::Debug for DaeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DaeSystem")
            .field("n", &self.n)
            .field("domain", &self.domain)
            .field("analytic_df", &self.df.is_some())
            .field("analytic_constraint", &self.constraint.is_some())
            .finish()
    }
}

impl DaeSystem {
    fn check_input(&self, x: &Vector) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "state has {} components, system dimension is {}",
                x.len(),
                self.n
            )));
        }
        self.domain.check(x)
    }

    pub fn eval_e(&self, x: &Vector) -> Result<Matrix> {
        self.check_input(x)?;
        let e = (self.e)(x);
        if !e.iter().all(|v| v.is_finite()) {
            return Err(Error::Evaluation {
                location: x.iter().copied().collect(),
                message: "E(x) is not finite".into(),
            });
        }
        Ok(e)
    }

    pub fn eval_f(&self, x: &Vector) -> Result<Vector> {
        self.check_input(x)?;
        let f = (self.f)(x);
        if !f.iter().all(|v| v.is_finite()) {
            return Err(Error::Evaluation {
                location: x.iter().copied().collect(),
                message: "F(x) is not finite".into(),
            });
        }
        Ok(f)
    }

    /// Analytic `DF` when supplied, central differences otherwise.
    pub fn jacobian_f(&self, x: &Vector) -> Result<Matrix> {
        self.check_input(x)?;
        match &self.df {
            Some(df) => Ok(df(x)),
            None => fd_jacobian(|p: &Vector| self.eval_f(p), x, default_fd_step(x)),
        }
    }

    pub fn rank_e(&self, x: &Vector) -> Result<usize> {
        Ok(numeric_rank(&self.eval_e(x)?, DEFAULT_RANK_TOL)?.rank)
    }

    /// A smooth local representative of the algebraic constraints near
    /// `reference`.
    pub fn constraint_near(&self, reference: &Vector) -> Result<ConstraintMap<'_>> {
        if let Some(c) = &self.constraint {
            return Ok(ConstraintMap::Analytic(c));
        }
        let e = self.eval_e(reference)?;
        let left = left_kernel_matrix(&e, DEFAULT_RANK_TOL)?;
        Ok(ConstraintMap::Aligned {
            system: self,
            reference_basis: left,
        })
    }
}

/// `F₂ = Q₂(x)F(x)`, either in closed form or with `Q₂` taken from the left
/// null space of `E(x)` and rotated to match a reference basis so that it
/// varies smoothly.
pub enum ConstraintMap<'a> {
    Analytic(&'a Constraint),
    Aligned {
        system: &'a DaeSystem,
        reference_basis: Matrix,
    },
}

impl ConstraintMap<'_> {
    pub fn value(&self, x: &Vector) -> Result<Vector> {
        match self {
            ConstraintMap::Analytic(c) => Ok((c.value)(x)),
            ConstraintMap::Aligned { system, reference_basis } => {
                let e = system.eval_e(x)?;
                let left = left_kernel_matrix(&e, DEFAULT_RANK_TOL)?;
                if left.ncols() != reference_basis.ncols() {
                    return Err(Error::Evaluation {
                        location: x.iter().copied().collect(),
                        message: format!(
                            "rank of E changed (co-rank {} vs {} at the reference)",
                            left.ncols(),
                            reference_basis.ncols()
                        ),
                    });
                }
                let q2 = align_basis(&left, reference_basis);
                Ok(q2.transpose() * system.eval_f(x)?)
            }
        }
    }

    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        match self {
            ConstraintMap::Analytic(c) => Ok((c.jacobian)(x)),
            ConstraintMap::Aligned { .. } => fd_jacobian(|p: &Vector| self.value(p), x, default_fd_step(x)),
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, ConstraintMap::Analytic(_))
    }
}

/// Local diffeomorphism `ψ = (ξ₁, ξ₂)` onto the normal-form coordinates,
/// with `ξ₁` of dimension `r`.
#[derive(Clone)]
pub struct Chart {
    pub r: usize,
    pub psi: VectorMap,
    pub psi_inv: FallibleMap,
    pub dpsi: MatrixMap,
    pub domain: Domain,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("r", &self.r)
            .field("domain", &self.domain)
            .finish()
    }
}

impl Chart {
    pub fn psi(&self, x: &Vector) -> Result<Vector> {
        self.domain.check(x)?;
        Ok((self.psi)(x))
    }

    /// Inverse chart; fails when `xi` is outside `ψ(V)`.
    pub fn psi_inv(&self, xi: &Vector) -> Result<Vector> {
        let x = (self.psi_inv)(xi)?;
        if !self.domain.contains(&x) {
            return Err(Error::ChartRange {
                xi: xi.iter().copied().collect(),
            });
        }
        Ok(x)
    }

    pub fn dpsi(&self, x: &Vector) -> Result<Matrix> {
        self.domain.check(x)?;
        Ok((self.dpsi)(x))
    }

    pub fn xi1(&self, x: &Vector) -> Result<Vector> {
        Ok(self.psi(x)?.rows(0, self.r).into_owned())
    }

    pub fn xi2(&self, x: &Vector) -> Result<Vector> {
        let xi = self.psi(x)?;
        let n = xi.len();
        Ok(xi.rows(self.r, n - self.r).into_owned())
    }

    /// Composes `ψ⁻¹(ξ₁, ξ₂)` from the two blocks.
    pub fn compose_inv(&self, xi1: &Vector, xi2: &Vector) -> Result<Vector> {
        let mut xi = Vector::zeros(xi1.len() + xi2.len());
        xi.rows_mut(0, xi1.len()).copy_from(xi1);
        xi.rows_mut(xi1.len(), xi2.len()).copy_from(xi2);
        self.psi_inv(&xi)
    }
}

/// Reduced dynamics `ξ̇₁ = F*(ξ₁)` and the left transformation `Q(x)` taking
/// the system to `diag(I, 0)·ξ̇ = (F*(ξ₁), ξ₂)` in chart coordinates.
#[derive(Clone)]
pub struct InwfData {
    pub f_star: VectorMap,
    pub q_equiv: MatrixMap,
}

impl fmt::Debug for InwfData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("InwfData")
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioDefaults {
    pub x_minus: Vector,
    pub t_end: f64,
    pub region_lower: Vector,
    pub region_upper: Vector,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub system: DaeSystem,
    pub chart: Option<Chart>,
    pub inwf: Option<InwfData>,
    pub reference_points: Vec<(String, Vector)>,
    pub notes: Vec<String>,
    /// Extra conditions selecting the local branch of the consistency
    /// manifold (e.g. `x₂ > √3/3` for the cubic example).
    pub manifold_branch: Domain,
    pub defaults: ScenarioDefaults,
    pub linear: Option<LinearSpec>,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.system.n
    }

    pub fn chart(&self) -> Result<&Chart> {
        self.chart
            .as_ref()
            .ok_or_else(|| Error::Capability(format!("scenario '{}' has no chart", self.name)))
    }

    pub fn inwf(&self) -> Result<&InwfData> {
        self.inwf
            .as_ref()
            .ok_or_else(|| Error::Capability(format!("scenario '{}' has no normal-form data", self.name)))
    }

    pub fn point(&self, name: &str) -> Option<&Vector> {
        self.reference_points.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    /// The same DAE written in chart coordinates: `E = diag(I_r, 0)`,
    /// `F(ξ) = (F*(ξ₁), ξ₂)`, with the identity as chart.
    pub fn inwf_system(&self) -> Result<Scenario> {
        let chart = self.chart()?.clone();
        let inwf = self.inwf()?.clone();
        let n = self.dim();
        let r = chart.r;

        let in_range = {
            let chart = chart.clone();
            move |xi: &Vector| chart.psi_inv(xi).is_ok()
        };
        let domain = Domain::new(format!("psi({})", chart.domain.description()), in_range);
        let branch = {
            let chart = chart.clone();
            let branch = self.manifold_branch.clone();
            Domain::new(format!("psi({})", branch.description()), move |xi: &Vector| {
                chart.psi_inv(xi).map(|x| branch.contains(&x)).unwrap_or(false)
            })
        };

        let e_const = {
            let mut e = Matrix::zeros(n, n);
            for i in 0..r {
                e[(i, i)] = 1.0;
            }
            e
        };
        let f_star = inwf.f_star.clone();
        let f: VectorMap = Arc::new(move |xi: &Vector| {
            let mut out = xi.clone();
            let head = f_star(&xi.rows(0, r).into_owned());
            out.rows_mut(0, r).copy_from(&head);
            out
        });
        let mut c_jac = Matrix::zeros(n - r, n);
        for i in 0..n - r {
            c_jac[(i, r + i)] = 1.0;
        }
        let constraint = Constraint {
            value: Arc::new(move |xi: &Vector| xi.rows(r, n - r).into_owned()),
            jacobian: Arc::new(move |_| c_jac.clone()),
        };
        let identity = Chart {
            r,
            psi: Arc::new(|xi: &Vector| xi.clone()),
            psi_inv: Arc::new(|xi: &Vector| Ok(xi.clone())),
            dpsi: Arc::new(move |_| Matrix::identity(n, n)),
            domain: domain.clone(),
        };
        let map_point = |p: &Vector| chart.psi(p);
        let reference_points = self
            .reference_points
            .iter()
            .filter_map(|(name, p)| map_point(p).ok().map(|xi| (name.clone(), xi)))
            .collect();
        let nominal = map_point(&self.system.nominal_point)?;
        let x_minus = map_point(&self.defaults.x_minus)?;

        Ok(Scenario {
            name: format!("{}-inwf", self.name),
            system: DaeSystem {
                n,
                e: Arc::new(move |_| e_const.clone()),
                f,
                df: None,
                constraint: Some(constraint),
                domain: domain.clone(),
                nominal_point: nominal,
            },
            chart: Some(identity),
            inwf: Some(InwfData {
                f_star: inwf.f_star.clone(),
                q_equiv: Arc::new(move |_| Matrix::identity(n, n)),
            }),
            reference_points,
            notes: vec![format!("normal form of '{}' in chart coordinates", self.name)],
            manifold_branch: branch,
            defaults: ScenarioDefaults {
                x_minus,
                t_end: self.defaults.t_end,
                region_lower: Vector::from_element(n, -0.5),
                region_upper: Vector::from_element(n, 0.5),
            },
            linear: None,
        })
    }
}

/// `F₂(x)` from a row compression of `E(x)`: the trailing `n − r` entries
/// of `Q(x)F(x)`. Vanishes exactly on the constraint set.
pub fn consistency_residual(s: &Scenario, x: &Vector) -> Result<Vector> {
    let e = s.system.eval_e(x)?;
    let f = s.system.eval_f(x)?;
    let rc = row_compress(&e, DEFAULT_RANK_TOL)?;
    Ok(rc.split(&f).1)
}
