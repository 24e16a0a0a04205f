//! The discrete mixed-boundary Laplacian on the free nodes.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{check_grid, BoundaryField, Grid, NodeKind, ScalarField};
use crate::sparse::CsrMatrix;

/// Treatment of the Neumann edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryScheme {
    /// Ghost node reflected through the boundary, `f_{N+1} = f_{N−1} + 2h·g`.
    /// Second order; symmetric under the trapezoid weights.
    #[default]
    GhostPoint,
    /// One-sided ghost, `f_{N+1} = f_N + h·g`. First order. This is the
    /// treatment that yields `λ₁ ≈ −4.6947` on the 21×21 unit square.
    OneSided,
}

impl BoundaryScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryScheme::GhostPoint => "ghost",
            BoundaryScheme::OneSided => "one-sided",
        }
    }

    fn load_factor(self) -> f64 {
        match self {
            BoundaryScheme::GhostPoint => 2.0,
            BoundaryScheme::OneSided => 1.0,
        }
    }
}

impl fmt::Display for BoundaryScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ghost" | "ghost-point" | "ghost_point" => Ok(BoundaryScheme::GhostPoint),
            "one-sided" | "one_sided" | "onesided" => Ok(BoundaryScheme::OneSided),
            other => Err(Error::UnknownScheme(other.to_string())),
        }
    }
}

/// Sparse `Δ_h` acting on free degrees of freedom, with homogeneous Neumann
/// data on Γ₁. Inhomogeneous data enters through [`LinearOperator::neumann_load`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    grid: Grid,
    scheme: BoundaryScheme,
    matrix: CsrMatrix,
    symmetrizer: Vec<f64>,
}

/// Assembles the 5-point Laplacian with Dirichlet rows eliminated.
pub fn assemble_laplacian(grid: &Grid, scheme: BoundaryScheme) -> LinearOperator {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (ax, ay) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
    let mut rows = Vec::with_capacity(grid.free_count());
    for k in 0..grid.free_count() {
        let (i, j) = grid.free_node(k);
        let mut row = Vec::with_capacity(5);
        axis_stencil(&mut row, scheme, ax, i, nx, |ii| grid.free_index(ii, j));
        axis_stencil(&mut row, scheme, ay, j, ny, |jj| grid.free_index(i, jj));
        rows.push(row);
    }
    let symmetrizer = match scheme {
        BoundaryScheme::GhostPoint => grid.free_weights(),
        BoundaryScheme::OneSided => vec![grid.hx() * grid.hy(); grid.free_count()],
    };
    LinearOperator { grid: *grid, scheme, matrix: CsrMatrix::from_rows(rows), symmetrizer }
}

fn axis_stencil(
    row: &mut Vec<(usize, f64)>,
    scheme: BoundaryScheme,
    inv_h2: f64,
    pos: usize,
    count: usize,
    index: impl Fn(usize) -> Option<usize>,
) {
    let me = index(pos).expect("free node");
    if pos == count - 1 {
        // Neumann edge.
        let (neighbor, diag) = match scheme {
            BoundaryScheme::GhostPoint => (2.0, -2.0),
            BoundaryScheme::OneSided => (1.0, -1.0),
        };
        row.push((me, diag * inv_h2));
        if let Some(nb) = index(pos - 1) {
            row.push((nb, neighbor * inv_h2));
        }
    } else {
        row.push((me, -2.0 * inv_h2));
        if let Some(nb) = index(pos - 1) {
            row.push((nb, inv_h2));
        }
        if let Some(nb) = index(pos + 1) {
            row.push((nb, inv_h2));
        }
    }
}

impl LinearOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn scheme(&self) -> BoundaryScheme {
        self.scheme
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Diagonal `D` with `D·L` symmetric. Equals the trapezoid weights for
    /// the ghost-point scheme.
    pub fn symmetrizer(&self) -> &[f64] {
        &self.symmetrizer
    }

    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        check_grid(&self.grid, f.grid())?;
        let mut out = vec![0.0; self.dim()];
        self.matrix.mul_vec(f.values(), &mut out);
        ScalarField::from_values(self.grid, out)
    }

    /// Load vector `b(g)` such that `L f + b(g)` is `Δ_h f` for a field whose
    /// normal derivative on Γ₁ is `g`. Linear in `g`.
    pub fn neumann_load(&self, g: &BoundaryField) -> Result<ScalarField> {
        neumann_load(&self.grid, self.scheme, g)
    }

    /// `max |W·L − Lᵀ·W|` with `W` the trapezoid weights.
    pub fn symmetry_defect(&self) -> f64 {
        let w = self.grid.free_weights();
        let mut worst = 0.0f64;
        for r in 0..self.dim() {
            for (c, v) in self.matrix.row(r) {
                let vt = self.matrix.get(c, r);
                worst = worst.max((w[r] * v - vt * w[c]).abs());
            }
        }
        worst
    }
}

/// See [`LinearOperator::neumann_load`].
pub fn neumann_load(grid: &Grid, scheme: BoundaryScheme, g: &BoundaryField) -> Result<ScalarField> {
    check_grid(grid, g.grid())?;
    let c = scheme.load_factor();
    let mut load = ScalarField::zeros(*grid);
    for (k, &gk) in g.values().iter().enumerate() {
        let (i, j) = grid.gamma1_node(k);
        let dof = grid.free_index(i, j).expect("Γ₁ nodes are free");
        let mut v = 0.0;
        match grid.kind(i, j) {
            NodeKind::NeumannX => v += c * gk / grid.hx(),
            NodeKind::NeumannY => v += c * gk / grid.hy(),
            NodeKind::CornerNeumann => v += c * gk / grid.hx() + c * gk / grid.hy(),
            _ => unreachable!("Γ₁ node"),
        }
        load.values_mut()[dof] = v;
    }
    Ok(load)
}
