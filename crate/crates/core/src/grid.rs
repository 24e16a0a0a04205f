//! Rectangle discretization `[0,a]×[0,b]` and the fields that live on it.
//!
//! Nodes are indexed by `(i, j)` with `x = i·h_x`, `y = j·h_y`. The edges
//! `x = 0` and `y = 0` are clamped (Γ₀); the edges `x = a` and `y = b` carry
//! the Neumann data (Γ₁). Where the two parts meet, at `(a, 0)` and `(0, b)`,
//! the Dirichlet condition wins.
//!
//! A [`ScalarField`] stores one value per free node (every node that is not
//! on Γ₀), in row-major order (`j` outer, `i` inner). A [`BoundaryField`]
//! stores one value per Γ₁ node, walking counterclockwise from `(a, h_y)` up
//! to the corner `(a, b)` and then left along `y = b` to `(h_x, b)`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Classification of a grid node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Dirichlet,
    /// Edge `x = a`, excluding the corners.
    NeumannX,
    /// Edge `y = b`, excluding the corners.
    NeumannY,
    /// The corner `(a, b)` where both Neumann edges meet.
    CornerNeumann,
    /// The corners `(a, 0)` and `(0, b)`; pinned to zero.
    CornerDirichlet,
}

impl NodeKind {
    pub fn is_free(self) -> bool {
        !matches!(self, NodeKind::Dirichlet | NodeKind::CornerDirichlet)
    }

    pub fn on_gamma1(self) -> bool {
        matches!(self, NodeKind::NeumannX | NodeKind::NeumannY | NodeKind::CornerNeumann)
    }
}

/// Uniform tensor grid on a rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Grid {
    pub fn new(a: f64, b: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "side lengths must be positive and finite (a = {a}, b = {b})"
            )));
        }
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis (nx = {nx}, ny = {ny})"
            )));
        }
        Ok(Grid {
            a,
            b,
            nx,
            ny,
            hx: a / (nx - 1) as f64,
            hy: b / (ny - 1) as f64,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn kind(&self, i: usize, j: usize) -> NodeKind {
        let (last_i, last_j) = (self.nx - 1, self.ny - 1);
        match (i, j) {
            (i, j) if (i == last_i && j == 0) || (i == 0 && j == last_j) => NodeKind::CornerDirichlet,
            (0, _) | (_, 0) => NodeKind::Dirichlet,
            (i, j) if i == last_i && j == last_j => NodeKind::CornerNeumann,
            (i, _) if i == last_i => NodeKind::NeumannX,
            (_, j) if j == last_j => NodeKind::NeumannY,
            _ => NodeKind::Interior,
        }
    }

    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        let x = if i == self.nx - 1 { self.a } else { i as f64 * self.hx };
        let y = if j == self.ny - 1 { self.b } else { j as f64 * self.hy };
        (x, y)
    }

    /// Number of free degrees of freedom, `(nx−1)(ny−1)`.
    pub fn free_count(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    pub fn free_index(&self, i: usize, j: usize) -> Option<usize> {
        if i == 0 || j == 0 || i >= self.nx || j >= self.ny {
            return None;
        }
        Some((j - 1) * (self.nx - 1) + (i - 1))
    }

    pub fn free_node(&self, k: usize) -> (usize, usize) {
        let w = self.nx - 1;
        (k % w + 1, k / w + 1)
    }

    /// Number of Γ₁ nodes, the `(a, b)` corner counted once.
    pub fn gamma1_count(&self) -> usize {
        (self.ny - 1) + (self.nx - 2)
    }

    pub fn gamma1_node(&self, k: usize) -> (usize, usize) {
        let up = self.ny - 1;
        if k < up {
            (self.nx - 1, k + 1)
        } else {
            (self.nx - 2 - (k - up), self.ny - 1)
        }
    }

    pub fn gamma1_index(&self, i: usize, j: usize) -> Option<usize> {
        match self.kind(i, j) {
            NodeKind::NeumannX | NodeKind::CornerNeumann if i == self.nx - 1 => Some(j - 1),
            NodeKind::NeumannY => Some(self.ny - 1 + (self.nx - 2 - i)),
            _ => None,
        }
    }

    /// Tensor trapezoid weight of node `(i, j)` over Ω (every node, Γ₀ included).
    pub fn omega_weight(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i == self.nx - 1 { 0.5 * self.hx } else { self.hx };
        let wy = if j == 0 || j == self.ny - 1 { 0.5 * self.hy } else { self.hy };
        wx * wy
    }

    /// Trapezoid weights of the closed Neumann boundary `x = a` ∪ `y = b`,
    /// including the Dirichlet endpoints `(a, 0)` and `(0, b)`. The corner
    /// `(a, b)` appears once with weight `h_x/2 + h_y/2`. Sums to `a + b`.
    pub fn closed_gamma1_quadrature(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        let last_i = self.nx - 1;
        let last_j = self.ny - 1;
        let right = (0..last_j).map(move |j| {
            let w = if j == 0 { 0.5 * self.hy } else { self.hy };
            ((last_i, j), w)
        });
        let corner = core::iter::once(((last_i, last_j), 0.5 * (self.hx + self.hy)));
        let top = (0..last_i).rev().map(move |i| {
            let w = if i == 0 { 0.5 * self.hx } else { self.hx };
            ((i, last_j), w)
        });
        right.chain(corner).chain(top)
    }

    /// Quadrature weights of the free nodes (the diagonal of `W`).
    pub fn free_weights(&self) -> Vec<f64> {
        (0..self.free_count())
            .map(|k| {
                let (i, j) = self.free_node(k);
                self.omega_weight(i, j)
            })
            .collect()
    }

    /// Quadrature weights of the Γ₁ nodes.
    pub fn gamma1_weights(&self) -> Vec<f64> {
        (0..self.gamma1_count())
            .map(|k| {
                let (i, j) = self.gamma1_node(k);
                match self.kind(i, j) {
                    NodeKind::CornerNeumann => 0.5 * (self.hx + self.hy),
                    NodeKind::NeumannX => self.hy,
                    _ => self.hx,
                }
            })
            .collect()
    }
}

/// Grid function on Ω; values on Γ₀ are identically zero and not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField { grid, values: alloc::vec![0.0; grid.free_count()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.free_count() {
            return Err(Error::ShapeMismatch { expected: grid.free_count(), found: values.len() });
        }
        Ok(ScalarField { grid, values })
    }

    /// Samples `f(x, y)` on the free nodes.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = (0..grid.free_count())
            .map(|k| {
                let (i, j) = grid.free_node(k);
                let (x, y) = grid.coords(i, j);
                f(x, y)
            })
            .collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at node `(i, j)`, zero on Γ₀.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.grid.free_index(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: f64, other: &ScalarField) -> Result<()> {
        check_grid(&self.grid, &other.grid)?;
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += c * o;
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(weighted_dot(&self.values, &self.values, &self.grid.free_weights()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Grid function on Γ₁.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    grid: Grid,
    values: Vec<f64>,
}

impl BoundaryField {
    pub fn zeros(grid: Grid) -> Self {
        BoundaryField { grid, values: alloc::vec![0.0; grid.gamma1_count()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.gamma1_count() {
            return Err(Error::ShapeMismatch { expected: grid.gamma1_count(), found: values.len() });
        }
        Ok(BoundaryField { grid, values })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = (0..grid.gamma1_count())
            .map(|k| {
                let (i, j) = grid.gamma1_node(k);
                let (x, y) = grid.coords(i, j);
                f(x, y)
            })
            .collect();
        BoundaryField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    pub fn axpy(&mut self, c: f64, other: &BoundaryField) -> Result<()> {
        check_grid(&self.grid, &other.grid)?;
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += c * o;
        }
        Ok(())
    }

    /// Pointwise product, the multiplication operator `Q`.
    pub fn pointwise(&self, other: &BoundaryField) -> Result<BoundaryField> {
        check_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(BoundaryField { grid: self.grid, values })
    }

    /// `∫_{Γ₁} f`.
    pub fn integral(&self) -> f64 {
        self.grid.gamma1_weights().iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(weighted_dot(&self.values, &self.values, &self.grid.gamma1_weights()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn check_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

pub(crate) fn weighted_dot(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| w * x * y).sum()
}

/// `⟨f, g⟩_{L²(Ω)}` by the trapezoid rule.
pub fn inner_product_omega(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    check_grid(&f.grid, &g.grid)?;
    Ok(weighted_dot(&f.values, &g.values, &f.grid.free_weights()))
}

/// `⟨f, g⟩_{L²(Γ₁)}` by the trapezoid rule.
pub fn inner_product_gamma1(f: &BoundaryField, g: &BoundaryField) -> Result<f64> {
    check_grid(&f.grid, &g.grid)?;
    Ok(weighted_dot(&f.values, &g.values, &f.grid.gamma1_weights()))
}

/// Restriction `B*f = f|_{Γ₁}`.
pub fn boundary_trace(f: &ScalarField) -> BoundaryField {
    let grid = f.grid;
    let values = (0..grid.gamma1_count())
        .map(|k| {
            let (i, j) = grid.gamma1_node(k);
            f.at(i, j)
        })
        .collect();
    BoundaryField { grid, values }
}
