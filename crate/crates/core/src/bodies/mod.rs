//! Convex bodies exposed through their support functions.
//!
//! Every body implements [`SupportBody`]. Besides `h(x)` a body may report a
//! supporting point (the maximizer `y` of `<x, y>`), which is the gradient of
//! `h` and lets the estimators climb without finite differences.

mod descriptor;
mod specialized;
mod symmetrized;

use std::fmt;

use crate::linalg::{dot, norm, OrthogonalBasis, UnitVector};
use crate::norms::inf_conv_sorted;
use crate::stats::EstimateWithCI;
use crate::{Error, Result};

pub use descriptor::{BodyDescriptor, StageDescriptor};
pub use specialized::{cross_dual_norm, kt_dual_norm};
pub use symmetrized::{symmetrize, symmetrize_basis, EvalMode, Stage, SymmetrizedBody, DEFAULT_EXACT_CAP};

/// A convex body known through `h(x) = sup_{y in K} <x, y>`.
pub trait SupportBody: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// `h(x)`; `x.len()` must equal [`SupportBody::dim`].
    fn h(&self, x: &[f64]) -> f64;

    /// `h(x)` with a 95% half-width when the evaluation is stochastic.
    fn h_ci(&self, x: &[f64]) -> EstimateWithCI {
        EstimateWithCI::exact(self.h(x))
    }

    /// Writes a maximizer of `<x, y>` over the body into `out` and returns `h(x)`.
    /// `None` when the body cannot produce one.
    fn supporting_point(&self, _x: &[f64], _out: &mut [f64]) -> Option<f64> {
        None
    }

    fn has_supporting_points(&self) -> bool {
        false
    }

    /// Evaluates `h` on the columns of the column-major `dim x cols` matrix `z`.
    /// When `points` is given and the body has supporting points, they are
    /// written column by column and `true` is returned.
    fn support_columns(&self, z: &[f64], values: &mut [f64], points: Option<&mut [f64]>) -> bool {
        let n = self.dim();
        match points {
            Some(points) if self.has_supporting_points() => {
                for ((col, v), out) in z.chunks_exact(n).zip(values.iter_mut()).zip(points.chunks_exact_mut(n)) {
                    *v = self.supporting_point(col, out).unwrap_or(f64::NAN);
                }
                true
            }
            _ => {
                for (col, v) in z.chunks_exact(n).zip(values.iter_mut()) {
                    *v = self.h(col);
                }
                false
            }
        }
    }

    fn is_centrally_symmetric(&self) -> bool {
        false
    }

    /// True when every reflection in `frame` maps the body onto itself.
    fn invariant_under_frame(&self, _frame: &OrthogonalBasis) -> bool {
        false
    }

    fn invariant_under_reflection(&self, _u: &UnitVector) -> bool {
        false
    }

    fn descriptor(&self) -> Option<BodyDescriptor> {
        None
    }
}

/// `h(x)` with dimension checking; Monte Carlo bodies report a 95% half-width.
pub fn support(body: &dyn SupportBody, x: &[f64]) -> Result<EstimateWithCI> {
    Error::check_dim(body.dim(), x.len())?;
    Ok(body.h_ci(x))
}

/// `rho * D`, the centred Euclidean ball.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanBall {
    n: usize,
    radius: f64,
}

impl EuclideanBall {
    pub fn new(n: usize, radius: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("dimension must be positive"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::arg(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { n, radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl SupportBody for EuclideanBall {
    fn dim(&self) -> usize {
        self.n
    }

    fn h(&self, x: &[f64]) -> f64 {
        self.radius * norm(x)
    }

    fn supporting_point(&self, x: &[f64], out: &mut [f64]) -> Option<f64> {
        let len = norm(x);
        if len > 0.0 {
            out.iter_mut().zip(x).for_each(|(o, v)| *o = self.radius * v / len);
        } else {
            out.fill(0.0);
        }
        Some(self.radius * len)
    }

    fn has_supporting_points(&self) -> bool {
        true
    }

    fn is_centrally_symmetric(&self) -> bool {
        true
    }

    fn invariant_under_frame(&self, frame: &OrthogonalBasis) -> bool {
        frame.dim() == self.n
    }

    fn invariant_under_reflection(&self, u: &UnitVector) -> bool {
        u.dim() == self.n
    }

    fn descriptor(&self) -> Option<BodyDescriptor> {
        Some(BodyDescriptor::Ball {
            n: self.n,
            radius: self.radius,
        })
    }
}

/// Convex hull of finitely many points; `h(x) = max_v <x, v>`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolytopeHull {
    n: usize,
    /// Column-major `n x count`.
    vertices: Vec<f64>,
}

impl PolytopeHull {
    pub fn new(vertices: &[Vec<f64>]) -> Result<Self> {
        let first = vertices.first().ok_or_else(|| Error::arg("hull needs at least one vertex"))?;
        let n = first.len();
        if n == 0 {
            return Err(Error::arg("vertices must have positive dimension"));
        }
        for v in vertices {
            Error::check_dim(n, v.len())?;
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::arg("vertex coordinates must be finite"));
            }
        }
        Ok(Self {
            n,
            vertices: vertices.concat(),
        })
    }

    /// The segment `conv{a, b}`.
    pub fn segment(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Self::new(&[a, b])
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len() / self.n
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.vertices.chunks_exact(self.n)
    }

    fn best(&self, x: &[f64]) -> (usize, f64) {
        self.vertices()
            .map(|v| dot(v, x))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, s)| if s > b.1 { (i, s) } else { b })
    }
}

impl SupportBody for PolytopeHull {
    fn dim(&self) -> usize {
        self.n
    }

    fn h(&self, x: &[f64]) -> f64 {
        self.best(x).1
    }

    fn supporting_point(&self, x: &[f64], out: &mut [f64]) -> Option<f64> {
        let (i, s) = self.best(x);
        out.copy_from_slice(&self.vertices[i * self.n..(i + 1) * self.n]);
        Some(s)
    }

    fn has_supporting_points(&self) -> bool {
        true
    }

    fn support_columns(&self, z: &[f64], values: &mut [f64], points: Option<&mut [f64]>) -> bool {
        let n = self.n;
        let count = self.vertex_count();
        let cols = values.len();
        let mut dots = vec![0.0; count * cols];
        crate::kernels::gemm_tn(count, n, cols, &self.vertices, z, &mut dots);
        let mut best = vec![0usize; cols];
        for (j, col) in dots.chunks_exact(count).enumerate() {
            let (i, s) = col
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &s)| if s > b.1 { (i, s) } else { b });
            values[j] = s;
            best[j] = i;
        }
        if let Some(points) = points {
            for (out, &i) in points.chunks_exact_mut(n).zip(&best) {
                out.copy_from_slice(&self.vertices[i * n..(i + 1) * n]);
            }
            true
        } else {
            false
        }
    }

    fn descriptor(&self) -> Option<BodyDescriptor> {
        Some(BodyDescriptor::Hull {
            n: self.n,
            vertices: self.vertices().map(<[f64]>::to_vec).collect(),
        })
    }
}

/// `rho * conv{+-e_i}` for an orthonormal frame `{e_i}`; `h(x) = rho max_i |<x, e_i>|`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledCrossPolytope {
    n: usize,
    scale: f64,
    /// `None` is the standard frame.
    frame: Option<OrthogonalBasis>,
}

impl ScaledCrossPolytope {
    pub fn new(n: usize, scale: f64, frame: Option<OrthogonalBasis>) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("dimension must be positive"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::arg(format!("scale must be positive, got {scale}")));
        }
        if let Some(f) = &frame {
            Error::check_dim(n, f.dim())?;
        }
        Ok(Self { n, scale, frame })
    }

    /// `sqrt(n) conv{+-e_i}` in the standard frame.
    pub fn normalized(n: usize) -> Result<Self> {
        Self::new(n, (n as f64).sqrt(), None)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn frame(&self) -> OrthogonalBasis {
        self.frame.clone().unwrap_or_else(|| OrthogonalBasis::identity(self.n))
    }

    fn coords<'a>(&self, x: &'a [f64]) -> std::borrow::Cow<'a, [f64]> {
        match &self.frame {
            None => std::borrow::Cow::Borrowed(x),
            Some(f) => std::borrow::Cow::Owned(f.coords(x)),
        }
    }

    fn write_point(&self, coords: &[f64], out: &mut [f64]) -> f64 {
        let (j, m) = argmax_abs(coords);
        let s = if coords[j] < 0.0 { -self.scale } else { self.scale };
        match &self.frame {
            None => {
                out.fill(0.0);
                out[j] = s;
            }
            Some(f) => out.iter_mut().zip(f.column(j)).for_each(|(o, v)| *o = s * v),
        }
        self.scale * m
    }
}

fn argmax_abs(c: &[f64]) -> (usize, f64) {
    c.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b })
}

impl SupportBody for ScaledCrossPolytope {
    fn dim(&self) -> usize {
        self.n
    }

    fn h(&self, x: &[f64]) -> f64 {
        self.scale * argmax_abs(&self.coords(x)).1
    }

    fn supporting_point(&self, x: &[f64], out: &mut [f64]) -> Option<f64> {
        let c = self.coords(x);
        Some(self.write_point(&c, out))
    }

    fn has_supporting_points(&self) -> bool {
        true
    }

    fn support_columns(&self, z: &[f64], values: &mut [f64], points: Option<&mut [f64]>) -> bool {
        let n = self.n;
        let cols = values.len();
        let owned;
        let coords: &[f64] = match &self.frame {
            None => z,
            Some(f) => {
                let mut c = vec![0.0; n * cols];
                crate::kernels::gemm_tn(n, n, cols, f.matrix().as_slice(), z, &mut c);
                owned = c;
                &owned
            }
        };
        match points {
            Some(points) => {
                for ((c, v), out) in coords.chunks_exact(n).zip(values.iter_mut()).zip(points.chunks_exact_mut(n)) {
                    *v = self.write_point(c, out);
                }
                true
            }
            None => {
                for (c, v) in coords.chunks_exact(n).zip(values.iter_mut()) {
                    *v = self.scale * argmax_abs(c).1;
                }
                false
            }
        }
    }

    fn is_centrally_symmetric(&self) -> bool {
        true
    }

    fn invariant_under_frame(&self, frame: &OrthogonalBasis) -> bool {
        match &self.frame {
            None => frame.dim() == self.n && frame.is_signed_permutation(),
            Some(f) => f.matches_frame(frame),
        }
    }

    fn invariant_under_reflection(&self, u: &UnitVector) -> bool {
        u.dim() == self.n && {
            let c = self.coords(u.as_slice());
            (argmax_abs(&c).1 - 1.0).abs() < 1e-12
        }
    }

    fn descriptor(&self) -> Option<BodyDescriptor> {
        Some(BodyDescriptor::CrossPolytope {
            n: self.n,
            scale: self.scale,
            frame: self.frame.clone(),
        })
    }
}

/// `K_t = sqrt(n) B(l_1^n) ∩ t B(l_2^n)`, with `h(x) = t ||x||'_{sqrt(n)/t}`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntersectionBody {
    n: usize,
    t: f64,
}

impl IntersectionBody {
    pub fn new(n: usize, t: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("dimension must be positive"));
        }
        let cap = (n as f64).sqrt();
        if !(t > 0.0 && t <= cap) {
            return Err(Error::arg(format!("t must lie in (0, sqrt(n)] = (0, {cap}], got {t}")));
        }
        Ok(Self { n, t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    fn weight(&self) -> f64 {
        (self.n as f64).sqrt() / self.t
    }

    fn eval(&self, x: &[f64], scratch: &mut Vec<f64>, out: Option<&mut [f64]>) -> f64 {
        scratch.clear();
        scratch.extend(x.iter().map(|v| v.abs()));
        scratch.sort_unstable_by(|a, b| b.total_cmp(a));
        let sol = inf_conv_sorted(scratch, self.weight());
        if let Some(out) = out {
            let mut len2 = 0.0;
            for (o, &v) in out.iter_mut().zip(x) {
                let d = (v.abs() - sol.tau).max(0.0);
                *o = d.copysign(v);
                len2 += d * d;
            }
            if len2 > 0.0 {
                let s = self.t / len2.sqrt();
                out.iter_mut().for_each(|o| *o *= s);
            } else {
                let (j, _) = argmax_abs(x);
                out.fill(0.0);
                out[j] = self.t.copysign(x[j]);
            }
        }
        self.t * sol.value
    }
}

impl SupportBody for IntersectionBody {
    fn dim(&self) -> usize {
        self.n
    }

    fn h(&self, x: &[f64]) -> f64 {
        self.eval(x, &mut Vec::with_capacity(self.n), None)
    }

    fn supporting_point(&self, x: &[f64], out: &mut [f64]) -> Option<f64> {
        Some(self.eval(x, &mut Vec::with_capacity(self.n), Some(out)))
    }

    fn has_supporting_points(&self) -> bool {
        true
    }

    fn support_columns(&self, z: &[f64], values: &mut [f64], points: Option<&mut [f64]>) -> bool {
        let n = self.n;
        let mut scratch = Vec::with_capacity(n);
        match points {
            Some(points) => {
                for ((c, v), out) in z.chunks_exact(n).zip(values.iter_mut()).zip(points.chunks_exact_mut(n)) {
                    *v = self.eval(c, &mut scratch, Some(out));
                }
                true
            }
            None => {
                for (c, v) in z.chunks_exact(n).zip(values.iter_mut()) {
                    *v = self.eval(c, &mut scratch, None);
                }
                false
            }
        }
    }

    fn is_centrally_symmetric(&self) -> bool {
        true
    }

    fn invariant_under_frame(&self, frame: &OrthogonalBasis) -> bool {
        frame.dim() == self.n && frame.is_signed_permutation()
    }

    fn invariant_under_reflection(&self, u: &UnitVector) -> bool {
        u.dim() == self.n && (argmax_abs(u.as_slice()).1 - 1.0).abs() < 1e-12
    }

    fn descriptor(&self) -> Option<BodyDescriptor> {
        Some(BodyDescriptor::Intersection { n: self.n, t: self.t })
    }
}
