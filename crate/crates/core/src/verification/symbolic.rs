//! Exact algebra on sums of separable trigonometric atoms.
//!
//! A term is `c · X(2π n x) · Y(2π m y) · z^p · Z(π l z) · T(q t)` with each
//! factor a cosine or sine of integer frequency. Products are expanded with
//! product-to-sum identities, so multiplication, differentiation, vertical
//! integration and vertical averaging all stay inside the catalogue.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use crate::field::{Field2, Field3};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Trig {
    Cos,
    Sin,
}

/// `cos(n·base·s)` or `sin(n·base·s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Factor {
    pub kind: Trig,
    pub freq: i32,
}

impl Factor {
    pub const ONE: Factor = Factor { kind: Trig::Cos, freq: 0 };

    pub fn cos(freq: i32) -> Factor {
        Factor { kind: Trig::Cos, freq }
    }

    pub fn sin(freq: i32) -> Factor {
        Factor { kind: Trig::Sin, freq }
    }

    /// Canonical form with non-negative frequency; `None` for sin 0.
    fn normalize(self) -> Option<(f64, Factor)> {
        match (self.kind, self.freq) {
            (Trig::Sin, 0) => None,
            (Trig::Cos, n) => Some((1.0, Factor::cos(n.abs()))),
            (Trig::Sin, n) if n < 0 => Some((-1.0, Factor::sin(-n))),
            _ => Some((1.0, self)),
        }
    }

    fn eval(self, angle: f64) -> f64 {
        let a = self.freq as f64 * angle;
        match self.kind {
            Trig::Cos => a.cos(),
            Trig::Sin => a.sin(),
        }
    }

    fn product(self, other: Factor) -> [(f64, Factor); 2] {
        let (a, b) = (self.freq, other.freq);
        match (self.kind, other.kind) {
            (Trig::Cos, Trig::Cos) => [(0.5, Factor::cos(a - b)), (0.5, Factor::cos(a + b))],
            (Trig::Sin, Trig::Sin) => [(0.5, Factor::cos(a - b)), (-0.5, Factor::cos(a + b))],
            (Trig::Sin, Trig::Cos) => [(0.5, Factor::sin(a + b)), (0.5, Factor::sin(a - b))],
            (Trig::Cos, Trig::Sin) => [(0.5, Factor::sin(a + b)), (-0.5, Factor::sin(a - b))],
        }
    }

    /// Derivative with respect to s for the given angular base.
    fn derivative(self, base: f64) -> Option<(f64, Factor)> {
        let w = base * self.freq as f64;
        match self.kind {
            Trig::Cos if self.freq == 0 => None,
            Trig::Cos => Some((-w, Factor::sin(self.freq))),
            Trig::Sin => Some((w, Factor::cos(self.freq))),
        }
    }
}

const BASE_X: f64 = 2.0 * PI;
const BASE_Y: f64 = 2.0 * PI;
const BASE_Z: f64 = PI;
const BASE_T: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub x: Factor,
    pub y: Factor,
    pub z: Factor,
    pub zpow: u32,
    pub t: Factor,
}

impl Monomial {
    pub const ONE: Monomial = Monomial {
        x: Factor::ONE,
        y: Factor::ONE,
        z: Factor::ONE,
        zpow: 0,
        t: Factor::ONE,
    };
}

/// Finite sum of monomials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expr {
    terms: BTreeMap<Monomial, f64>,
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::default()
    }

    pub fn constant(c: f64) -> Expr {
        Expr::term(c, Monomial::ONE)
    }

    pub fn term(coeff: f64, m: Monomial) -> Expr {
        let mut e = Expr::zero();
        e.push(coeff, m);
        e
    }

    /// `c · X(x) · Y(y) · Z(z) · T(t)`.
    pub fn atom(c: f64, x: Factor, y: Factor, z: Factor, t: Factor) -> Expr {
        Expr::term(c, Monomial { x, y, z, zpow: 0, t })
    }

    /// `c · z^p`.
    pub fn z_power(c: f64, p: u32) -> Expr {
        Expr::term(c, Monomial { zpow: p, ..Monomial::ONE })
    }

    fn push(&mut self, coeff: f64, m: Monomial) {
        if coeff == 0.0 {
            return;
        }
        let mut c = coeff;
        let mut parts = [m.x, m.y, m.z, m.t];
        for f in parts.iter_mut() {
            match f.normalize() {
                None => return,
                Some((s, g)) => {
                    c *= s;
                    *f = g;
                }
            }
        }
        let key = Monomial {
            x: parts[0],
            y: parts[1],
            z: parts[2],
            zpow: m.zpow,
            t: parts[3],
        };
        let entry = self.terms.entry(key).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &f64)> {
        self.terms.iter()
    }

    /// Largest absolute coefficient.
    pub fn max_coeff(&self) -> f64 {
        self.terms.values().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, a: f64) -> Expr {
        let mut out = Expr::zero();
        for (m, c) in &self.terms {
            out.push(a * c, *m);
        }
        out
    }

    pub fn pow(&self, n: u32) -> Expr {
        let mut out = Expr::constant(1.0);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    fn map_terms(&self, f: impl Fn(f64, Monomial, &mut Expr)) -> Expr {
        let mut out = Expr::zero();
        for (m, c) in &self.terms {
            f(*c, *m, &mut out);
        }
        out
    }

    pub fn d_x(&self) -> Expr {
        self.map_terms(|c, m, out| {
            if let Some((s, f)) = m.x.derivative(BASE_X) {
                out.push(c * s, Monomial { x: f, ..m });
            }
        })
    }

    pub fn d_y(&self) -> Expr {
        self.map_terms(|c, m, out| {
            if let Some((s, f)) = m.y.derivative(BASE_Y) {
                out.push(c * s, Monomial { y: f, ..m });
            }
        })
    }

    pub fn d_t(&self) -> Expr {
        self.map_terms(|c, m, out| {
            if let Some((s, f)) = m.t.derivative(BASE_T) {
                out.push(c * s, Monomial { t: f, ..m });
            }
        })
    }

    pub fn d_z(&self) -> Expr {
        self.map_terms(|c, m, out| {
            if m.zpow > 0 {
                out.push(c * m.zpow as f64, Monomial { zpow: m.zpow - 1, ..m });
            }
            if let Some((s, f)) = m.z.derivative(BASE_Z) {
                out.push(c * s, Monomial { z: f, ..m });
            }
        })
    }

    /// ∫₀^z of the expression.
    pub fn integrate_z(&self) -> Expr {
        self.map_terms(|c, m, out| {
            for (k, p, f) in integrate_power_trig(m.zpow, m.z) {
                out.push(c * k, Monomial { z: f, zpow: p, ..m });
            }
        })
    }

    /// Substitutes a fixed height, leaving an expression in x, y and t.
    pub fn at_z(&self, z: f64) -> Expr {
        self.map_terms(|c, m, out| {
            let trig = match (m.z.kind, z) {
                (Trig::Sin, 0.0 | 1.0) => 0.0,
                (Trig::Cos, 0.0) => 1.0,
                (Trig::Cos, 1.0) => if m.z.freq % 2 == 0 { 1.0 } else { -1.0 },
                _ => m.z.eval(BASE_Z * z),
            };
            let v = z.powi(m.zpow as i32) * trig;
            out.push(c * v, Monomial { z: Factor::ONE, zpow: 0, ..m });
        })
    }

    /// Vertical average ∫₀¹ · dz.
    pub fn z_average(&self) -> Expr {
        self.integrate_z().at_z(1.0)
    }

    pub fn is_z_independent(&self) -> bool {
        self.terms.keys().all(|m| m.zpow == 0 && m.z == Factor::ONE)
    }

    pub fn eval(&self, x: f64, y: f64, z: f64, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                c * m.x.eval(BASE_X * x)
                    * m.y.eval(BASE_Y * y)
                    * z.powi(m.zpow as i32)
                    * m.z.eval(BASE_Z * z)
                    * m.t.eval(BASE_T * t)
            })
            .sum()
    }

    /// Samples on the full grid at time t.
    pub fn sample3(&self, grid: &Grid, t: f64) -> Field3 {
        let mut out = Field3::zeros(grid);
        let (nx, ny) = (grid.nx, grid.ny);
        for (m, c) in &self.terms {
            let ct = c * m.t.eval(BASE_T * t);
            let xs: Vec<f64> = (0..nx).map(|i| m.x.eval(BASE_X * grid.x(i))).collect();
            let ys: Vec<f64> = (0..ny).map(|j| m.y.eval(BASE_Y * grid.y(j))).collect();
            for k in 0..grid.nz {
                let z = grid.z_levels[k];
                let cz = ct * z.powi(m.zpow as i32) * m.z.eval(BASE_Z * z);
                if cz == 0.0 {
                    continue;
                }
                let plane = out.plane_mut(k);
                for j in 0..ny {
                    let cy = cz * ys[j];
                    for i in 0..nx {
                        plane[j * nx + i] += cy * xs[i];
                    }
                }
            }
        }
        out
    }

    /// Samples a z-independent expression on one horizontal plane.
    pub fn sample2(&self, grid: &Grid, t: f64) -> Field2 {
        let mut out = Field2::zeros(grid.nx, grid.ny);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                out.data[j * grid.nx + i] = self.eval(grid.x(i), grid.y(j), 0.0, t);
            }
        }
        out
    }
}

/// ∫₀^z s^p F(π n s) ds as a list of (coefficient, power, factor).
fn integrate_power_trig(p: u32, f: Factor) -> Vec<(f64, u32, Factor)> {
    if f.freq == 0 {
        return vec![(1.0 / (p + 1) as f64, p + 1, Factor::ONE)];
    }
    let w = BASE_Z * f.freq as f64;
    let mut out = Vec::new();
    match f.kind {
        Trig::Cos => {
            out.push((1.0 / w, p, Factor::sin(f.freq)));
            if p > 0 {
                for (c, q, g) in integrate_power_trig(p - 1, Factor::sin(f.freq)) {
                    out.push((-(p as f64) / w * c, q, g));
                }
            }
        }
        Trig::Sin => {
            out.push((-1.0 / w, p, Factor::cos(f.freq)));
            if p == 0 {
                out.push((1.0 / w, 0, Factor::ONE));
            } else {
                for (c, q, g) in integrate_power_trig(p - 1, Factor::cos(f.freq)) {
                    out.push((p as f64 / w * c, q, g));
                }
            }
        }
    }
    out
}

impl Add<&Expr> for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.push(*c, *m);
        }
        out
    }
}

impl Sub<&Expr> for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.push(-*c, *m);
        }
        out
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(-1.0)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(-1.0)
    }
}

impl Mul<&Expr> for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        let mut out = Expr::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                let c = ca * cb;
                for (cx, fx) in ma.x.product(mb.x) {
                    for (cy, fy) in ma.y.product(mb.y) {
                        for (cz, fz) in ma.z.product(mb.z) {
                            for (ct, ft) in ma.t.product(mb.t) {
                                out.push(
                                    c * cx * cy * cz * ct,
                                    Monomial {
                                        x: fx,
                                        y: fy,
                                        z: fz,
                                        zpow: ma.zpow + mb.zpow,
                                        t: ft,
                                    },
                                );
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

macro_rules! owned_ops {
    ($($tr:ident $f:ident),*) => {$(
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $f(self, rhs: Expr) -> Expr {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $f(self, rhs: &Expr) -> Expr {
                (&self).$f(rhs)
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $f(self, rhs: Expr) -> Expr {
                self.$f(&rhs)
            }
        }
    )*};
}

owned_ops!(Add add, Sub sub, Mul mul);

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_expr() -> Expr {
        let a = Expr::atom(0.7, Factor::cos(1), Factor::sin(2), Factor::cos(1), Factor::sin(1));
        let b = Expr::atom(-0.3, Factor::sin(1), Factor::ONE, Factor::cos(2), Factor::ONE);
        let c = Expr::z_power(0.5, 2) * Expr::atom(1.0, Factor::ONE, Factor::cos(1), Factor::sin(1), Factor::cos(2));
        a + b + c + Expr::constant(1.25)
    }

    fn central(f: impl Fn(f64) -> f64, s: f64) -> f64 {
        let h = 1e-4;
        (f(s - 2.0 * h) - 8.0 * f(s - h) + 8.0 * f(s + h) - f(s + 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn sin_zero_vanishes_and_signs_normalize() {
        let e = Expr::atom(1.0, Factor::sin(0), Factor::ONE, Factor::ONE, Factor::ONE);
        assert!(e.is_empty());
        let e = Expr::atom(2.0, Factor::sin(-3), Factor::cos(-1), Factor::ONE, Factor::ONE);
        assert_eq!(e.eval(0.1, 0.2, 0.0, 0.0), 2.0 * (-(2.0 * PI * 0.3).sin()) * (2.0 * PI * 0.2).cos());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let e = sample_expr();
        let (x, y, z, t) = (0.31, 0.77, 0.42, 0.9);
        let checks = [
            (e.d_x().eval(x, y, z, t), central(|s| e.eval(s, y, z, t), x)),
            (e.d_y().eval(x, y, z, t), central(|s| e.eval(x, s, z, t), y)),
            (e.d_z().eval(x, y, z, t), central(|s| e.eval(x, y, s, t), z)),
            (e.d_t().eval(x, y, z, t), central(|s| e.eval(x, y, z, s), t)),
        ];
        for (a, b) in checks {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn vertical_integral_inverts_derivative() {
        let e = sample_expr();
        let back = e.integrate_z().d_z();
        for &(x, y, z, t) in &[(0.1, 0.2, 0.3, 0.4), (0.9, 0.5, 1.0, 2.0)] {
            assert!((back.eval(x, y, z, t) - e.eval(x, y, z, t)).abs() < 1e-13);
        }
        assert!(e.integrate_z().at_z(0.0).max_coeff() < 1e-15);
    }

    #[test]
    fn average_of_known_profiles() {
        let c = Expr::atom(1.0, Factor::ONE, Factor::ONE, Factor::cos(1), Factor::ONE);
        assert!(c.z_average().max_coeff() < 1e-16);
        let s = Expr::atom(1.0, Factor::ONE, Factor::ONE, Factor::sin(1), Factor::ONE);
        assert!((s.z_average().eval(0.0, 0.0, 0.0, 0.0) - 2.0 / PI).abs() < 1e-15);
        let z2 = Expr::z_power(3.0, 2);
        assert!((z2.z_average().eval(0.0, 0.0, 0.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampling_matches_pointwise_evaluation() {
        let g = Grid::new(6, 4, 5).unwrap();
        let e = sample_expr();
        let f = e.sample3(&g, 0.3);
        for k in 0..5 {
            for j in 0..4 {
                for i in 0..6 {
                    let want = e.eval(g.x(i), g.y(j), g.z_levels[k], 0.3);
                    assert!((f.at(i, j, k) - want).abs() < 1e-14);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn product_is_pointwise(
            fa in -3i32..4, fb in -3i32..4, ka in any::<bool>(), kb in any::<bool>(),
            x in 0.0..1.0f64, y in 0.0..1.0f64, z in 0.0..1.0f64, t in 0.0..3.0f64,
        ) {
            let kind = |b: bool, n: i32| if b { Factor::cos(n) } else { Factor::sin(n) };
            let a = Expr::atom(1.5, kind(ka, fa), kind(kb, fb), kind(ka, fb), kind(kb, fa)) + Expr::z_power(0.5, 1);
            let b = Expr::atom(-0.5, kind(kb, fb), kind(ka, fa), kind(kb, fa), kind(ka, fb)) + Expr::constant(0.25);
            let p = &a * &b;
            let want = a.eval(x, y, z, t) * b.eval(x, y, z, t);
            prop_assert!((p.eval(x, y, z, t) - want).abs() < 1e-12);
        }
    }
}
