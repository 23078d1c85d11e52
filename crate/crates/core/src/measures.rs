//! Risk measures on the risky part of a portfolio and concave utilities.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::market::Market;
use crate::solver::lp::{LinearProgram, LpStatus, Sense};

/// Largest gauge of a unit axis vector still treated as finite.
const GAUGE_INTERIOR_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AxiomFlags {
    /// depends only on the risky part
    pub r1: bool,
    /// zero exactly on pure-bond portfolios
    pub r1n: bool,
    /// convex
    pub r2: bool,
    /// strictly convex
    pub r2s: bool,
    /// positively homogeneous of degree one
    pub r3: bool,
}

impl AxiomFlags {
    pub const fn new(r1: bool, r1n: bool, r2: bool, r2s: bool, r3: bool) -> Self {
        Self { r1, r1n, r2, r2s, r3 }
    }

    /// The four properties of a deviation-type measure.
    pub fn deviation_like(&self) -> bool {
        self.r1 && self.r1n && self.r2 && self.r3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    /// `½ x̂ᵀΣx̂`
    HalfVariance(DMatrix<f64>),
    /// `√(x̂ᵀΣx̂)`
    StdDev(DMatrix<f64>),
    /// `Σⱼ wⱼ|x̂ⱼ|`
    AbsExposure(DVector<f64>),
    /// Minkowski gauge of the convex hull of the columns.
    PolytopeGauge(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskMeasure {
    pub kind: MeasureKind,
    pub flags: AxiomFlags,
}

impl RiskMeasure {
    pub fn half_variance(sigma: DMatrix<f64>) -> Result<Self> {
        check_square(&sigma)?;
        Ok(Self { kind: MeasureKind::HalfVariance(sigma), flags: AxiomFlags::new(true, true, true, true, false) })
    }

    pub fn std_dev(sigma: DMatrix<f64>) -> Result<Self> {
        check_square(&sigma)?;
        Ok(Self { kind: MeasureKind::StdDev(sigma), flags: AxiomFlags::new(true, true, true, false, true) })
    }

    pub fn abs_exposure(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::dims("exposure weights", 1, 0));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::OutOfRange("exposure weights must be finite and nonnegative".into()));
        }
        let r1n = weights.iter().all(|&w| w > 0.0);
        Ok(Self {
            kind: MeasureKind::AbsExposure(DVector::from_vec(weights)),
            flags: AxiomFlags::new(true, r1n, true, false, true),
        })
    }

    /// Gauge of `conv(vertices)`; rejects vertex sets whose hull does not
    /// contain the origin in its interior.
    pub fn polytope_gauge(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let v = vertex_matrix(&vertices)?;
        check_interior(&v)?;
        Ok(Self { kind: MeasureKind::PolytopeGauge(v), flags: AxiomFlags::new(true, true, true, false, true) })
    }

    pub fn half_variance_of(market: &Market) -> Self {
        Self::half_variance(market.covariance()).expect("covariance is square")
    }

    pub fn std_dev_of(market: &Market) -> Self {
        Self::std_dev(market.covariance()).expect("covariance is square")
    }

    /// Replace the declared axiom flags.
    pub fn with_flags(mut self, flags: AxiomFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            MeasureKind::HalfVariance(s) | MeasureKind::StdDev(s) => s.nrows(),
            MeasureKind::AbsExposure(w) => w.len(),
            MeasureKind::PolytopeGauge(v) => v.nrows(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            MeasureKind::HalfVariance(_) => "half_variance",
            MeasureKind::StdDev(_) => "std_dev",
            MeasureKind::AbsExposure(_) => "abs_exposure",
            MeasureKind::PolytopeGauge(_) => "polytope_gauge",
        }
    }

    pub fn is_polyhedral(&self) -> bool {
        matches!(self.kind, MeasureKind::AbsExposure(_) | MeasureKind::PolytopeGauge(_))
    }

    /// Lifted form `𝔯̂(x̂) = min{cᵀθ : Dθ = x̂, θ ≥ 0}` of a polyhedral measure.
    pub fn lifted(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        match &self.kind {
            MeasureKind::AbsExposure(w) => {
                let m = w.len();
                let mut d = DMatrix::zeros(m, 2 * m);
                let mut c = DVector::zeros(2 * m);
                for j in 0..m {
                    d[(j, j)] = 1.0;
                    d[(j, m + j)] = -1.0;
                    c[j] = w[j];
                    c[m + j] = w[j];
                }
                Some((d, c))
            }
            MeasureKind::PolytopeGauge(v) => Some((v.clone(), DVector::from_element(v.ncols(), 1.0))),
            _ => None,
        }
    }

    pub fn eval(&self, x_hat: &DVector<f64>) -> Result<f64> {
        if x_hat.len() != self.dim() {
            return Err(Error::dims("risk measure argument", self.dim(), x_hat.len()));
        }
        Ok(match &self.kind {
            MeasureKind::HalfVariance(s) => 0.5 * quad(s, x_hat).max(0.0),
            MeasureKind::StdDev(s) => quad(s, x_hat).max(0.0).sqrt(),
            MeasureKind::AbsExposure(w) => w.iter().zip(x_hat.iter()).map(|(w, x)| w * x.abs()).sum(),
            MeasureKind::PolytopeGauge(v) => gauge_with_matrix(v, x_hat)?.0,
        })
    }
}

/// Free-function form of [`RiskMeasure::eval`].
pub fn eval_risk(measure: &RiskMeasure, x_hat: &DVector<f64>) -> Result<f64> {
    measure.eval(x_hat)
}

fn quad(s: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(s * x))
}

fn check_square(s: &DMatrix<f64>) -> Result<()> {
    if s.nrows() != s.ncols() {
        return Err(Error::dims("covariance must be square", s.nrows(), s.ncols()));
    }
    if s.nrows() == 0 {
        return Err(Error::dims("covariance size", 1, 0));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance".into()));
    }
    Ok(())
}

fn vertex_matrix(vertices: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = vertices.first().map(|v| v.len()).unwrap_or(0);
    if m == 0 {
        return Err(Error::DegenerateGauge);
    }
    for v in vertices {
        if v.len() != m {
            return Err(Error::dims("gauge vertex", m, v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("gauge vertex".into()));
        }
    }
    let cols: Vec<DVector<f64>> = vertices.iter().map(|v| DVector::from_column_slice(v)).collect();
    Ok(DMatrix::from_columns(&cols))
}

fn check_interior(v: &DMatrix<f64>) -> Result<()> {
    let m = v.nrows();
    for j in 0..m {
        for s in [1.0, -1.0] {
            let mut e = DVector::zeros(m);
            e[j] = s;
            match gauge_with_matrix(v, &e) {
                Ok((t, _)) if t <= GAUGE_INTERIOR_LIMIT => {}
                Ok(_) | Err(Error::DegenerateGauge) => return Err(Error::DegenerateGauge),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}

/// Gauge value and an optimal convex-cone representation `x̂ = Vλ`.
fn gauge_with_matrix(v: &DMatrix<f64>, x_hat: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let (m, k) = v.shape();
    if x_hat.len() != m {
        return Err(Error::dims("gauge argument", m, x_hat.len()));
    }
    if x_hat.iter().all(|&x| x == 0.0) {
        return Ok((0.0, DVector::zeros(k)));
    }
    let mut lp = LinearProgram::minimize(vec![1.0; k]);
    for i in 0..m {
        lp.add_constraint(v.row(i).iter().copied().collect(), Sense::Eq, x_hat[i]);
    }
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok((sol.objective.max(0.0), DVector::from_vec(sol.x))),
        LpStatus::Infeasible => Err(Error::DegenerateGauge),
        LpStatus::Unbounded => Err(Error::SolverFailure("gauge LP unbounded".into())),
    }
}

/// Minkowski gauge `inf{t > 0 : x̂ ∈ t·conv(vertices)}`.
pub fn gauge_evaluate(vertices: &[Vec<f64>], x_hat: &DVector<f64>) -> Result<f64> {
    let v = vertex_matrix(vertices)?;
    check_interior(&v)?;
    Ok(gauge_with_matrix(&v, x_hat)?.0)
}

/// Optimal representation `θ ≥ 0` of `x̂` in the lifted form of a
/// polyhedral measure.
pub(crate) fn lifted_representation(measure: &RiskMeasure, x_hat: &DVector<f64>) -> Result<DVector<f64>> {
    match &measure.kind {
        MeasureKind::AbsExposure(_) => {
            let m = x_hat.len();
            let mut theta = DVector::zeros(2 * m);
            for j in 0..m {
                if x_hat[j] >= 0.0 {
                    theta[j] = x_hat[j];
                } else {
                    theta[m + j] = -x_hat[j];
                }
            }
            Ok(theta)
        }
        MeasureKind::PolytopeGauge(v) => Ok(gauge_with_matrix(v, x_hat)?.1),
        _ => Err(Error::Unsupported("lifted form exists only for polyhedral measures".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UtilityFlags {
    /// increasing
    pub u1: bool,
    /// concave
    pub u2: bool,
    /// strictly concave
    pub u2s: bool,
    /// minus infinity on negative wealth
    pub u3: bool,
    /// unbounded above
    pub u4: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Utility {
    Identity,
    Log,
}

impl Utility {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Utility::Identity => t,
            Utility::Log => {
                if t > 0.0 {
                    t.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Utility::Identity => 1.0,
            Utility::Log => 1.0 / t,
        }
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        match self {
            Utility::Identity => 0.0,
            Utility::Log => -1.0 / (t * t),
        }
    }

    pub fn flags(&self) -> UtilityFlags {
        match self {
            Utility::Identity => UtilityFlags { u1: true, u2: true, u2s: false, u3: false, u4: true },
            Utility::Log => UtilityFlags { u1: true, u2: true, u2s: true, u3: true, u4: true },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Utility::Identity => "identity",
            Utility::Log => "log",
        }
    }

    /// `Σᵢ pᵢ u(yᵢ)`, with `−∞` absorbing.
    pub fn expected(&self, probs: &DVector<f64>, payoffs: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for (p, &y) in probs.iter().zip(payoffs.iter()) {
            let v = self.value(y);
            if v == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            total += p * v;
        }
        total
    }
}

/// Free-function form of [`Utility::value`].
pub fn eval_utility(utility: Utility, t: f64) -> f64 {
    utility.value(t)
}

/// What [`axiom_probe`] should check.
#[derive(Debug, Clone, Copy)]
pub enum ProbeTarget<'a> {
    Measure(&'a RiskMeasure),
    Utility(Utility, UtilityFlags),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomViolation {
    pub axiom: &'static str,
    pub point: Vec<f64>,
    pub detail: String,
}

/// Random search for counterexamples to the declared axiom flags.
/// An empty result means no violation was found.
pub fn axiom_probe(target: ProbeTarget<'_>, sample_count: usize, seed: u64) -> Result<Vec<AxiomViolation>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    match target {
        ProbeTarget::Measure(measure) => probe_measure(measure, sample_count, &mut rng, &mut out)?,
        ProbeTarget::Utility(u, flags) => probe_utility(u, flags, sample_count, &mut rng, &mut out),
    }
    Ok(out)
}

fn probe_measure(
    measure: &RiskMeasure,
    samples: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<AxiomViolation>,
) -> Result<()> {
    let m = measure.dim();
    let flags = measure.flags;
    let draw = |rng: &mut ChaCha8Rng| DVector::from_fn(m, |_, _| rng.gen_range(-2.0..2.0));
    let zero = measure.eval(&DVector::zeros(m))?;
    if flags.r1n && zero != 0.0 {
        out.push(AxiomViolation { axiom: "r1n", point: vec![0.0; m], detail: format!("value at origin {zero}") });
    }
    for _ in 0..samples {
        let x = draw(rng);
        let y = draw(rng);
        let fx = measure.eval(&x)?;
        let fy = measure.eval(&y)?;
        if fx < 0.0 {
            out.push(AxiomViolation { axiom: "nonnegative", point: x.as_slice().to_vec(), detail: format!("{fx}") });
        }
        if flags.r1n && fx <= 0.0 && x.amax() > 0.0 {
            out.push(AxiomViolation { axiom: "r1n", point: x.as_slice().to_vec(), detail: format!("zero risk at {x:?}") });
        }
        let mid = measure.eval(&((&x + &y) * 0.5))?;
        let avg = 0.5 * (fx + fy);
        let tol = 1e-10 * (1.0 + avg.abs());
        if flags.r2 && mid > avg + tol {
            out.push(AxiomViolation {
                axiom: "r2",
                point: x.iter().chain(y.iter()).copied().collect(),
                detail: format!("midpoint {mid} above average {avg}"),
            });
        }
        if flags.r2s && mid >= avg - 1e-14 * (1.0 + avg.abs()) {
            out.push(AxiomViolation {
                axiom: "r2s",
                point: x.iter().chain(y.iter()).copied().collect(),
                detail: format!("midpoint {mid} not below average {avg}"),
            });
        }
        if flags.r3 {
            let t: f64 = rng.gen_range(0.1..10.0);
            let ft = measure.eval(&(&x * t))?;
            if (ft - t * fx).abs() > 1e-10 * (1.0 + (t * fx).abs()) {
                out.push(AxiomViolation {
                    axiom: "r3",
                    point: x.as_slice().to_vec(),
                    detail: format!("value at {t}·x is {ft}, expected {}", t * fx),
                });
            }
        }
    }
    Ok(())
}

fn probe_utility(u: Utility, flags: UtilityFlags, samples: usize, rng: &mut ChaCha8Rng, out: &mut Vec<AxiomViolation>) {
    for _ in 0..samples {
        let a: f64 = rng.gen_range(1e-6..10.0);
        let b: f64 = rng.gen_range(1e-6..10.0);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if lo == hi {
            continue;
        }
        let (ul, uh) = (u.value(lo), u.value(hi));
        if flags.u1 && ul >= uh {
            out.push(AxiomViolation { axiom: "u1", point: vec![lo, hi], detail: format!("u({lo})={ul} >= u({hi})={uh}") });
        }
        let mid = u.value(0.5 * (lo + hi));
        let avg = 0.5 * (ul + uh);
        if flags.u2 && mid < avg - 1e-12 * (1.0 + avg.abs()) {
            out.push(AxiomViolation { axiom: "u2", point: vec![lo, hi], detail: format!("midpoint {mid} below {avg}") });
        }
        if flags.u2s && mid <= avg {
            out.push(AxiomViolation { axiom: "u2s", point: vec![lo, hi], detail: format!("midpoint {mid} not above {avg}") });
        }
        if flags.u3 {
            let t: f64 = -rng.gen_range(1e-6..10.0);
            if u.value(t) != f64::NEG_INFINITY {
                out.push(AxiomViolation { axiom: "u3", point: vec![t], detail: format!("u({t}) = {}", u.value(t)) });
            }
        }
    }
    if flags.u4 {
        let far = u.value(1e100);
        if !(far > 100.0) {
            out.push(AxiomViolation { axiom: "u4", point: vec![1e100], detail: format!("u(1e100) = {far}") });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn eval_examples() {
        let abs = RiskMeasure::abs_exposure(vec![1.0]).unwrap();
        assert_eq!(abs.eval(&v(&[0.65])).unwrap(), 0.65);
        let (_, gauge) = fixtures::counterexample();
        assert!((gauge.eval(&v(&[1.0, 0.0, 0.0])).unwrap() - 0.1).abs() < 1e-12);
        let f2 = fixtures::f2();
        for m in [
            RiskMeasure::half_variance_of(&f2),
            RiskMeasure::std_dev_of(&f2),
            RiskMeasure::abs_exposure(vec![1.0, 2.0]).unwrap(),
        ] {
            assert_eq!(m.eval(&v(&[0.0, 0.0])).unwrap(), 0.0);
            assert!(m.eval(&v(&[0.0])).is_err());
        }
        let sd = RiskMeasure::std_dev_of(&f2);
        assert!((sd.eval(&v(&[0.0, 1.0])).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gauge_examples() {
        let verts = fixtures::counterexample_vertices();
        assert_eq!(gauge_evaluate(&verts, &v(&[0.0, 0.0, 0.0])).unwrap(), 0.0);
        assert!((gauge_evaluate(&verts, &v(&[10.0, 0.0, 0.0])).unwrap() - 1.0).abs() < 1e-12);
        assert!((gauge_evaluate(&verts, &v(&[20.0, 0.0, 0.0])).unwrap() - 2.0).abs() < 1e-12);
        // vertex set on one side of a hyperplane
        let bad = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(gauge_evaluate(&bad, &v(&[1.0, 1.0])).unwrap_err(), Error::DegenerateGauge);
        assert_eq!(RiskMeasure::polytope_gauge(bad).unwrap_err(), Error::DegenerateGauge);
    }

    #[test]
    fn abs_exposure_matches_its_gauge() {
        let w = [1.0, 0.5, 2.0];
        let abs = RiskMeasure::abs_exposure(w.to_vec()).unwrap();
        let mut verts = Vec::new();
        for j in 0..3 {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; 3];
                e[j] = s / w[j];
                verts.push(e);
            }
        }
        let g = RiskMeasure::polytope_gauge(verts).unwrap();
        let x = v(&[0.3, -1.2, 0.7]);
        assert!((abs.eval(&x).unwrap() - g.eval(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn utility_examples() {
        assert_eq!(eval_utility(Utility::Log, 1.0), 0.0);
        assert_eq!(eval_utility(Utility::Log, -0.5), f64::NEG_INFINITY);
        assert_eq!(eval_utility(Utility::Identity, 2.5), 2.5);
        let p = v(&[0.5, 0.5]);
        assert_eq!(Utility::Log.expected(&p, &v(&[1.0, 0.0])), f64::NEG_INFINITY);
    }

    #[test]
    fn probe_examples() {
        let f2 = fixtures::f2();
        let hv = RiskMeasure::half_variance_of(&f2).with_flags(AxiomFlags::new(true, true, true, false, true));
        let found = axiom_probe(ProbeTarget::Measure(&hv), 100, 7).unwrap();
        assert!(found.iter().any(|v| v.axiom == "r3"));
        let sd = RiskMeasure::std_dev_of(&f2).with_flags(AxiomFlags::new(true, false, true, false, true));
        assert!(axiom_probe(ProbeTarget::Measure(&sd), 1000, 7).unwrap().is_empty());
        let sd = RiskMeasure::std_dev_of(&f2);
        assert!(axiom_probe(ProbeTarget::Measure(&sd), 1000, 8).unwrap().is_empty());
        let flags = UtilityFlags { u1: true, u2s: true, ..Default::default() };
        assert!(axiom_probe(ProbeTarget::Utility(Utility::Log, flags), 1000, 9).unwrap().is_empty());
        let flags = UtilityFlags { u2s: true, ..Default::default() };
        assert!(!axiom_probe(ProbeTarget::Utility(Utility::Identity, flags), 10, 9).unwrap().is_empty());
    }

    #[test]
    fn default_flags_hold() {
        let (_, gauge) = fixtures::counterexample();
        assert!(axiom_probe(ProbeTarget::Measure(&gauge), 200, 3).unwrap().is_empty());
        let abs = RiskMeasure::abs_exposure(vec![1.0, 3.0]).unwrap();
        assert!(axiom_probe(ProbeTarget::Measure(&abs), 1000, 3).unwrap().is_empty());
        let hv = RiskMeasure::half_variance_of(&fixtures::f2());
        assert!(axiom_probe(ProbeTarget::Measure(&hv), 1000, 3).unwrap().is_empty());
        for u in [Utility::Identity, Utility::Log] {
            assert!(axiom_probe(ProbeTarget::Utility(u, u.flags()), 1000, 3).unwrap().is_empty());
        }
    }

    /// Central-difference gradient of the measure.
    fn fd_gradient(m: &RiskMeasure, x: &DVector<f64>) -> DVector<f64> {
        let h = 1e-6;
        DVector::from_fn(x.len(), |j, _| {
            let mut a = x.clone();
            let mut b = x.clone();
            a[j] += h;
            b[j] -= h;
            (m.eval(&a).unwrap() - m.eval(&b).unwrap()) / (2.0 * h)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gauge_is_sublinear(
            x in proptest::collection::vec(-20.0..20.0f64, 3),
            y in proptest::collection::vec(-20.0..20.0f64, 3),
            t in 0.01..50.0f64,
        ) {
            let (_, g) = fixtures::counterexample();
            let (x, y) = (v(&x), v(&y));
            let gx = g.eval(&x).unwrap();
            let gy = g.eval(&y).unwrap();
            prop_assert!(g.eval(&(&x + &y)).unwrap() <= gx + gy + 1e-8);
            prop_assert!((g.eval(&(&x * t)).unwrap() - t * gx).abs() <= 1e-8 * (1.0 + t * gx));
        }

        #[test]
        fn homogeneous_euler_identity(x in proptest::collection::vec(0.05..3.0f64, 2), signs in proptest::collection::vec(any::<bool>(), 2)) {
            // coordinates bounded away from zero keep AbsExposure smooth
            let x = v(&[if signs[0] { x[0] } else { -x[0] }, if signs[1] { x[1] } else { -x[1] }]);
            let f2 = fixtures::f2();
            for m in [RiskMeasure::std_dev_of(&f2), RiskMeasure::abs_exposure(vec![1.0, 0.5]).unwrap()] {
                let g = fd_gradient(&m, &x);
                prop_assert!((g.dot(&x) - m.eval(&x).unwrap()).abs() < 1e-4);
            }
        }
    }
}
