//! Closed-form coefficients of the small-`t` ATM expansion
//! `c(t, 0) = d1 t^(1/Y) + d2 t + sum_k a_{2k,1} t^(2k-(2k-1)/Y) + a12 t^(2/Y) + ...`,
//! the drift-series cap `K(Y)`, and the lattice of candidate exponents.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{CgmyModel, CgmyParams};
use crate::quadrature::{integrate, QuadratureConfig, QuadratureResult};
use crate::special_fn::gamma;

/// Exponents closer than this are treated as equal.
pub const EXPONENT_TIE_TOL: f64 = 1e-12;

/// First-order coefficient `Gamma(1 - 1/Y) sigma_Y^(1/Y) / pi`.
pub fn d1(model: &CgmyModel) -> Result<f64> {
    let y = model.y();
    Ok(gamma(1.0 - 1.0 / y)? * model.derived().sigma_y.powf(1.0 / y) / PI)
}

/// Second-order coefficient in closed form,
/// `C Gamma(-Y)/2 [(M-1)^Y - M^Y - (G+1)^Y + G^Y]`.
pub fn d2_closed_fl(model: &CgmyModel) -> f64 {
    let p = model.params();
    let (g, m, y) = (p.g(), p.m(), p.y());
    0.5 * model.derived().c_gamma * ((m - 1.0).powf(y) - m.powf(y) - (g + 1.0).powf(y) + g.powf(y))
}

/// Second-order coefficient by quadrature of
/// `(1/pi) int_0^inf [theta0(w)/w^2 - Re psi0(w)/(w^2 + 1/4)] dw`.
///
/// Above `w = 1` the two `O(w^(Y-2))` pieces are recombined through
/// `delta = psi0 - theta0`, so the integrand decays like `w^(Y-3)`
/// without cancellation.
pub fn d2_integral(model: &CgmyModel, cfg: &QuadratureConfig) -> Result<QuadratureResult> {
    let mut points = cfg.breakpoints.clone();
    points.push(1.0);
    let mut qc = cfg.with_breakpoints(points);
    if qc.head_grading == 1.0 {
        qc.head_grading = crate::pricer::DEFAULT_GRADING;
    }
    if qc.tail_grading == 1.0 {
        qc.tail_grading = crate::pricer::DEFAULT_GRADING;
    }
    let integrand = |w: f64| {
        let w2 = w * w;
        let lorentz = w2 + 0.25;
        if w < 1.0 {
            model.theta0(w) / w2 - model.re_psi_shifted(w) / lorentz
        } else {
            -model.re_delta(w) / w2 + model.re_psi_shifted(w) / (4.0 * w2 * lorentz)
        }
    };
    Ok(integrate(integrand, 0.0, f64::INFINITY, &qc)?.scaled(1.0 / PI))
}

/// Drift-series coefficient at `t^(2k - (2k-1)/Y)`:
/// `(-1)^(k+1) b^(2k) sigma_Y^(-(2k-1)/Y) Gamma((2k-1)/Y) / ((2k)! pi Y)`.
pub fn a_drift(model: &CgmyModel, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", "drift order must be at least 1"));
    }
    let d = model.derived();
    let y = model.y();
    let two_k = 2 * k;
    let s = (two_k - 1) as f64 / y;
    let factorial: f64 = (1..=two_k).map(f64::from).product();
    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
    Ok(sign * d.tilde_b.powi(two_k as i32) * d.sigma_y.powf(-s) * gamma(s)? / (factorial * PI * y))
}

/// Drift-squared coefficient at `t^(2 - 1/Y)`.
pub fn a21(model: &CgmyModel) -> Result<f64> {
    a_drift(model, 1)
}

/// Quartic-drift coefficient at `t^(4 - 3/Y)`.
pub fn a41(model: &CgmyModel) -> Result<f64> {
    a_drift(model, 2)
}

/// First-binomial coefficient at `t^(2/Y)`,
/// `-(C Gamma(-Y)(M~ + G~) sin(Y pi/2)/pi) Gamma(1 - 2/Y) sigma_Y^((2-Y)/Y)`.
pub fn a12(model: &CgmyModel) -> Result<f64> {
    let d = model.derived();
    let y = model.y();
    let lead = d.c_gamma * (d.m_shift + d.g_shift) * (FRAC_PI_2 * y).sin() / PI;
    Ok(-lead * gamma(1.0 - 2.0 / y)? * d.sigma_y.powf((2.0 - y) / y))
}

/// Density at the origin of the limiting symmetric stable law,
/// `sigma_Y^(-1/Y) Gamma(1/Y) / (pi Y)`.
pub fn stable_density_at_zero(model: &CgmyModel) -> Result<f64> {
    let y = model.y();
    Ok(model.derived().sigma_y.powf(-1.0 / y) * gamma(1.0 / y)? / (PI * y))
}

/// Number of drift terms in the uniform expansion,
/// `max(floor(1 / (2(Y - 1))), 2)`.
pub fn k_cap(y: f64) -> Result<u32> {
    if !(y > 1.0 && y < 2.0) {
        return Err(Error::invalid(
            "Y",
            format!("Y must lie in the open interval (1, 2), got {y}"),
        ));
    }
    // the small offset keeps exact quotients such as 1/(2*0.1) from rounding down
    let raw = (1.0 / (2.0 * (y - 1.0)) + 1e-9).floor();
    Ok((raw as u32).max(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    StableFirstOrder,
    SecondOrder,
    Drift { k: u32 },
    BinomialFirst,
    CandidateKappaCross,
    CandidateSecondBinomial,
}

impl Mechanism {
    /// Flat label such as `drift_2`.
    pub fn label(&self) -> String {
        match self {
            Mechanism::StableFirstOrder => "stable_first_order".into(),
            Mechanism::SecondOrder => "second_order".into(),
            Mechanism::Drift { k } => format!("drift_{k}"),
            Mechanism::BinomialFirst => "binomial_first".into(),
            Mechanism::CandidateKappaCross => "candidate_kappa_cross".into(),
            Mechanism::CandidateSecondBinomial => "candidate_second_binomial".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionTerm {
    pub exponent: f64,
    pub coefficient: f64,
    pub mechanism: Mechanism,
    pub proven: bool,
    /// Another term shares this exponent.
    pub tie: bool,
    /// Lies above `max(2 - 1/Y, 2/Y)`, i.e. inside the remainder of the
    /// uniform expansion.
    pub absorbed: bool,
}

impl ExpansionTerm {
    fn new(exponent: f64, coefficient: f64, mechanism: Mechanism, proven: bool) -> Self {
        ExpansionTerm {
            exponent,
            coefficient,
            mechanism,
            proven,
            tie: false,
            absorbed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub params: CgmyParams,
    pub terms: Vec<ExpansionTerm>,
    pub k_cap: u32,
}

impl Serialize for Expansion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            #[serde(rename = "Y")]
            y: f64,
            k_cap: u32,
            terms: &'a [ExpansionTerm],
        }
        Repr {
            y: self.params.y(),
            k_cap: self.k_cap,
            terms: &self.terms,
        }
        .serialize(s)
    }
}

impl Expansion {
    /// Sum of `coefficient * t^exponent` over the proven terms.
    pub fn evaluate(&self, t: f64) -> f64 {
        self.evaluate_with(t, false)
    }

    pub fn evaluate_with(&self, t: f64, include_unproven: bool) -> f64 {
        self.terms
            .iter()
            .filter(|term| term.proven || include_unproven)
            .map(|term| term.coefficient * t.powf(term.exponent))
            .sum()
    }

    pub fn exponents(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.exponent).collect()
    }

    pub fn has_tie(&self) -> bool {
        self.terms.iter().any(|t| t.tie)
    }

    fn finish(mut self) -> Self {
        let y = self.params.y();
        let ceiling = (2.0 - 1.0 / y).max(2.0 / y);
        self.terms.sort_by(|a, b| a.exponent.total_cmp(&b.exponent));
        let exps = self.exponents();
        for (i, term) in self.terms.iter_mut().enumerate() {
            term.tie = exps
                .iter()
                .enumerate()
                .any(|(j, e)| j != i && (e - term.exponent).abs() <= EXPONENT_TIE_TOL);
            term.absorbed = term.exponent > ceiling + EXPONENT_TIE_TOL;
        }
        self
    }
}

/// Proven terms of the uniform expansion, sorted by exponent, with the
/// closed-form second-order coefficient.
pub fn expansion_terms(model: &CgmyModel) -> Result<Expansion> {
    let y = model.y();
    let cap = k_cap(y)?;
    let mut terms = vec![
        ExpansionTerm::new(1.0 / y, d1(model)?, Mechanism::StableFirstOrder, true),
        ExpansionTerm::new(1.0, d2_closed_fl(model), Mechanism::SecondOrder, true),
        ExpansionTerm::new(2.0 / y, a12(model)?, Mechanism::BinomialFirst, true),
    ];
    for k in 1..=cap {
        let kf = f64::from(k);
        terms.push(ExpansionTerm::new(
            2.0 * kf - (2.0 * kf - 1.0) / y,
            a_drift(model, k)?,
            Mechanism::Drift { k },
            true,
        ));
    }
    Ok(Expansion {
        params: *model.params(),
        terms,
        k_cap: cap,
    }
    .finish())
}

/// Proven terms followed by the unproven higher-order candidates.
pub fn expansion_with_candidates(model: &CgmyModel) -> Result<(Expansion, Vec<String>)> {
    let base = expansion_terms(model)?;
    let extra = higher_candidates(model)?;
    let mut terms = base.terms;
    terms.extend(extra.terms);
    let e = Expansion {
        params: base.params,
        terms,
        k_cap: base.k_cap,
    }
    .finish();
    Ok((e, extra.notes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidates {
    pub terms: Vec<ExpansionTerm>,
    pub notes: Vec<String>,
}

/// Candidate terms at `t^(1+1/Y)` and, for `Y > 3/2`, at `t^(3/Y)`.
/// Both are marked unproven.
pub fn higher_candidates(model: &CgmyModel) -> Result<Candidates> {
    let d = model.derived();
    let y = model.y();
    let sigma = d.sigma_y;
    let g = gamma((y - 1.0) / y)?;
    let cross = d.kappa * sigma.powf(1.0 / y) * g / PI
        + d.tilde_b * d.beta1.im * sigma.powf(-(y - 1.0) / y) * g / (PI * y);
    let mut terms = vec![ExpansionTerm::new(
        1.0 + 1.0 / y,
        cross,
        Mechanism::CandidateKappaCross,
        false,
    )];
    let mut notes = Vec::new();
    if y > 1.5 + EXPONENT_TIE_TOL {
        let second = -d.beta2.re / (PI * y) * sigma.powf((3.0 - y) / y) * gamma(1.0 - 3.0 / y)?
            - (d.beta1 * d.beta1).re / (2.0 * PI * y)
                * sigma.powf((3.0 - 2.0 * y) / y)
                * gamma((2.0 * y - 3.0) / y)?;
        terms.push(ExpansionTerm::new(
            3.0 / y,
            second,
            Mechanism::CandidateSecondBinomial,
            false,
        ));
    } else {
        notes.push(format!(
            "t^(3/Y) candidate omitted: its Laplace integrals diverge for Y <= 3/2 (Y = {y})"
        ));
    }
    Ok(Candidates { terms, notes })
}

/// Crossing of the `n`-th binomial exponent `(n+1)/Y` with the `j`-th
/// drift exponent `j + (1-j)/Y`, at `Y = (n+j)/j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bifurcation {
    pub n: u32,
    pub j: u32,
    #[serde(rename = "Y")]
    pub y: f64,
    /// False when the drift power is odd, whose coefficient vanishes.
    pub effective: bool,
}

/// All crossings with `1 <= n <= n_max`, `n < j <= j_max`, sorted by
/// descending `Y` then by `(n, j)`.
pub fn bifurcations(n_max: u32, j_max: u32) -> Vec<Bifurcation> {
    let mut out = Vec::new();
    for j in 2..=j_max {
        for n in 1..=n_max.min(j - 1) {
            out.push(Bifurcation {
                n,
                j,
                y: f64::from(n + j) / f64::from(j),
                effective: j % 2 == 0,
            });
        }
    }
    out.sort_by(|a, b| b.y.total_cmp(&a.y).then((a.n, a.j).cmp(&(b.n, b.j))));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeRow {
    #[serde(rename = "Y")]
    pub y: f64,
    pub label: &'static str,
    pub exponent: f64,
    pub coefficient_vanishes: bool,
}

/// Candidate exponent curves: label, exponent as a function of `Y`, and
/// whether the coefficient vanishes identically (odd drift powers).
pub type ExponentCurve = (&'static str, fn(f64) -> f64, bool);

pub const LATTICE_CURVES: [ExponentCurve; 9] = [
    ("1/Y", |y| 1.0 / y, false),
    ("1", |_| 1.0, false),
    ("2-1/Y", |y| 2.0 - 1.0 / y, false),
    ("2/Y", |y| 2.0 / y, false),
    ("1+1/Y", |y| 1.0 + 1.0 / y, false),
    ("3-2/Y", |y| 3.0 - 2.0 / y, true),
    ("4-3/Y", |y| 4.0 - 3.0 / y, false),
    ("3/Y", |y| 3.0 / y, false),
    ("5-4/Y", |y| 5.0 - 4.0 / y, true),
];

pub fn exponent_lattice(y_grid: &[f64]) -> Result<Vec<LatticeRow>> {
    let mut rows = Vec::with_capacity(y_grid.len() * LATTICE_CURVES.len());
    for &y in y_grid {
        if !(y > 1.0 && y < 2.0) {
            return Err(Error::invalid(
                "Y",
                format!("lattice Y must lie in (1, 2), got {y}"),
            ));
        }
        for (label, f, vanishes) in LATTICE_CURVES {
            rows.push(LatticeRow {
                y,
                label,
                exponent: f(y),
                coefficient_vanishes: vanishes,
            });
        }
    }
    Ok(rows)
}

/// Third- and fourth-order exponents: the two smallest distinct
/// non-vanishing candidates above 1.
pub fn effective_orders(y: f64) -> (f64, f64) {
    let mut exps: Vec<f64> = LATTICE_CURVES
        .iter()
        .filter(|(_, _, vanishes)| !vanishes)
        .map(|(_, f, _)| f(y))
        .filter(|&e| e > 1.0 + EXPONENT_TIE_TOL)
        .collect();
    exps.sort_by(f64::total_cmp);
    exps.dedup_by(|a, b| (*a - *b).abs() <= EXPONENT_TIE_TOL);
    (exps[0], exps[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(c: f64, g: f64, m: f64, y: f64) -> CgmyModel {
        CgmyModel::from_values(c, g, m, y).unwrap()
    }

    #[test]
    fn k_cap_values() {
        assert_eq!(k_cap(1.6).unwrap(), 2);
        assert_eq!(k_cap(1.1).unwrap(), 5);
        assert_eq!(k_cap(1.2).unwrap(), 2);
        assert_eq!(k_cap(7.0 / 6.0 + 1e-9).unwrap(), 2);
        assert_eq!(k_cap(1.05).unwrap(), 10);
        assert!(k_cap(2.0).is_err());
    }

    #[test]
    fn coefficient_oracle_values() {
        // mpmath, 40 digits
        let m = model(1.0, 3.0, 5.0, 1.2);
        assert!((d2_closed_fl(&m) + 7.668_042_538_092_748).abs() < 1e-12);
        assert!((a21(&m).unwrap() - 0.008_981).abs() < 5e-7);
        assert!((a41(&m).unwrap() + 2.117_547_6e-5).abs() < 1e-11);

        let m = model(1.0, 3.0, 5.0, 1.5);
        assert!((d1(&m).unwrap() - 1.906_186_211_859_600_9).abs() < 1e-13);
        assert!((stable_density_at_zero(&m).unwrap() - 0.128_547_286_255_344_87).abs() < 1e-15);

        let m = model(2.0, 2.0, 3.0, 1.75);
        assert!((d2_closed_fl(&m) + 19.198_111_413_245_568).abs() < 1e-11);
        assert!(((a12(&m).unwrap() - 36.297) / 36.297).abs() < 5e-4);

        let m = model(1.0, 3.0, 5.0, 1.8);
        let c = higher_candidates(&m).unwrap();
        let d3 = c
            .terms
            .iter()
            .find(|t| t.mechanism == Mechanism::CandidateSecondBinomial);
        assert!((d3.unwrap().coefficient - 145.386_569_358_478_74).abs() < 1e-9);
    }

    #[test]
    fn drift_series_identities() {
        let m = model(1.0, 3.0, 5.0, 1.1);
        assert_eq!(a_drift(&m, 1).unwrap(), a21(&m).unwrap());
        assert_eq!(a_drift(&m, 2).unwrap(), a41(&m).unwrap());
        for k in 1..=5u32 {
            let v = a_drift(&m, k).unwrap();
            assert_eq!(v > 0.0, k % 2 == 1, "k = {k}");
        }
        let d = m.derived();
        let y = m.y();
        let a61 = d.tilde_b.powi(6) * d.sigma_y.powf(-5.0 / y) * gamma(5.0 / y).unwrap()
            / (720.0 * PI * y);
        assert!((a_drift(&m, 3).unwrap() - a61).abs() <= 1e-14 * a61.abs());
        let pz = stable_density_at_zero(&m).unwrap();
        assert!((a21(&m).unwrap() / (d.tilde_b * d.tilde_b * pz / 2.0) - 1.0).abs() < 1e-15);
        assert!(a_drift(&m, 0).is_err());
    }

    #[test]
    fn term_order_by_regime() {
        let order = |y: f64| -> Vec<Mechanism> {
            expansion_terms(&model(1.0, 3.0, 5.0, y))
                .unwrap()
                .terms
                .iter()
                .map(|t| t.mechanism)
                .collect()
        };
        use Mechanism::*;
        assert_eq!(
            order(1.2),
            vec![
                StableFirstOrder,
                SecondOrder,
                Drift { k: 1 },
                Drift { k: 2 },
                BinomialFirst
            ]
        );
        assert_eq!(
            order(1.3),
            vec![
                StableFirstOrder,
                SecondOrder,
                Drift { k: 1 },
                BinomialFirst,
                Drift { k: 2 }
            ]
        );
        assert_eq!(
            order(1.7),
            vec![
                StableFirstOrder,
                SecondOrder,
                BinomialFirst,
                Drift { k: 1 },
                Drift { k: 2 }
            ]
        );
        let e = expansion_terms(&model(1.0, 3.0, 5.0, 1.5)).unwrap();
        assert!(e.has_tie());
        let tied: Vec<_> = e
            .terms
            .iter()
            .filter(|t| t.tie)
            .map(|t| t.mechanism)
            .collect();
        assert_eq!(tied.len(), 2);
        assert!(!expansion_terms(&model(1.0, 3.0, 5.0, 1.7))
            .unwrap()
            .has_tie());
    }

    #[test]
    fn absorbed_quartic_term() {
        let absorbed = |y: f64| {
            expansion_terms(&model(1.0, 3.0, 5.0, y))
                .unwrap()
                .terms
                .iter()
                .find(|t| t.mechanism == Mechanism::Drift { k: 2 })
                .unwrap()
                .absorbed
        };
        assert!(!absorbed(1.2));
        assert!(absorbed(1.3));
        assert!(absorbed(1.7));
    }

    #[test]
    fn candidates() {
        let m = model(1.0, 2.0, 3.0, 1.6);
        let c = higher_candidates(&m).unwrap();
        let d = m.derived();
        let cross = d.kappa * d.sigma_y.powf(1.0 / 1.6) * gamma(0.6 / 1.6).unwrap() / PI;
        assert!((c.terms[0].coefficient - cross).abs() <= 1e-13 * cross.abs());
        assert!(c.terms.iter().all(|t| !t.proven));

        let c = higher_candidates(&model(1.0, 3.0, 5.0, 1.5)).unwrap();
        assert_eq!(c.terms.len(), 1);
        assert!((c.terms[0].exponent - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.notes.len(), 1);

        let (e, _) = expansion_with_candidates(&model(1.0, 3.0, 5.0, 1.8)).unwrap();
        let base = expansion_terms(&model(1.0, 3.0, 5.0, 1.8)).unwrap();
        assert_eq!(e.evaluate(1e-3), base.evaluate(1e-3));
        assert_ne!(e.evaluate_with(1e-3, true), base.evaluate(1e-3));
    }

    #[test]
    fn bifurcation_list() {
        let b = bifurcations(3, 4);
        let find = |n, j| b.iter().find(|x| x.n == n && x.j == j).unwrap();
        assert_eq!(find(1, 2).y, 1.5);
        assert!(find(1, 2).effective);
        assert!(!find(1, 3).effective);
        assert!((find(1, 3).y - 4.0 / 3.0).abs() < 1e-15);
        assert!(find(1, 4).effective && find(1, 4).y == 1.25);
        assert!(b.iter().all(|x| x.y > 1.0 && x.y < 2.0));
    }

    #[test]
    fn lattice_and_effective_orders() {
        let rows = exponent_lattice(&[1.2, 1.5, 1.8]).unwrap();
        assert_eq!(rows.len(), 3 * LATTICE_CURVES.len());
        assert!(rows
            .iter()
            .filter(|r| r.label == "3-2/Y")
            .all(|r| r.coefficient_vanishes));
        let (third, fourth) = effective_orders(1.5);
        assert!((third - 4.0 / 3.0).abs() < 1e-15);
        assert!((fourth - 5.0 / 3.0).abs() < 1e-15);
        let (third, fourth) = effective_orders(1.2);
        assert!((third - (2.0 - 1.0 / 1.2)).abs() < 1e-15);
        assert!((fourth - (4.0 - 3.0 / 1.2)).abs() < 1e-15);
        assert!(exponent_lattice(&[2.0]).is_err());
    }

    #[test]
    fn d2_integral_matches_closed_form() {
        let cfg = QuadratureConfig::default();
        for (c, g, m, y) in [
            (1.0, 3.0, 5.0, 1.5),
            (2.0, 2.0, 3.0, 1.75),
            (1.0, 1.0, 8.0, 1.2),
        ] {
            let md = model(c, g, m, y);
            let r = d2_integral(&md, &cfg).unwrap();
            assert!(r.converged);
            assert!(
                (r.value - d2_closed_fl(&md)).abs() < 5e-6,
                "{c} {g} {m} {y}"
            );
        }
    }
}
