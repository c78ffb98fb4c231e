//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use cgmy_atm::expansion::{self, a12, a21, a41, a_drift, d1, d2_integral, expansion_terms, k_cap};
use cgmy_atm::harness::{formula_checks, run_heatmap, run_table, GridSpec, TableRow, Target};
use cgmy_atm::pricer::{price, price_atm, remainder_r3};
use cgmy_atm::quadrature::{integrate, laplace_exp_integral, laplace_frac_integral};
use cgmy_atm::{CgmyModel, QuadratureConfig};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn base(y: f64) -> CgmyModel {
    CgmyModel::from_values(1.0, 3.0, 5.0, y).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, || {
        format!("runtime {elapsed:.2?} exceeds {limit:?}")
    })
}

fn stable_cfg(lambda: f64, y: f64) -> QuadratureConfig {
    let w = lambda.powf(-1.0 / y);
    QuadratureConfig::default()
        .with_breakpoints(vec![w, 10.0 * w])
        .with_grading(10.0, 10.0)
}

fn laplace_identities() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for lambda in [1e-6, 1e-4, 1e-2, 1.0] {
        for y in [1.1, 1.3, 1.5, 1.7, 1.9] {
            let cfg = stable_cfg(lambda, y);
            for p in [0.0, 2.0, 4.0] {
                let exact = laplace_exp_integral(lambda, y, p).map_err(|e| e.to_string())?;
                let q = integrate(
                    |w| w.powf(p) * (-lambda * w.powf(y)).exp(),
                    0.0,
                    f64::INFINITY,
                    &cfg,
                )
                .map_err(|e| e.to_string())?;
                worst = worst.max(rel(q.value, exact));
            }
            let alpha = 1.0 - 2.0 / y;
            let exact = laplace_frac_integral(lambda, y, alpha).map_err(|e| e.to_string())?;
            let q = integrate(
                |u| -(-lambda * u.powf(y)).exp_m1() * u.powf(alpha * y - 1.0),
                0.0,
                f64::INFINITY,
                &cfg,
            )
            .map_err(|e| e.to_string())?;
            worst = worst.max(rel(q.value, exact));
        }
    }
    ensure(worst <= 1e-10, || format!("max relative error {worst:.3e}"))?;
    within_budget(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn first_coefficient() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 1..=9 {
        let y = 1.0 + 0.1 * i as f64;
        for c in [0.5, 1.0, 2.0] {
            let md = CgmyModel::from_values(c, 3.0, 5.0, y).map_err(|e| e.to_string())?;
            let sigma = md.derived().sigma_y;
            let q = integrate(
                |w| -(-sigma * w.powf(y)).exp_m1() / (w * w),
                0.0,
                f64::INFINITY,
                &stable_cfg(sigma, y),
            )
            .map_err(|e| e.to_string())?;
            worst = worst.max(rel(q.value / PI, d1(&md).map_err(|e| e.to_string())?));
        }
    }
    ensure(worst <= 1e-10, || format!("max relative error {worst:.3e}"))?;
    within_budget(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn second_coefficient_heatmap() -> Outcome {
    let start = Instant::now();
    let cfg = QuadratureConfig::default();
    let mut summary = Vec::new();
    for y in [1.2, 1.5, 1.8] {
        let cells =
            run_heatmap(y, 1.0, (2.0, 8.0, 8), (1.0, 7.0, 8), &cfg).map_err(|e| e.to_string())?;
        ensure(cells.len() == 64, || {
            format!("Y={y}: {} cells", cells.len())
        })?;
        let worst = cells.iter().map(|c| c.difference.abs()).fold(0.0, f64::max);
        ensure(worst <= 5e-6 && cells.iter().all(|c| c.converged), || {
            format!("Y={y}: max |difference| {worst:.3e}")
        })?;
        summary.push(format!("Y={y}: {worst:.1e}"));
    }
    within_budget(start.elapsed(), Duration::from_secs(120))?;
    Ok(summary.join(", "))
}

/// Printed table values: parameter columns by `Y`, then rows of `(t, values)`.
struct Printed {
    ys: &'static [f64],
    rows: &'static [(f64, &'static [f64])],
}

const PRINTED_A21: Printed = Printed {
    ys: &[1.2, 1.3, 1.4],
    rows: &[
        (1e-2, &[0.95748, 0.94573, 0.93216]),
        (1e-3, &[0.99347, 0.99031, 0.98620]),
        (1e-4, &[0.99903, 0.99834, 0.99731]),
        (1e-5, &[0.99986, 0.99972, 0.99948]),
        (1e-6, &[0.99998, 0.99995, 0.99990]),
        (1e-7, &[1.00000, 0.99999, 0.99998]),
    ],
};

const PRINTED_A12: Printed = Printed {
    ys: &[1.7, 1.8, 1.9, 1.75],
    rows: &[
        (1e-2, &[0.98782, 0.99140, 0.99396, 0.98291]),
        (1e-3, &[0.99794, 0.99864, 0.99905, 0.99710]),
        (1e-4, &[0.99967, 0.99980, 0.99987, 0.99956]),
        (1e-5, &[0.99995, 0.99997, 0.99998, 0.99994]),
        (1e-6, &[0.99999, 1.00000, 1.00000, 0.99999]),
        (1e-7, &[1.00000, 1.00000, 1.00000, 1.00000]),
    ],
};

const PRINTED_CONVERGENCE: Printed = Printed {
    ys: &[1.2, 1.3, 1.4, 1.7, 1.9],
    rows: &[
        (1e-2, &[0.242, 0.380, 0.493, 0.742, 0.886]),
        (1e-3, &[0.406, 0.572, 0.684, 0.865, 0.942]),
        (1e-4, &[0.562, 0.728, 0.821, 0.937, 0.973]),
        (1e-5, &[0.688, 0.834, 0.904, 0.973, 0.989]),
        (1e-6, &[0.781, 0.901, 0.950, 0.989, 0.996]),
    ],
};

const PRINTED_CUBIC: Printed = Printed {
    ys: &[1.15, 1.2],
    rows: &[
        (1e-2, &[3.12, 5.12]),
        (1e-3, &[1.85, 3.98]),
        (1e-4, &[0.903, 2.56]),
        (1e-5, &[0.385, 1.45]),
    ],
};

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs()
}

/// Computed ratio for column `col` of a published-grid run, as a
/// function of `t` in the order the printed table lists them.
fn column(
    rows: &[TableRow],
    y: f64,
    col: usize,
    printed: &Printed,
) -> Result<Vec<(f64, f64, f64)>, String> {
    printed
        .rows
        .iter()
        .map(|&(t, vals)| {
            let row = rows
                .iter()
                .find(|r| same(r.y, y) && same(r.t, t))
                .ok_or_else(|| format!("no computed cell for Y={y}, t={t:e}"))?;
            ensure(row.converged && row.failure.is_none(), || {
                format!(
                    "Y={y}, t={t:e}: {}",
                    row.failure.clone().unwrap_or("not converged".into())
                )
            })?;
            Ok((t, row.ratio, vals[col]))
        })
        .collect()
}

fn table_check(
    target: Target,
    printed: &Printed,
    limit: Duration,
    cell_ok: impl Fn(f64, f64) -> bool,
    monotone: impl Fn(f64, f64) -> bool,
) -> Outcome {
    let start = Instant::now();
    let rows = run_table(
        &GridSpec::published(target).map_err(|e| e.to_string())?,
        &QuadratureConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let mut cells = 0;
    let mut worst = 0.0f64;
    for (col, &y) in printed.ys.iter().enumerate() {
        let seq = column(&rows, y, col, printed)?;
        for &(t, ratio, want) in &seq {
            ensure(cell_ok(ratio, want), || {
                format!("Y={y}, t={t:e}: ratio {ratio:.6} vs printed {want}")
            })?;
            worst = worst.max((ratio - want).abs());
            cells += 1;
        }
        for pair in seq.windows(2) {
            ensure(monotone(pair[0].1, pair[1].1), || {
                format!(
                    "Y={y}: ratio {} at t={:e} then {} at t={:e}",
                    pair[0].1, pair[0].0, pair[1].1, pair[1].0
                )
            })?;
        }
    }
    let formulas = formula_checks(target).map_err(|e| e.to_string())?;
    for f in &formulas {
        let ok = match f.name {
            "a21" => (f.value - f.published).abs() <= 5e-7,
            _ => rel(f.value, f.published) <= 5e-4,
        };
        ensure(ok, || {
            format!(
                "{} {}: {} vs printed {}",
                f.name, f.params_label, f.value, f.published
            )
        })?;
    }
    within_budget(start.elapsed(), limit)?;
    Ok(format!(
        "{cells} cells, {} formula values, max |diff| {worst:.2e}",
        formulas.len()
    ))
}

fn consistency_identity() -> Outcome {
    let cfg = QuadratureConfig::default();
    let mut worst = 0.0f64;
    for y in [1.3, 1.7] {
        let md = base(y);
        let c1 = d1(&md).map_err(|e| e.to_string())?;
        let d2 = d2_integral(&md, &cfg).map_err(|e| e.to_string())?;
        for t in [1e-2, 1e-3, 1e-4] {
            let p = price_atm(&md, t, &cfg).map_err(|e| e.to_string())?;
            let r3 = remainder_r3(&md, t, &cfg).map_err(|e| e.to_string())?;
            let gap = (p.value - c1 * t.powf(1.0 / y) - d2.value * t - r3.value).abs();
            let budget = 10.0 * (p.error_estimate + r3.error_estimate + t * d2.error_estimate);
            ensure(gap <= budget, || {
                format!("Y={y}, t={t:e}: gap {gap:.3e} > {budget:.3e}")
            })?;
            worst = worst.max(gap / budget);
        }
    }
    Ok(format!("max gap / budget {worst:.2}"))
}

fn property_suite() -> Outcome {
    let cfg = QuadratureConfig::default();
    let mut checks = 0;
    let mut check = |ok: bool, what: String| {
        checks += 1;
        ensure(ok, || what)
    };

    for g in [0.5, 2.0, 3.0, 7.0] {
        for m in [1.5, 5.0, 10.0] {
            for y in [1.1, 1.5, 1.9] {
                let md = CgmyModel::from_values(1.0, g, m, y).map_err(|e| e.to_string())?;
                let r = md
                    .psi(Complex64::new(0.0, -1.0))
                    .map_err(|e| e.to_string())?;
                check(
                    r.norm() <= 1e-12,
                    format!("martingale residual {r} at G={g} M={m} Y={y}"),
                )?;
            }
        }
    }

    for y in [1.2, 1.5, 1.8] {
        let md = base(y);
        for v in [0.1, 1.0, 10.0, 100.0] {
            let a = md.psi_shifted(v);
            let b = md.psi_shifted(-v);
            check(
                (a - b.conj()).norm() <= 1e-13 * a.norm(),
                format!("Hermitian symmetry at Y={y} v={v}"),
            )?;
        }
        for t in [1e-2, 1e-4, 1e-7] {
            for v in [0.1, 1.0, 10.0] {
                let lhs = md.theta(t, v);
                let rhs = t * md.psi_shifted(v * t.powf(-1.0 / y));
                check(
                    (lhs - rhs).norm() <= 1e-12 * rhs.norm(),
                    format!("scaling identity at Y={y} t={t:e} v={v}"),
                )?;
            }
        }
    }

    for y in [1.3, 1.7] {
        let md = base(y);
        for k in [-0.3f64, 0.0, 0.3] {
            let intrinsic = (-(-k).exp_m1()).max(0.0);
            let mut prev = 0.0;
            for t in [1e-4, 1e-3, 1e-2, 1e-1] {
                let c = price(&md, t, k, &cfg).map_err(|e| e.to_string())?.value;
                check(
                    c > prev,
                    format!("price not increasing in t at Y={y} k={k} t={t:e}"),
                )?;
                check(
                    c >= intrinsic,
                    format!("price below intrinsic at Y={y} k={k} t={t:e}"),
                )?;
                prev = c;
            }
        }
    }

    for y in [1.2, 1.5, 1.8] {
        let md = base(y);
        let e = |r: cgmy_atm::Result<f64>| r.map_err(|e| e.to_string());
        check(
            e(a_drift(&md, 1))? == e(a21(&md))?,
            format!("a_drift(1) != a21 at Y={y}"),
        )?;
        check(
            e(a_drift(&md, 2))? == e(a41(&md))?,
            format!("a_drift(2) != a41 at Y={y}"),
        )?;
        let b = md.derived().tilde_b;
        let density = e(expansion::stable_density_at_zero(&md))?;
        check(
            rel(b * b * density / 2.0, e(a21(&md))?) <= 4.0 * f64::EPSILON,
            format!("a21 differs from b^2 p(0)/2 at Y={y}"),
        )?;
        let reference = e(a12(&md))?;
        for (g, m) in [(2.0, 6.0), (4.0, 4.0)] {
            let shifted = CgmyModel::from_values(1.0, g, m, y).map_err(|e| e.to_string())?;
            check(
                rel(e(a12(&shifted))?, reference) <= 1e-13,
                format!("a12 changes under G={g} M={m} at Y={y}"),
            )?;
        }
    }

    let tie = expansion_terms(&base(1.5))
        .map_err(|e| e.to_string())?
        .has_tie();
    check(tie, "no exponent tie flagged at Y=1.5".into())?;
    for (y, want) in [(1.1, 5), (1.2, 2), (1.6, 2)] {
        let got = k_cap(y).map_err(|e| e.to_string())?;
        check(got == want, format!("K({y}) = {got}, expected {want}"))?;
    }
    Ok(format!("{checks} checks"))
}

fn sci(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:.3e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn expansion_convergence() -> Outcome {
    let y = 1.7;
    let md = base(y);
    let cfg = QuadratureConfig::default();
    let exp = expansion_terms(&md).map_err(|e| e.to_string())?;
    let scaled: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&t: &f64| {
            let p = price_atm(&md, t, &cfg).map_err(|e| e.to_string())?.value;
            Ok((p - exp.evaluate(t)).abs() / t.powf(2.0 - 1.0 / y))
        })
        .collect::<Result<_, String>>()?;
    ensure(scaled.windows(2).all(|w| w[1] < w[0]), || {
        format!("not decreasing: {}", sci(&scaled))
    })?;
    Ok(format!("scaled errors {}", sci(&scaled)))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Laplace identities vs quadrature", laplace_identities),
        ("first-order coefficient closed form", first_coefficient),
        (
            "second-order coefficient heatmaps",
            second_coefficient_heatmap,
        ),
        ("drift-squared check table", || {
            table_check(
                Target::TableA21,
                &PRINTED_A21,
                Duration::from_secs(60),
                |r, p| (r - p).abs() <= 5e-4,
                |earlier, later| later >= earlier,
            )
        }),
        ("first-binomial check table", || {
            table_check(
                Target::TableA12,
                &PRINTED_A12,
                Duration::from_secs(60),
                |r, p| (r - p).abs() <= 5e-4,
                |earlier, later| later >= earlier,
            )
        }),
        ("remainder convergence table", || {
            table_check(
                Target::TableConvergence,
                &PRINTED_CONVERGENCE,
                Duration::from_secs(300),
                |r, p| (r - p).abs() <= 0.01,
                |earlier, later| later > earlier && later < 1.0,
            )
        }),
        ("vanishing cubic drift table", || {
            table_check(
                Target::TableCubic,
                &PRINTED_CUBIC,
                Duration::from_secs(300),
                |r, p| rel(r, p) <= 0.10,
                |earlier, later| later < earlier,
            )
        }),
        ("price decomposition identity", consistency_identity),
        ("property suite", property_suite),
        ("full expansion convergence", expansion_convergence),
    ];

    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({elapsed:.2?}): {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name} ({elapsed:.2?}): {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
