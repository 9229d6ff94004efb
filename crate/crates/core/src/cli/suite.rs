//! The verification battery behind `evanslewis suite`.

use rayon::prelude::*;
use serde::Serialize;

use super::args::GlobalOpts;
use super::commands::{additivity_gap, quadrature_config, ORDER_BAND};
use super::output::{to_json, Check, Document, Rendered, RunManifest, Table};
use super::CliError;
use crate::cartesian::{consistency_report, default_points, FdConfig};
use crate::profiles::RadialProfile;
use crate::quadrature::QuadratureConfig;
use crate::rayleigh::{convergence_study, FormKind};
use crate::scalar::{frac, Rational};
use crate::sharp::{
    generalized_alpha, global_spherical_constant, improved_constant, region_boundary,
    region_closed_form, SpectrumSpec,
};
use crate::spectral::{cross_term, norms_report, proof_ledger_from_report, TestFunction};
use crate::Error;

type Cfg = QuadratureConfig<f64>;

#[derive(Debug, Serialize)]
pub struct SuiteItem {
    pub criterion: usize,
    pub title: &'static str,
    pub checks: Vec<Check>,
    /// Engine error that stopped the item, if any.
    pub error: Option<String>,
    pub pass: bool,
}

/// Functions covering modes 0..=5, every profile family and mixtures.
pub fn identity_functions() -> crate::Result<Vec<TestFunction<f64>>> {
    let pe = RadialProfile::poly_exp;
    let pb = RadialProfile::power_bump;
    let gl = RadialProfile::gaussian_log;
    let tab = RadialProfile::tabulated(
        -1.5,
        1.5,
        (0..25)
            .map(|i| {
                let t = i as f64 / 24.0;
                (std::f64::consts::PI * t).sin().powi(2) * (1.0 + 0.5 * (5.0 * t).cos())
            })
            .collect(),
    )?;
    let mut out = Vec::new();
    for k in 0..=5usize {
        let m = k as i32 / 2;
        out.push(TestFunction::sphere(vec![(
            k,
            m,
            pe(k as f64 + 1.0, 1.0)?,
        )])?);
        out.push(TestFunction::sphere(vec![(
            k,
            -m,
            pb(0.5 + k as f64 * 0.25, 0.3, 1.2)?,
        )])?);
        out.push(TestFunction::sphere(vec![(
            k,
            0,
            gl(1.0 - k as f64 * 0.1, -0.2, 0.7)?,
        )])?);
    }
    out.push(TestFunction::sphere(vec![(
        1,
        0,
        RadialProfile::plateau(3.0)?,
    )])?);
    out.push(TestFunction::sphere(vec![(2, 1, tab)])?);
    out.push(TestFunction::sphere(vec![
        (0, 0, pe(2.0, 1.0)?),
        (1, 0, pe(1.0, 1.0)?),
        (3, -2, pb(1.0, 0.0, 1.0)?),
    ])?);
    out.push(TestFunction::sphere(vec![
        (2, 2, gl(0.5, 0.4, 0.5)?),
        (4, -1, pe(3.0, 2.0)?),
        (5, 5, RadialProfile::plateau(2.0)?),
    ])?);
    Ok(out)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn worked(cfg: &Cfg) -> crate::Result<Vec<Check>> {
    let f = TestFunction::sphere(vec![(1, 0, RadialProfile::poly_exp(1.0, 1.0)?)])?;
    let r = norms_report(&f, cfg)?;
    let names = [
        "lap_sq",
        "lap_r_sq",
        "lap_s_sq",
        "sph_grad_sq",
        "inv_sq",
        "fstar_term",
    ];
    let exact = [1.75, 0.75, 2.0, 1.0, 0.5, 0.25];
    let mut checks: Vec<Check> = names
        .iter()
        .zip(exact)
        .zip(r.totals.as_array())
        .map(|((n, e), v)| Check::at_most(n, rel(v, e), 1e-9))
        .collect();
    checks.push(Check::at_most(
        "identity_residual",
        r.identity_residual.abs(),
        1e-9,
    ));
    Ok(checks)
}

fn identity_suite(cfg: &Cfg) -> crate::Result<Vec<Check>> {
    let fs = identity_functions()?;
    let worst = fs
        .par_iter()
        .map(|f| norms_report(f, cfg).map(|r| r.identity_residual.abs() / r.totals.lap_sq))
        .collect::<crate::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    Ok(vec![
        Check::at_least("functions", fs.len() as f64, 20.0),
        Check::at_most("max_relative_residual", worst, 1e-8),
    ])
}

fn sharp_constants(cfg: &Cfg) -> crate::Result<Vec<Check>> {
    let global = global_spherical_constant(&SpectrumSpec::<f64>::sphere(10))?;
    let improved = improved_constant::<f64>()?;
    let region_diff = (0..21)
        .into_par_iter()
        .map(|i| {
            let k1 = i as f64 / 20.0;
            region_boundary(k1, &SpectrumSpec::sphere(10))
                .map(|p| (p.k2_max - region_closed_form(k1)).abs())
        })
        .collect::<crate::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    let alpha_exact = generalized_alpha(Rational::from_integer(2))? == frac::<Rational>(39, 64);
    let first_exact = frac::<Rational>(3, 2) / Rational::from_integer(2) == frac::<Rational>(3, 4);

    let f = TestFunction::sphere(vec![(1, 0, RadialProfile::poly_exp(1.0, 1.0)?)])?;
    let report = norms_report(&f, cfg)?;
    let n1 = proof_ledger_from_report(&report, 0.75)?.n1;
    let n2 = proof_ledger_from_report(&report, generalized_alpha(2.0)?)?.n2_lower;
    Ok(vec![
        Check::at_most("global_spherical", rel(global.constant, 64.0 / 25.0), 1e-10),
        Check::at_most("improved", (improved.constant - 0.25).abs(), 1e-9),
        Check::at_most("region_boundary", region_diff, 1e-6),
        Check::flag("alpha_39_64_exact", alpha_exact),
        Check::flag("alpha_3_4_exact", first_exact),
        Check::at_most("n1_at_3_4", n1.abs(), 1e-9),
        Check::at_most("n2_at_39_64", n2.abs(), 1e-9),
    ])
}

const HALF_LENGTHS: [f64; 3] = [5.0, 10.0, 20.0];

fn radial_rellich(cfg: &Cfg) -> crate::Result<Vec<Check>> {
    let bound = 16.0 / 9.0;
    let study = convergence_study(0.0, FormKind::Inv, FormKind::LapR, &HALF_LENGTHS)?;
    let theta = study.rows.last().expect("three rows").theta;
    let peak = study.rows.iter().fold(0.0f64, |a, r| a.max(r.theta));
    let f = TestFunction::sphere(vec![(0, 0, RadialProfile::plateau(20.0)?)])?;
    let r = norms_report(&f, cfg)?;
    Ok(vec![
        Check::at_least("theta_fraction", theta / bound, 0.98),
        Check::at_most("theta_guard", peak / bound, 1.0 + 1e-3),
        Check::flag("nondecreasing", study.nondecreasing),
        Check::at_least(
            "plateau_fraction",
            r.totals.inv_sq / r.totals.lap_r_sq / bound,
            0.98,
        ),
    ])
}

fn variational(_: &Cfg) -> crate::Result<Vec<Check>> {
    let c = 64.0 / 25.0;
    let study = convergence_study(2.0, FormKind::LapS, FormKind::Lap, &HALF_LENGTHS)?;
    let theta = study.rows.last().expect("three rows").theta;
    Ok(vec![
        Check::at_least("theta_lower", theta, 0.95 * c),
        Check::at_most("theta_upper", theta, c * 1.001),
        Check::flag("nondecreasing", study.nondecreasing),
    ])
}

fn generalized(_: &Cfg) -> crate::Result<Vec<Check>> {
    let sphere = global_spherical_constant(&SpectrumSpec::<f64>::sphere(10))?;
    let custom = global_spherical_constant(&SpectrumSpec::custom(vec![0.0, 4.0, 10.0, 18.0])?)?;
    let expect = (16.0f64 / 13.0).powi(2);
    let singular =
        SpectrumSpec::custom(vec![0.0, 0.75, 6.0]).and_then(|s| global_spherical_constant(&s));
    Ok(vec![
        Check::at_most("sphere", rel(sphere.constant, 64.0 / 25.0), 1e-10),
        Check::at_most("custom", rel(custom.constant, expect), 1e-10),
        Check::flag("custom_index", custom.attaining_index == Some(1)),
        Check::flag(
            "singular_rejected",
            matches!(singular, Err(Error::SingularSpectrum(_))),
        ),
    ])
}

fn cross_terms(cfg: &Cfg) -> crate::Result<Vec<Check>> {
    let fs = identity_functions()?;
    let worst = fs
        .par_iter()
        .map(|f| cross_term(f, cfg).map(|c| c.slack))
        .collect::<crate::Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let plateau = TestFunction::sphere(vec![(1, 0, RadialProfile::plateau(20.0)?)])?;
    let c = cross_term(&plateau, cfg)?;
    Ok(vec![
        Check::at_least("min_slack", worst, -1e-9),
        Check::at_most("plateau_relative_slack", c.slack / c.lap_sq, 0.05),
        Check::at_most(
            "slack_matches_fstar",
            rel(c.slack, 2.0 * c.fstar_term),
            1e-6,
        ),
    ])
}

fn cartesian(_: &Cfg) -> crate::Result<Vec<Check>> {
    let cases = [
        (1, 0, RadialProfile::poly_exp(1.0, 1.0)?, 0.2, 0.5, 10),
        (
            2,
            1,
            RadialProfile::power_bump(2.0, 0.0, 1.0)?,
            1.7,
            2.6,
            12,
        ),
        (
            3,
            1,
            RadialProfile::power_bump(0.0, 0.0, 1.0)?,
            1.7,
            2.6,
            12,
        ),
    ];
    let mut checks = Vec::new();
    for (k, m, g, lo, hi, count) in cases {
        let points = default_points(k, m, lo, hi, count)?;
        let r = consistency_report(k, m, &g, &points, &FdConfig::default())?;
        checks.push(Check::at_least(
            &format!("k{k}_points"),
            points.len() as f64,
            10.0,
        ));
        checks.push(Check::at_most(
            &format!("k{k}_rel_err_lap"),
            r.max_rel_err_lap,
            1e-4,
        ));
        checks.push(Check::at_most(
            &format!("k{k}_rel_err_sph"),
            r.max_rel_err_sph,
            1e-4,
        ));
        checks.push(Check::flag(
            &format!("k{k}_order"),
            r.all_orders_within(ORDER_BAND.0, ORDER_BAND.1),
        ));
    }
    Ok(checks)
}

fn properties(cfg: &Cfg) -> crate::Result<Vec<Check>> {
    let fs = identity_functions()?;
    let quotients = |r: &crate::spectral::NormReport<f64>| {
        let q = r.totals.as_array();
        q.map(|v| v / q[0])
    };
    let dilation = fs
        .par_iter()
        .map(|f| {
            let a = norms_report(f, cfg)?;
            let b = norms_report(&f.dilate(2.5)?, cfg)?;
            Ok(quotients(&a)
                .iter()
                .zip(quotients(&b))
                .fold(0.0f64, |m, (x, y)| {
                    m.max((x - y).abs() / x.abs().max(1e-300))
                }))
        })
        .collect::<crate::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    let multi = fs.iter().filter(|f| f.components().len() > 1);
    let mut additivity = 0.0f64;
    for f in multi {
        additivity = additivity.max(additivity_gap(f, &norms_report(f, cfg)?, cfg)?);
    }
    let f = &fs[fs.len() - 1];
    let once = to_json(&norms_report(f, cfg)?);
    let twice = to_json(&norms_report(f, cfg)?);
    Ok(vec![
        Check::at_most("dilation", dilation, 1e-8),
        Check::at_most("additivity", additivity, 1e-8),
        Check::flag("deterministic", once == twice),
    ])
}

type ItemFn = fn(&Cfg) -> crate::Result<Vec<Check>>;

const ITEMS: [(usize, &str, ItemFn); 9] = [
    (1, "worked rational example", worked),
    (2, "identity suite", identity_suite),
    (3, "sharp constants", sharp_constants),
    (4, "radial Rellich", radial_rellich),
    (5, "variational vs symbol", variational),
    (6, "generalized Laplacian", generalized),
    (7, "cross term", cross_terms),
    (8, "Cartesian finite differences", cartesian),
    (9, "properties", properties),
];

pub fn run_items(cfg: &Cfg) -> Vec<SuiteItem> {
    ITEMS
        .par_iter()
        .map(|(criterion, title, f)| {
            let (checks, error) = match f(cfg) {
                Ok(c) => (c, None),
                Err(e) => (Vec::new(), Some(e.to_string())),
            };
            let pass = error.is_none() && checks.iter().all(|c| c.pass);
            SuiteItem {
                criterion: *criterion,
                title,
                checks,
                error,
                pass,
            }
        })
        .collect()
}

#[derive(Serialize)]
struct SuiteResult<'a> {
    items: &'a [SuiteItem],
}

pub fn suite(global: &GlobalOpts, manifest: &RunManifest) -> Result<Rendered, CliError> {
    let items = run_items(&quadrature_config(global)?);
    let pass = items.iter().all(|i| i.pass);
    let mut table = Table::new(&["criterion", "title", "check", "value", "bound", "pass"]);
    for i in &items {
        if let Some(e) = &i.error {
            table.push(vec![
                i.criterion.into(),
                i.title.into(),
                "error".into(),
                e.as_str().into(),
                "".into(),
                false.into(),
            ]);
        }
        for c in &i.checks {
            table.push(vec![
                i.criterion.into(),
                i.title.into(),
                c.name.as_str().into(),
                c.value.into(),
                c.bound.into(),
                c.pass.into(),
            ]);
        }
    }
    let csv = table.render(manifest);
    let json = to_json(&Document {
        manifest,
        result: SuiteResult { items: &items },
        checks: &[],
        pass,
    });
    Ok(Rendered {
        files: vec![
            ("suite.csv".into(), csv.clone()),
            ("suite.json".into(), json.clone()),
        ],
        csv,
        json,
        pass,
    })
}
