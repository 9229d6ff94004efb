use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::args::{Demo, ExtremizeArgs, GlobalOpts, RegionArgs, SharpArgs, VerifyArgs, XcheckArgs};
use super::output::{checks_table, to_json, Cell, Check, Document, Rendered, RunManifest, Table};
use super::CliError;
use crate::cartesian::{consistency_report, default_points, ConsistencyReport, FdConfig};
use crate::profiles::RadialProfile;
use crate::quadrature::QuadratureConfig;
use crate::rayleigh::{
    assemble_forms, convergence_study_with, extremizer_profile, max_generalized_eig, rescore,
    ConvergenceStudy, FormKind, LogGrid, NODES_PER_HALF_LENGTH,
};
use crate::sharp::{
    alpha_table, global_spherical_constant, region_boundary, RegionPoint, SharpConstantResult,
    SpectrumSpec,
};
use crate::spectral::{
    check_inequalities, cross_term, norms_report, CrossTerm, InequalitySlacks, ModeComponent,
    NormReport, SpectrumKind, TestFunction,
};

/// Order-ratio band of a second-order stencil under `h -> h/2`.
pub const ORDER_BAND: (f64, f64) = (3.5, 4.5);

/// Steps above this are run in reporting mode without the order assertion.
pub const XCHECK_ASSERT_MAX_H: f64 = 1e-2;

/// Relative tolerance of the additivity check across modes.
pub const ADDITIVITY_TOL: f64 = 1e-8;

/// Allowed relative gap between the discrete quotient and its re-score.
pub const RESCORE_TOL: f64 = 0.01;

pub fn quadrature_config(g: &GlobalOpts) -> Result<QuadratureConfig<f64>, CliError> {
    Ok(QuadratureConfig::new(
        g.rel_tol,
        g.abs_tol,
        g.max_subdivisions,
    )?)
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// One `{k, m, profile}` entry of a function spec file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentEntry {
    k: usize,
    #[serde(default)]
    m: i32,
    profile: RadialProfile<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionFile {
    components: Vec<ComponentEntry>,
    #[serde(default)]
    spectrum: Option<SpectrumSpec<f64>>,
}

/// Parses a function spec: a JSON array of components, or an object with
/// `components` and an optional `spectrum`. Errors carry line and column.
pub fn parse_function(text: &str) -> Result<TestFunction<f64>, CliError> {
    let bad = |e: serde_json::Error| CliError::Usage(format!("malformed function spec: {e}"));
    let file = match text.trim_start().chars().next() {
        Some('[') => FunctionFile {
            components: serde_json::from_str(text).map_err(bad)?,
            spectrum: None,
        },
        Some('{') => serde_json::from_str(text).map_err(bad)?,
        _ => {
            return Err(CliError::Usage(
                "malformed function spec: expected a JSON array or object at line 1".into(),
            ))
        }
    };
    let spectrum = match file.spectrum {
        Some(s) if !s.is_sphere() => SpectrumKind::Custom(s),
        _ => SpectrumKind::Sphere,
    };
    let components = file
        .components
        .into_iter()
        .map(|c| match &spectrum {
            SpectrumKind::Sphere => ModeComponent::sphere(c.k, c.m, c.profile),
            SpectrumKind::Custom(s) => ModeComponent::in_spectrum(s, c.k, c.m, c.profile),
        })
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(TestFunction::new(components, spectrum)?)
}

pub fn demo_function(demo: Demo) -> crate::Result<TestFunction<f64>> {
    match demo {
        Demo::Worked => TestFunction::sphere(vec![(1, 0, RadialProfile::poly_exp(1.0, 1.0)?)]),
        Demo::TwoMode => TestFunction::sphere(vec![
            (0, 0, RadialProfile::poly_exp(2.0, 1.0)?),
            (1, 0, RadialProfile::poly_exp(1.0, 1.0)?),
        ]),
        Demo::Plateau => TestFunction::sphere(vec![(1, 0, RadialProfile::plateau(20.0)?)]),
    }
}

#[derive(Serialize)]
struct VerifyResult<'a> {
    function: &'a TestFunction<f64>,
    report: &'a NormReport<f64>,
    slacks: Option<InequalitySlacks<f64>>,
    cross_term: Option<CrossTerm<f64>>,
    /// Sharp constant of the spectrum, for custom spectra.
    spherical_constant: Option<f64>,
}

/// Largest relative gap between the totals and the sum of one-mode reports.
pub fn additivity_gap(
    f: &TestFunction<f64>,
    report: &NormReport<f64>,
    cfg: &QuadratureConfig<f64>,
) -> crate::Result<f64> {
    let singles = (0..f.components().len())
        .into_par_iter()
        .map(|i| norms_report(&f.single_mode(i), cfg))
        .collect::<crate::Result<Vec<_>>>()?;
    let mut sums = [0.0; 6];
    for s in &singles {
        for (acc, v) in sums.iter_mut().zip(s.totals.as_array()) {
            *acc += v;
        }
    }
    let totals = report.totals.as_array();
    let scale = totals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    Ok(sums
        .iter()
        .zip(totals)
        .fold(0.0f64, |a, (s, t)| a.max((s - t).abs() / scale)))
}

pub fn verify(
    args: &VerifyArgs,
    global: &GlobalOpts,
    manifest: &RunManifest,
) -> Result<Rendered, CliError> {
    let f = match (args.demo, &args.file) {
        (Some(d), _) => demo_function(d)?,
        (None, Some(path)) => parse_function(&read(path)?)?,
        (None, None) => {
            return Err(CliError::Usage(
                "give a function spec file or --demo".into(),
            ))
        }
    };
    let cfg = quadrature_config(global)?;
    let report = norms_report(&f, &cfg)?;
    let tol = report.default_tol();

    let mut checks = vec![Check::at_most(
        "identity_residual",
        report.identity_residual.abs(),
        tol,
    )];
    let mode_worst = report.per_mode.iter().fold(0.0f64, |a, m| {
        a.max(m.identity_residual.abs() / m.norms.lap_sq.max(1.0))
    });
    checks.push(Check::at_most("mode_identity_residual", mode_worst, 1e-9));
    if f.components().len() > 1 {
        checks.push(Check::at_most(
            "additivity",
            additivity_gap(&f, &report, &cfg)?,
            ADDITIVITY_TOL,
        ));
    }

    let (mut slacks, mut cross, mut constant) = (None, None, None);
    if f.is_sphere() {
        let s = check_inequalities(&report, args.k1.zip(args.k2))?;
        checks.push(Check::at_least(
            "radial_dominance",
            s.radial_dominance,
            -tol,
        ));
        checks.push(Check::at_least("spherical", s.spherical, -tol));
        checks.push(Check::at_least("improved", s.improved, -tol));
        checks.push(Check::at_least("radial_rellich", s.radial_rellich, -tol));
        if let Some(w) = s.weighted.filter(|w| w.proven_region) {
            checks.push(Check::at_least("weighted", w.slack, -tol));
        }
        let c = cross_term(&f, &cfg)?;
        checks.push(Check::at_least("cross_term", c.slack, -tol));
        slacks = Some(s);
        cross = Some(c);
    } else if let SpectrumKind::Custom(spec) = f.spectrum() {
        let c = global_spherical_constant(spec)?.constant;
        checks.push(Check::at_least(
            "generalized_spherical",
            c * report.totals.lap_sq - report.totals.lap_s_sq,
            -tol * c.max(1.0),
        ));
        constant = Some(c);
    }
    let pass = checks.iter().all(|c| c.pass);

    let mut table = Table::new(&[
        "k",
        "m",
        "eigenvalue",
        "lap_sq",
        "lap_r_sq",
        "lap_s_sq",
        "sph_grad_sq",
        "inv_sq",
        "fstar_term",
        "identity_residual",
    ]);
    let row = |k: Cell, m: Cell, lambda: Cell, q: [f64; 6], res: f64| {
        let mut r = vec![k, m, lambda];
        r.extend(q.iter().map(|v| Cell::Num(*v)));
        r.push(res.into());
        r
    };
    for m in &report.per_mode {
        table.push(row(
            m.degree.into(),
            m.order.into(),
            m.eigenvalue.into(),
            m.norms.as_array(),
            m.identity_residual,
        ));
    }
    table.push(row(
        "total".into(),
        "".into(),
        "".into(),
        report.totals.as_array(),
        report.identity_residual,
    ));

    let json = to_json(&Document {
        manifest,
        result: VerifyResult {
            function: &f,
            report: &report,
            slacks,
            cross_term: cross,
            spherical_constant: constant,
        },
        checks: &checks,
        pass,
    });
    Ok(Rendered {
        csv: table.render(manifest),
        files: vec![("verify.json".into(), json.clone())],
        json,
        pass,
    })
}

#[derive(Serialize)]
struct AlphaRow {
    index: usize,
    eigenvalue: f64,
    alpha: f64,
}

#[derive(Serialize)]
struct SharpResult<'a> {
    spectrum: &'a SpectrumSpec<f64>,
    result: &'a SharpConstantResult<f64>,
    alpha_table: Vec<AlphaRow>,
}

pub fn sharp(args: &SharpArgs, manifest: &RunManifest) -> Result<Rendered, CliError> {
    let spec = match &args.spectrum {
        Some(path) => serde_json::from_str::<SpectrumSpec<f64>>(&read(path)?)
            .map_err(|e| CliError::Usage(format!("malformed spectrum file: {e}")))?,
        None => SpectrumSpec::sphere(args.k_max),
    };
    let result = global_spherical_constant(&spec)?;
    let alpha: Vec<AlphaRow> = alpha_table(&spec)?
        .into_iter()
        .map(|(index, eigenvalue, alpha)| AlphaRow {
            index,
            eigenvalue,
            alpha,
        })
        .collect();
    let mut checks = Vec::new();
    if let Some(c) = result.closed_form {
        checks.push(Check::at_most(
            "closed_form_agreement",
            (result.constant - c).abs() / c,
            1e-10,
        ));
    }
    let pass = checks.iter().all(|c| c.pass);

    let mut table = Table::new(&["index", "eigenvalue", "alpha", "binding"]);
    for a in &alpha {
        table.push(vec![
            a.index.into(),
            a.eigenvalue.into(),
            a.alpha.into(),
            (Some(a.index) == result.attaining_index).into(),
        ]);
    }
    let json = to_json(&Document {
        manifest,
        result: SharpResult {
            spectrum: &spec,
            result: &result,
            alpha_table: alpha,
        },
        checks: &checks,
        pass,
    });
    Ok(Rendered {
        csv: table.render(manifest),
        files: vec![("sharp.json".into(), json.clone())],
        json,
        pass,
    })
}

/// `START:STOP:COUNT` or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |what: &str| CliError::Usage(format!("bad k1 grid {s:?}: {what}"));
    let values: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(bad("expected START:STOP:COUNT"));
        };
        let a: f64 = a.trim().parse().map_err(|_| bad("START is not a number"))?;
        let b: f64 = b.trim().parse().map_err(|_| bad("STOP is not a number"))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| bad("COUNT is not an integer"))?;
        match n {
            0 => return Err(bad("COUNT must be positive")),
            1 => vec![a],
            _ => (0..n)
                .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    } else {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| bad("entries must be numbers"))
            })
            .collect::<Result<_, _>>()?
    };
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
        return Err(CliError::Usage(format!("k1 value {v} outside [0, 1]")));
    }
    Ok(values)
}

#[derive(Serialize)]
struct RegionResult<'a> {
    rows: &'a [RegionPoint<f64>],
    max_diff: f64,
}

pub fn region(args: &RegionArgs, manifest: &RunManifest) -> Result<Rendered, CliError> {
    let grid = parse_grid(&args.k1_grid)?;
    let spec = SpectrumSpec::sphere(args.k_max);
    let rows = grid
        .par_iter()
        .map(|&k1| region_boundary(k1, &spec))
        .collect::<crate::Result<Vec<_>>>()?;
    let mut table = Table::new(&[
        "k1",
        "k2_max",
        "closed_form",
        "diff",
        "attaining_index",
        "attaining_t",
    ]);
    let mut max_diff = 0.0f64;
    for p in &rows {
        let c = p.closed_form.unwrap_or(f64::NAN);
        let diff = p.k2_max - c;
        max_diff = max_diff.max(diff.abs());
        table.push(vec![
            p.k1.into(),
            p.k2_max.into(),
            c.into(),
            diff.into(),
            p.attaining_index.into(),
            p.attaining_t.into(),
        ]);
    }
    let checks = vec![Check::at_most(
        "max_boundary_diff",
        max_diff,
        args.region_tol,
    )];
    let pass = checks[0].pass;
    let csv = table.render(manifest);
    let json = to_json(&Document {
        manifest,
        result: RegionResult {
            rows: &rows,
            max_diff,
        },
        checks: &checks,
        pass,
    });
    Ok(Rendered {
        files: vec![
            ("region.csv".into(), csv.clone()),
            ("region.json".into(), json.clone()),
        ],
        csv,
        json,
        pass,
    })
}

#[derive(Serialize)]
struct Extremizer {
    half_length: f64,
    n: usize,
    theta: f64,
    residual: f64,
    /// Continuum quotient of the tabulated extremizer.
    rescored: f64,
    /// `d ln g / d ln r` at `r = 1`.
    center_log_slope: Option<f64>,
    profile: RadialProfile<f64>,
}

#[derive(Serialize)]
struct ExtremizeResult<'a> {
    study: &'a ConvergenceStudy<f64>,
    extremizer: &'a Extremizer,
}

pub fn extremize(
    args: &ExtremizeArgs,
    global: &GlobalOpts,
    manifest: &RunManifest,
) -> Result<Rendered, CliError> {
    let numerator = FormKind::parse(&args.numerator)?;
    let denominator = FormKind::parse(&args.denominator)?;
    let lambda = args.mode_eigenvalue;
    let ls = &args.half_lengths;
    if ls.is_empty() || ls.iter().any(|l| !(*l > 0.0)) {
        return Err(CliError::Usage("--L needs positive half-lengths".into()));
    }
    let l_max = ls[ls.len() - 1];
    let step = match args.n {
        Some(n) if n < 16 => {
            return Err(CliError::Usage(format!("--n must be at least 16, got {n}")))
        }
        Some(n) => 2.0 * l_max / (n - 1) as f64,
        None => 2.0 / NODES_PER_HALF_LENGTH,
    };
    let study = convergence_study_with(lambda, numerator, denominator, ls, step)?;
    let last = *study.rows.last().expect("nonempty study");
    let grid = LogGrid::new(-l_max, l_max, last.n)?;
    let eig = max_generalized_eig(&assemble_forms(lambda, &grid, numerator, denominator)?)?;
    let profile = extremizer_profile(&eig)?;
    let rescored = rescore(
        lambda,
        numerator,
        denominator,
        &profile,
        &quadrature_config(global)?,
    )?;
    let center_log_slope = profile
        .jet(1.0)
        .ok()
        .filter(|j| j.value != 0.0)
        .map(|j| j.d1 / j.value);
    let ext = Extremizer {
        half_length: l_max,
        n: last.n,
        theta: eig.value,
        residual: eig.residual,
        rescored,
        center_log_slope,
        profile,
    };

    let mut checks = vec![
        Check::flag("nondecreasing", study.nondecreasing),
        Check::flag("within_guard", study.within_guard),
    ];
    if let Some(c) = study.oracle.filter(|c| *c > 0.0) {
        checks.push(Check::at_least(
            "final_fraction_of_bound",
            last.theta / c,
            args.min_fraction,
        ));
    }
    let gap = if ext.theta > 0.0 {
        (ext.rescored - ext.theta).abs() / ext.theta
    } else {
        ext.rescored.abs()
    };
    checks.push(Check::at_most("rescore_gap", gap, RESCORE_TOL));
    let pass = checks.iter().all(|c| c.pass);

    let mut table = Table::new(&["L", "n", "theta", "bound", "theta_over_bound", "residual"]);
    for r in &study.rows {
        let ratio = study.oracle.filter(|c| *c > 0.0).map(|c| r.theta / c);
        table.push(vec![
            r.half_length.into(),
            r.n.into(),
            r.theta.into(),
            study.oracle.into(),
            ratio.into(),
            r.residual.into(),
        ]);
    }
    let csv = table.render(manifest);
    let json = to_json(&Document {
        manifest,
        result: ExtremizeResult {
            study: &study,
            extremizer: &ext,
        },
        checks: &checks,
        pass,
    });
    #[derive(Serialize)]
    struct ProfileDoc<'a> {
        manifest: &'a RunManifest,
        extremizer: &'a Extremizer,
    }
    let profile_json = to_json(&ProfileDoc {
        manifest,
        extremizer: &ext,
    });
    Ok(Rendered {
        files: vec![
            ("extremize_theta.csv".into(), csv.clone()),
            ("extremize_profile.json".into(), profile_json),
            ("extremize.json".into(), json.clone()),
        ],
        csv,
        json,
        pass,
    })
}

/// Radial profile from inline JSON or `@FILE`.
pub fn parse_profile(s: &str) -> Result<RadialProfile<f64>, CliError> {
    let text = match s.strip_prefix('@') {
        Some(path) => read(Path::new(path))?,
        None => s.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed profile: {e}")))
}

#[derive(Serialize)]
struct XcheckResult<'a> {
    profile: &'a RadialProfile<f64>,
    report: &'a ConsistencyReport<f64>,
    /// Whether the order assertion was applied.
    asserted: bool,
}

pub fn xcheck(args: &XcheckArgs, manifest: &RunManifest) -> Result<Rendered, CliError> {
    let profile = match &args.profile {
        Some(s) => parse_profile(s)?,
        None => RadialProfile::poly_exp(1.0, 1.0)?,
    };
    let cfg = FdConfig::new(args.h)?;
    let points = default_points(args.k, args.m, args.r_min, args.r_max, args.points)?;
    let report = consistency_report(args.k, args.m, &profile, &points, &cfg)?;
    let asserted = args.h <= XCHECK_ASSERT_MAX_H;
    let checks = if asserted {
        vec![
            Check::at_least("resolved_ratios", report.resolved_count() as f64, 1.0),
            Check::flag(
                "orders_within_band",
                report.orders_within(ORDER_BAND.0, ORDER_BAND.1),
            ),
        ]
    } else {
        Vec::new()
    };
    let pass = checks.iter().all(|c| c.pass);

    let mut table = Table::new(&[
        "x",
        "y",
        "z",
        "r",
        "exact_lap",
        "fd_lap",
        "rel_err_lap",
        "order_lap",
        "exact_sph",
        "fd_sph",
        "rel_err_sph",
        "order_sph",
        "resolved_lap",
        "resolved_sph",
    ]);
    for r in &report.rows {
        table.push(vec![
            r.point[0].into(),
            r.point[1].into(),
            r.point[2].into(),
            r.radius.into(),
            r.exact_lap.into(),
            r.fd_lap.into(),
            r.rel_err_lap.into(),
            r.order_lap.into(),
            r.exact_sph.into(),
            r.fd_sph.into(),
            r.rel_err_sph.into(),
            r.order_sph.into(),
            r.resolved_lap.into(),
            r.resolved_sph.into(),
        ]);
    }
    let csv = table.render(manifest);
    let json = to_json(&Document {
        manifest,
        result: XcheckResult {
            profile: &profile,
            report: &report,
            asserted,
        },
        checks: &checks,
        pass,
    });
    Ok(Rendered {
        files: vec![
            ("xcheck.csv".into(), csv.clone()),
            ("xcheck.json".into(), json.clone()),
        ],
        csv,
        json,
        pass,
    })
}

pub fn checks_csv(checks: &[Check], manifest: &RunManifest) -> String {
    checks_table(checks).render(manifest)
}
