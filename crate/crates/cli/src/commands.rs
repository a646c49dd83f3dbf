use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use modecoupler::analysis::{classify_regime, find_bic};
use modecoupler::fit::{fit_spectrum_with, initial_guess, FitOptions, FitProblem, FreeParam, Loss, Param};
use modecoupler::io::{
    export_sweep, parse_touchstone, read_spectrum_csv, write_spectrum_csv, write_touchstone, CalibrationConfig,
    DataFormat, ModelConfig, SParam,
};
use modecoupler::model::{eigenvalues, linspace, s21_spectrum};
use modecoupler::sweep::{case1_preset, case2_preset, run_sweep, SweepSpec, DEFAULT_PRESET_ALPHA};
use modecoupler::{CouplingModel, Error, SpectrumGrid};

use crate::args::*;

#[derive(Debug)]
pub enum CliError {
    Domain(Error),
    Io { path: PathBuf, source: std::io::Error },
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Domain(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Usage(msg) => f.write_str(msg),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes to `out` when given, otherwise to standard output.
fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("json values serialize") + "\n"
}

/// Reads a model file, naming the file in parse errors.
fn load_config(path: &Path) -> CliResult<ModelConfig> {
    let text = read_file(path)?;
    ModelConfig::from_toml_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> CliResult<CouplingModel> {
    Ok(load_config(path)?.to_model()?)
}

fn is_touchstone(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("s2p"))
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn load_spectrum(path: &Path, param: &str) -> CliResult<SpectrumGrid> {
    let text = read_file(path)?;
    let located = |e: Error| CliError::Usage(format!("{}: {e}", path.display()));
    if is_touchstone(path) {
        let which: SParam = param.parse()?;
        Ok(parse_touchstone(&text).map_err(located)?.spectrum(which))
    } else {
        read_spectrum_csv(&text).map_err(located)
    }
}

fn positive_count(name: &str, n: usize) -> CliResult<usize> {
    if n == 0 {
        Err(CliError::Usage(format!("--{name} must be at least 1")))
    } else {
        Ok(n)
    }
}

fn preset_spec(preset: Preset, alpha: Option<&[f64]>) -> CliResult<SweepSpec> {
    let alpha = match alpha {
        None => DEFAULT_PRESET_ALPHA,
        Some(&[a1, a2]) => [a1, a2],
        Some(a) => return Err(CliError::Usage(format!("--alpha takes two values a1,a2, got {}", a.len()))),
    };
    Ok(match preset {
        Preset::Case1 => case1_preset(alpha)?,
        Preset::Case2 => case2_preset(alpha)?,
    })
}

fn resolve_sweep(
    preset: Option<Preset>,
    model: Option<&Path>,
    calibration: Option<&[f64]>,
    varying_mode: usize,
    alpha: Option<&[f64]>,
    gap_samples: Option<usize>,
    points: Option<usize>,
) -> CliResult<SweepSpec> {
    let mut spec = match (preset, model) {
        (Some(p), _) => {
            if calibration.is_some() {
                return Err(CliError::Usage("--calibration applies to --model, not to presets".into()));
            }
            preset_spec(p, alpha)?
        }
        (None, Some(path)) => {
            let mut cfg = load_config(path)?;
            if let Some(c) = calibration {
                if c.len() != 4 {
                    return Err(CliError::Usage(format!(
                        "--calibration takes four values g_min,g_max,omega_start,omega_end, got {}",
                        c.len()
                    )));
                }
                cfg.calibration = Some(CalibrationConfig {
                    varying_mode,
                    g_min: c[0],
                    g_max: c[1],
                    omega_start: c[2],
                    omega_end: c[3],
                });
            }
            cfg.to_sweep_spec()?.ok_or_else(|| {
                CliError::Usage(format!(
                    "{} has no [calibration] block; pass --calibration g_min,g_max,omega_start,omega_end",
                    path.display()
                ))
            })?
        }
        (None, None) => return Err(CliError::Usage("give --preset or --model".into())),
    };
    if let Some(n) = gap_samples {
        let cal = spec.calibration;
        spec.gap_samples = linspace(cal.g_min, cal.g_max, positive_count("gap-samples", n)?);
    }
    if let Some(n) = points {
        let (a, b) = (spec.freq_grid[0], spec.freq_grid[spec.freq_grid.len() - 1]);
        spec.freq_grid = linspace(a, b, positive_count("points", n)?);
    }
    spec.validate()?;
    Ok(spec)
}

fn sweep_from_source(src: &SweepSource) -> CliResult<SweepSpec> {
    resolve_sweep(
        src.preset,
        src.model.as_deref(),
        src.calibration.as_deref(),
        src.varying_mode,
        src.alpha.as_deref(),
        src.gap_samples,
        src.points,
    )
}

pub fn run(cli: Cli) -> CliResult<()> {
    let json = cli.json;
    match cli.command {
        Command::Spectrum(a) => spectrum(a, json),
        Command::Eigen(a) => eigen(a, json),
        Command::Sweep(a) => sweep(a, json),
        Command::Bic(a) => bic(a, json),
        Command::Classify(a) => classify(a, json),
        Command::Fit(a) => fit(a, json),
        Command::Convert(a) => convert(a, json),
    }
}

fn spectrum(a: SpectrumArgs, json: bool) -> CliResult<()> {
    let model = load_model(&a.model)?;
    positive_count("points", a.points)?;
    if !(a.fmin.is_finite() && a.fmax.is_finite()) || (a.points > 1 && a.fmin >= a.fmax) {
        return Err(CliError::Usage("need finite --fmin < --fmax".into()));
    }
    let grid = s21_spectrum(&model, &linspace(a.fmin, a.fmax, a.points))?;
    let text = if json {
        json_text(&json!({
            "command": "spectrum",
            "freq_ghz": grid.freqs(),
            "re_s21": grid.s21().iter().map(|z| z.re).collect::<Vec<_>>(),
            "im_s21": grid.s21().iter().map(|z| z.im).collect::<Vec<_>>(),
        }))
    } else {
        write_spectrum_csv(&grid)
    };
    emit(a.out.as_deref(), &text)
}

// Adding 0.0 turns -0.0 into 0.0 for display.
fn eigen(a: EigenArgs, json: bool) -> CliResult<()> {
    if !a.sweep {
        let model = load_model(a.model.as_deref().expect("clap requires --model without --preset"))?;
        let branches = eigenvalues(&model)?;
        let text = if json {
            json_text(&json!({
                "command": "eigen",
                "branches": branches.iter().map(|l| json!({"re_ghz": l.re, "im_ghz": l.im})).collect::<Vec<_>>(),
            }))
        } else {
            let mut s = String::from("branch,re_ghz,im_ghz\n");
            for (i, l) in branches.iter().enumerate() {
                s += &format!("{},{},{}\n", i + 1, l.re + 0.0, l.im + 0.0);
            }
            s
        };
        return emit(a.out.as_deref(), &text);
    }

    let spec = resolve_sweep(
        a.preset,
        a.model.as_deref(),
        a.calibration.as_deref(),
        a.varying_mode,
        None,
        a.gap_samples,
        None,
    )?;
    let mut rows = Vec::with_capacity(spec.gap_samples.len());
    for &g in &spec.gap_samples {
        let model = spec.model_at_gap(g)?;
        rows.push((g, eigenvalues(&model)?));
    }
    let n = spec.base_model.n_modes();
    let text = if json {
        json_text(&json!({
            "command": "eigen",
            "gap_mm": rows.iter().map(|r| r.0).collect::<Vec<_>>(),
            "branches": (0..n).map(|b| json!({
                "re_ghz": rows.iter().map(|r| r.1[b].re).collect::<Vec<_>>(),
                "im_ghz": rows.iter().map(|r| r.1[b].im).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        }))
    } else {
        let mut s = String::from("gap_mm");
        for b in 1..=n {
            s += &format!(",re_{b},im_{b}");
        }
        s.push('\n');
        for (g, branches) in &rows {
            s += &g.to_string();
            for l in branches {
                s += &format!(",{},{}", l.re + 0.0, l.im + 0.0);
            }
            s.push('\n');
        }
        s
    };
    emit(a.out.as_deref(), &text)
}

fn sweep(a: SweepArgs, json: bool) -> CliResult<()> {
    let spec = sweep_from_source(&a.source)?;
    let result = run_sweep(&spec)?;
    let export = export_sweep(&spec, &result);
    fs::create_dir_all(&a.out).map_err(|source| CliError::Io {
        path: a.out.clone(),
        source,
    })?;
    let files = [
        ("sweep_matrix.csv", &export.matrix_csv),
        ("sweep_long.csv", &export.long_csv),
        ("sweep_metadata.json", &export.metadata_json),
    ];
    for (name, text) in files {
        write_file(&a.out.join(name), text)?;
    }
    if json {
        print!(
            "{}",
            json_text(&json!({
                "command": "sweep",
                "out_dir": a.out.display().to_string(),
                "files": files.iter().map(|f| f.0).collect::<Vec<_>>(),
                "gap_count": result.gaps.len(),
                "freq_count": result.freqs.len(),
            }))
        );
    } else {
        println!(
            "wrote {} gaps x {} frequencies to {}",
            result.gaps.len(),
            result.freqs.len(),
            a.out.display()
        );
    }
    Ok(())
}

fn bic(a: BicArgs, json: bool) -> CliResult<()> {
    if !(a.tol.is_finite() && a.tol > 0.0) {
        return Err(CliError::Usage("--tol must be a positive number".into()));
    }
    let spec = sweep_from_source(&a.source)?;
    let points = find_bic(&spec, a.tol)?;
    if json {
        let value = json!({
            "command": "bic",
            "points": serde_json::to_value(&points).expect("bic points serialize"),
        });
        let text = json_text(&value);
        print!("{text}");
        if let Some(out) = &a.out {
            write_file(out, &text)?;
        }
        return Ok(());
    }
    if points.is_empty() {
        println!("no BIC found");
    }
    for p in &points {
        println!(
            "omega_bic_ghz={:.6} gap_mm={:.6} residual={:.3e} min_im_ghz={:.3e} verified={}",
            p.omega_bic, p.sweep_value, p.residual, p.min_im, p.verified
        );
    }
    if let Some(out) = &a.out {
        let mut s = String::from("gap_mm,omega_bic_ghz,residual,min_im_ghz,verified\n");
        for p in &points {
            s += &format!("{},{},{},{},{}\n", p.sweep_value, p.omega_bic, p.residual, p.min_im, p.verified);
        }
        write_file(out, &s)?;
    }
    Ok(())
}

fn classify(a: ClassifyArgs, json: bool) -> CliResult<()> {
    let report = classify_regime(&load_model(&a.model)?)?;
    if json {
        print!(
            "{}",
            json_text(&json!({
                "command": "classify",
                "label": report.label.to_string(),
                "gap_re_ghz": report.gap_re,
                "gap_im_ghz": report.gap_im,
            }))
        );
    } else {
        println!("{} gap_re_ghz={} gap_im_ghz={}", report.label, report.gap_re, report.gap_im);
    }
    Ok(())
}

/// `name` or `name=lower:upper`.
fn parse_free(spec: &str, model: &CouplingModel, fraction: f64) -> CliResult<FreeParam> {
    let (name, bounds) = match spec.split_once('=') {
        Some((n, b)) => (n, Some(b)),
        None => (spec, None),
    };
    let param: Param = name.parse()?;
    param.check(model.n_modes())?;
    match bounds {
        Some(b) => {
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad bound '{s}' in '{spec}'")))
            };
            let (lo, hi) = b
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("bounds in '{spec}' must look like lower:upper")))?;
            Ok(FreeParam::new(param, parse(lo)?, parse(hi)?))
        }
        None => {
            let fp = FreeParam::relative(param, model, fraction);
            if fp.lower == fp.upper {
                return Err(CliError::Usage(format!(
                    "{param} starts at {}, so relative bounds are empty; give them as {param}=lower:upper",
                    fp.lower
                )));
            }
            Ok(fp)
        }
    }
}

fn fit(a: FitArgs, json: bool) -> CliResult<()> {
    let observed = load_spectrum(&a.data, &a.param)?;
    let initial = match &a.model {
        Some(path) => load_model(path)?,
        None => initial_guess(&observed, a.modes)?,
    };
    if !(a.bound_fraction.is_finite() && a.bound_fraction > 0.0) {
        return Err(CliError::Usage("--bound-fraction must be positive".into()));
    }
    let free = a
        .free
        .iter()
        .map(|s| parse_free(s, &initial, a.bound_fraction))
        .collect::<CliResult<Vec<_>>>()?;
    let problem = FitProblem {
        observed,
        free,
        initial,
        loss: match a.loss {
            LossArg::Mag => Loss::MagnitudeResidual,
            LossArg::Complex => Loss::ComplexResidual,
        },
    };
    let options = FitOptions {
        seed: a.seed,
        ..FitOptions::default()
    };
    let result = fit_spectrum_with(&problem, &options)?;
    let config = ModelConfig::from_model(&result.model);
    if let Some(out) = &a.out {
        write_file(out, &config.to_toml_string())?;
    }
    let fitted: Vec<(String, f64)> = problem
        .free
        .iter()
        .map(|f| (f.param.to_string(), f.param.get(&result.model)))
        .collect();
    if json {
        let params: serde_json::Map<String, Value> = fitted.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        print!(
            "{}",
            json_text(&json!({
                "command": "fit",
                "converged": result.converged,
                "rms_residual": result.rms_residual,
                "objective": result.objective,
                "iterations": result.iterations,
                "evaluations": result.evaluations,
                "parameters": params,
                "model_toml": config.to_toml_string(),
            }))
        );
    } else {
        println!(
            "converged={} rms_residual={:.6e} evaluations={} iterations={}",
            result.converged, result.rms_residual, result.evaluations, result.iterations
        );
        for (k, v) in &fitted {
            println!("{k}={v}");
        }
    }
    Ok(())
}

fn convert(a: ConvertArgs, json: bool) -> CliResult<()> {
    if !is_touchstone(&a.input) {
        return Err(CliError::Usage(format!(
            "{}: conversion reads Touchstone .s2p files only",
            a.input.display()
        )));
    }
    let text = read_file(&a.input)?;
    let data = parse_touchstone(&text).map_err(|e| CliError::Usage(format!("{}: {e}", a.input.display())))?;
    let (kind, body) = if is_csv(&a.out) {
        let which: SParam = a.param.parse()?;
        ("csv", write_spectrum_csv(&data.spectrum(which)))
    } else {
        let format: DataFormat = a.format.parse()?;
        ("touchstone", write_touchstone(&data, format))
    };
    write_file(&a.out, &body)?;
    if json {
        print!(
            "{}",
            json_text(&json!({
                "command": "convert",
                "output": kind,
                "rows": data.rows.len(),
            }))
        );
    } else {
        println!("wrote {} rows to {}", data.rows.len(), a.out.display());
    }
    Ok(())
}
