//! Commands behind the `phsoc` binary.

pub mod file;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use phsoc::dae::{build_drazin_data_with, solve_bvp, BvpPath, DEFAULT_GRID_POINTS};
use phsoc::pencil::{build_pencil, full_report_with, regular_by_det_sampling, RegularityReport};
use phsoc::regularize::rank_minimal_s_scaled;
use phsoc::system::{energy_balance_residual, objective_value};
use phsoc::zoo::ModelSpec;
use phsoc::{Error, Field, C64};
use serde::{Deserialize, Serialize};

use file::{encode_matrix, encode_vector, Entry, Rows, SystemFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SINGULAR: i32 = 10;
pub const EXIT_INFEASIBLE: i32 = 11;
pub const EXIT_NUMERICAL: i32 = 20;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) | Error::StructureViolation(_) => EXIT_INPUT,
            Error::SingularPencil => EXIT_SINGULAR,
            Error::NoOptimalTrajectory { .. } => EXIT_INFEASIBLE,
            _ => EXIT_NUMERICAL,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

/// Text for the terminal plus the exit code of a completed command.
pub struct Outcome {
    pub code: i32,
    pub text: String,
}

/// Flags shared by all commands.
#[derive(Clone, Debug, Default)]
pub struct Flags {
    pub tol: Option<f64>,
    pub omega_grid: Option<usize>,
    pub mu: Option<C64>,
    pub grid: Option<usize>,
    pub scale: Option<f64>,
    pub json_out: Option<PathBuf>,
    pub csv_out: Option<PathBuf>,
}

/// Parses a shift given as `re` or `re,im`.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("`{p}`: {e}"));
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected `re` or `re,im`, got `{s}`")),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::input(format!("serialisation failed: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn fmt_real(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-3..1e6).contains(&a) {
        let s = format!("{x:.10}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.into()
        }
    } else {
        format!("{x:.6e}")
    }
}

fn fmt_complex(z: C64) -> String {
    if z.im == 0.0 {
        fmt_real(z.re)
    } else {
        let im = fmt_real(z.im.abs());
        let sign = if z.im < 0.0 { '-' } else { '+' };
        format!("{}{sign}{im}i", fmt_real(z.re))
    }
}

fn describe_report(r: &RegularityReport, out: &mut String) {
    if r.regular {
        let index = r.kronecker_index.map_or("?".to_string(), |k| k.to_string());
        let _ = write!(out, "regular, index {index}");
        if let Some(mu) = r.witness_mu {
            let _ = write!(out, ", witness mu = {}", fmt_complex(mu));
        }
        if let Some(w) = r.witness_omega {
            let _ = write!(out, ", witness omega = {}", fmt_real(w));
        }
        out.push('\n');
    } else {
        out.push_str("singular\n");
    }
    for (c, v) in &r.criteria {
        let _ = writeln!(
            out,
            "  {:<24}{}",
            c.key(),
            if v.holds() { "holds" } else { "fails" }
        );
    }
    let _ = writeln!(out, "  index-three condition   {}", r.index_three_flag);
    for note in &r.notes {
        let _ = writeln!(out, "  note: {note}");
    }
}

pub fn cmd_analyze(path: &Path, flags: &Flags) -> Result<Outcome, CliError> {
    let file = SystemFile::load(path)?;
    let sys = file.system()?;
    let s = file.cost()?;
    let opts = file.analysis_options(flags.tol, flags.omega_grid);
    let report = full_report_with(&sys, &s, &opts)?;
    let mut text = String::new();
    describe_report(&report, &mut text);
    if !report.regular {
        text.push_str("hint: `phsoc regularize` computes a rank-minimal cost weight\n");
    }
    if let Some(out) = &flags.json_out {
        write_json(out, &report)?;
    }
    let code = if report.regular {
        EXIT_OK
    } else {
        EXIT_SINGULAR
    };
    Ok(Outcome { code, text })
}

/// Output of `regularize`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Regularization {
    pub rank: usize,
    pub scale: f64,
    pub omega_used: f64,
    #[serde(rename = "S")]
    pub s: Rows,
    pub spot_checks: usize,
    pub minimality_violations: usize,
    pub certificate: RegularityReport,
    /// The input system with `S` replaced by the computed weight.
    pub system: SystemFile,
}

pub fn cmd_regularize(path: &Path, flags: &Flags) -> Result<Outcome, CliError> {
    let file = SystemFile::load(path)?;
    let sys = file.system()?;
    let opts = file.analysis_options(flags.tol, flags.omega_grid);
    let scale = flags.scale.unwrap_or(1.0);
    let res = rank_minimal_s_scaled(&sys, scale, &opts)?;
    let s = encode_matrix(&res.s_min, file.field);
    let mut system = file.clone();
    system.s = Some(s.clone());
    let out = Regularization {
        rank: res.rank,
        scale,
        omega_used: res.omega_used,
        s,
        spot_checks: res.spot_checks,
        minimality_violations: res.minimality_violations,
        certificate: res.certificate,
        system,
    };
    let mut text = format!(
        "rank-minimal S: rank {}, omega {}\n",
        out.rank,
        fmt_real(out.omega_used)
    );
    for row in res.s_min.row_iter() {
        let cells: Vec<String> = row.iter().map(|&z| fmt_complex(z)).collect();
        let _ = writeln!(text, "  [{}]", cells.join(", "));
    }
    text.push_str("certificate: ");
    describe_report(&out.certificate, &mut text);
    match &flags.json_out {
        Some(p) => write_json(p, &out)?,
        None => {
            text.push_str(&serde_json::to_string_pretty(&out).expect("serialisable"));
            text.push('\n');
        }
    }
    Ok(Outcome {
        code: EXIT_OK,
        text,
    })
}

/// Machine-readable summary of `solve`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveSummary {
    pub mu: Entry,
    pub path: String,
    pub lambda0: Vec<Entry>,
    pub nonuniqueness_dim: usize,
    pub feasibility_residual: f64,
    pub objective_value: f64,
    pub energy_balance_residual: f64,
    pub dae_residual: f64,
    /// `M_mu N^D`: `u(t) = gain [lambda(t); x(t)]`.
    pub gain: Rows,
    /// `N^D (I - mu N)`: `[lambda; x](t) = exp(-generator (t - t0)) [lambda; x](t0)`.
    pub generator: Rows,
    pub warnings: Vec<String>,
}

fn csv_header(n: usize, m: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for (name, k) in [("lambda", n), ("x", n), ("u", m)] {
        for i in 1..=k {
            cols.push(format!("re_{name}{i}"));
            cols.push(format!("im_{name}{i}"));
        }
    }
    cols.join(",")
}

pub fn cmd_solve(path: &Path, flags: &Flags) -> Result<Outcome, CliError> {
    let file = SystemFile::load(path)?;
    let sys = file.system()?;
    let s = file.cost()?;
    let bd = file.boundary()?;
    let opts = file.analysis_options(flags.tol, flags.omega_grid);
    let file_opts = file.options();
    let grid = flags
        .grid
        .or(file_opts.grid_points)
        .unwrap_or(DEFAULT_GRID_POINTS);
    let mu = flags.mu.or(file_opts.mu_hint.map(Entry::value));

    let p = build_pencil(&sys, &s)?;
    if !regular_by_det_sampling(&p, opts.seed).regular {
        return Err(CliError {
            code: EXIT_SINGULAR,
            message: "the optimality pencil is singular; run `phsoc regularize` and solve with \
                      the returned S"
                .into(),
        });
    }
    let dd = build_drazin_data_with(&sys, &s, mu, &opts)?;
    let sol = solve_bvp(&dd, &bd.x0, &bd.x1, bd.t0, bd.t1, grid)?;
    let traj = &sol.trajectory;
    let summary = SolveSummary {
        mu: Entry::Complex([dd.mu.re, dd.mu.im]),
        path: match sol.path {
            BvpPath::Direct => "direct",
            BvpPath::LeastSquares => "least_squares",
            BvpPath::InitialValue => "initial_value",
        }
        .into(),
        lambda0: encode_vector(&sol.lambda0, Field::Complex),
        nonuniqueness_dim: sol.nonuniqueness_dim,
        feasibility_residual: sol.feasibility_residual,
        objective_value: objective_value(&sys, &s, traj)?,
        energy_balance_residual: energy_balance_residual(&sys, traj)?,
        dae_residual: sol.dae_residual,
        gain: encode_matrix(&sol.feedback.gain, Field::Complex),
        generator: encode_matrix(&sol.feedback.generator, Field::Complex),
        warnings: sol.warnings.clone(),
    };

    if let Some(out) = &flags.csv_out {
        let mut csv = csv_header(sys.n(), sys.m());
        csv.push('\n');
        for (k, t) in traj.times.iter().enumerate() {
            let mut line = format!("{t:.16e}");
            let values = sol.adjoint[k]
                .iter()
                .chain(traj.state[k].iter())
                .chain(traj.control[k].iter());
            for z in values {
                let _ = write!(line, ",{:.16e},{:.16e}", z.re, z.im);
            }
            csv.push_str(&line);
            csv.push('\n');
        }
        std::fs::write(out, csv).map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
    }
    if let Some(out) = &flags.json_out {
        write_json(out, &summary)?;
    }

    let mut text = format!(
        "solved via {} path at mu = {}\n",
        summary.path.replace('_', " "),
        fmt_complex(dd.mu)
    );
    let lam: Vec<String> = sol.lambda0.iter().map(|&z| fmt_complex(z)).collect();
    let _ = writeln!(text, "  lambda0                  [{}]", lam.join(", "));
    let _ = writeln!(
        text,
        "  non-uniqueness dim       {}",
        summary.nonuniqueness_dim
    );
    let _ = writeln!(
        text,
        "  feasibility residual     {:.3e}",
        summary.feasibility_residual
    );
    let _ = writeln!(
        text,
        "  objective                {}",
        fmt_real(summary.objective_value)
    );
    let _ = writeln!(
        text,
        "  energy balance residual  {:.3e}",
        summary.energy_balance_residual
    );
    let _ = writeln!(
        text,
        "  DAE residual             {:.3e}",
        summary.dae_residual
    );
    for w in &summary.warnings {
        let _ = writeln!(text, "  warning: {w}");
    }
    Ok(Outcome {
        code: EXIT_OK,
        text,
    })
}

/// Parameters of `demo`.
#[derive(Clone, Debug)]
pub struct DemoParams {
    pub n: usize,
    pub kappa: f64,
    pub l: usize,
    pub d: f64,
}

impl Default for DemoParams {
    fn default() -> Self {
        DemoParams {
            n: 20,
            kappa: 1.0,
            l: 1,
            d: 1.0,
        }
    }
}

pub fn demo_spec(name: &str, p: &DemoParams) -> Result<ModelSpec, CliError> {
    Ok(match name {
        "mech" => ModelSpec::Mechanical {
            l: p.l,
            mass: 1.0,
            damping: p.d,
            stiffness: 1.0,
        },
        "heat" => ModelSpec::Heat1d {
            n: p.n,
            kappa: p.kappa,
            unit_scaling: false,
        },
        "ex52" => ModelSpec::Example52,
        "ex53" => ModelSpec::Example53,
        other => {
            return Err(CliError::input(format!(
                "unknown demo `{other}`; choose mech, heat, ex52 or ex53"
            )))
        }
    })
}

pub fn cmd_demo(name: &str, params: &DemoParams, flags: &Flags) -> Result<Outcome, CliError> {
    let sys = demo_spec(name, params)?.build()?;
    let file = SystemFile::from_system(&sys);
    let text = match &flags.json_out {
        Some(p) => {
            write_json(p, &file)?;
            format!(
                "wrote {} ({} states, {} inputs)\n",
                p.display(),
                file.n,
                file.m
            )
        }
        None => serde_json::to_string_pretty(&file).expect("serialisable") + "\n",
    };
    Ok(Outcome {
        code: EXIT_OK,
        text,
    })
}
