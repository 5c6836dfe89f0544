use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Subcommand};
use spinlab::io::{read_t1_csv, PlotSeries, Table};
use spinlab::relaxation::{crossover_temperature, fit_t1_joint, fit_t1_series, rate_total, T1Fit, T1FitInputs};
use spinlab::{RelaxModel, T1Series};

use crate::ctx::{fmt_sigma, linspace, CliError, CliResult, Ctx};

#[derive(Debug, Subcommand)]
pub enum RelaxCmd {
    /// Rate versus temperature for given parameters.
    Predict(PredictArgs),
    /// Fit one T1 dataset, or several jointly with a shared θ_D.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Direct-process prefactor, s⁻¹ T⁻⁵.
    #[arg(long)]
    pub alpha_d: f64,
    /// Two-phonon prefactor, s⁻¹.
    #[arg(long)]
    pub alpha_r: f64,
    #[arg(long)]
    pub theta_d_k: f64,
    #[arg(long)]
    pub theta_e_k: f64,
    #[arg(long)]
    pub g_eff: f64,
    #[arg(long)]
    pub field_mt: f64,
}

impl ModelArgs {
    fn model(&self) -> RelaxModel {
        RelaxModel {
            alpha_d: self.alpha_d,
            alpha_r: self.alpha_r,
            theta_d: self.theta_d_k,
            theta_e: self.theta_e_k,
            g_eff: self.g_eff,
            field: self.field_mt * 1e-3,
        }
    }
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1.5)]
    pub t_min_k: f64,
    #[arg(long, default_value_t = 20.0)]
    pub t_max_k: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
}

/// `PATH,G_EFF,FIELD_MT,THETA_E_K`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub path: PathBuf,
    pub g_eff: f64,
    pub field_mt: f64,
    pub theta_e_k: f64,
}

impl FromStr for Dataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.rsplitn(4, ',').collect();
        if parts.len() != 4 {
            return Err(format!("`{s}`: expected PATH,G_EFF,FIELD_MT,THETA_E_K"));
        }
        let num = |v: &str, what: &str| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a valid {what}"));
        Ok(Dataset {
            path: PathBuf::from(parts[3]),
            field_mt: num(parts[1], "field")?,
            g_eff: num(parts[2], "g_eff")?,
            theta_e_k: num(parts[0], "theta_E")?,
        })
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// `PATH,G_EFF,FIELD_MT,THETA_E_K`; repeat for a joint fit.
    #[arg(long = "dataset", required = true)]
    pub datasets: Vec<Dataset>,
    /// Hold θ_D fixed (single dataset only).
    #[arg(long)]
    pub theta_d_k: Option<f64>,
}

pub fn run(ctx: &mut Ctx, cmd: &RelaxCmd) -> CliResult {
    match cmd {
        RelaxCmd::Predict(a) => predict(ctx, a),
        RelaxCmd::Fit(a) => fit(ctx, a),
    }
}

fn predict(ctx: &mut Ctx, a: &PredictArgs) -> CliResult {
    let m = a.model.model();
    m.validate()?;
    if !(a.t_min_k > 0.0) || !(a.t_max_k >= a.t_min_k) || a.steps < 1 {
        return Err(CliError::Usage("need 0 < t-min ≤ t-max and steps ≥ 1".into()));
    }
    let mut table = Table::new(&["temperature_K", "rate_Hz", "direct_Hz", "two_phonon_Hz"]);
    let mut series = vec![
        PlotSeries { label: "total".into(), x: vec![], y: vec![], points: false },
        PlotSeries { label: "direct".into(), x: vec![], y: vec![], points: false },
        PlotSeries { label: "two-phonon".into(), x: vec![], y: vec![], points: false },
    ];
    for t in linspace(a.t_min_k, a.t_max_k, a.steps) {
        let (d, r) = (m.direct(t)?, m.two_phonon(t)?);
        table.push(vec![t, d + r, d, r]);
        for (s, v) in series.iter_mut().zip([d + r, d, r]) {
            s.x.push(t);
            s.y.push(v.max(f64::MIN_POSITIVE).log10());
        }
    }
    ctx.write_table("rates.csv", &table)?;
    ctx.write_plot("T1 rate", "temperature (K)", "log10 rate (Hz)", &series)?;
    match crossover_temperature(&m, a.t_min_k, a.t_max_k)? {
        Some(t) => say!("direct/two-phonon crossover at {t:.4} K"),
        None => say!("no crossover in [{}, {}] K", a.t_min_k, a.t_max_k),
    }
    Ok(())
}

fn report(label: &str, f: &T1Fit) -> String {
    let m = &f.model;
    let mut s = format!("[{label}]\n");
    s += &format!("alpha_D   {}  s^-1 T^-5\n", fmt_sigma(m.alpha_d, f.alpha_d_sigma));
    s += &format!("alpha_R   {}  s^-1{}\n", fmt_sigma(m.alpha_r, f.alpha_r_sigma), if f.alpha_r_unidentified { "  (unidentified)" } else { "" });
    match f.theta_d_sigma {
        Some(sd) => s += &format!("theta_D   {}  K\n", fmt_sigma(m.theta_d, sd)),
        None => s += &format!("theta_D   {:.6e}  K (fixed)\n", m.theta_d),
    }
    s += &format!("theta_E   {:.6e}  K (fixed)\nchi2/dof  {:.4}\n", m.theta_e, f.chi2_dof);
    s
}

fn fit(ctx: &mut Ctx, a: &FitArgs) -> CliResult {
    let mut series: Vec<T1Series> = Vec::new();
    let mut inputs = Vec::new();
    for d in &a.datasets {
        series.push(read_t1_csv(&d.path, d.field_mt * 1e-3)?);
        inputs.push(T1FitInputs { g_eff: d.g_eff, theta_e: d.theta_e_k });
    }
    let (fits, mut text) = if series.len() == 1 {
        let f = fit_t1_series(&series[0], inputs[0], a.theta_d_k)?;
        (vec![f], String::new())
    } else {
        if a.theta_d_k.is_some() {
            return Err(CliError::Usage("--theta-d-k applies to single-dataset fits".into()));
        }
        let j = fit_t1_joint(&series, &inputs)?;
        let head = format!("shared theta_D {}  K\n\n", fmt_sigma(j.theta_d, j.theta_d_sigma));
        (j.fits, head)
    };
    let mut plot = Vec::new();
    for (k, (f, (s, d))) in fits.iter().zip(series.iter().zip(&a.datasets)).enumerate() {
        let label = d.path.display().to_string();
        text += &report(&label, f);
        text.push('\n');
        if f.alpha_r_unidentified {
            ctx.warn(format!("{label}: alpha_R is not constrained by the data"));
        }
        let t_lo = s.points.iter().map(|p| p.temperature).fold(f64::INFINITY, f64::min);
        let t_hi = s.points.iter().map(|p| p.temperature).fold(0.0, f64::max);
        let mut table = Table::new(&["temperature_K", "rate_Hz"]);
        let mut line = PlotSeries { label: format!("fit {k}"), x: vec![], y: vec![], points: false };
        for t in linspace(t_lo, t_hi, 100) {
            let r = rate_total(&f.model, t)?;
            table.push(vec![t, r]);
            line.x.push(t);
            line.y.push(r.log10());
        }
        ctx.write_table(&format!("model{k}.csv"), &table)?;
        plot.push(PlotSeries {
            label: format!("data {k}"),
            x: s.points.iter().map(|p| p.temperature).collect(),
            y: s.points.iter().map(|p| p.rate.log10()).collect(),
            points: true,
        });
        plot.push(line);
    }
    say!("{}", text.trim_end());
    ctx.write_text("fit.txt", &text)?;
    ctx.write_plot("T1 fit", "temperature (K)", "log10 rate (Hz)", &plot)?;
    Ok(())
}
