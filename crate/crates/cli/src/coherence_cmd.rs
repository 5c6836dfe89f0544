use clap::{Args, Subcommand};
use spinlab::coherence::{
    concentration_from_id_slope, id_slope, mean_flip_probability, resonant_density_from_id_slope, stim_echo_amplitude,
    stim_echo_regime_valid, t2_id, t_sd, Lineshape,
};
use spinlab::constants::{MU_B_OVER_H, YSO_Y_DENSITY};
use spinlab::io::{PlotSeries, Table};
use spinlab::{DecayCurve, IdParams, SdParams, StimEchoParams, StretchedExp};

use crate::ctx::{linspace, CliError, CliResult, Ctx};

#[derive(Debug, Subcommand)]
pub enum CoherenceCmd {
    /// Spectral-diffusion time from two flipping baths.
    Sd(SdArgs),
    /// Instantaneous-diffusion slope, T2, or the inverse (density from slope).
    Id(IdArgs),
    /// Stimulated-echo decay surface.
    Stimecho(StimEchoArgs),
    /// Stretched-exponential decay curve.
    Stretched(StretchedArgs),
}

impl CoherenceCmd {
    pub fn name(&self) -> &'static str {
        match self {
            CoherenceCmd::Sd(_) => "sd",
            CoherenceCmd::Id(_) => "id",
            CoherenceCmd::Stimecho(_) => "stimecho",
            CoherenceCmd::Stretched(_) => "stretched",
        }
    }
}

#[derive(Debug, Args)]
pub struct SdArgs {
    /// Density of each bath species, m⁻³.
    #[arg(long)]
    pub density_m3: f64,
    /// Central-spin gyromagnetic ratio, in μ_B/h units (g_eff).
    #[arg(long)]
    pub g_central: f64,
    #[arg(long)]
    pub g_i: f64,
    #[arg(long)]
    pub g_ii: f64,
    #[arg(long)]
    pub rate_i_hz: f64,
    #[arg(long)]
    pub rate_ii_hz: f64,
}

#[derive(Debug, Args)]
pub struct IdArgs {
    /// Resonant-spin g_eff (γ = g μ_B/h).
    #[arg(long)]
    pub g_eff: f64,
    /// Resonant density, m⁻³ (forward mode).
    #[arg(long, conflicts_with = "slope_hz")]
    pub density_m3: Option<f64>,
    /// Measured dephasing-rate slope versus ⟨sin²(θ/2)⟩, Hz (inverse mode).
    #[arg(long)]
    pub slope_hz: Option<f64>,
    /// Fraction of all dopants that are resonant (inverse mode, for ppm).
    #[arg(long)]
    pub resonant_fraction: Option<f64>,
    #[arg(long, default_value_t = YSO_Y_DENSITY)]
    pub host_density_m3: f64,
    /// Explicit ⟨sin²(θ/2)⟩; otherwise computed from the drive below.
    #[arg(long)]
    pub mean_flip: Option<f64>,
    #[arg(long)]
    pub rabi_mhz: Option<f64>,
    #[arg(long)]
    pub line_fwhm_mhz: Option<f64>,
    #[arg(long, default_value = "gaussian")]
    pub lineshape: Lineshape,
    /// Nominal rotation angle, degrees.
    #[arg(long, default_value_t = 180.0)]
    pub theta_deg: f64,
}

#[derive(Debug, Args)]
pub struct StimEchoArgs {
    #[arg(long)]
    pub gamma0_hz: f64,
    #[arg(long)]
    pub gamma_sd_hz: f64,
    #[arg(long)]
    pub rate_hz: f64,
    #[arg(long)]
    pub t1_s: f64,
    /// Comma-separated τ values, μs.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub tau_us: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub tw_max_ms: f64,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct StretchedArgs {
    #[arg(long)]
    pub t2_us: f64,
    #[arg(long, default_value_t = 2.0)]
    pub n: f64,
    #[arg(long, default_value_t = 1.0)]
    pub a0: f64,
    #[arg(long)]
    pub t_max_us: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
}

pub fn run(ctx: &mut Ctx, cmd: &CoherenceCmd) -> CliResult {
    match cmd {
        CoherenceCmd::Sd(a) => sd(ctx, a),
        CoherenceCmd::Id(a) => id(ctx, a),
        CoherenceCmd::Stimecho(a) => stimecho(ctx, a),
        CoherenceCmd::Stretched(a) => stretched(ctx, a),
    }
}

fn sd(ctx: &mut Ctx, a: &SdArgs) -> CliResult {
    let p = SdParams {
        density: a.density_m3,
        gamma_central: a.g_central * MU_B_OVER_H,
        gamma_i: a.g_i * MU_B_OVER_H,
        gamma_ii: a.g_ii * MU_B_OVER_H,
        rate_i: a.rate_i_hz,
        rate_ii: a.rate_ii_hz,
    };
    let r = t_sd(&p)?;
    let text = format!(
        "T_SD        {:.6e} s\nT_SD site I {:.6e} s\nT_SD site II {:.6e} s\n",
        r.t_sd, r.t_sd_site_i, r.t_sd_site_ii
    );
    say!("{}", text.trim_end());
    ctx.write_text("result.txt", &text)
}

fn id(ctx: &mut Ctx, a: &IdArgs) -> CliResult {
    let gamma = a.g_eff * MU_B_OVER_H;
    let mut text = String::new();
    match (a.density_m3, a.slope_hz) {
        (Some(n), None) => {
            let p = match (a.mean_flip, a.rabi_mhz, a.line_fwhm_mhz) {
                (Some(p), _, _) => p,
                (None, Some(r), Some(w)) => {
                    mean_flip_probability(r * 1e6, w * 1e6, a.lineshape, a.theta_deg.to_radians())?
                }
                _ => 1.0,
            };
            let slope = id_slope(n, gamma);
            let t2 = t2_id(&IdParams { density_resonant: n, gamma, mean_flip: p })?;
            text += &format!("slope      {slope:.6e} Hz\nmean_flip  {p:.6}\nT2_ID      {t2:.6e} s\n");
        }
        (None, Some(slope)) => {
            let n = resonant_density_from_id_slope(slope, gamma)?;
            text += &format!("resonant density {n:.6e} m^-3\n");
            if let Some(f) = a.resonant_fraction {
                let c = concentration_from_id_slope(slope, gamma, f, a.host_density_m3)?;
                text += &format!("concentration    {:.4} ppm\n", c * 1e6);
            }
        }
        _ => return Err(CliError::Usage("give exactly one of --density-m3 or --slope-hz".into())),
    }
    say!("{}", text.trim_end());
    ctx.write_text("result.txt", &text)
}

fn stimecho(ctx: &mut Ctx, a: &StimEchoArgs) -> CliResult {
    let p = StimEchoParams { gamma0: a.gamma0_hz, gamma_sd: a.gamma_sd_hz, rate: a.rate_hz, t1: a.t1_s };
    p.validate()?;
    if a.tau_us.is_empty() || a.tau_us.iter().any(|t| !(*t > 0.0)) || a.points < 2 {
        return Err(CliError::Usage("τ values must be positive and points ≥ 2".into()));
    }
    let mut table = Table::new(&["tau_s", "tw_s", "amplitude"]);
    let mut series = Vec::new();
    for &tau_us in &a.tau_us {
        let tau = tau_us * 1e-6;
        if !stim_echo_regime_valid(&p, tau) {
            ctx.warn(format!("τ = {tau_us} μs is not ≪ T1"));
        }
        let tws = linspace(0.0, a.tw_max_ms * 1e-3, a.points);
        let amps: Vec<f64> = tws.iter().map(|&tw| stim_echo_amplitude(&p, tau, tw)).collect();
        for (tw, y) in tws.iter().zip(&amps) {
            table.push(vec![tau, *tw, *y]);
        }
        series.push(PlotSeries { label: format!("τ = {tau_us} μs"), x: tws.iter().map(|t| t * 1e3).collect(), y: amps, points: false });
    }
    ctx.write_table("surface.csv", &table)?;
    ctx.write_plot("stimulated echo", "T_w (ms)", "amplitude", &series)?;
    say!("{} points over {} τ values", table.rows.len(), a.tau_us.len());
    Ok(())
}

fn stretched(ctx: &mut Ctx, a: &StretchedArgs) -> CliResult {
    let d = StretchedExp::new(a.t2_us * 1e-6, a.n, a.a0)?;
    let t_max = a.t_max_us.map(|t| t * 1e-6).unwrap_or(3.0 * d.t2);
    let ts = linspace(0.0, t_max, a.points.max(2));
    let curve = DecayCurve::from_fn(&ts, |t| d.eval(t));
    spinlab::io::write_curve_csv(&ctx.path("curve.csv"), &curve)?;
    ctx.manifest.outputs.push(ctx.path("curve.csv").display().to_string());
    let s = PlotSeries { label: format!("n = {}", a.n), x: ts.iter().map(|t| t * 1e6).collect(), y: curve.amplitude, points: false };
    ctx.write_plot("stretched exponential", "t (μs)", "amplitude", &[s])?;
    say!("T2 {:.6e} s, n {}", d.t2, d.n);
    Ok(())
}
