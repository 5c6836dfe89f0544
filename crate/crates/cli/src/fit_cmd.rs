use std::path::PathBuf;

use clap::Args;
use spinlab::fitkit::{
    bootstrap_sigma, fit_curve, fit_inversion_recovery, fit_rabi, fit_stim_echo_global, model_by_name, ModelFit,
    StimEchoFitOptions, MODEL_NAMES,
};
use spinlab::io::{read_curve_csv, read_stim_echo_csv, PlotSeries, Table};
use spinlab::DecayCurve;

use crate::ctx::{fmt_sigma, linspace, CliError, CliResult, Ctx};

const STIM_ECHO: &str = "stim_echo_global";

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Registered model name, or `stim_echo_global`.
    pub model: String,
    /// CSV data: `abscissa_s,amplitude[,stderr]`, or `tau_s,tw_s,amplitude`
    /// for the stimulated-echo surface.
    #[arg(long)]
    pub data: PathBuf,
    /// Bootstrap resamples for parameter errors (registered models).
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn available() -> String {
    MODEL_NAMES.iter().copied().chain([STIM_ECHO]).collect::<Vec<_>>().join(", ")
}

pub fn run(ctx: &mut Ctx, a: &FitArgs) -> CliResult {
    if a.model == STIM_ECHO {
        return stim_echo(ctx, a);
    }
    let model = model_by_name(&a.model)
        .ok_or_else(|| CliError::Usage(format!("unknown model `{}`; available: {}", a.model, available())))?;
    let curve = read_curve_csv(&a.data)?;
    let (fit, mut text): (ModelFit, String) = match a.model.as_str() {
        "inversion_recovery" => {
            let f = fit_inversion_recovery(&curve)?;
            let mut t = format!("T1 {}\nk  {}\n", fmt_sigma(f.t1, f.t1_sigma), fmt_sigma(f.k, f.k_sigma));
            if f.monotonicity_violation {
                ctx.warn("recovery is not monotonic within noise");
                t += "flag: monotonicity violation\n";
            }
            if f.unsaturated {
                ctx.warn("recovery not observed to saturate; T1 is poorly bounded");
                t += "flag: unsaturated\n";
            }
            (f.fit, t)
        }
        "rabi" => {
            let f = fit_rabi(&curve)?;
            let mut t = format!(
                "Rabi frequency {} Hz\npi time        {:.6e} s\ndecay time     {:.6e} s\n",
                fmt_sigma(f.rabi_freq, f.rabi_freq_sigma),
                f.pi_time,
                f.decay_time
            );
            if f.aliased {
                ctx.warn("fitted frequency is close to the sampling Nyquist limit");
                t += "flag: aliased\n";
            }
            if f.too_few_periods {
                ctx.warn("fewer than two periods sampled");
                t += "flag: too few periods\n";
            }
            (f.fit, t)
        }
        _ => (fit_curve(model.as_ref(), &curve)?, String::new()),
    };
    text = fit.report() + &text;
    if let Some(n) = a.bootstrap {
        let s = bootstrap_sigma(model.as_ref(), &curve.abscissa, &curve.amplitude, n, a.seed)?;
        ctx.manifest.seeds.push(a.seed);
        text += "bootstrap sigma:";
        for (name, v) in fit.param_names.iter().zip(&s) {
            text += &format!(" {name}={v:.3e}");
        }
        text.push('\n');
    }
    if !fit.result.converged {
        ctx.warn("fit did not converge");
    }
    if fit.result.singular_curvature {
        ctx.warn("curvature matrix is singular; some parameters are not identifiable");
    }
    say!("{}", text.trim_end());
    ctx.write_text("fit.txt", &text)?;
    emit_model_curve(ctx, &curve, |x| model.eval(&fit.result.params, x))
}

fn emit_model_curve(ctx: &mut Ctx, curve: &DecayCurve, f: impl Fn(f64) -> f64) -> CliResult {
    let lo = curve.abscissa.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = curve.abscissa.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let xs = linspace(lo, hi, 200);
    let mut table = Table::new(&["abscissa_s", "model"]);
    for &x in &xs {
        table.push(vec![x, f(x)]);
    }
    ctx.write_table("model.csv", &table)?;
    let series = [
        PlotSeries { label: "data".into(), x: curve.abscissa.clone(), y: curve.amplitude.clone(), points: true },
        PlotSeries { label: "fit".into(), x: xs.clone(), y: table.col(1), points: false },
    ];
    ctx.write_plot("fit", "x (s)", "amplitude", &series)
}

fn stim_echo(ctx: &mut Ctx, a: &FitArgs) -> CliResult {
    let surfaces = read_stim_echo_csv(&a.data)?;
    let f = fit_stim_echo_global(&surfaces, &StimEchoFitOptions::default())?;
    let p = &f.params;
    let mut text = format!(
        "model {STIM_ECHO}\nGamma0    {} Hz\nGamma_SD  {} Hz\nR         {} Hz\nT1        {:.6e} s (rate {})\nA0        {:.6}\nchi2/dof  {:.4}\n",
        fmt_sigma(p.gamma0, f.gamma0_sigma),
        fmt_sigma(p.gamma_sd, f.gamma_sd_sigma),
        fmt_sigma(p.rate, f.rate_sigma),
        p.t1,
        fmt_sigma(f.t1_rate, f.t1_rate_sigma),
        f.amplitude,
        f.result.chi2_dof
    );
    if f.gamma_unidentifiable {
        ctx.warn("Gamma0 and Gamma_SD are not separately identifiable from these τ values");
        text += "flag: gamma unidentifiable\n";
    }
    if !f.regime_valid {
        ctx.warn("some τ values are not ≪ T1");
        text += "flag: outside τ ≪ T1 regime\n";
    }
    say!("{}", text.trim_end());
    ctx.write_text("fit.txt", &text)
}
