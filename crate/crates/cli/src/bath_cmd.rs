use clap::{Args, ValueEnum};
use spinlab::bath::{fit_mc_curve, simulate_decay, McModel, SequenceParams, Sweep};
use spinlab::io::PlotSeries;
use spinlab::SequenceKind;

use crate::ctx::{linspace, CliError, CliResult, Ctx};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepArg {
    /// Total evolution time.
    Total,
    /// Stimulated-echo storage time at fixed τ.
    Waiting,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Stretched,
    Exp,
}

#[derive(Debug, Args)]
pub struct BathsimArgs {
    /// Bath label from the config.
    #[arg(long)]
    pub bath: String,
    /// Sequence kind (hahn, stimulated, cpmg, xy16, xy16_concatenated) or a
    /// config sequence preset label.
    #[arg(long)]
    pub sequence: String,
    /// τ, μs (overrides the preset).
    #[arg(long)]
    pub tau_us: Option<f64>,
    #[arg(long)]
    pub tw_us: Option<f64>,
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long)]
    pub pulse_error: Option<f64>,
    #[arg(long, value_enum, default_value = "total")]
    pub sweep: SweepArg,
    /// Largest abscissa, μs.
    #[arg(long)]
    pub x_max_us: f64,
    #[arg(long, default_value_t = 24)]
    pub points: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value = "stretched")]
    pub model: ModelArg,
}

pub fn run(ctx: &mut Ctx, a: &BathsimArgs) -> CliResult {
    let cfg = ctx.require_config()?;
    let mut bath = cfg.bath(&a.bath)?.clone();
    let (kind, mut params) = match cfg.sequence(&a.sequence) {
        Ok(p) => (p.kind, p.params()),
        Err(_) => {
            let kind: SequenceKind = a.sequence.parse().map_err(|_| {
                CliError::Usage(format!("`{}` is neither a sequence kind nor a config preset", a.sequence))
            })?;
            (kind, SequenceParams::default())
        }
    };
    if let Some(t) = a.tau_us {
        params.tau = t * 1e-6;
    }
    if let Some(t) = a.tw_us {
        params.tw = t * 1e-6;
    }
    if let Some(c) = a.cycles {
        params.cycles = c;
    }
    if let Some(e) = a.pulse_error {
        params.pulse_error = e;
    }
    if let Some(s) = a.seed {
        bath.seed = s;
    }
    if let Some(r) = a.realizations {
        bath.realizations = r;
    }
    if !(a.x_max_us > 0.0) || a.points < 6 {
        return Err(CliError::Usage("need x-max-us > 0 and points ≥ 6".into()));
    }
    let sweep = match a.sweep {
        SweepArg::Total => Sweep::TotalTime,
        SweepArg::Waiting => Sweep::WaitingTime,
    };
    let xs = linspace(0.0, a.x_max_us * 1e-6, a.points);
    let (mut curve, out) = simulate_decay(&bath, kind, &params, sweep, &xs, a.workers)?;
    curve.metadata.config_hash = ctx.manifest.config_sha256.clone();
    ctx.manifest.seeds.push(bath.seed);
    ctx.manifest.mean_spins = Some(out.mean_spins);
    for w in &out.warnings {
        ctx.warn(w.clone());
    }
    let path = ctx.path("curve.csv");
    spinlab::io::write_curve_csv(&path, &curve)?;
    ctx.manifest.outputs.push(path.display().to_string());

    let model = match a.model {
        ModelArg::Stretched => McModel::Stretched,
        ModelArg::Exp => McModel::SimpleExp,
    };
    let mut text = format!(
        "sequence {kind}\nrealizations {}\nseed {}\nmean spins {:.1}\n",
        bath.realizations, bath.seed, out.mean_spins
    );
    let mut series = vec![PlotSeries {
        label: "Monte Carlo".into(),
        x: xs.iter().map(|x| x * 1e6).collect(),
        y: curve.amplitude.clone(),
        points: true,
    }];
    match fit_mc_curve(&curve, model) {
        Ok(f) => {
            text += &format!(
                "T2 {:.6e} ± {:.2e} s\nn  {:.4} ± {:.2e}\nA0 {:.4}\n",
                f.decay.t2, f.t2_sigma, f.decay.n, f.n_sigma, f.decay.a0
            );
            if f.unidentifiable {
                ctx.warn("curve stays above 0.9; T2 is a lower bound at best");
            }
            series.push(PlotSeries {
                label: "fit".into(),
                x: series[0].x.clone(),
                y: xs.iter().map(|&x| f.decay.eval(x)).collect(),
                points: false,
            });
        }
        Err(e) => ctx.warn(format!("decay fit failed: {e}")),
    }
    say!("{}", text.trim_end());
    ctx.write_text("fit.txt", &text)?;
    ctx.write_plot(&format!("{kind} bath simulation"), "x (μs)", "echo amplitude", &series)?;
    Ok(())
}
