//! Text report of a fitted model.
//!
//! The report mirrors a fixed layout: a header block of counts and fitting
//! flags, the best evidence bound, the model-level variance explained
//! (linear family only), grid-averaged hyperparameter estimates with 95%
//! credible sets over the grid, variable counts above standard probability
//! cutoffs, and the top variables ranked by inclusion probability.

use crate::dataset::Family;
use crate::fit::conditional_effect_interval;
use crate::grid::{HyperSetting, LogOddsGrid};
use crate::math::quantile_sorted;
use crate::model::ModelFit;

/// Inclusion-probability cutoffs reported by the counts row.
pub const PIP_CUTOFFS: [f64; 6] = [0.10, 0.25, 0.50, 0.75, 0.90, 0.95];

const EFFECT_INTERVAL_DRAWS: usize = 10000;

fn weighted_mean(values: &[f64], w: &[f64]) -> f64 {
    values.iter().zip(w).map(|(&v, &wj)| v * wj).sum()
}

/// Step-function inverse CDF of a weighted discrete sample: the smallest
/// value whose cumulative weight reaches `q` of the total.
fn weighted_quantile(values: &[f64], w: &[f64], q: f64) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    for &k in &order {
        acc += w[k];
        if acc >= q * total {
            return values[k];
        }
    }
    values[*order.last().unwrap()]
}

/// Rounds to three significant digits and prints without trailing zeros,
/// switching to scientific notation only for extreme magnitudes.
fn format_sig3(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let a = x.abs();
    if !(1e-4..1e5).contains(&a) {
        return crate::math::format_scientific(x, 3);
    }
    let scale = 10f64.powi(2 - a.log10().floor() as i32);
    let rounded = (x * scale).round() / scale;
    let decimals = (2 - rounded.abs().log10().floor() as i32).max(0) as usize;
    let mut s = format!("{rounded:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

struct HyperRow {
    name: &'static str,
    estimate: String,
    interval: String,
    candidates: String,
}

impl HyperRow {
    fn render(&self) -> String {
        format!(
            "{:<8}{:>8} {:<19} {}",
            self.name, self.estimate, self.interval, self.candidates
        )
    }
}

fn estimated_row(name: &'static str, values: &[f64], w: &[f64]) -> HyperRow {
    HyperRow {
        name,
        estimate: format_sig3(weighted_mean(values, w)),
        interval: format!(
            "[{},{}]",
            format_sig3(weighted_quantile(values, w, 0.025)),
            format_sig3(weighted_quantile(values, w, 0.975))
        ),
        candidates: "NA--NA".into(),
    }
}

fn fixed_row(name: &'static str, setting: &HyperSetting) -> HyperRow {
    let candidates = match setting {
        HyperSetting::Fixed(vals) => {
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            format!("{}--{}", format_sig3(lo), format_sig3(hi))
        }
        HyperSetting::Estimate => "NA--NA".into(),
    };
    HyperRow {
        name,
        estimate: "NA".into(),
        interval: "[NA,NA]".into(),
        candidates,
    }
}

fn logodds_row(fit: &ModelFit) -> HyperRow {
    match &fit.grid.logodds {
        LogOddsGrid::Shared(vals) => HyperRow {
            name: "logodds",
            estimate: format!("{:.2}", weighted_mean(vals, &fit.w)),
            interval: format!(
                "[{:.2},{:.2}]",
                weighted_quantile(vals, &fit.w, 0.025),
                weighted_quantile(vals, &fit.w, 0.975)
            ),
            candidates: format!(
                "({:.2})--({:.2})",
                vals.iter().copied().fold(f64::INFINITY, f64::min),
                vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            ),
        },
        LogOddsGrid::PerVariable(m) => HyperRow {
            name: "logodds",
            estimate: "NA".into(),
            interval: "[NA,NA]".into(),
            candidates: format!(
                "({:.2})--({:.2})",
                m.iter().copied().fold(f64::INFINITY, f64::min),
                m.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            ),
        },
    }
}

/// Renders the summary report with the top `nv` variables.
pub fn render_summary(fit: &ModelFit, nv: usize) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    let gaussian = fit.family == Family::Gaussian;
    let yesno = |b: bool| if b { "yes" } else { "no" };
    let iid = matches!(fit.grid.logodds, LogOddsGrid::Shared(_));

    line("Summary of fitted Bayesian variable selection model:".into());
    line(format!(
        "{:<12}{:<11}{:<30}{}",
        "family:",
        fit.family.as_str(),
        "num. hyperparameter settings:",
        fit.n_grid_points()
    ));
    line(format!(
        "{:<12}{:<11}{:<30}{}",
        "samples:",
        fit.n,
        "iid variable selection prior:",
        yesno(iid)
    ));
    line(format!(
        "{:<12}{:<11}{:<30}{}",
        "variables:",
        fit.p,
        "fit prior var. of coefs (sa):",
        yesno(fit.settings.update_sa)
    ));
    if gaussian {
        line(format!(
            "{:<12}{:<11}{:<30}{}",
            "covariates:",
            fit.m,
            "fit residual var. (sigma):",
            yesno(fit.settings.update_sigma)
        ));
    } else {
        line(format!(
            "{:<12}{:<11}{:<30}{}",
            "covariates:",
            fit.m,
            "fit approx. factors (eta):",
            yesno(fit.settings.optimize_eta)
        ));
    }
    line(format!(
        "maximum log-likelihood lower bound: {:.4}",
        fit.max_logw()
    ));
    if let Some(draws) = &fit.model_pve {
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        line(format!(
            "proportion of variance explained: {:.3} [{:.3},{:.3}]",
            mean,
            quantile_sorted(&sorted, 0.025),
            quantile_sorted(&sorted, 0.975)
        ));
    }

    line("Hyperparameters:".into());
    line(format!("{:<8}{:>8} {:<19} {}", "", "estimate", "Pr>0.95", "candidate values"));
    if gaussian {
        let row = if fit.settings.update_sigma {
            estimated_row("sigma", &fit.fits.sigma, &fit.w)
        } else {
            fixed_row("sigma", &fit.grid.sigma)
        };
        line(row.render());
    }
    let sa_row = if fit.settings.update_sa {
        estimated_row("sa", &fit.fits.sa, &fit.w)
    } else {
        fixed_row("sa", &fit.grid.sa)
    };
    line(sa_row.render());
    line(logodds_row(fit).render());

    line("Selected variables by probability cutoff:".into());
    line(PIP_CUTOFFS
        .iter()
        .map(|c| format!("{:>5}", format!(">{c:.2}")))
        .collect::<Vec<_>>()
        .join(" "));
    line(PIP_CUTOFFS
        .iter()
        .map(|&c| format!("{:>5}", fit.pip.iter().filter(|&&pr| pr > c).count()))
        .collect::<Vec<_>>()
        .join(" "));

    let shown = nv.min(fit.p);
    line(format!("Top {shown} variables by inclusion probability:"));
    let mut order: Vec<usize> = (0..fit.p).collect();
    order.sort_by(|&a, &b| {
        fit.pip[b]
            .partial_cmp(&fit.pip[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    order.truncate(shown);
    let iw = order
        .iter()
        .map(|&i| (i + 1).to_string().len())
        .chain(["index".len()])
        .max()
        .unwrap();
    let vw = order
        .iter()
        .map(|&i| fit.names[i].len())
        .chain(["variable".len()])
        .max()
        .unwrap();
    let coef_hdr = if gaussian { "coef" } else { "coef*" };
    line(format!(
        "{:>iw$} {:<vw$} {:>6} {:>6} {:>8} {}",
        "index", "variable", "prob", "PVE", coef_hdr, "Pr(coef.>0.95)"
    ));
    for &i in &order {
        let pve = match &fit.pve {
            Some(m) => {
                let row: Vec<f64> = (0..fit.n_grid_points()).map(|j| m[(i, j)]).collect();
                format!("{:.4}", weighted_mean(&row, &fit.w))
            }
            None => "NA".into(),
        };
        let interval = match conditional_effect_interval(
            &fit.fits,
            &fit.w,
            i,
            EFFECT_INTERVAL_DRAWS,
            fit.settings.seed,
        ) {
            Some((lo, hi)) => format!("[{lo:+.3},{hi:+.3}]"),
            None => "[NA,NA]".into(),
        };
        line(format!(
            "{:>iw$} {:<vw$} {:>6} {:>6} {:>8} {}",
            i + 1,
            fit.names[i],
            format!("{:.4}", fit.pip[i]),
            pve,
            format_sig3(fit.beta_mean[i]),
            interval
        ));
    }
    if !gaussian {
        line("*Coefficients are grid-averaged log-odds effects conditional on inclusion; \
              interpret them with the usual caveats for regularized logistic regression."
            .into());
    }
    out
}
