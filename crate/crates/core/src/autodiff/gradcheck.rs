//! Central finite-difference verification of reverse-mode gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LfError, Result};
use crate::par;

use super::{Graph, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub step: f64,
    /// Denominator floor for the relative error, so entries whose true
    /// gradient is ~0 are judged on absolute error instead.
    pub floor: f64,
    /// Entries probed per input tensor (`None` = all of them).
    pub max_entries: Option<usize>,
    /// Seed for picking probed entries.
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            floor: 1e-6,
            max_entries: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |a − n| / max(|a|, |n|, floor)` over the probed entries.
    pub max_rel_error: f64,
    /// Input name and flat index of the worst entry.
    pub worst: (String, usize),
    pub checked: usize,
}

/// Compares the gradients of the scalar built by `f` against central
/// differences at `f64`.
pub fn check_gradients<F>(
    inputs: &[(String, Tensor<f64>)],
    cfg: &GradCheckConfig,
    f: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var> + Sync,
{
    let eval = |vals: &[Tensor<f64>], track: bool| -> Result<(Graph<f64>, Vec<Var>, Var)> {
        let mut g = Graph::new();
        let vars = vals
            .iter()
            .map(|t| if track { g.variable(t.clone()) } else { g.constant(t.clone()) })
            .collect::<Result<Vec<_>>>()?;
        let loss = f(&mut g, &vars)?;
        if g.value(loss).numel() != 1 {
            return Err(LfError::invalid("gradient check needs a scalar objective"));
        }
        Ok((g, vars, loss))
    };
    let base: Vec<Tensor<f64>> = inputs.iter().map(|(_, t)| t.clone()).collect();
    let (g, vars, loss) = eval(&base, true)?;
    let grads = g.backward(loss)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (String::new(), 0),
        checked: 0,
    };
    for (i, (name, t)) in inputs.iter().enumerate() {
        let n = t.numel();
        let analytic = grads.get(vars[i]).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; n]);
        let picks: Vec<usize> = match cfg.max_entries {
            Some(k) if k < n => {
                let mut p = sample(&mut rng, n, k).into_vec();
                p.sort_unstable();
                p
            }
            _ => (0..n).collect(),
        };
        let numeric = par::map_range(picks.len(), |j| -> Result<f64> {
            let idx = picks[j];
            let probe = |delta: f64| -> Result<f64> {
                let mut vals = base.clone();
                vals[i].data_mut()[idx] += delta;
                let (g, _, l) = eval(&vals, false)?;
                Ok(g.value(l).data()[0])
            };
            Ok((probe(cfg.step)? - probe(-cfg.step)?) / (2.0 * cfg.step))
        });
        for (j, num) in numeric.into_iter().enumerate() {
            let num = num?;
            let a = analytic[picks[j]];
            let rel = (a - num).abs() / a.abs().max(num.abs()).max(cfg.floor);
            report.checked += 1;
            if report.checked == 1 || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (name.clone(), picks[j]);
            }
        }
    }
    Ok(report)
}
