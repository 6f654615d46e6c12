use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{default_filter_grid, CachedObjective, CostBreakdown};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    pub grid: Vec<f64>,
    /// Bisection stops once the two endpoint costs differ by less than this.
    pub cost_tolerance: f64,
    /// Bisection stops when the midpoint falls below this.
    pub threshold_floor: f64,
    pub max_bisections: usize,
    /// Midpoints are rounded to multiples of this step.
    pub resolution: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            grid: default_filter_grid(),
            cost_tolerance: 1e-3,
            threshold_floor: 0.01,
            max_bisections: 10,
            resolution: 0.01,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("heuristic grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1]))
            || self.grid.iter().any(|t| !(0.0..=1.0).contains(t))
        {
            return Err(Error::Config(
                "heuristic grid must be strictly increasing within [0, 1]".into(),
            ));
        }
        if !(self.cost_tolerance > 0.0) || !(self.threshold_floor > 0.0) || !(self.resolution > 0.0)
        {
            return Err(Error::Config(
                "heuristic tolerance, floor and resolution must be > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    pub initial_t_f: f64,
    pub initial_temp: f64,
    pub cooling: f64,
    pub iterations: usize,
    pub perturbation_half_width: f64,
    pub bounds: [f64; 2],
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            initial_t_f: 0.25,
            initial_temp: 100.0,
            cooling: 0.95,
            iterations: 25,
            perturbation_half_width: 0.25,
            bounds: [0.0, 0.5],
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.bounds;
        if !(lo <= hi) {
            return Err(Error::Config(format!(
                "annealing bounds [{lo}, {hi}] are not ordered"
            )));
        }
        if !(lo..=hi).contains(&self.initial_t_f) {
            return Err(Error::Config(format!(
                "initial t_f {} outside bounds",
                self.initial_t_f
            )));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::Config(format!(
                "cooling {} outside (0, 1)",
                self.cooling
            )));
        }
        if !(self.initial_temp >= 0.0) || !(self.perturbation_half_width >= 0.0) {
            return Err(Error::Config(
                "temperature and perturbation width must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// One evaluated candidate in a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub phase: String,
    pub step: usize,
    pub t_f: f64,
    pub t_r: f64,
    pub macro_f1: f64,
    pub rejection_rate: f64,
    pub mean_score: f64,
    pub cost: f64,
    pub temperature: Option<f64>,
    pub accepted: Option<bool>,
}

impl TraceRow {
    pub fn new(phase: &str, step: usize, b: &CostBreakdown) -> Self {
        TraceRow {
            phase: phase.to_string(),
            step,
            t_f: b.t_f,
            t_r: b.t_r,
            macro_f1: b.macro_f1,
            rejection_rate: b.rejection_rate,
            mean_score: b.mean_score,
            cost: b.cost,
            temperature: None,
            accepted: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: CostBreakdown,
    pub trace: Vec<TraceRow>,
    /// Distinct filtering thresholds evaluated.
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_temperature: Option<f64>,
}

pub fn write_trace_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "phase",
        "step",
        "t_f",
        "t_r",
        "macro_f1",
        "rejection_rate",
        "mean_score",
        "cost",
        "temperature",
        "accepted",
    ])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        w.write_record([
            r.phase.clone(),
            r.step.to_string(),
            r.t_f.to_string(),
            r.t_r.to_string(),
            r.macro_f1.to_string(),
            r.rejection_rate.to_string(),
            r.mean_score.to_string(),
            r.cost.to_string(),
            opt(r.temperature.map(|t| t.to_string())),
            opt(r.accepted.map(|a| a.to_string())),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rounds `t` to the nearest multiple of `resolution` (which should be `1/k`
/// for an integer `k`), computed as `round(t·k)/k` so results coincide with
/// the brute-force candidates.
pub fn snap(t: f64, resolution: f64) -> f64 {
    let inv = (1.0 / resolution).round();
    (t * inv).round() / inv
}

fn rank(mut v: Vec<CostBreakdown>) -> Vec<CostBreakdown> {
    v.sort_by(|a, b| {
        if a.better_than(b) {
            std::cmp::Ordering::Less
        } else if b.better_than(a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    v
}

fn grid_with<F: FnMut(f64) -> Result<CostBreakdown>>(
    grid: &[f64],
    objective: &mut CachedObjective<F>,
    trace: &mut Vec<TraceRow>,
) -> Result<Vec<CostBreakdown>> {
    if grid.is_empty() {
        return Err(Error::Config("filter grid is empty".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    for (step, &t_f) in grid.iter().enumerate() {
        let b = objective.eval(t_f)?;
        trace.push(TraceRow::new("grid", step, &b));
        out.push(b);
    }
    Ok(rank(out))
}

/// Best breakdown for every grid value, ranked by ascending cost.
pub fn grid_search<F: FnMut(f64) -> Result<CostBreakdown>>(
    grid: &[f64],
    objective: F,
) -> Result<Vec<CostBreakdown>> {
    grid_with(grid, &mut CachedObjective::new(objective), &mut Vec::new())
}

/// Grid search followed by bisection towards each grid neighbour of the grid
/// minimiser. Never returns a cost above the grid minimum.
pub fn heuristic_search<F: FnMut(f64) -> Result<CostBreakdown>>(
    config: &HeuristicConfig,
    objective: F,
) -> Result<SearchResult> {
    config.validate()?;
    let mut objective = CachedObjective::new(objective);
    let mut trace = Vec::new();
    let ranked = grid_with(&config.grid, &mut objective, &mut trace)?;
    let grid_best = ranked[0].clone();
    let mut best = grid_best.clone();
    let pos = config
        .grid
        .iter()
        .position(|&t| t == grid_best.t_f)
        .expect("grid best comes from the grid");
    let mut neighbours = Vec::new();
    if pos > 0 {
        neighbours.push(config.grid[pos - 1]);
    }
    if pos + 1 < config.grid.len() {
        neighbours.push(config.grid[pos + 1]);
    }
    let mut step = 0;
    for t_neighbour in neighbours {
        let mut low = grid_best.clone();
        let mut high = objective.eval(t_neighbour)?;
        for _ in 0..config.max_bisections {
            if (low.cost - high.cost).abs() < config.cost_tolerance {
                break;
            }
            let raw_mid = 0.5 * (low.t_f + high.t_f);
            if raw_mid < config.threshold_floor {
                break;
            }
            let mid = snap(raw_mid, config.resolution);
            if mid == low.t_f || mid == high.t_f {
                break;
            }
            let m = objective.eval(mid)?;
            trace.push(TraceRow::new("heuristic", step, &m));
            step += 1;
            if m.better_than(&best) {
                best = m.clone();
            }
            if m.better_than(&low) {
                high = std::mem::replace(&mut low, m);
            } else {
                high = m;
            }
        }
    }
    Ok(SearchResult {
        best,
        trace,
        evaluations: objective.evaluations(),
        final_temperature: None,
    })
}

/// Simulated annealing over `t_f`, returning the best candidate seen.
pub fn simulated_annealing<F: FnMut(f64) -> Result<CostBreakdown>>(
    config: &AnnealConfig,
    objective: F,
) -> Result<SearchResult> {
    config.validate()?;
    let mut objective = CachedObjective::new(objective);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let [lo, hi] = config.bounds;
    let w = config.perturbation_half_width;
    let mut temp = config.initial_temp;
    let mut current = objective.eval(config.initial_t_f)?;
    let mut best = current.clone();
    let mut trace = vec![TraceRow {
        temperature: Some(temp),
        accepted: Some(true),
        ..TraceRow::new("anneal", 0, &current)
    }];
    for i in 1..=config.iterations {
        let delta = if w > 0.0 {
            rng.random_range(-w..=w)
        } else {
            0.0
        };
        let proposal = (current.t_f + delta).clamp(lo, hi);
        let cand = objective.eval(proposal)?;
        let d = cand.cost - current.cost;
        let u: f64 = rng.random();
        let accepted = d < 0.0 || (temp > 0.0 && (-d / temp).exp() > u);
        trace.push(TraceRow {
            temperature: Some(temp),
            accepted: Some(accepted),
            ..TraceRow::new("anneal", i, &cand)
        });
        if cand.better_than(&best) {
            best = cand.clone();
        }
        if accepted {
            current = cand;
        }
        temp *= config.cooling;
    }
    Ok(SearchResult {
        best,
        trace,
        evaluations: objective.evaluations(),
        final_temperature: Some(temp),
    })
}

/// Every multiple of `step` in `bounds`, endpoints included.
pub fn brute_force<F: FnMut(f64) -> Result<CostBreakdown>>(
    step: f64,
    bounds: [f64; 2],
    objective: F,
) -> Result<SearchResult> {
    let [lo, hi] = bounds;
    if !(step > 0.0) || !(lo <= hi) {
        return Err(Error::Config(
            "brute force needs step > 0 and ordered bounds".into(),
        ));
    }
    let n = (hi - lo) / step;
    if (n - n.round()).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "step {step} does not divide [{lo}, {hi}]"
        )));
    }
    let inv = (1.0 / step).round();
    let start = (lo * inv).round();
    let mut objective = CachedObjective::new(objective);
    let mut trace = Vec::new();
    let mut best: Option<CostBreakdown> = None;
    for i in 0..=(n.round() as usize) {
        let t_f = (start + i as f64) / inv;
        let b = objective.eval(t_f)?;
        trace.push(TraceRow::new("brute_force", i, &b));
        if best.as_ref().is_none_or(|cur| b.better_than(cur)) {
            best = Some(b);
        }
    }
    Ok(SearchResult {
        best: best.expect("at least one candidate"),
        trace,
        evaluations: objective.evaluations(),
        final_temperature: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::CostWeights;

    fn surface(f: impl Fn(f64) -> f64) -> impl FnMut(f64) -> Result<CostBreakdown> {
        move |t_f| {
            let mut b = CostBreakdown::new(t_f, 0.5, 0.0, 0.0, 0.0, &CostWeights::default());
            b.cost = f(t_f);
            Ok(b)
        }
    }

    #[test]
    fn singleton_grid() {
        let r = grid_search(&[0.0], surface(|t| t)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].t_f, 0.0);
    }

    #[test]
    fn grid_is_ranked() {
        let g = default_filter_grid();
        let r = grid_search(&g, surface(|t| (t - 0.3).abs())).unwrap();
        assert_eq!(r.len(), g.len());
        assert_eq!(r[0].t_f, 0.3);
        assert!(r.windows(2).all(|w| w[0].cost <= w[1].cost));
    }

    #[test]
    fn flat_surface_stops_at_grid_best() {
        let r = heuristic_search(&HeuristicConfig::default(), surface(|_| 1.0)).unwrap();
        assert_eq!(r.best.t_f, 0.0);
        assert_eq!(r.evaluations, 6);
    }

    #[test]
    fn convex_surface_heuristic_is_close() {
        let f = |t: f64| (t - 0.237).powi(2);
        let h = heuristic_search(&HeuristicConfig::default(), surface(f)).unwrap();
        let b = brute_force(0.01, [0.0, 0.5], surface(f)).unwrap();
        assert!(b.best.cost <= h.best.cost);
        assert!((h.best.t_f - b.best.t_f).abs() <= 0.01 + 1e-12);
    }

    #[test]
    fn brute_force_counts() {
        let r = brute_force(0.01, [0.0, 0.5], surface(|t| t)).unwrap();
        assert_eq!(r.trace.len(), 51);
        assert_eq!(r.trace[50].t_f, 0.5);
        assert!(brute_force(0.03, [0.0, 0.5], surface(|t| t)).is_err());
    }

    #[test]
    fn annealing_temperature_and_greedy() {
        let r =
            simulated_annealing(&AnnealConfig::default(), surface(|t| (t - 0.1).powi(2))).unwrap();
        assert!((r.final_temperature.unwrap() - 100.0 * 0.95f64.powi(25)).abs() < 1e-9);
        assert_eq!(r.trace.len(), 26);
        let greedy = AnnealConfig {
            initial_temp: 0.0,
            ..AnnealConfig::default()
        };
        let r = simulated_annealing(
            &greedy,
            surface(|t| (t - 0.1).powi(2) + (40.0 * t).sin() * 0.01),
        )
        .unwrap();
        let mut current = r.trace[0].cost;
        for row in &r.trace[1..] {
            if row.accepted.unwrap() {
                assert!(row.cost < current);
                current = row.cost;
            }
        }
    }

    #[test]
    fn snapping_matches_brute_force_candidates() {
        assert_eq!(snap(0.35, 0.01), 35.0 / 100.0);
        assert_eq!(snap(0.125, 0.01), 13.0 / 100.0);
    }
}
