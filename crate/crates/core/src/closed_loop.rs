//! Closed-loop reconstruction driven by a view policy, and Table-style
//! evaluation statistics.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::grid::OccupancyGrid;
use crate::metrics::{count_features, overlap_region, MetricConfig};
use crate::mix_seed as mix;
use crate::net::{predict, NetworkParams, Tensor4};
use crate::oracle::{view_to_class, Scenario, VisitedSet};
use crate::scene::{PointCloud, ViewSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    RepeatedPose,
    CoveragePlateau,
    MaxIterations,
}

impl TerminationReason {
    pub fn name(self) -> &'static str {
        match self {
            TerminationReason::RepeatedPose => "repeated_pose",
            TerminationReason::CoveragePlateau => "coverage_plateau",
            TerminationReason::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// 1-based.
    pub iteration: usize,
    /// Class id of the pose taken.
    pub view_id: usize,
    pub coverage: f64,
    /// Overlap of the new perception with the model before integration.
    pub overlap: f64,
    /// Keypoints in the overlap region.
    pub features: usize,
    pub grid_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub object: String,
    pub seed: u64,
    pub initial_view: usize,
    pub steps: Vec<StepRecord>,
    pub termination: TerminationReason,
    /// The already visited pose that ended a `RepeatedPose` episode.
    pub repeated: Option<usize>,
}

impl EpisodeLog {
    pub fn final_coverage(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.coverage)
    }

    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    /// Steps after the first whose perception missed the registration
    /// constraints the oracle would have imposed.
    pub fn constraint_violations(&self, m: &MetricConfig) -> usize {
        self.steps.iter().skip(1).filter(|s| !(s.overlap > m.min_overlap && s.features > m.min_features)).count()
    }

    /// `iter,view_id,coverage,overlap,term_reason`; the reason is filled on
    /// the last row only.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,view_id,coverage,overlap,term_reason\n");
        for (i, st) in self.steps.iter().enumerate() {
            let reason = if i + 1 == self.steps.len() { self.termination.name() } else { "" };
            let _ =
                writeln!(s, "{},{},{},{},{}", st.iteration, st.view_id, sig6(st.coverage), sig6(st.overlap), reason);
        }
        s
    }
}

/// Six significant digits in plain decimal notation.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (5 - x.abs().log10().floor() as i64).max(0) as usize;
    format!("{x:.decimals$}")
}

/// What a policy may look at when choosing the next pose.
pub struct PolicyInput<'a> {
    pub grid: &'a OccupancyGrid,
    pub p_acu: &'a PointCloud,
    pub visited: &'a VisitedSet,
    /// Class id of the pose just taken.
    pub current: usize,
    pub iteration: usize,
    pub episode_seed: u64,
}

/// Chooses the next class id.
pub trait Policy: Sync {
    fn name(&self) -> &str;
    fn next_view(&self, scenario: &Scenario, classes: &ViewSet, input: &PolicyInput<'_>) -> Result<usize>;
}

/// Trained classifier on the occupancy grid.
pub struct NetworkPolicy<'a> {
    pub params: &'a NetworkParams,
}

impl Policy for NetworkPolicy<'_> {
    fn name(&self) -> &str {
        self.params.arch().name()
    }

    fn next_view(&self, _: &Scenario, _: &ViewSet, input: &PolicyInput<'_>) -> Result<usize> {
        let [nx, ny, nz] = input.grid.dims();
        let t = Tensor4::new([1, nx, ny, nz], input.grid.to_tensor())?;
        Ok(predict(self.params, &t)?.0)
    }
}

/// Uniform over the class set, seeded per episode and step.
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn next_view(&self, _: &Scenario, classes: &ViewSet, input: &PolicyInput<'_>) -> Result<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(input.episode_seed, input.iteration as u64));
        Ok(rng.random_range(0..classes.len()))
    }
}

/// The resolution-optimal oracle; stays put when no view is feasible.
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn name(&self) -> &str {
        "oracle"
    }

    fn next_view(&self, scenario: &Scenario, classes: &ViewSet, input: &PolicyInput<'_>) -> Result<usize> {
        let res = scenario.next_best_view(input.p_acu, input.visited, Some(input.grid))?;
        match res.nbv {
            Some(v) => view_to_class(&v, classes),
            None => Ok(input.current),
        }
    }
}

/// Search-space view closest to each class view.
fn class_views(scenario: &Scenario, classes: &ViewSet) -> Result<Vec<usize>> {
    classes.iter().map(|c| view_to_class(c, scenario.views())).collect()
}

/// Perceive, integrate, update, then ask the policy where to go next.
pub fn run_episode(
    scenario: &Scenario,
    policy: &dyn Policy,
    classes: &ViewSet,
    object: &str,
    initial_view: usize,
    seed: u64,
) -> Result<EpisodeLog> {
    if initial_view >= classes.len() {
        return Err(Error::invalid(format!("initial view {initial_view} not in a class set of {}", classes.len())));
    }
    let cfg = scenario.config();
    let to_view = class_views(scenario, classes)?;
    let mut p_acu = PointCloud::empty();
    let mut grid = scenario.fresh_grid();
    let mut visited = VisitedSet::new();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut current = initial_view;
    let mut repeated = None;
    let termination = loop {
        let view = to_view[current];
        let z = scenario.perceptions().cloud(view);
        let (overlap, features) = if p_acu.is_empty() || z.is_empty() {
            (0.0, 0)
        } else {
            let region = overlap_region(z, &p_acu, cfg.metric.gap)?;
            (
                region.len() as f64 / z.len() as f64,
                count_features(&region, cfg.metric.feature_radius, cfg.metric.curvature_tau),
            )
        };
        scenario.perceive(view, &mut p_acu, &mut grid)?;
        visited.insert(current);
        let coverage = scenario.coverage(&p_acu);
        let prev = steps.last().map(|s| s.coverage);
        steps.push(StepRecord {
            iteration: steps.len() + 1,
            view_id: current,
            coverage,
            overlap,
            features,
            grid_hash: grid.snapshot_hash(),
        });
        if prev.is_some_and(|p| coverage - p < cfg.plateau_eps) {
            break TerminationReason::CoveragePlateau;
        }
        if steps.len() >= cfg.max_iter {
            break TerminationReason::MaxIterations;
        }
        let next = policy.next_view(
            scenario,
            classes,
            &PolicyInput {
                grid: &grid,
                p_acu: &p_acu,
                visited: &visited,
                current,
                iteration: steps.len(),
                episode_seed: seed,
            },
        )?;
        if next >= classes.len() {
            return Err(Error::invalid(format!("policy returned class {next} of {}", classes.len())));
        }
        if visited.contains(next) {
            repeated = Some(next);
            break TerminationReason::RepeatedPose;
        }
        current = next;
    };
    Ok(EpisodeLog { object: object.to_string(), seed, initial_view, steps, termination, repeated })
}

/// Initial class and episode seed for `(object, episode)`; independent of
/// the policy so that comparisons are paired.
pub fn episode_start(seed: u64, object: usize, episode: usize, classes: usize) -> (usize, u64) {
    let s = mix(mix(seed, object as u64 + 1), episode as u64 + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(s);
    (rng.random_range(0..classes), s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub object: String,
    pub mean_cov: f64,
    /// Population standard deviation.
    pub std_cov: f64,
    pub mean_iters: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub rows: Vec<SummaryRow>,
}

impl EvalSummary {
    pub fn from_logs(logs: &[EpisodeLog]) -> EvalSummary {
        let mut names: Vec<&str> = Vec::new();
        for l in logs {
            if !names.contains(&l.object.as_str()) {
                names.push(&l.object);
            }
        }
        let rows = names
            .into_iter()
            .map(|name| {
                let mine: Vec<&EpisodeLog> = logs.iter().filter(|l| l.object == name).collect();
                let n = mine.len() as f64;
                let covs: Vec<f64> = mine.iter().map(|l| l.final_coverage()).collect();
                let mean = covs.iter().sum::<f64>() / n;
                let var = covs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
                SummaryRow {
                    object: name.to_string(),
                    mean_cov: mean,
                    std_cov: var.sqrt(),
                    mean_iters: mine.iter().map(|l| l.iterations() as f64).sum::<f64>() / n,
                    episodes: mine.len(),
                }
            })
            .collect();
        EvalSummary { rows }
    }

    /// `object,mean_cov,std_cov,mean_iters`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("object,mean_cov,std_cov,mean_iters\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.object, sig6(r.mean_cov), sig6(r.std_cov), sig6(r.mean_iters));
        }
        s
    }
}

/// Runs `episodes` seeded episodes per named scenario, in parallel, and
/// returns the logs in (object, episode) order with their summary.
pub fn evaluate(
    scenarios: &[(String, Scenario)],
    policy: &dyn Policy,
    classes: &ViewSet,
    episodes: usize,
    seed: u64,
) -> Result<(Vec<EpisodeLog>, EvalSummary)> {
    if episodes == 0 {
        return Err(Error::invalid("episodes per object must be >= 1"));
    }
    let jobs: Vec<(usize, usize)> = (0..scenarios.len()).flat_map(|o| (0..episodes).map(move |e| (o, e))).collect();
    let logs = jobs
        .par_iter()
        .map(|&(o, e)| {
            let (name, scenario) = &scenarios[o];
            let (initial, s) = episode_start(seed, o, e, classes.len());
            run_episode(scenario, policy, classes, name, initial, s)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = EvalSummary::from_logs(&logs);
    Ok((logs, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.812345678), "0.812346");
        assert_eq!(sig6(93.18), "93.1800");
        assert_eq!(sig6(4.1), "4.10000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(123456.7), "123457");
    }

    fn log(object: &str, covs: &[f64]) -> EpisodeLog {
        EpisodeLog {
            object: object.into(),
            seed: 0,
            initial_view: 0,
            steps: covs
                .iter()
                .enumerate()
                .map(|(i, &c)| StepRecord {
                    iteration: i + 1,
                    view_id: i,
                    coverage: c,
                    overlap: 0.0,
                    features: 0,
                    grid_hash: 0,
                })
                .collect(),
            termination: TerminationReason::MaxIterations,
            repeated: None,
        }
    }

    #[test]
    fn summary_statistics() {
        let logs = vec![log("a", &[0.5, 0.9]), log("b", &[0.7]), log("a", &[0.7])];
        let s = EvalSummary::from_logs(&logs);
        assert_eq!(s.rows.len(), 2);
        let a = &s.rows[0];
        assert!((a.mean_cov - 0.8).abs() < 1e-12);
        assert!((a.std_cov - 0.1).abs() < 1e-12);
        assert!((a.mean_iters - 1.5).abs() < 1e-12);
        assert_eq!(s.rows[1].std_cov, 0.0);
        assert!(s.to_csv().starts_with("object,mean_cov,std_cov,mean_iters\na,0.800000,0.100000,1.50000\n"));
    }

    #[test]
    fn episode_csv_marks_reason_on_last_row() {
        let csv = log("a", &[0.5, 0.9]).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iter,view_id,coverage,overlap,term_reason");
        assert_eq!(lines[1], "1,0,0.500000,0,");
        assert_eq!(lines[2], "2,1,0.900000,0,max_iterations");
    }

    #[test]
    fn episode_starts_are_seeded() {
        assert_eq!(episode_start(3, 1, 2, 14), episode_start(3, 1, 2, 14));
        let starts: Vec<usize> = (0..50).map(|e| episode_start(3, 0, e, 14).0).collect();
        assert!(starts.iter().all(|&s| s < 14));
        assert!(starts.iter().collect::<std::collections::HashSet<_>>().len() > 5);
    }
}
